#include "standda/experiments.hpp"

#include "standda/report.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iterator>
#include <mutex>
#include <random>
#include <thread>

namespace standda {

using nlohmann::json;

ModelBundle make_random_bundle(const RandomBundleSpec& spec) {
    ModelBundle b;
    b.extractor = random_network(spec.extractor, spec.seed, spec.extractorFinalRelu, spec.biasScale);
    b.autoencoder = random_network(spec.autoencoder, spec.seed + 1, false, spec.biasScale);
    b.metadata["origin"] = "random";
    b.metadata["seed"] = std::to_string(spec.seed);
    b.validate();
    return b;
}

std::string to_string(ExperimentMode mode) {
    switch (mode) {
        case ExperimentMode::Fpr: return "fpr";
        case ExperimentMode::Tpr: return "tpr";
        case ExperimentMode::Runtime: return "runtime";
        case ExperimentMode::Real: return "real";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    if (trials < 1) throw ConfigError("trials", "must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha", "must lie in (0, 1)");
    if (!(rate > 0.0 && rate < 1.0)) throw ConfigError("rate", "must lie in (0, 1)");
    if (!(rho >= 0.0 && rho < 1.0)) throw ConfigError("rho", "must lie in [0, 1)");
    if (d < 1) throw ConfigError("d", "must be positive");
    if (nt < 2) throw ConfigError("nt", "must be at least 2");
    if (nsList.empty()) throw ConfigError("ns_list", "must not be empty");
    for (Index ns : nsList)
        if (ns < 1) throw ConfigError("ns_list", "entries must be positive");
    if (deltas.empty()) throw ConfigError("deltas", "must not be empty");
    for (double delta : deltas)
        if (!(delta >= 0.0)) throw ConfigError("deltas", "entries must be non-negative");
    if (mode == ExperimentMode::Fpr)
        for (double delta : deltas)
            if (delta != 0.0) throw ConfigError("deltas", "fpr mode requires delta = 0");
    if (mode == ExperimentMode::Runtime) {
        if (layerCounts.empty()) throw ConfigError("layer_counts", "must not be empty");
        for (Index l : layerCounts)
            if (l < 2) throw ConfigError("layer_counts", "entries must be at least 2");
        if (width < 1) throw ConfigError("width", "must be positive");
        if (repetitions < 1) throw ConfigError("repetitions", "must be at least 1");
        if (runtimeInit != "near-identity" && runtimeInit != "he")
            throw ConfigError("runtime_init", "expected near-identity or he");
    }
    if (mode == ExperimentMode::Real && !csv) throw ConfigError("csv", "real mode needs a CSV path");
    if (outputDir.empty()) throw ConfigError("output_dir", "must not be empty");
}

namespace {

template <class T>
T get_key(const json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(key, std::string("wrong type (") + e.what() + ")");
    }
}

ExperimentMode parse_mode(const std::string& s) {
    if (s == "fpr") return ExperimentMode::Fpr;
    if (s == "tpr") return ExperimentMode::Tpr;
    if (s == "runtime") return ExperimentMode::Runtime;
    if (s == "real") return ExperimentMode::Real;
    throw ConfigError("mode", "expected fpr, tpr, runtime or real, got \"" + s + "\"");
}

RandomBundleSpec parse_random_bundle(const json& j) {
    if (!j.is_object()) throw ConfigError("random_bundle", "must be an object");
    RandomBundleSpec spec;
    for (const auto& [key, value] : j.items()) {
        const std::string full = "random_bundle." + key;
        try {
            if (key == "extractor") spec.extractor = value.get<std::vector<Index>>();
            else if (key == "autoencoder") spec.autoencoder = value.get<std::vector<Index>>();
            else if (key == "extractor_final_relu") spec.extractorFinalRelu = value.get<bool>();
            else if (key == "seed") spec.seed = value.get<std::uint64_t>();
            else if (key == "bias_scale") spec.biasScale = value.get<double>();
            else throw ConfigError(full, "unknown key");
        } catch (const json::exception& e) {
            throw ConfigError(full, std::string("wrong type (") + e.what() + ")");
        }
    }
    if (spec.extractor.size() < 2) throw ConfigError("random_bundle.extractor", "needs at least two widths");
    if (spec.autoencoder.size() < 2) throw ConfigError("random_bundle.autoencoder", "needs at least two widths");
    return spec;
}

}  // namespace

ExperimentConfig experiment_config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config", "must be a JSON object");
    ExperimentConfig cfg;
    for (const auto& [key, value] : j.items()) {
        if (key == "mode") cfg.mode = parse_mode(get_key<std::string>(j, key));
        else if (key == "ns_list") cfg.nsList = get_key<std::vector<Index>>(j, key);
        else if (key == "nt") cfg.nt = get_key<Index>(j, key);
        else if (key == "d") cfg.d = get_key<Index>(j, key);
        else if (key == "deltas") cfg.deltas = get_key<std::vector<double>>(j, key);
        else if (key == "rho") cfg.rho = get_key<double>(j, key);
        else if (key == "trials") cfg.trials = get_key<std::size_t>(j, key);
        else if (key == "alpha") cfg.alpha = get_key<double>(j, key);
        else if (key == "rate") cfg.rate = get_key<double>(j, key);
        else if (key == "seed") cfg.seed = get_key<std::uint64_t>(j, key);
        else if (key == "bundle") {
            if (value.is_null()) cfg.bundle.reset();
            else cfg.bundle = get_key<std::string>(j, key);
        } else if (key == "random_bundle") cfg.randomBundle = parse_random_bundle(value);
        else if (key == "workers") cfg.workers = get_key<unsigned>(j, key);
        else if (key == "layer_counts") cfg.layerCounts = get_key<std::vector<Index>>(j, key);
        else if (key == "width") cfg.width = get_key<Index>(j, key);
        else if (key == "runtime_init") cfg.runtimeInit = get_key<std::string>(j, key);
        else if (key == "repetitions") cfg.repetitions = get_key<std::size_t>(j, key);
        else if (key == "threads") cfg.threads = get_key<unsigned>(j, key);
        else if (key == "csv") {
            if (value.is_null()) cfg.csv.reset();
            else cfg.csv = get_key<std::string>(j, key);
        } else if (key == "split_column") cfg.splitColumn = get_key<std::string>(j, key);
        else if (key == "split_op") {
            cfg.splitOp = get_key<std::string>(j, key);
            try {
                SplitRule::parse_op(cfg.splitOp);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(key, e.what());
            }
        } else if (key == "split_value") cfg.splitValue = get_key<double>(j, key);
        else if (key == "standardize") cfg.standardize = get_key<bool>(j, key);
        else if (key == "drop_columns") cfg.dropColumns = get_key<std::vector<std::string>>(j, key);
        else if (key == "covariance") {
            if (value.is_null()) cfg.covariance.reset();
            else cfg.covariance = get_key<std::string>(j, key);
        } else if (key == "output_dir") cfg.outputDir = get_key<std::string>(j, key);
        else throw ConfigError(key, "unknown key");
    }
    cfg.validate();
    return cfg;
}

json to_json(const ExperimentConfig& cfg) {
    json j;
    j["mode"] = to_string(cfg.mode);
    j["ns_list"] = cfg.nsList;
    j["nt"] = cfg.nt;
    j["d"] = cfg.d;
    j["deltas"] = cfg.deltas;
    j["rho"] = cfg.rho;
    j["trials"] = cfg.trials;
    j["alpha"] = cfg.alpha;
    j["rate"] = cfg.rate;
    j["seed"] = cfg.seed;
    j["bundle"] = cfg.bundle ? json(*cfg.bundle) : json(nullptr);
    j["random_bundle"] = {{"extractor", cfg.randomBundle.extractor},
                          {"autoencoder", cfg.randomBundle.autoencoder},
                          {"extractor_final_relu", cfg.randomBundle.extractorFinalRelu},
                          {"seed", cfg.randomBundle.seed},
                          {"bias_scale", cfg.randomBundle.biasScale}};
    j["workers"] = cfg.workers;
    j["layer_counts"] = cfg.layerCounts;
    j["width"] = cfg.width;
    j["runtime_init"] = cfg.runtimeInit;
    j["repetitions"] = cfg.repetitions;
    j["threads"] = cfg.threads;
    j["csv"] = cfg.csv ? json(*cfg.csv) : json(nullptr);
    j["split_column"] = cfg.splitColumn;
    j["split_op"] = cfg.splitOp;
    j["split_value"] = cfg.splitValue;
    j["standardize"] = cfg.standardize;
    j["drop_columns"] = cfg.dropColumns;
    j["covariance"] = cfg.covariance ? json(*cfg.covariance) : json(nullptr);
    j["output_dir"] = cfg.outputDir;
    return j;
}

ModelBundle resolve_bundle(const ExperimentConfig& cfg) {
    ModelBundle b = cfg.bundle ? load_bundle(*cfg.bundle) : make_random_bundle(cfg.randomBundle);
    if (b.extractor.input_dim() != cfg.d)
        throw ConfigError(cfg.bundle ? "bundle" : "random_bundle.extractor",
                          "bundle input dimension " + std::to_string(b.extractor.input_dim()) +
                              " does not match d = " + std::to_string(cfg.d));
    return b;
}

std::uint64_t trial_seed(std::uint64_t base, std::uint64_t group, std::uint64_t trial) {
    // splitmix64 finaliser over a combined key
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(base) ^ group) ^ trial);
}

SyntheticInstance gen_synthetic(Index ns, Index nt, Index d, double delta, double rho, std::uint64_t seed) {
    SyntheticInstance out;
    const Matrix xi = rho == 0.0 ? Matrix(Matrix::Identity(d, d)) : ar1_covariance(d, rho);
    const Matrix is = Matrix::Identity(ns, ns), it = Matrix::Identity(nt, nt);
    out.data.source = sample_matrix_normal(Matrix::Zero(ns, d), is, xi, trial_seed(seed, 1, 0));
    out.data.target = sample_matrix_normal(Matrix::Constant(nt, d, 2.0), it, xi, trial_seed(seed, 2, 0));
    out.spec = CovarianceSpec(is, xi, it, xi);
    out.sourceLabels.assign(static_cast<std::size_t>(ns), false);
    out.targetLabels.assign(static_cast<std::size_t>(nt), false);
    if (delta > 0.0) {
        std::mt19937_64 gen(trial_seed(seed, 3, 0));
        auto inject = [&](Matrix& m, std::vector<bool>& labels) {
            const Index n = m.rows();
            const Index k = std::max<Index>(1, static_cast<Index>(std::ceil(0.05 * static_cast<double>(n) - 1e-9)));
            std::vector<Index> idx(static_cast<std::size_t>(n));
            for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
            std::shuffle(idx.begin(), idx.end(), gen);
            for (Index r = 0; r < k; ++r) {
                const Index row = idx[static_cast<std::size_t>(r)];
                m.row(row).array() += delta;
                labels[static_cast<std::size_t>(row)] = true;
            }
        };
        inject(out.data.source, out.sourceLabels);
        inject(out.data.target, out.targetLabels);
    }
    return out;
}

void run_trials(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failureMutex;
    std::vector<std::thread> pool;
    const unsigned n = std::min<unsigned>(workers, static_cast<unsigned>(count));
    for (unsigned w = 0; w < n; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failureMutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

double RateRow::sd() const {
    if (tested == 0) return 0.0;
    const double p = rate();
    return std::sqrt(p * (1.0 - p) / static_cast<double>(tested));
}

const RateRow* RateTable::find(double key, const std::string& method) const {
    for (const auto& r : rows)
        if (r.key == key && r.method == method) return &r;
    return nullptr;
}

namespace {

TrialOutcome run_trial(const SyntheticInstance& inst, const ModelBundle& bundle, double rate, bool onlyTrue) {
    TrialOutcome out;
    const Detection det = detect_anomalies(bundle, inst.data, rate);
    out.detected = det.target.size();
    InferenceOptions opts;
    opts.rate = rate;
    if (onlyTrue) {
        for (Index j : det.target)
            if (inst.targetLabels[static_cast<std::size_t>(j)]) opts.only.push_back(j);
        if (opts.only.empty()) return out;
    }
    if (det.target.empty() || static_cast<Index>(det.target.size()) >= inst.data.nt()) return out;
    for (Index j : det.target) {
        if (!opts.only.empty() && std::find(opts.only.begin(), opts.only.end(), j) == opts.only.end()) continue;
        const InferenceReport rep = infer_anomaly(inst.data, inst.spec, bundle, det, j, opts);
        if (rep.error) {
            ++out.failed;
            continue;
        }
        out.tested.push_back({rep.pSelective, rep.pOc, rep.pNaive, rep.pBonferroni,
                              static_cast<bool>(inst.targetLabels[static_cast<std::size_t>(j)])});
    }
    return out;
}

RateRow count_rate(double key, const std::string& method, const std::vector<TrialOutcome>& trials, double alpha,
                   double HypothesisOutcome::*field) {
    RateRow row{key, method, 0, 0};
    for (const auto& t : trials)
        for (const auto& h : t.tested) {
            ++row.tested;
            if (h.*field <= alpha) ++row.rejections;
        }
    return row;
}

}  // namespace

RateTable run_fpr(const ExperimentConfig& cfg, const ModelBundle& bundle) {
    cfg.validate();
    RateTable table;
    for (std::size_t g = 0; g < cfg.nsList.size(); ++g) {
        const Index ns = cfg.nsList[g];
        std::vector<TrialOutcome> trials(cfg.trials);
        run_trials(cfg.trials, cfg.workers, [&](std::size_t t) {
            const auto inst = gen_synthetic(ns, cfg.nt, cfg.d, 0.0, cfg.rho, trial_seed(cfg.seed, ns, t));
            trials[t] = run_trial(inst, bundle, cfg.rate, false);
        });
        const double key = static_cast<double>(ns);
        table.rows.push_back(count_rate(key, "stand-da", trials, cfg.alpha, &HypothesisOutcome::pSelective));
        table.rows.push_back(count_rate(key, "stand-da-oc", trials, cfg.alpha, &HypothesisOutcome::pOc));
        table.rows.push_back(count_rate(key, "naive", trials, cfg.alpha, &HypothesisOutcome::pNaive));
        table.rows.push_back(count_rate(key, "bonferroni", trials, cfg.alpha, &HypothesisOutcome::pBonferroni));
        for (const auto& t : trials) table.failed += t.failed;
        table.trials.push_back(std::move(trials));
    }
    return table;
}

RateTable run_tpr(const ExperimentConfig& cfg, const ModelBundle& bundle) {
    cfg.validate();
    RateTable table;
    const Index ns = cfg.nsList.front();
    for (std::size_t g = 0; g < cfg.deltas.size(); ++g) {
        const double delta = cfg.deltas[g];
        std::vector<TrialOutcome> trials(cfg.trials);
        run_trials(cfg.trials, cfg.workers, [&](std::size_t t) {
            const auto inst = gen_synthetic(ns, cfg.nt, cfg.d, delta, cfg.rho, trial_seed(cfg.seed, 1000 + g, t));
            trials[t] = run_trial(inst, bundle, cfg.rate, delta > 0.0);
        });
        table.rows.push_back(count_rate(delta, "stand-da", trials, cfg.alpha, &HypothesisOutcome::pSelective));
        table.rows.push_back(count_rate(delta, "stand-da-oc", trials, cfg.alpha, &HypothesisOutcome::pOc));
        for (const auto& t : trials) table.failed += t.failed;
        table.trials.push_back(std::move(trials));
    }
    return table;
}

namespace {

PiecewiseLinearNetwork near_identity_stack(Index din, Index width, Index count, std::uint64_t seed, bool heFirst) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Layer> layers;
    for (Index l = 0; l < count; ++l) {
        const Index in = l == 0 ? din : width;
        AffineLayer a{Matrix(in, width), Vector::Constant(width, 1.0)};
        if (l == 0 && heFirst) {
            const double scale = std::sqrt(2.0 / static_cast<double>(in));
            for (Index i = 0; i < a.weight.size(); ++i) a.weight.data()[i] = scale * normal(gen);
            for (Index j = 0; j < width; ++j) a.bias(j) = 0.1 * normal(gen);
        } else {
            const double eps = 0.1 / std::sqrt(static_cast<double>(width));
            for (Index i = 0; i < in; ++i)
                for (Index j = 0; j < width; ++j) a.weight(i, j) = (i == j ? 1.0 : 0.0) + eps * normal(gen);
        }
        layers.emplace_back(std::move(a));
        layers.emplace_back(ReluLayer{});
    }
    return PiecewiseLinearNetwork(std::move(layers));
}

}  // namespace

ModelBundle runtime_bundle(Index d, Index width, Index layers, std::uint64_t seed, const std::string& init) {
    const Index ext = layers / 2, ae = layers - ext;
    ModelBundle b;
    if (init == "near-identity") {
        b.extractor = near_identity_stack(d, width, ext, seed, true);
        b.autoencoder = near_identity_stack(width, width, ae, seed + 1, false);
    } else if (init == "he") {
        std::vector<Index> extDims{d}, aeDims;
        for (Index i = 0; i < ext; ++i) extDims.push_back(width);
        for (Index i = 0; i <= ae; ++i) aeDims.push_back(width);
        b.extractor = random_network(extDims, seed, true);
        b.autoencoder = random_network(aeDims, seed + 1, false);
    } else {
        throw ConfigError("runtime_init", "expected near-identity or he, got \"" + init + "\"");
    }
    b.metadata["origin"] = "runtime-" + init;
    b.validate();
    return b;
}

RuntimeTable run_runtime(const ExperimentConfig& cfg) {
    cfg.validate();
    RuntimeTable table;
    const std::vector<std::shared_ptr<const Backend>> backends{make_backend("sequential"),
                                                               make_backend("parallel", cfg.threads)};
    for (Index layers : cfg.layerCounts) {
        const ModelBundle bundle = runtime_bundle(cfg.d, cfg.width, layers, cfg.randomBundle.seed, cfg.runtimeInit);
        // Each repetition is a fresh instance: the first `repetitions` seeds
        // (in order) whose detection contains a testable target row.
        std::vector<std::vector<double>> ms(backends.size());
        std::vector<double> pLast(backends.size());
        std::size_t windows = 0, reps = 0;
        for (std::uint64_t attempt = 0; reps < cfg.repetitions; ++attempt) {
            if (attempt >= 100 * cfg.repetitions)
                throw std::runtime_error("runtime bundle with " + std::to_string(layers) +
                                         " layers rarely flags target rows; no benchmark instances");
            const auto inst =
                gen_synthetic(cfg.nsList.front(), cfg.nt, cfg.d, 0.0, cfg.rho, trial_seed(cfg.seed, 7, attempt));
            const Detection det = detect_anomalies(bundle, inst.data, cfg.rate);
            if (det.target.empty() || static_cast<Index>(det.target.size()) >= inst.data.nt()) continue;
            const Index j = det.target.front();
            for (std::size_t b = 0; b < backends.size(); ++b) {
                InferenceOptions opts;
                opts.rate = cfg.rate;
                opts.search.backend = backends[b];
                const auto t0 = std::chrono::steady_clock::now();
                const InferenceReport rep = infer_anomaly(inst.data, inst.spec, bundle, det, j, opts);
                ms[b].push_back(
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
                if (rep.error) throw std::runtime_error("runtime instance: " + *rep.error);
                pLast[b] = rep.pSelective;
                if (b == 0) windows += rep.diagnostics.search.windows;
                else table.maxPDifference = std::max(table.maxPDifference, std::abs(rep.pSelective - pLast[0]));
            }
            ++reps;
        }
        for (std::size_t b = 0; b < backends.size(); ++b) {
            auto& v = ms[b];
            std::sort(v.begin(), v.end());
            const std::size_t n = v.size();
            const double median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
            table.rows.push_back({layers, backends[b]->name(), median, pLast[b], windows / reps});
        }
    }
    return table;
}

RealRun run_real(const ExperimentConfig& cfg, const ModelBundle& bundle) {
    cfg.validate();
    SplitSpec split;
    split.rule.column = cfg.splitColumn;
    split.rule.op = SplitRule::parse_op(cfg.splitOp);
    split.rule.value = cfg.splitValue;
    split.ns = cfg.nsList.front();
    split.nt = cfg.nt;
    split.standardize = cfg.standardize;
    split.seed = cfg.seed;
    split.dropColumns = cfg.dropColumns;
    if (cfg.covariance) split.covarianceFile = *cfg.covariance;
    RealRun run;
    run.ingested = ingest_csv(*cfg.csv, split);
    if (run.ingested.data.d() != bundle.extractor.input_dim())
        throw ConfigError("csv", "feature count " + std::to_string(run.ingested.data.d()) +
                                     " does not match the bundle input dimension");
    InferenceOptions opts;
    opts.rate = cfg.rate;
    opts.threads = std::max(1u, cfg.workers);
    run.result = stand_da(run.ingested.data, run.ingested.spec, bundle, opts);
    return run;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    return out;
}

}  // namespace

void write_fpr_csv(const RateTable& table, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "n_s,method,rejections,tested,fpr\n";
    for (const auto& r : table.rows)
        out << static_cast<long long>(r.key) << ',' << r.method << ',' << r.rejections << ',' << r.tested << ','
            << r.rate() << '\n';
}

void write_tpr_csv(const RateTable& table, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "delta,method,tpr\n";
    for (const auto& r : table.rows) out << r.key << ',' << r.method << ',' << r.rate() << '\n';
}

void write_runtime_csv(const RuntimeTable& table, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "layers,backend,median_ms\n";
    for (const auto& r : table.rows) out << r.layers << ',' << r.backend << ',' << r.medianMs << '\n';
}

json plot_manifest(const ExperimentConfig& cfg, const std::string& csvFile) {
    json j;
    j["data"] = csvFile;
    switch (cfg.mode) {
        case ExperimentMode::Fpr:
            j["kind"] = "bar";
            j["x"] = "n_s";
            j["y"] = "fpr";
            j["series"] = "method";
            j["reference_line"] = cfg.alpha;
            j["counting"] = "per-hypothesis";
            break;
        case ExperimentMode::Tpr:
            j["kind"] = "line";
            j["x"] = "delta";
            j["y"] = "tpr";
            j["series"] = "method";
            j["counting"] = "per-hypothesis";
            break;
        case ExperimentMode::Runtime:
            j["kind"] = "line";
            j["x"] = "layers";
            j["y"] = "median_ms";
            j["series"] = "backend";
            break;
        case ExperimentMode::Real:
            j["kind"] = "table";
            break;
    }
    return j;
}

}  // namespace standda
