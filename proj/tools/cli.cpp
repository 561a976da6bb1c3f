#include "cli.hpp"

#include "standda/experiments.hpp"
#include "standda/report.hpp"
#include "standda/truncated_normal.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace standda::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void require_file(const std::string& key, const std::string& path) {
    if (!fs::is_regular_file(path)) throw IoError(key + ": file not found: " + path);
}

// Detection/inference settings; data comes from a CSV or the synthetic generator.
struct PipelineConfig {
    std::optional<std::string> bundle;
    std::string data = "synthetic";
    Index ns = 150, nt = 25, d = 10;
    double delta = 0.0, rho = 0.0;
    std::optional<std::string> csv;
    std::string splitColumn = "domain", splitOp = "eq";
    double splitValue = 0.0;
    bool standardize = true;
    std::vector<std::string> dropColumns;
    std::optional<std::string> covariance;
    double rate = 0.05, alpha = 0.05, rangeSigmas = 20.0;
    std::uint64_t seed = 1;
    std::string backend = "sequential";
    unsigned threads = 0, workers = 1;
    std::string outputDir = "out";
};

template <class T>
T get_key(const json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(key, std::string("wrong type (") + e.what() + ")");
    }
}

std::optional<std::string> optional_path(const json& j, const std::string& key) {
    if (j.at(key).is_null()) return std::nullopt;
    return get_key<std::string>(j, key);
}

PipelineConfig pipeline_from_json(const json& j) {
    PipelineConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "bundle") c.bundle = optional_path(j, key);
        else if (key == "data") c.data = get_key<std::string>(j, key);
        else if (key == "ns") c.ns = get_key<Index>(j, key);
        else if (key == "nt") c.nt = get_key<Index>(j, key);
        else if (key == "d") c.d = get_key<Index>(j, key);
        else if (key == "delta") c.delta = get_key<double>(j, key);
        else if (key == "rho") c.rho = get_key<double>(j, key);
        else if (key == "csv") c.csv = optional_path(j, key);
        else if (key == "split_column") c.splitColumn = get_key<std::string>(j, key);
        else if (key == "split_op") c.splitOp = get_key<std::string>(j, key);
        else if (key == "split_value") c.splitValue = get_key<double>(j, key);
        else if (key == "standardize") c.standardize = get_key<bool>(j, key);
        else if (key == "drop_columns") c.dropColumns = get_key<std::vector<std::string>>(j, key);
        else if (key == "covariance") c.covariance = optional_path(j, key);
        else if (key == "rate") c.rate = get_key<double>(j, key);
        else if (key == "alpha") c.alpha = get_key<double>(j, key);
        else if (key == "range_sigmas") c.rangeSigmas = get_key<double>(j, key);
        else if (key == "seed") c.seed = get_key<std::uint64_t>(j, key);
        else if (key == "backend") c.backend = get_key<std::string>(j, key);
        else if (key == "threads") c.threads = get_key<unsigned>(j, key);
        else if (key == "workers") c.workers = get_key<unsigned>(j, key);
        else if (key == "output_dir") c.outputDir = get_key<std::string>(j, key);
        else throw ConfigError(key, "unknown key");
    }
    if (!c.bundle) throw ConfigError("bundle", "a bundle path is required");
    if (c.data != "synthetic" && c.data != "csv") throw ConfigError("data", "expected synthetic or csv");
    if (c.data == "csv" && !c.csv) throw ConfigError("csv", "data = csv needs a CSV path");
    if (c.data == "synthetic") {
        if (c.ns < 1) throw ConfigError("ns", "must be positive");
        if (c.nt < 2) throw ConfigError("nt", "must be at least 2");
        if (c.d < 1) throw ConfigError("d", "must be positive");
        if (!(c.delta >= 0.0)) throw ConfigError("delta", "must be non-negative");
        if (!(c.rho >= 0.0 && c.rho < 1.0)) throw ConfigError("rho", "must lie in [0, 1)");
    }
    try {
        SplitRule::parse_op(c.splitOp);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("split_op", e.what());
    }
    if (!(c.rate > 0.0 && c.rate < 1.0)) throw ConfigError("rate", "must lie in (0, 1)");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha", "must lie in (0, 1)");
    if (!(c.rangeSigmas > 0.0)) throw ConfigError("range_sigmas", "must be positive");
    if (c.backend != "sequential" && c.backend != "parallel")
        throw ConfigError("backend", "expected sequential or parallel");
    if (c.outputDir.empty()) throw ConfigError("output_dir", "must not be empty");
    return c;
}

json to_json(const PipelineConfig& c) {
    auto opt = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
    return {{"bundle", opt(c.bundle)},
            {"data", c.data},
            {"ns", c.ns},
            {"nt", c.nt},
            {"d", c.d},
            {"delta", c.delta},
            {"rho", c.rho},
            {"csv", opt(c.csv)},
            {"split_column", c.splitColumn},
            {"split_op", c.splitOp},
            {"split_value", c.splitValue},
            {"standardize", c.standardize},
            {"drop_columns", c.dropColumns},
            {"covariance", opt(c.covariance)},
            {"rate", c.rate},
            {"alpha", c.alpha},
            {"range_sigmas", c.rangeSigmas},
            {"seed", c.seed},
            {"backend", c.backend},
            {"threads", c.threads},
            {"workers", c.workers},
            {"output_dir", c.outputDir}};
}

struct Invocation {
    std::string command;
    std::string configPath;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> outputDir;
    std::optional<std::string> bundle;
};

// Config file, then --set overrides, then the dedicated flags.
json resolve_raw(const Invocation& inv) {
    json j = json::object();
    if (!inv.configPath.empty()) {
        std::ifstream in(inv.configPath);
        if (!in) throw IoError("config: cannot open " + inv.configPath);
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError("config", std::string("not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw ConfigError("config", "top level must be an object");
    }
    for (const auto& kv : inv.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError(kv, "override must look like key=value");
        const std::string key = kv.substr(0, eq), text = kv.substr(eq + 1);
        json value = json::parse(text, nullptr, false);
        if (value.is_discarded()) value = text;
        j[key] = value;
    }
    if (inv.seed) j["seed"] = *inv.seed;
    if (inv.outputDir) j["output_dir"] = *inv.outputDir;
    if (inv.bundle) j["bundle"] = *inv.bundle;
    return j;
}

fs::path prepare_output(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("output_dir: cannot create " + dir + " (" + ec.message() + ")");
    return fs::path(dir);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config, const json& extra = {}) {
    json m;
    m["command"] = command;
    m["config"] = config;
    if (!extra.is_null()) m["results"] = extra;
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

ModelBundle load_bundle_checked(const std::string& path) {
    require_file("bundle", path);
    try {
        return load_bundle(path);
    } catch (const BundleError& e) {
        throw ConfigError("bundle", e.what());
    }
}

struct LoadedData {
    DataPair data;
    CovarianceSpec spec;
};

LoadedData load_data(const PipelineConfig& c, Index bundleInput) {
    if (c.data == "synthetic") {
        if (c.d != bundleInput)
            throw ConfigError("d", "d = " + std::to_string(c.d) + " but the bundle expects " +
                                       std::to_string(bundleInput) + " features");
        auto inst = gen_synthetic(c.ns, c.nt, c.d, c.delta, c.rho, c.seed);
        return {std::move(inst.data), std::move(inst.spec)};
    }
    require_file("csv", *c.csv);
    if (c.covariance) require_file("covariance", *c.covariance);
    SplitSpec split;
    split.rule.column = c.splitColumn;
    split.rule.op = SplitRule::parse_op(c.splitOp);
    split.rule.value = c.splitValue;
    split.ns = c.ns;
    split.nt = c.nt;
    split.standardize = c.standardize;
    split.seed = c.seed;
    split.dropColumns = c.dropColumns;
    if (c.covariance) split.covarianceFile = *c.covariance;
    IngestedData ing;
    try {
        ing = ingest_csv(*c.csv, split);
    } catch (const DimensionError& e) {
        throw ConfigError("covariance", e.what());
    } catch (const std::runtime_error& e) {
        throw ConfigError("csv", e.what());
    }
    if (ing.data.d() != bundleInput)
        throw ConfigError("csv", "CSV has " + std::to_string(ing.data.d()) + " features, the bundle expects " +
                                     std::to_string(bundleInput));
    return {std::move(ing.data), std::move(ing.spec)};
}

std::string detection_json(const Detection& det, const Vector& errors, Index ns, Index nt, double rate) {
    json j;
    j["schema"] = "stand-da-detection/1";
    j["n_s"] = ns;
    j["n_t"] = nt;
    j["rate"] = rate;
    json flagged = json::array(), target = json::array(), errs = json::array();
    for (Index r : det.flagged) flagged.push_back(r + 1);
    for (Index t : det.target) target.push_back(t + 1);
    for (Index i = 0; i < errors.size(); ++i) errs.push_back(errors(i));
    j["flagged_rows"] = flagged;
    j["threshold_row"] = det.thresholdRow + 1;
    j["detected"] = target;
    j["reconstruction_errors"] = errs;
    return j.dump(2) + "\n";
}

int cmd_detect(const json& raw, std::ostream& out) {
    const PipelineConfig c = pipeline_from_json(raw);
    const ModelBundle bundle = load_bundle_checked(*c.bundle);
    const LoadedData in = load_data(c, bundle.extractor.input_dim());
    const fs::path dir = prepare_output(c.outputDir);
    const Vector errors = reconstruction_errors(bundle, in.data);
    Detection det;
    try {
        det = detect_from_errors(errors, in.data.ns(), c.rate);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("rate", e.what());
    }
    write_text(dir / "detection.json", detection_json(det, errors, in.data.ns(), in.data.nt(), c.rate));
    write_manifest(dir, "detect", to_json(c));
    out << "flagged " << det.flagged.size() << " rows; target anomalies:";
    for (Index t : det.target) out << ' ' << t + 1;
    out << '\n';
    return kOk;
}

int cmd_infer(const json& raw, std::ostream& out, std::ostream& err) {
    const PipelineConfig c = pipeline_from_json(raw);
    const ModelBundle bundle = load_bundle_checked(*c.bundle);
    const LoadedData in = load_data(c, bundle.extractor.input_dim());
    const fs::path dir = prepare_output(c.outputDir);
    InferenceOptions opts;
    opts.rate = c.rate;
    opts.rangeSigmas = c.rangeSigmas;
    opts.threads = std::max(1u, c.workers);
    opts.search.backend = make_backend(c.backend, c.threads);
    StandDaResult result;
    try {
        result = stand_da(in.data, in.spec, bundle, opts);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("rate", e.what());
    }
    const ReportContext ctx{in.data.ns(), in.data.nt(), in.data.d(), c.rate, c.alpha};
    write_text(dir / "report.json", report_json(result, ctx));
    const std::string table = summary_table(result, c.alpha);
    write_text(dir / "summary.txt", table);
    std::size_t failed = 0;
    for (const auto& r : result.reports)
        if (r.error) {
            ++failed;
            err << "anomaly " << r.anomaly + 1 << ": " << *r.error << '\n';
        }
    write_manifest(dir, "infer", to_json(c), {{"tested", result.reports.size()}, {"failed", failed}});
    out << table;
    if (!result.reports.empty() && failed == result.reports.size()) {
        err << "inference failed for every detected anomaly\n";
        return kNumericFailure;
    }
    return kOk;
}

ModelBundle experiment_bundle(const ExperimentConfig& cfg) {
    if (cfg.bundle) require_file("bundle", *cfg.bundle);
    try {
        return resolve_bundle(cfg);
    } catch (const BundleError& e) {
        throw ConfigError("bundle", e.what());
    }
}

json rate_table_json(const RateTable& t) {
    json rows = json::array();
    for (const auto& r : t.rows)
        rows.push_back({{"key", r.key}, {"method", r.method}, {"rejections", r.rejections}, {"tested", r.tested},
                        {"rate", r.rate()}, {"sd", r.sd()}});
    return {{"rows", rows}, {"failed_hypotheses", t.failed}, {"counting", "per-hypothesis"}};
}

int run_experiment(ExperimentConfig cfg, const std::string& command, std::ostream& out) {
    const fs::path dir = prepare_output(cfg.outputDir);
    json results;
    std::string csvName;
    switch (cfg.mode) {
        case ExperimentMode::Fpr: {
            const ModelBundle bundle = experiment_bundle(cfg);
            const RateTable t = run_fpr(cfg, bundle);
            csvName = "fpr.csv";
            write_fpr_csv(t, dir / csvName);
            results = rate_table_json(t);
            for (const auto& r : t.rows)
                out << "n_s=" << r.key << ' ' << r.method << " fpr=" << r.rate() << " (" << r.rejections << '/'
                    << r.tested << ")\n";
            break;
        }
        case ExperimentMode::Tpr: {
            const ModelBundle bundle = experiment_bundle(cfg);
            const RateTable t = run_tpr(cfg, bundle);
            csvName = "tpr.csv";
            write_tpr_csv(t, dir / csvName);
            results = rate_table_json(t);
            if (!cfg.bundle) results["note"] = "random bundle: TPR magnitudes are not comparable to trained models";
            for (const auto& r : t.rows)
                out << "delta=" << r.key << ' ' << r.method << " tpr=" << r.rate() << " (" << r.rejections << '/'
                    << r.tested << ")\n";
            break;
        }
        case ExperimentMode::Runtime: {
            const RuntimeTable t = run_runtime(cfg);
            csvName = "runtime.csv";
            write_runtime_csv(t, dir / csvName);
            results = {{"max_p_difference", t.maxPDifference}};
            for (const auto& r : t.rows)
                out << "layers=" << r.layers << ' ' << r.backend << " median_ms=" << r.medianMs << '\n';
            break;
        }
        case ExperimentMode::Real: {
            const ModelBundle bundle = cfg.bundle ? load_bundle_checked(*cfg.bundle) : make_random_bundle(cfg.randomBundle);
            require_file("csv", *cfg.csv);
            if (cfg.covariance) require_file("covariance", *cfg.covariance);
            RealRun run;
            try {
                run = run_real(cfg, bundle);
            } catch (const ConfigError&) {
                throw;
            } catch (const std::runtime_error& e) {
                throw ConfigError("csv", e.what());
            }
            const auto& data = run.ingested.data;
            write_text(dir / "report.json",
                       report_json(run.result, {data.ns(), data.nt(), data.d(), cfg.rate, cfg.alpha}));
            const std::string table = summary_table(run.result, cfg.alpha);
            write_text(dir / "summary.txt", table);
            out << table;
            break;
        }
    }
    if (!csvName.empty()) write_text(dir / "plot.json", plot_manifest(cfg, csvName).dump(2) + "\n");
    write_manifest(dir, command, to_json(cfg), results);
    return kOk;
}

int cmd_validate_bundle(const json& raw, std::ostream& out) {
    std::optional<std::string> path;
    std::optional<std::string> outputDir;
    for (const auto& [key, value] : raw.items()) {
        if (key == "bundle") path = optional_path(raw, key);
        else if (key == "output_dir") outputDir = get_key<std::string>(raw, key);
        else if (key != "seed") throw ConfigError(key, "unknown key");
    }
    if (!path) throw ConfigError("bundle", "a bundle path is required");
    const ModelBundle b = load_bundle_checked(*path);
    auto widths = [](const PiecewiseLinearNetwork& n) {
        std::string s = std::to_string(n.input_dim());
        for (const auto& layer : n.layers())
            if (const auto* a = std::get_if<AffineLayer>(&layer)) s += "->" + std::to_string(a->weight.cols());
        return s;
    };
    out << "bundle ok: extractor " << widths(b.extractor) << ", autoencoder " << widths(b.autoencoder) << '\n';
    if (outputDir) {
        const fs::path dir = prepare_output(*outputDir);
        write_manifest(dir, "validate-bundle", {{"bundle", *path}, {"output_dir", *outputDir}},
                       {{"extractor", b.extractor.widths()}, {"autoencoder", b.autoencoder.widths()}});
    }
    return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Selective inference for anomalies detected after domain adaptation"};
    app.require_subcommand(1);
    Invocation inv;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", inv.configPath, "JSON config file");
        sub->add_option("-s,--set", inv.overrides, "override a config key (key=value, value parsed as JSON)");
        sub->add_option("--seed", inv.seed, "random seed");
        sub->add_option("-o,--out", inv.outputDir, "output directory");
        sub->add_option("-b,--bundle", inv.bundle, "weight bundle path");
    };
    for (const char* name : {"detect", "infer", "experiment", "bench", "validate-bundle"}) {
        auto* sub = app.add_subcommand(name);
        add_common(sub);
    }
    app.get_subcommand("detect")->description("flag anomalies and write detection.json");
    app.get_subcommand("infer")->description("detect, then compute selective p-values (report.json, summary.txt)");
    app.get_subcommand("experiment")->description("FPR/TPR/runtime sweeps or a real-data run (mode key)");
    app.get_subcommand("bench")->description("runtime benchmark across layer counts and backends");
    app.get_subcommand("validate-bundle")->description("check a weight bundle");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kConfigError;
    }
    inv.command = app.get_subcommands().front()->get_name();

    try {
        const json raw = resolve_raw(inv);
        if (inv.command == "detect") return cmd_detect(raw, out);
        if (inv.command == "infer") return cmd_infer(raw, out, err);
        if (inv.command == "validate-bundle") return cmd_validate_bundle(raw, out);
        json cfgJson = raw;
        if (inv.command == "bench") {
            if (cfgJson.contains("mode") && cfgJson["mode"] != "runtime")
                throw ConfigError("mode", "bench always runs the runtime mode");
            cfgJson["mode"] = "runtime";
        }
        return run_experiment(experiment_config_from_json(cfgJson), inv.command, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kIoError;
    } catch (const RegionMassError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kNumericFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kNumericFailure;
    }
}

}  // namespace standda::cli
