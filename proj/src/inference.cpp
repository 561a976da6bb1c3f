#include "standda/inference.hpp"

#include "standda/selection_events.hpp"
#include "standda/truncated_normal.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <stdexcept>

namespace standda {

TestDirection build_eta(const DataPair& data, const CovarianceSpec& spec, const std::vector<Index>& O,
                        Index j) {
    data.validate();
    const Index ns = data.ns(), nt = data.nt(), d = data.d();
    if (std::find(O.begin(), O.end(), j) == O.end())
        throw std::invalid_argument("build_eta: anomaly " + std::to_string(j) + " is not in O");
    if (static_cast<Index>(O.size()) >= nt)
        throw std::invalid_argument("build_eta: |O| = n_t leaves no reference rows");

    TestDirection dir;
    dir.anomaly = j;
    dir.O = O;
    std::sort(dir.O.begin(), dir.O.end());

    std::vector<char> inO(static_cast<std::size_t>(nt), 0);
    for (Index o : O) inO[static_cast<std::size_t>(o)] = 1;
    const double rest = static_cast<double>(nt - static_cast<Index>(O.size()));
    Vector mean = Vector::Zero(d);
    for (Index l = 0; l < nt; ++l)
        if (!inO[static_cast<std::size_t>(l)]) mean += data.target.row(l).transpose();
    mean /= rest;

    dir.signs.resize(d);
    for (Index k = 0; k < d; ++k) dir.signs(k) = sign_of(data.target(j, k) - mean(k));

    Matrix etaTarget = Matrix::Zero(nt, d);
    etaTarget.row(j) = dir.signs.transpose();
    for (Index l = 0; l < nt; ++l)
        if (!inO[static_cast<std::size_t>(l)]) etaTarget.row(l) = -dir.signs.transpose() / rest;
    dir.eta = Vector::Zero((ns + nt) * d);
    dir.eta.tail(nt * d) = vec_rows(etaTarget);

    dir.zObs = dir.eta.tail(nt * d).dot(vec_rows(data.target));
    dir.variance = dir.eta.dot(sigma_times(spec, dir.eta));
    if (!(dir.variance > 0.0)) throw std::invalid_argument("build_eta: eta' Sigma eta is not positive");
    return dir;
}

NuisanceLine nuisance_line(const TestDirection& dir, const CovarianceSpec& spec, const Vector& observed,
                           double rangeSigmas) {
    if (!(dir.variance > 0.0)) throw std::invalid_argument("nuisance_line: variance must be positive");
    require_dims(observed.size() == dir.eta.size(), "nuisance_line: observed length != eta length");
    NuisanceLine line;
    line.direction = sigma_times(spec, dir.eta) / dir.variance;
    line.offset = observed - line.direction * dir.zObs;
    line.sigma = std::sqrt(dir.variance);
    line.zObs = dir.zObs;
    line.zMin = std::min(0.0, dir.zObs) - rangeSigmas * line.sigma;
    line.zMax = std::max(0.0, dir.zObs) + rangeSigmas * line.sigma;
    return line;
}

LineSearcher::LineSearcher(const ModelBundle& bundle, Index ns, Index nt, Index d, SearchOptions opts)
    : bundle_(bundle),
      ns_(ns),
      nt_(nt),
      d_(d),
      opts_(std::move(opts)),
      engine_(opts_.backend ? opts_.backend : std::make_shared<SequentialBackend>()) {
    bundle_.validate();
    require_dims(bundle_.extractor.input_dim() == d, "LineSearcher: bundle expects d = " +
                                                         std::to_string(bundle_.extractor.input_dim()));
}

void LineSearcher::set_line(const NuisanceLine& line) {
    const Index n = ns_ + nt_;
    require_dims(line.offset.size() == n * d_ && line.direction.size() == n * d_,
                 "LineSearcher: line length != (n_s + n_t) d");
    line_ = line;
    input_.offset = mat_rows(line.offset, n, d_);
    input_.slope = mat_rows(line.direction, n, d_);
    input_.value.resize(n, d_);
}

Window LineSearcher::evaluate(double z) {
    input_.z = z;
    input_.value = input_.offset + input_.slope * z;
    const auto feat = engine_.run(bundle_.extractor, input_, Interval::whole());
    const auto recon = engine_.run(bundle_.autoencoder, *feat.output, feat.interval);
    const AffineTriple& tap = *feat.output;
    const AffineTriple& out = *recon.output;

    const Vector errors = (tap.value - out.value).cwiseAbs().rowwise().sum();
    Window w{recon.interval, detect_from_errors(errors, ns_, opts_.rate)};
    const Interval adEvent =
        solve_constraints(ad_event_constraints(tap, out, w.detection.thresholdRow, w.detection.flagged));
    w.interval = w.interval.intersect(adEvent);
    return w;
}

LineSearcher::Result LineSearcher::scan(const std::vector<Index>& target, double zLo, double zHi, double zRef) {
    const double sigma = line_.sigma;
    const double step = opts_.stepStd * sigma;
    const double stallWidth = opts_.stallWidthStd * sigma;
    Result res{IntervalSet(opts_.mergeTolStd * sigma), std::nullopt, {}, {}};
    const Interval range(zLo, zHi);

    double z = zLo;
    while (z <= zHi) {
        Window w;
        try {
            w = evaluate(z);
        } catch (const PatternError&) {
            ++res.diagnostics.patternErrors;
            z += step;
            continue;
        }
        ++res.diagnostics.windows;
        if (w.interval.empty()) {
            ++res.diagnostics.emptyWindows;
            z += step;
            continue;
        }
        if (w.interval.width() < stallWidth) {
            ++res.diagnostics.stalls;
            z = std::max(z, w.interval.upper()) + step;
            continue;
        }
        if (w.detection.target == target) {
            const Interval clipped = w.interval.intersect(range);
            res.region.add(clipped);
            ++res.diagnostics.accepted;
            if (!res.observedWindow && clipped.contains(zRef)) res.observedWindow = clipped;
            res.acceptedWindows.push_back({clipped, w.detection});
        }
        z = std::max(z, w.interval.upper()) + step;
    }
    return res;
}

LineSearcher::Result divide_and_conquer(const NuisanceLine& line, const ModelBundle& bundle,
                                        const std::vector<Index>& O_obs, Index ns, Index nt, Index d,
                                        const SearchOptions& opts) {
    if (O_obs.empty()) throw std::invalid_argument("divide_and_conquer: observed anomaly set is empty");
    LineSearcher searcher(bundle, ns, nt, d, opts);
    searcher.set_line(line);
    return searcher.scan(O_obs, line.zMin, line.zMax, line.zObs);
}

InferenceReport infer_anomaly(const DataPair& data, const CovarianceSpec& spec, const ModelBundle& bundle,
                              const Detection& detection, Index anomaly, const InferenceOptions& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    InferenceReport rep;
    rep.anomaly = anomaly;
    rep.pSelective = rep.pOc = rep.pNaive = rep.pBonferroni = std::numeric_limits<double>::quiet_NaN();
    try {
        const Index ns = data.ns(), nt = data.nt(), d = data.d();
        rep.direction = build_eta(data, spec, detection.target, anomaly);
        const TestDirection& dir = rep.direction;
        const Vector observed = vec_rows(data.stacked());
        const NuisanceLine line = nuisance_line(dir, spec, observed, opts.rangeSigmas);

        rep.pNaive = naive_p(dir.variance, dir.zObs);
        rep.pBonferroni = bonferroni_p(rep.pNaive, static_cast<long>(nt));

        const AffineTriple raw(mat_rows(line.offset, ns + nt, d), mat_rows(line.direction, ns + nt, d),
                               dir.zObs);
        rep.signRegion =
            solve_constraints(sign_event_constraints(raw, anomaly, dir.O, dir.signs, ns, nt, d));

        Interval scanRange(line.zMin, line.zMax);
        if (opts.clipScanToSignEvent) scanRange = scanRange.intersect(rep.signRegion);
        if (scanRange.empty() || !scanRange.contains(dir.zObs))
            throw std::runtime_error("sign-event interval does not contain the observed statistic");

        SearchOptions search = opts.search;
        search.rate = opts.rate;
        LineSearcher searcher(bundle, ns, nt, d, search);
        searcher.set_line(line);
        auto scanned = searcher.scan(dir.O, scanRange.lower(), scanRange.upper(), dir.zObs);
        rep.diagnostics.search = scanned.diagnostics;

        rep.region = scanned.region.intersect(rep.signRegion);
        if (!rep.region.contains(dir.zObs))
            throw std::runtime_error("truncation region does not contain the observed statistic");
        rep.pSelective = selective_p(dir.variance, dir.zObs, rep.region);

        rep.ocWindow = scanned.observedWindow;
        if (!rep.ocWindow) {
            const Window w = searcher.evaluate(dir.zObs);
            rep.ocWindow = w.interval.intersect(Interval(line.zMin, line.zMax));
        }
        IntervalSet oc(rep.region.merge_tolerance());
        oc.add(rep.ocWindow->intersect(rep.signRegion));
        rep.pOc = selective_p(dir.variance, dir.zObs, oc);
    } catch (const std::exception& e) {
        rep.error = e.what();
    }
    rep.diagnostics.wallSeconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

StandDaResult stand_da(const DataPair& data, const CovarianceSpec& spec, const ModelBundle& bundle,
                       const InferenceOptions& opts) {
    data.validate();
    require_dims(spec.ns() == data.ns() && spec.nt() == data.nt() && spec.d() == data.d(),
                 "stand_da: covariance spec shape does not match the data");
    StandDaResult result;
    result.detection = detect_anomalies(bundle, data, opts.rate);

    std::vector<Index> todo;
    for (Index j : result.detection.target)
        if (opts.only.empty() || std::find(opts.only.begin(), opts.only.end(), j) != opts.only.end())
            todo.push_back(j);
    result.reports.resize(todo.size());

    if (opts.threads <= 1 || todo.size() <= 1) {
        for (std::size_t i = 0; i < todo.size(); ++i)
            result.reports[i] = infer_anomaly(data, spec, bundle, result.detection, todo[i], opts);
        return result;
    }
    std::vector<std::future<void>> jobs;
    const std::size_t workers = std::min<std::size_t>(opts.threads, todo.size());
    for (std::size_t w = 0; w < workers; ++w) {
        jobs.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < todo.size(); i += workers)
                result.reports[i] = infer_anomaly(data, spec, bundle, result.detection, todo[i], opts);
        }));
    }
    for (auto& j : jobs) j.get();
    return result;
}

}  // namespace standda
