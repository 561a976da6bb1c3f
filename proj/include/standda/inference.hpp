#pragma once

#include "standda/affine_engine.hpp"
#include "standda/interval.hpp"
#include "standda/model.hpp"
#include "standda/network.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace standda {

/// Test direction for one detected anomaly j (0-based target index).
struct TestDirection {
    Index anomaly = -1;
    std::vector<Index> O;  // detected target anomalies, 0-based ascending
    Vector eta;            // length (n_s + n_t) d, zero on the source block
    Vector signs;          // s_j, entries +-1
    double variance = 0.0; // eta' Sigma eta
    double zObs = 0.0;     // eta' vec(observed) = T_j
};

/// Throws std::invalid_argument when j is not in O or O covers the target.
TestDirection build_eta(const DataPair& data, const CovarianceSpec& spec, const std::vector<Index>& O,
                        Index j);

/// vec(data) = offset + direction * z, with z = eta' vec(data).
struct NuisanceLine {
    Vector offset;     // a
    Vector direction;  // b
    double zMin = 0.0;
    double zMax = 0.0;
    double sigma = 1.0;
    double zObs = 0.0;
};

/// The scan range covers [min(0, zObs) - k sigma, max(0, zObs) + k sigma]:
/// both the observed statistic and the null mean are at least k sigma from
/// either end.
NuisanceLine nuisance_line(const TestDirection& dir, const CovarianceSpec& spec, const Vector& observed,
                           double rangeSigmas = 20.0);

struct SearchOptions {
    double rate = 0.05;
    double stepStd = 1e-3;       // step past each window, in units of sigma
    double mergeTolStd = 1e-9;   // windows closer than this are fused
    double stallWidthStd = 1e-12;
    std::shared_ptr<const Backend> backend;  // sequential when null
};

struct SearchDiagnostics {
    std::size_t windows = 0;
    std::size_t accepted = 0;
    std::size_t emptyWindows = 0;
    std::size_t stalls = 0;
    std::size_t patternErrors = 0;
};

/// One sub-problem region [l^z, r^z] and the detector outcome inside it.
struct Window {
    Interval interval;
    Detection detection;
};

/// Owns an engine and its workspaces; evaluates windows along one line.
class LineSearcher {
public:
    LineSearcher(const ModelBundle& bundle, Index ns, Index nt, Index d, SearchOptions opts);

    /// Binds the line; a and b are vectorized (n_s + n_t) x d matrices.
    void set_line(const NuisanceLine& line);

    /// Window containing z: network pattern interval intersected with the
    /// detector-event interval. Throws PatternError on inconsistent patterns.
    Window evaluate(double z);

    struct Result {
        IntervalSet region;                     // accepted windows (Z_1 over the scan range)
        std::optional<Interval> observedWindow; // accepted window containing `zRef`
        std::vector<Window> acceptedWindows;    // clipped to the scan range, in scan order
        SearchDiagnostics diagnostics;
    };

    /// Scans [zLo, zHi] window by window, accepting windows whose target
    /// anomaly set equals `target`.
    Result scan(const std::vector<Index>& target, double zLo, double zHi, double zRef);

    const NuisanceLine& line() const { return line_; }

private:
    const ModelBundle& bundle_;
    Index ns_, nt_, d_;
    SearchOptions opts_;
    AffineEngine engine_;
    NuisanceLine line_;
    AffineTriple input_;
};

/// Truncation region for the anomaly-set event over the line's full range.
LineSearcher::Result divide_and_conquer(const NuisanceLine& line, const ModelBundle& bundle,
                                        const std::vector<Index>& O_obs, Index ns, Index nt, Index d,
                                        const SearchOptions& opts = {});

struct InferenceDiagnostics {
    SearchDiagnostics search;
    double wallSeconds = 0.0;
};

struct InferenceReport {
    Index anomaly = -1;  // 0-based target index
    TestDirection direction;
    IntervalSet region;
    Interval signRegion;
    std::optional<Interval> ocWindow;
    double pSelective = 0.0;
    double pOc = 0.0;
    double pNaive = 0.0;
    double pBonferroni = 0.0;
    InferenceDiagnostics diagnostics;
    std::optional<std::string> error;  // set when this anomaly could not be tested
};

struct InferenceOptions {
    double rate = 0.05;
    double rangeSigmas = 20.0;
    SearchOptions search;
    /// Restrict the scan to the sign-event interval; Z_1 is only needed where
    /// it meets Z_2, so the final region is unchanged.
    bool clipScanToSignEvent = true;
    /// When non-empty, only these detected target anomalies are tested.
    std::vector<Index> only;
    unsigned threads = 1;  // anomalies tested concurrently
};

struct StandDaResult {
    Detection detection;
    std::vector<InferenceReport> reports;
};

/// Detects anomalies and computes selective, over-conditioned, naive and
/// Bonferroni p-values for each one. Per-anomaly failures are recorded in the
/// report and do not abort the others.
StandDaResult stand_da(const DataPair& data, const CovarianceSpec& spec, const ModelBundle& bundle,
                       const InferenceOptions& opts = {});

/// Single anomaly of an existing detection.
InferenceReport infer_anomaly(const DataPair& data, const CovarianceSpec& spec, const ModelBundle& bundle,
                              const Detection& detection, Index anomaly, const InferenceOptions& opts);

}  // namespace standda
