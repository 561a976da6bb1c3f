#pragma once

#include "standda/csv_ingest.hpp"
#include "standda/inference.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace standda {

/// Configuration problem tied to one key of the resolved config.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& key, const std::string& what)
        : std::runtime_error(key + ": " + what), key_(key) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

/// Layer widths for a randomly initialised bundle.
struct RandomBundleSpec {
    std::vector<Index> extractor{10, 8, 4};
    std::vector<Index> autoencoder{4, 2, 4};
    bool extractorFinalRelu = true;
    std::uint64_t seed = 11;
    double biasScale = 0.1;
};

ModelBundle make_random_bundle(const RandomBundleSpec& spec);

enum class ExperimentMode { Fpr, Tpr, Runtime, Real };

std::string to_string(ExperimentMode mode);

struct ExperimentConfig {
    ExperimentMode mode = ExperimentMode::Fpr;
    std::vector<Index> nsList{150};
    Index nt = 25;
    Index d = 10;
    std::vector<double> deltas{0.0};
    double rho = 0.0;
    std::size_t trials = 120;
    double alpha = 0.05;
    double rate = 0.05;
    std::uint64_t seed = 1;
    std::optional<std::string> bundle;  // path; random bundle when absent
    RandomBundleSpec randomBundle;
    unsigned workers = 1;

    // runtime mode
    std::vector<Index> layerCounts{8, 16, 32, 64};
    Index width = 8;
    std::string runtimeInit = "near-identity";  // or "he"
    std::size_t repetitions = 15;
    unsigned threads = 0;  // parallel backend threads, 0 = hardware

    // real mode
    std::optional<std::string> csv;
    std::string splitColumn = "domain";
    std::string splitOp = "eq";
    double splitValue = 0.0;
    bool standardize = true;
    std::vector<std::string> dropColumns;
    std::optional<std::string> covariance;

    std::string outputDir = "out";

    /// Throws ConfigError naming the first invalid field.
    void validate() const;
};

/// Reads config keys from a JSON object; unknown keys raise ConfigError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Bundle at cfg.bundle, or the random bundle of cfg.randomBundle.
ModelBundle resolve_bundle(const ExperimentConfig& cfg);

struct SyntheticInstance {
    DataPair data;
    CovarianceSpec spec;
    std::vector<bool> sourceLabels;  // true = injected anomaly
    std::vector<bool> targetLabels;
};

/// Source rows ~ N(0, Xi), target rows ~ N(2, Xi); ceil(0.05 n) rows of each
/// domain shifted by +delta on every coordinate when delta > 0.
SyntheticInstance gen_synthetic(Index ns, Index nt, Index d, double delta, double rho, std::uint64_t seed);

/// Deterministic per-trial seed.
std::uint64_t trial_seed(std::uint64_t base, std::uint64_t group, std::uint64_t trial);

/// Runs fn(0..count-1) on `workers` threads; fn must write only its own slot.
void run_trials(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn);

/// Outcome of one tested hypothesis.
struct HypothesisOutcome {
    double pSelective = 0.0;
    double pOc = 0.0;
    double pNaive = 0.0;
    double pBonferroni = 0.0;
    bool trueAnomaly = false;
};

struct TrialOutcome {
    std::vector<HypothesisOutcome> tested;
    std::size_t detected = 0;  // target anomalies detected
    std::size_t failed = 0;    // anomalies whose inference raised an error
};

struct RateRow {
    double key = 0.0;  // n_s for FPR tables, delta for TPR tables
    std::string method;
    std::size_t rejections = 0;
    std::size_t tested = 0;
    double rate() const { return tested ? static_cast<double>(rejections) / static_cast<double>(tested) : 0.0; }
    /// Binomial standard deviation of the rate.
    double sd() const;
};

struct RateTable {
    std::vector<RateRow> rows;
    std::vector<std::vector<TrialOutcome>> trials;  // per key, per trial
    std::size_t failed = 0;

    const RateRow* find(double key, const std::string& method) const;
};

/// Null trials at every n_s; methods stand-da, stand-da-oc, naive, bonferroni.
RateTable run_fpr(const ExperimentConfig& cfg, const ModelBundle& bundle);

/// Tests truly injected detected anomalies at each delta (all detected ones
/// at delta = 0); methods stand-da, stand-da-oc.
RateTable run_tpr(const ExperimentConfig& cfg, const ModelBundle& bundle);

struct RuntimeRow {
    Index layers = 0;
    std::string backend;
    double medianMs = 0.0;
    double pSelective = 0.0;  // last repetition
    std::size_t windows = 0;  // mean over repetitions
};

struct RuntimeTable {
    std::vector<RuntimeRow> rows;
    /// Largest |p_seq - p_par| over all configs.
    double maxPDifference = 0.0;
};

/// Bundle with `layers` affine layers split evenly between extractor and
/// autoencoder, all of width `width`, input dimension d. The first layer is
/// He-initialised. With init "near-identity" every later layer is
/// I + 0.1 G / sqrt(width) with bias 1, so added depth leaves the number of
/// activation-pattern changes along a line roughly unchanged; with "he" every
/// layer is independently He-initialised.
ModelBundle runtime_bundle(Index d, Index width, Index layers, std::uint64_t seed,
                           const std::string& init = "near-identity");

RuntimeTable run_runtime(const ExperimentConfig& cfg);

/// Ingests cfg.csv and runs the full pipeline.
struct RealRun {
    IngestedData ingested;
    StandDaResult result;
};
RealRun run_real(const ExperimentConfig& cfg, const ModelBundle& bundle);

void write_fpr_csv(const RateTable& table, const std::filesystem::path& path);
void write_tpr_csv(const RateTable& table, const std::filesystem::path& path);
void write_runtime_csv(const RuntimeTable& table, const std::filesystem::path& path);

/// Data-only plot description naming the CSV, axes and series.
nlohmann::json plot_manifest(const ExperimentConfig& cfg, const std::string& csvFile);

}  // namespace standda
