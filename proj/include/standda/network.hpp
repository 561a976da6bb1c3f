#pragma once

#include "standda/linalg.hpp"
#include "standda/model.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace standda {

inline constexpr const char* kBundleVersion = "stand-da-bundle/1";

struct AffineLayer {
    Matrix weight;  // d_in x d_out, applied as X * W
    Vector bias;    // d_out
};

struct ReluLayer {};

using Layer = std::variant<AffineLayer, ReluLayer>;

/// Feed-forward network built only from affine maps and ReLUs.
class PiecewiseLinearNetwork {
public:
    PiecewiseLinearNetwork() = default;
    /// Validates the dimension chain; `inputDim` is only consulted when the
    /// network has no affine layer.
    explicit PiecewiseLinearNetwork(std::vector<Layer> layers, Index inputDim = -1);

    const std::vector<Layer>& layers() const { return layers_; }
    Index input_dim() const { return inputDim_; }
    Index output_dim() const { return outputDim_; }
    std::size_t affine_count() const;

    /// Layer-by-layer dimension after each layer, starting with input_dim().
    std::vector<Index> widths() const;

private:
    std::vector<Layer> layers_;
    Index inputDim_ = 0;
    Index outputDim_ = 0;
};

struct ModelBundle {
    PiecewiseLinearNetwork extractor;    // d -> d'
    PiecewiseLinearNetwork autoencoder;  // d' -> d'
    std::map<std::string, std::string> metadata;

    /// Throws BundleError when the extractor/autoencoder seam does not chain.
    void validate() const;
};

class BundleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

ModelBundle load_bundle(const std::filesystem::path& path);
ModelBundle parse_bundle(const std::string& json_text);
void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path);
std::string serialize_bundle(const ModelBundle& bundle);

/// Plain forward pass; ReLU is max(., 0).
Matrix forward(const PiecewiseLinearNetwork& net, const Matrix& x);

/// Per-row l1 distance between extractor output and its reconstruction,
/// over the source rows stacked on top of the target rows.
Vector reconstruction_errors(const ModelBundle& bundle, const DataPair& data);
Vector reconstruction_errors(const ModelBundle& bundle, const Matrix& stacked);

struct Detection {
    std::vector<Index> flagged;  // all anomalous rows of the stack, ascending
    Index thresholdRow = -1;     // row attaining the m-th largest error
    std::vector<Index> target;   // 0-based target indices among flagged, ascending

    bool operator==(const Detection&) const = default;
};

/// m = ceil(rate * n); throws std::invalid_argument unless 0 < rate < 1 and m < n.
Index anomaly_count(double rate, Index n);

/// Flags the m largest errors, ties broken by lowest index.
Detection detect_from_errors(const Vector& errors, Index ns, double rate);

Detection detect_anomalies(const ModelBundle& bundle, const DataPair& data, double rate = 0.05);

/// He-style random initialisation; ReLU after every hidden layer, and after
/// the last one when `finalRelu` is set.
PiecewiseLinearNetwork random_network(const std::vector<Index>& dims, std::uint64_t seed,
                                      bool finalRelu, double biasScale = 0.1);

}  // namespace standda
