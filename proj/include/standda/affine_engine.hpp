#pragma once

#include "standda/backend.hpp"
#include "standda/interval.hpp"
#include "standda/network.hpp"

#include <memory>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace standda {

/// Raised when the running interval becomes empty, i.e. the activation
/// pattern observed at z is inconsistent with the affine streams.
class PatternError : public std::runtime_error {
public:
    PatternError(std::size_t layer, const std::string& msg)
        : std::runtime_error(msg), layer_(layer) {}
    std::size_t layer() const { return layer_; }

private:
    std::size_t layer_;
};

// Single-step operations on an owned triple (sequential kernels).
AffineTriple affine_matmul(const AffineTriple& t, const Matrix& w);
AffineTriple affine_add_bias(const AffineTriple& t, const Vector& c);
std::pair<AffineTriple, Interval> si_relu(const AffineTriple& t, const Interval& interval);

/// Per-ReLU-layer half-line constraints, kept when recording is enabled.
struct LayerConstraints {
    std::size_t layer = 0;
    LinearConstraintSet constraints;
};

/// Conditioned forward propagation with per-network workspaces that are
/// allocated once per shape and reused across calls. One owner at a time.
class AffineEngine {
public:
    explicit AffineEngine(std::shared_ptr<const Backend> backend = std::make_shared<SequentialBackend>());

    struct Pass {
        const AffineTriple* output = nullptr;
        const AffineTriple* tap = nullptr;
        Interval interval;
    };

    /// Propagates `input` through `net` and folds every ReLU conditioning
    /// constraint into `start`. The returned pointers stay valid until the
    /// next call with the same network. `tapAfter` captures the triple right
    /// after that layer index. Throws PatternError on an empty interval.
    Pass run(const PiecewiseLinearNetwork& net, const AffineTriple& input, Interval start,
             std::optional<std::size_t> tapAfter = std::nullopt);

    void set_recording(bool on) { recording_ = on; }
    const std::vector<LayerConstraints>& recorded() const { return recorded_; }
    /// JSON dump of the recorded (p, q) lists, one object per ReLU layer.
    std::string recorded_json() const;

    const Backend& backend() const { return *backend_; }

private:
    std::shared_ptr<const Backend> backend_;
    std::unordered_map<const PiecewiseLinearNetwork*, std::vector<AffineTriple>> workspaces_;
    bool recording_ = false;
    std::vector<LayerConstraints> recorded_;
};

struct ConditionedResult {
    AffineTriple output;
    Interval interval;
    std::optional<AffineTriple> tap;
};

/// Value-returning convenience wrapper over AffineEngine::run.
ConditionedResult conditioned_forward(const PiecewiseLinearNetwork& net, const AffineTriple& t0,
                                      const Interval& interval0,
                                      std::optional<std::size_t> tapAfter = std::nullopt,
                                      std::shared_ptr<const Backend> backend = nullptr);

}  // namespace standda
