#pragma once

#include "standda/interval.hpp"
#include "standda/linalg.hpp"

#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace standda {

/// The live state X = A + B z of a dataset pushed through a network.
struct AffineTriple {
    Matrix value;   // X evaluated at z
    Matrix offset;  // A
    Matrix slope;   // B
    double z = 0.0;

    AffineTriple() = default;
    AffineTriple(Matrix offsetIn, Matrix slopeIn, double zIn);

    Index rows() const { return value.rows(); }
    Index cols() const { return value.cols(); }
    /// max |value - (offset + slope * z)|
    double consistency_error() const;
    void resize(Index rows, Index cols);
};

namespace kernels {

inline constexpr Index kTile = 32;

/// out[rows] = a[rows] * w with a fixed (i, k, j) tile order, so any row
/// partition yields bit-identical results.
void tiled_matmul(const Matrix& a, const Matrix& w, Matrix& out, Index rowBegin, Index rowEnd);

/// Adds `bias` to every row in [rowBegin, rowEnd).
void add_bias(Matrix& m, const Vector& bias, Index rowBegin, Index rowEnd);

/// ReLU on the value stream, conditioned on its activation pattern. Inactive
/// units (value <= 0) are zeroed in all three streams; the returned interval
/// is the set of z on which every unit in the row range keeps its sign.
/// When `record` is non-null the half-line constraints are appended to it.
Interval si_relu(const AffineTriple& in, AffineTriple& out, Index rowBegin, Index rowEnd,
                 LinearConstraintSet* record);

}  // namespace kernels

/// Execution seam for the three kernels. Implementations must be safe to call
/// from one thread at a time per instance.
class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string name() const = 0;
    /// out.{value,offset,slope} = in.{value,offset,slope} * w
    virtual void matmul(const AffineTriple& in, const Matrix& w, AffineTriple& out) const = 0;
    /// value and offset get the bias; slope is z-independent of it.
    virtual void add_bias(AffineTriple& t, const Vector& bias) const = 0;
    virtual Interval si_relu(const AffineTriple& in, AffineTriple& out, Interval iv,
                             LinearConstraintSet* record) const = 0;
};

class SequentialBackend final : public Backend {
public:
    std::string name() const override { return "sequential"; }
    void matmul(const AffineTriple& in, const Matrix& w, AffineTriple& out) const override;
    void add_bias(AffineTriple& t, const Vector& bias) const override;
    Interval si_relu(const AffineTriple& in, AffineTriple& out, Interval iv,
                     LinearConstraintSet* record) const override;
};

/// Fixed-size worker pool with a blocking fork-join primitive.
class ThreadPool {
public:
    explicit ThreadPool(unsigned threads);
    ~ThreadPool();
    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    unsigned size() const { return static_cast<unsigned>(workers_.size()); }
    /// Runs fn(0) .. fn(count - 1) on the pool and waits for all of them.
    void run(std::size_t count, const std::function<void(std::size_t)>& fn);

private:
    void worker_loop();

    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::condition_variable wake_;
    std::condition_variable done_;
    const std::function<void(std::size_t)>* job_ = nullptr;
    std::size_t next_ = 0;
    std::size_t count_ = 0;
    std::size_t finished_ = 0;
    std::size_t generation_ = 0;
    bool stop_ = false;
};

/// Element-parallel kernels over row blocks; the three streams of a matmul
/// are dispatched as independent tasks.
class ParallelBackend final : public Backend {
public:
    explicit ParallelBackend(unsigned threads = 0, Index minRowsPerTask = 16);
    std::string name() const override { return "parallel"; }
    void matmul(const AffineTriple& in, const Matrix& w, AffineTriple& out) const override;
    void add_bias(AffineTriple& t, const Vector& bias) const override;
    Interval si_relu(const AffineTriple& in, AffineTriple& out, Interval iv,
                     LinearConstraintSet* record) const override;

private:
    std::vector<std::pair<Index, Index>> row_blocks(Index rows) const;

    std::unique_ptr<ThreadPool> pool_;
    Index minRows_;
};

std::shared_ptr<const Backend> make_backend(const std::string& name, unsigned threads = 0);

}  // namespace standda
