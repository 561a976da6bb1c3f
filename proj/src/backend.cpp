#include "standda/backend.hpp"

#include <algorithm>
#include <stdexcept>

namespace standda {

AffineTriple::AffineTriple(Matrix offsetIn, Matrix slopeIn, double zIn)
    : offset(std::move(offsetIn)), slope(std::move(slopeIn)), z(zIn) {
    require_dims(offset.rows() == slope.rows() && offset.cols() == slope.cols(),
                 "AffineTriple: offset and slope shapes differ");
    value = offset + slope * z;
}

double AffineTriple::consistency_error() const {
    if (value.size() == 0) return 0.0;
    return (value - (offset + slope * z)).cwiseAbs().maxCoeff();
}

void AffineTriple::resize(Index rows, Index cols) {
    value.resize(rows, cols);
    offset.resize(rows, cols);
    slope.resize(rows, cols);
}

namespace kernels {

void tiled_matmul(const Matrix& a, const Matrix& w, Matrix& out, Index rowBegin, Index rowEnd) {
    const Index inner = a.cols();
    const Index cols = w.cols();
    for (Index i0 = rowBegin; i0 < rowEnd; i0 += kTile) {
        const Index i1 = std::min(i0 + kTile, rowEnd);
        for (Index i = i0; i < i1; ++i) out.row(i).setZero();
        for (Index k0 = 0; k0 < inner; k0 += kTile) {
            const Index k1 = std::min(k0 + kTile, inner);
            for (Index j0 = 0; j0 < cols; j0 += kTile) {
                const Index j1 = std::min(j0 + kTile, cols);
                for (Index i = i0; i < i1; ++i) {
                    const double* arow = a.data() + i * inner;
                    double* orow = out.data() + i * cols;
                    for (Index k = k0; k < k1; ++k) {
                        const double aik = arow[k];
                        const double* wrow = w.data() + k * cols;
                        for (Index j = j0; j < j1; ++j) orow[j] += aik * wrow[j];
                    }
                }
            }
        }
    }
}

void add_bias(Matrix& m, const Vector& bias, Index rowBegin, Index rowEnd) {
    const Index cols = m.cols();
    for (Index i = rowBegin; i < rowEnd; ++i) {
        double* row = m.data() + i * cols;
        for (Index j = 0; j < cols; ++j) row[j] += bias(j);
    }
}

Interval si_relu(const AffineTriple& in, AffineTriple& out, Index rowBegin, Index rowEnd,
                 LinearConstraintSet* record) {
    Interval iv;
    const Index cols = in.cols();
    for (Index i = rowBegin; i < rowEnd; ++i) {
        for (Index j = 0; j < cols; ++j) {
            const Index e = i * cols + j;
            const double x = in.value.data()[e];
            const double a = in.offset.data()[e];
            const double b = in.slope.data()[e];
            const double f = sign_of(x);
            if (f < 0.0) {
                out.value.data()[e] = 0.0;
                out.offset.data()[e] = 0.0;
                out.slope.data()[e] = 0.0;
            } else {
                out.value.data()[e] = x;
                out.offset.data()[e] = a;
                out.slope.data()[e] = b;
            }
            // f * (a + b z) >= 0  <=>  (-f b) z <= f a
            apply_constraint(iv, -f * b, f * a);
            if (record) record->add(-f * b, f * a);
        }
    }
    return iv;
}

}  // namespace kernels

namespace {

void check_matmul(const AffineTriple& in, const Matrix& w) {
    require_dims(in.cols() == w.rows(), "affine_matmul: triple has " + std::to_string(in.cols()) +
                                            " columns, weight has " + std::to_string(w.rows()) + " rows");
}

void check_bias(const AffineTriple& t, const Vector& bias) {
    require_dims(t.cols() == bias.size(), "affine_add_bias: triple has " + std::to_string(t.cols()) +
                                              " columns, bias has " + std::to_string(bias.size()));
}

}  // namespace

void SequentialBackend::matmul(const AffineTriple& in, const Matrix& w, AffineTriple& out) const {
    check_matmul(in, w);
    out.resize(in.rows(), w.cols());
    out.z = in.z;
    kernels::tiled_matmul(in.value, w, out.value, 0, in.rows());
    kernels::tiled_matmul(in.offset, w, out.offset, 0, in.rows());
    kernels::tiled_matmul(in.slope, w, out.slope, 0, in.rows());
}

void SequentialBackend::add_bias(AffineTriple& t, const Vector& bias) const {
    check_bias(t, bias);
    kernels::add_bias(t.value, bias, 0, t.rows());
    kernels::add_bias(t.offset, bias, 0, t.rows());
}

Interval SequentialBackend::si_relu(const AffineTriple& in, AffineTriple& out, Interval iv,
                                    LinearConstraintSet* record) const {
    out.resize(in.rows(), in.cols());
    out.z = in.z;
    return iv.intersect(kernels::si_relu(in, out, 0, in.rows(), record));
}

ThreadPool::ThreadPool(unsigned threads) {
    if (threads == 0) threads = 1;
    workers_.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) workers_.emplace_back([this] { worker_loop(); });
}

ThreadPool::~ThreadPool() {
    {
        std::lock_guard lock(mutex_);
        stop_ = true;
    }
    wake_.notify_all();
    for (auto& w : workers_) w.join();
}

void ThreadPool::run(std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    std::unique_lock lock(mutex_);
    job_ = &fn;
    next_ = 0;
    count_ = count;
    finished_ = 0;
    ++generation_;
    wake_.notify_all();
    done_.wait(lock, [this] { return finished_ == count_; });
    job_ = nullptr;
}

void ThreadPool::worker_loop() {
    std::size_t seen = 0;
    std::unique_lock lock(mutex_);
    for (;;) {
        wake_.wait(lock, [&] { return stop_ || (generation_ != seen && job_ && next_ < count_); });
        if (stop_) return;
        while (job_ && next_ < count_) {
            const std::size_t task = next_++;
            const auto* job = job_;
            lock.unlock();
            (*job)(task);
            lock.lock();
            if (++finished_ == count_) done_.notify_all();
        }
        seen = generation_;
    }
}

ParallelBackend::ParallelBackend(unsigned threads, Index minRowsPerTask) : minRows_(std::max<Index>(1, minRowsPerTask)) {
    if (threads == 0) threads = std::max(2u, std::thread::hardware_concurrency());
    pool_ = std::make_unique<ThreadPool>(threads);
}

std::vector<std::pair<Index, Index>> ParallelBackend::row_blocks(Index rows) const {
    const Index maxBlocks = std::max<Index>(1, rows / minRows_);
    const Index blocks = std::min<Index>(maxBlocks, static_cast<Index>(pool_->size()));
    std::vector<std::pair<Index, Index>> out;
    const Index step = (rows + blocks - 1) / std::max<Index>(blocks, 1);
    for (Index r = 0; r < rows; r += step) out.emplace_back(r, std::min(rows, r + step));
    if (out.empty()) out.emplace_back(0, 0);
    return out;
}

void ParallelBackend::matmul(const AffineTriple& in, const Matrix& w, AffineTriple& out) const {
    check_matmul(in, w);
    out.resize(in.rows(), w.cols());
    out.z = in.z;
    const auto blocks = row_blocks(in.rows());
    const Matrix* src[3] = {&in.value, &in.offset, &in.slope};
    Matrix* dst[3] = {&out.value, &out.offset, &out.slope};
    pool_->run(3 * blocks.size(), [&](std::size_t task) {
        const std::size_t stream = task % 3;
        const auto [b, e] = blocks[task / 3];
        kernels::tiled_matmul(*src[stream], w, *dst[stream], b, e);
    });
}

void ParallelBackend::add_bias(AffineTriple& t, const Vector& bias) const {
    check_bias(t, bias);
    const auto blocks = row_blocks(t.rows());
    Matrix* dst[2] = {&t.value, &t.offset};
    pool_->run(2 * blocks.size(), [&](std::size_t task) {
        const auto [b, e] = blocks[task / 2];
        kernels::add_bias(*dst[task % 2], bias, b, e);
    });
}

Interval ParallelBackend::si_relu(const AffineTriple& in, AffineTriple& out, Interval iv,
                                  LinearConstraintSet* record) const {
    out.resize(in.rows(), in.cols());
    out.z = in.z;
    if (record) return iv.intersect(kernels::si_relu(in, out, 0, in.rows(), record));
    const auto blocks = row_blocks(in.rows());
    std::vector<Interval> partial(blocks.size());
    pool_->run(blocks.size(), [&](std::size_t task) {
        partial[task] = kernels::si_relu(in, out, blocks[task].first, blocks[task].second, nullptr);
    });
    // min/max are associative, so the fold order cannot change the result.
    for (const auto& p : partial) iv = iv.intersect(p);
    return iv;
}

std::shared_ptr<const Backend> make_backend(const std::string& name, unsigned threads) {
    if (name == "sequential") return std::make_shared<SequentialBackend>();
    if (name == "parallel") return std::make_shared<ParallelBackend>(threads);
    throw std::invalid_argument("unknown backend \"" + name + "\" (expected sequential or parallel)");
}

}  // namespace standda
