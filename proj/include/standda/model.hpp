#pragma once

#include "standda/linalg.hpp"

#include <cstdint>

namespace standda {

/// Source and target data matrices sharing the feature dimension d.
struct DataPair {
    Matrix source;  // n_s x d
    Matrix target;  // n_t x d

    Index ns() const { return source.rows(); }
    Index nt() const { return target.rows(); }
    Index d() const { return source.cols(); }
    Index total_rows() const { return source.rows() + target.rows(); }

    /// Throws DimensionError unless column counts agree and n_t >= 2.
    void validate() const;

    /// Source rows stacked over target rows, (n_s + n_t) x d.
    Matrix stacked() const;
};

/// Separable (matrix-normal) noise covariance for both domains:
/// Sigma = blockdiag(U^s (x) V^s, U^t (x) V^t).
class CovarianceSpec {
public:
    CovarianceSpec() = default;
    CovarianceSpec(Matrix rowSource, Matrix colSource, Matrix rowTarget, Matrix colTarget);

    /// U = I, V = I for both domains.
    static CovarianceSpec identity(Index ns, Index nt, Index d);

    const Matrix& row_source() const { return rowSource_; }
    const Matrix& col_source() const { return colSource_; }
    const Matrix& row_target() const { return rowTarget_; }
    const Matrix& col_target() const { return colTarget_; }

    Index ns() const { return rowSource_.rows(); }
    Index nt() const { return rowTarget_.rows(); }
    Index d() const { return colSource_.rows(); }

    /// Scales every block by c (Sigma -> c * Sigma).
    CovarianceSpec scaled(double c) const;

private:
    Matrix rowSource_, colSource_, rowTarget_, colTarget_;
    // Cached identity flags; the identity fast path skips the Kronecker product.
    bool rowSourceId_ = false, colSourceId_ = false, rowTargetId_ = false, colTargetId_ = false;

    friend Vector sigma_times(const CovarianceSpec&, const Vector&);
};

/// Row-concatenated vectorization.
Vector vec_rows(const Matrix& m);
/// Inverse of vec_rows; throws DimensionError when v.size() != rows * cols.
Matrix mat_rows(const Vector& v, Index rows, Index cols);

/// Sigma * v evaluated blockwise as vec_rows(U Z V^T); never forms U (x) V.
Vector sigma_times(const CovarianceSpec& spec, const Vector& v);

/// Checks symmetry (max deviation < 1e-10) and eigenvalue floor (>= -1e-10).
/// Throws std::invalid_argument naming `what` on failure.
void validate_psd(const Matrix& m, const std::string& what);

/// Returns L with L L^T = m (Cholesky, or eigen-factor with negatives clamped).
Matrix psd_factor(const Matrix& m);

/// mean + L_r E L_c^T with E i.i.d. standard normal, drawn from a generator
/// seeded with `seed`.
Matrix sample_matrix_normal(const Matrix& mean, const Matrix& rowCov, const Matrix& colCov,
                            std::uint64_t seed);

/// Xi_ij = rho^|i-j|.
Matrix ar1_covariance(Index d, double rho);

}  // namespace standda
