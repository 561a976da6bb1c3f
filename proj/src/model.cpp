#include "standda/model.hpp"

#include <cmath>
#include <random>

namespace standda {

namespace {

bool is_identity(const Matrix& m) {
    return m.rows() == m.cols() && m.isIdentity(0.0);
}

// U Z V^T with identity shortcuts.
Matrix kron_apply(const Matrix& u, bool uId, const Matrix& v, bool vId, const Matrix& z) {
    Matrix out = uId ? z : Matrix(u * z);
    if (!vId) out = out * v.transpose();
    return out;
}

}  // namespace

void DataPair::validate() const {
    require_dims(source.cols() == target.cols(),
                 "DataPair: source has " + std::to_string(source.cols()) +
                     " columns but target has " + std::to_string(target.cols()));
    require_dims(target.rows() >= 2, "DataPair: target needs at least 2 rows");
    require_dims(source.cols() > 0, "DataPair: zero feature dimension");
}

Matrix DataPair::stacked() const {
    Matrix out(total_rows(), d());
    if (ns() > 0) out.topRows(ns()) = source;
    out.bottomRows(nt()) = target;
    return out;
}

CovarianceSpec::CovarianceSpec(Matrix rowSource, Matrix colSource, Matrix rowTarget,
                               Matrix colTarget)
    : rowSource_(std::move(rowSource)),
      colSource_(std::move(colSource)),
      rowTarget_(std::move(rowTarget)),
      colTarget_(std::move(colTarget)) {
    validate_psd(rowSource_, "rowCovSource");
    validate_psd(colSource_, "colCovSource");
    validate_psd(rowTarget_, "rowCovTarget");
    validate_psd(colTarget_, "colCovTarget");
    require_dims(colSource_.rows() == colTarget_.rows(),
                 "CovarianceSpec: source and target column covariances differ in size");
    rowSourceId_ = is_identity(rowSource_);
    colSourceId_ = is_identity(colSource_);
    rowTargetId_ = is_identity(rowTarget_);
    colTargetId_ = is_identity(colTarget_);
}

CovarianceSpec CovarianceSpec::identity(Index ns, Index nt, Index d) {
    return CovarianceSpec(Matrix::Identity(ns, ns), Matrix::Identity(d, d),
                          Matrix::Identity(nt, nt), Matrix::Identity(d, d));
}

CovarianceSpec CovarianceSpec::scaled(double c) const {
    // Scaling the row factors alone scales each Kronecker block by c.
    return CovarianceSpec(rowSource_ * c, colSource_, rowTarget_ * c, colTarget_);
}

Vector vec_rows(const Matrix& m) {
    return Eigen::Map<const Vector>(m.data(), m.size());
}

Matrix mat_rows(const Vector& v, Index rows, Index cols) {
    require_dims(rows >= 0 && cols >= 0 && v.size() == rows * cols,
                 "mat_rows: length " + std::to_string(v.size()) + " != " +
                     std::to_string(rows) + " x " + std::to_string(cols));
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

Vector sigma_times(const CovarianceSpec& spec, const Vector& v) {
    const Index ns = spec.ns(), nt = spec.nt(), d = spec.d();
    require_dims(v.size() == (ns + nt) * d,
                 "sigma_times: vector length " + std::to_string(v.size()) + " != (n_s + n_t) * d = " +
                     std::to_string((ns + nt) * d));
    Vector out(v.size());
    if (ns > 0) {
        Matrix zs = Eigen::Map<const Matrix>(v.data(), ns, d);
        Matrix rs = kron_apply(spec.rowSource_, spec.rowSourceId_, spec.colSource_,
                               spec.colSourceId_, zs);
        out.head(ns * d) = Eigen::Map<const Vector>(rs.data(), rs.size());
    }
    Matrix zt = Eigen::Map<const Matrix>(v.data() + ns * d, nt, d);
    Matrix rt = kron_apply(spec.rowTarget_, spec.rowTargetId_, spec.colTarget_,
                           spec.colTargetId_, zt);
    out.tail(nt * d) = Eigen::Map<const Vector>(rt.data(), rt.size());
    return out;
}

void validate_psd(const Matrix& m, const std::string& what) {
    if (m.rows() != m.cols()) throw std::invalid_argument(what + ": matrix is not square");
    if (m.size() == 0) return;
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym >= 1e-10) throw std::invalid_argument(what + ": matrix is not symmetric");
    if (m.isDiagonal(0.0)) {
        if (m.diagonal().minCoeff() < -1e-10) throw std::invalid_argument(what + ": matrix has a negative eigenvalue");
        return;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10)
        throw std::invalid_argument(what + ": matrix has a negative eigenvalue");
}

Matrix psd_factor(const Matrix& m) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) return Matrix(llt.matrixL());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw std::invalid_argument("psd_factor: eigen decomposition failed");
    if (es.eigenvalues().minCoeff() < -1e-10)
        throw std::invalid_argument("psd_factor: matrix has a negative eigenvalue");
    Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal();
}

Matrix sample_matrix_normal(const Matrix& mean, const Matrix& rowCov, const Matrix& colCov,
                            std::uint64_t seed) {
    require_dims(rowCov.rows() == mean.rows() && colCov.rows() == mean.cols(),
                 "sample_matrix_normal: covariance shapes do not match the mean");
    validate_psd(rowCov, "rowCov");
    validate_psd(colCov, "colCov");
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix e(mean.rows(), mean.cols());
    for (Index i = 0; i < e.size(); ++i) e.data()[i] = normal(gen);
    // Identity factors are common (i.i.d. rows) and their Cholesky is O(n^3).
    if (!rowCov.isIdentity(0.0)) e = psd_factor(rowCov) * e;
    if (!colCov.isIdentity(0.0)) e = e * psd_factor(colCov).transpose();
    return mean + e;
}

Matrix ar1_covariance(Index d, double rho) {
    Matrix xi(d, d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) xi(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
    return xi;
}

}  // namespace standda
