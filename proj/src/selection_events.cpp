#include "standda/selection_events.hpp"

#include <algorithm>
#include <stdexcept>

namespace standda {

LinearErrors linear_reconstruction_errors(const AffineTriple& tap, const AffineTriple& out) {
    require_dims(tap.rows() == out.rows() && tap.cols() == out.cols(),
                 "ad_event_constraints: extractor and autoencoder triples differ in shape");
    const Index n = tap.rows(), cols = tap.cols();
    LinearErrors le{Vector::Zero(n), Vector::Zero(n)};
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < cols; ++j) {
            const double s = sign_of(tap.value(i, j) - out.value(i, j));
            le.offset(i) += s * (tap.offset(i, j) - out.offset(i, j));
            le.slope(i) += s * (tap.slope(i, j) - out.slope(i, j));
        }
    }
    return le;
}

LinearConstraintSet ad_event_constraints(const AffineTriple& tap, const AffineTriple& out,
                                         Index thresholdRow, const std::vector<Index>& flagged,
                                         AdEventDiagnostics* diag) {
    require_dims(tap.rows() == out.rows() && tap.cols() == out.cols(),
                 "ad_event_constraints: extractor and autoencoder triples differ in shape");
    const Index n = tap.rows(), cols = tap.cols();
    require_dims(thresholdRow >= 0 && thresholdRow < n, "ad_event_constraints: threshold row out of range");

    LinearConstraintSet cs;
    cs.coeffs.reserve(static_cast<std::size_t>(n * cols + n));
    cs.bounds.reserve(static_cast<std::size_t>(n * cols + n));
    LinearErrors le{Vector::Zero(n), Vector::Zero(n)};
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < cols; ++j) {
            const double residual = tap.value(i, j) - out.value(i, j);
            if (diag && residual == 0.0) ++diag->zeroResiduals;
            const double s = sign_of(residual);
            const double da = tap.offset(i, j) - out.offset(i, j);
            const double db = tap.slope(i, j) - out.slope(i, j);
            // s * (da + db z) >= 0
            cs.add(-s * db, s * da);
            le.offset(i) += s * da;
            le.slope(i) += s * db;
        }
    }

    std::vector<char> isFlagged(static_cast<std::size_t>(n), 0);
    for (Index r : flagged) isFlagged[static_cast<std::size_t>(r)] = 1;
    const double hk = le.offset(thresholdRow), gk = le.slope(thresholdRow);
    for (Index i = 0; i < n; ++i) {
        if (i == thresholdRow) continue;
        const double hi = le.offset(i), gi = le.slope(i);
        if (isFlagged[static_cast<std::size_t>(i)]) {
            // R_i(z) >= R_k(z)
            cs.add(gk - gi, hi - hk);
        } else {
            // R_i(z) <= R_k(z); strictness is unobservable in floating point
            cs.add(gi - gk, hk - hi);
        }
    }
    return cs;
}

namespace {

std::vector<Index> complement_rows(const std::vector<Index>& O, Index nt) {
    std::vector<char> in(static_cast<std::size_t>(nt), 0);
    for (Index j : O) {
        if (j < 0 || j >= nt) throw std::out_of_range("anomaly index outside the target domain");
        in[static_cast<std::size_t>(j)] = 1;
    }
    std::vector<Index> rest;
    for (Index l = 0; l < nt; ++l)
        if (!in[static_cast<std::size_t>(l)]) rest.push_back(l);
    if (rest.empty()) throw std::invalid_argument("anomaly set covers every target row; contrast undefined");
    return rest;
}

}  // namespace

Vector target_contrast(const Matrix& stacked, Index anomaly, const std::vector<Index>& O, Index ns,
                       Index nt) {
    const std::vector<Index> rest = complement_rows(O, nt);
    Vector mean = Vector::Zero(stacked.cols());
    for (Index l : rest) mean += stacked.row(ns + l).transpose();
    mean /= static_cast<double>(rest.size());
    return stacked.row(ns + anomaly).transpose() - mean;
}

LinearConstraintSet sign_event_constraints(const AffineTriple& data, Index anomaly,
                                           const std::vector<Index>& O, const Vector& signs,
                                           Index ns, Index nt, Index d) {
    require_dims(data.rows() == ns + nt && data.cols() == d,
                 "sign_event_constraints: data triple shape does not match n_s + n_t by d");
    require_dims(signs.size() == d, "sign_event_constraints: sign vector length != d");
    const Vector ca = target_contrast(data.offset, anomaly, O, ns, nt);
    const Vector cb = target_contrast(data.slope, anomaly, O, ns, nt);
    LinearConstraintSet cs;
    for (Index k = 0; k < d; ++k) cs.add(-signs(k) * cb(k), signs(k) * ca(k));
    return cs;
}

}  // namespace standda
