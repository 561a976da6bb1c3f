#pragma once

#include "standda/backend.hpp"
#include "standda/interval.hpp"
#include "standda/network.hpp"

#include <vector>

namespace standda {

struct AdEventDiagnostics {
    std::size_t zeroResiduals = 0;  // residuals exactly zero at z (sign taken as -1)
};

/// Constraints keeping the l1 detector's outcome fixed along the line:
/// every residual sign, and the order of each row relative to the threshold
/// row. `tap` is the extractor output, `out` the autoencoder output.
LinearConstraintSet ad_event_constraints(const AffineTriple& tap, const AffineTriple& out,
                                         Index thresholdRow, const std::vector<Index>& flagged,
                                         AdEventDiagnostics* diag = nullptr);

/// Row-wise residual sums R_i(z) = h_i + g_i z under the residual signs at z.
struct LinearErrors {
    Vector offset;  // h
    Vector slope;   // g
};
LinearErrors linear_reconstruction_errors(const AffineTriple& tap, const AffineTriple& out);

/// Constraints keeping the signs of X^t_j - mean(X^t over O^c) fixed.
/// `data` holds the raw stacked rows (source on top). `anomaly` and `O` are
/// 0-based target indices. Throws std::invalid_argument when O covers the
/// whole target.
LinearConstraintSet sign_event_constraints(const AffineTriple& data, Index anomaly,
                                           const std::vector<Index>& O, const Vector& signs,
                                           Index ns, Index nt, Index d);

/// Row functional e_j - mean over target rows not in O, applied to a stacked
/// (n_s + n_t) x d matrix; returns the length-d contrast.
Vector target_contrast(const Matrix& stacked, Index anomaly, const std::vector<Index>& O, Index ns,
                       Index nt);

}  // namespace standda
