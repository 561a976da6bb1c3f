#pragma once

#include "standda/interval.hpp"

#include <stdexcept>
#include <string>

namespace standda {

/// log P(N(0,1) >= x), accurate in both tails.
double log_upper_tail(double x);

/// log P(a <= N(0,1) <= b) for standardized a <= b; -inf when a == b.
double log_interval_mass(double a, double b);

/// log P(N(0, sigma^2) in set).
double log_gaussian_mass(const IntervalSet& set, double sigma);

/// Thrown when the truncation region carries no representable mass.
class RegionMassError : public std::runtime_error {
public:
    RegionMassError(const std::string& msg, double lo, double hi)
        : std::runtime_error(msg), lo_(lo), hi_(hi) {}
    /// Standardized hull of the offending region.
    double lower() const { return lo_; }
    double upper() const { return hi_; }

private:
    double lo_, hi_;
};

/// P(|Z| >= zObs | Z in region), Z ~ N(0, variance); clamped to [0, 1].
double selective_p(double variance, double zObs, const IntervalSet& region);

/// 2 P(N(0,1) >= zObs / sigma).
double naive_p(double variance, double zObs);

/// min(1, 2^nt * naive).
double bonferroni_p(double naive, long nt);

}  // namespace standda
