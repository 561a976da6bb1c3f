#include "standda/truncated_normal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace standda {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
// Beyond this erfc(x / sqrt 2) nears the subnormal range.
constexpr double kTailSwitch = 37.0;

// Mills ratio Q(x) / phi(x) by backward evaluation of the continued
// fraction 1 / (x + 1 / (x + 2 / (x + 3 / ...))).
double mills_ratio(double x) {
    double t = x;
    for (int k = 80; k >= 1; --k) t = x + k / t;
    return 1.0 / t;
}

double log_sum_exp(const std::vector<double>& terms) {
    double mx = -kInf;
    for (double t : terms) mx = std::max(mx, t);
    if (mx == -kInf) return -kInf;
    double s = 0.0;
    for (double t : terms) s += std::exp(t - mx);
    return mx + std::log(s);
}

}  // namespace

double log_upper_tail(double x) {
    if (x == kInf) return -kInf;
    if (x == -kInf) return 0.0;
    if (x < -1.0) return std::log1p(-0.5 * std::erfc(-x * kInvSqrt2));
    if (x < kTailSwitch) return std::log(0.5 * std::erfc(x * kInvSqrt2));
    return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(mills_ratio(x));
}

double log_interval_mass(double a, double b) {
    if (!(a < b)) return -kInf;
    if (a >= 0.0) {
        const double la = log_upper_tail(a);
        const double lb = log_upper_tail(b);
        if (lb == -kInf) return la;
        return la + std::log1p(-std::exp(lb - la));
    }
    if (b <= 0.0) return log_interval_mass(-b, -a);
    // Straddles zero: no cancellation between the two half masses.
    const double upper = b == kInf ? 0.5 : 0.5 * std::erf(b * kInvSqrt2);
    const double lower = a == -kInf ? 0.5 : 0.5 * std::erf(-a * kInvSqrt2);
    return std::log(upper + lower);
}

double log_gaussian_mass(const IntervalSet& set, double sigma) {
    std::vector<double> terms;
    terms.reserve(set.pieces().size());
    for (const auto& p : set.pieces()) terms.push_back(log_interval_mass(p.lower() / sigma, p.upper() / sigma));
    return log_sum_exp(terms);
}

double selective_p(double variance, double zObs, const IntervalSet& region) {
    if (!(variance > 0.0)) throw std::invalid_argument("selective_p: variance must be positive");
    const double sigma = std::sqrt(variance);
    const double t = std::abs(zObs);
    const double logDen = log_gaussian_mass(region, sigma);
    if (logDen == -kInf) {
        const double lo = region.empty() ? 0.0 : region.pieces().front().lower() / sigma;
        const double hi = region.empty() ? 0.0 : region.pieces().back().upper() / sigma;
        throw RegionMassError("truncation region has no representable Gaussian mass", lo, hi);
    }
    if (t == 0.0) return 1.0;
    IntervalSet tails(0.0);
    const IntervalSet upper = region.intersect(Interval(t, kInf));
    const IntervalSet lower = region.intersect(Interval(-kInf, -t));
    for (const auto& p : upper.pieces()) tails.add(p);
    for (const auto& p : lower.pieces()) tails.add(p);
    const double logNum = log_gaussian_mass(tails, sigma);
    if (logNum == -kInf) return 0.0;
    return std::clamp(std::exp(logNum - logDen), 0.0, 1.0);
}

double naive_p(double variance, double zObs) {
    if (!(variance > 0.0)) throw std::invalid_argument("naive_p: variance must be positive");
    return std::min(1.0, std::erfc(std::abs(zObs) / std::sqrt(variance) * kInvSqrt2));
}

double bonferroni_p(double naive, long nt) {
    if (naive <= 0.0) return 0.0;
    const double logScaled = static_cast<double>(nt) * std::numbers::ln2 + std::log(naive);
    return logScaled >= 0.0 ? 1.0 : std::exp(logScaled);
}

}  // namespace standda
