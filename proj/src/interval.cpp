#include "standda/interval.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace standda {

Interval::Interval(double lower, double upper) : lower_(lower), upper_(upper), empty_(!(lower <= upper)) {}

Interval Interval::empty_set() {
    Interval iv;
    iv.empty_ = true;
    return iv;
}

void Interval::raise_lower(double v) {
    lower_ = std::max(lower_, v);
    if (lower_ > upper_) empty_ = true;
}

void Interval::lower_upper(double v) {
    upper_ = std::min(upper_, v);
    if (lower_ > upper_) empty_ = true;
}

Interval Interval::intersect(const Interval& other) const {
    if (empty_ || other.empty_) return empty_set();
    return {std::max(lower_, other.lower_), std::min(upper_, other.upper_)};
}

std::ostream& operator<<(std::ostream& os, const Interval& iv) {
    if (iv.empty()) return os << "{}";
    return os << '[' << iv.lower() << ", " << iv.upper() << ']';
}

void LinearConstraintSet::append(const LinearConstraintSet& other) {
    coeffs.insert(coeffs.end(), other.coeffs.begin(), other.coeffs.end());
    bounds.insert(bounds.end(), other.bounds.begin(), other.bounds.end());
}

void apply_constraint(Interval& iv, double coeff, double bound) {
    if (std::abs(coeff) < kSlopeEpsilon) {
        if (bound < 0.0) iv.make_empty();
    } else if (coeff > 0.0) {
        iv.lower_upper(bound / coeff);
    } else {
        iv.raise_lower(bound / coeff);
    }
}

Interval solve_constraints(const LinearConstraintSet& cs) {
    Interval iv;
    for (std::size_t i = 0; i < cs.size(); ++i) apply_constraint(iv, cs.coeffs[i], cs.bounds[i]);
    return iv.empty() ? Interval::empty_set() : iv;
}

void IntervalSet::add(const Interval& iv) {
    if (iv.empty()) return;
    double lo = iv.lower(), hi = iv.upper();
    std::vector<Interval> out;
    out.reserve(pieces_.size() + 1);
    bool placed = false;
    for (const auto& p : pieces_) {
        if (p.upper() + tol_ < lo) {
            out.push_back(p);
        } else if (hi + tol_ < p.lower()) {
            if (!placed) {
                out.emplace_back(lo, hi);
                placed = true;
            }
            out.push_back(p);
        } else {
            lo = std::min(lo, p.lower());
            hi = std::max(hi, p.upper());
        }
    }
    if (!placed) out.emplace_back(lo, hi);
    pieces_ = std::move(out);
}

IntervalSet IntervalSet::intersect(const Interval& iv) const {
    IntervalSet out(tol_);
    for (const auto& p : pieces_) {
        Interval x = p.intersect(iv);
        if (!x.empty()) out.pieces_.push_back(x);
    }
    return out;
}

IntervalSet IntervalSet::intersect(const IntervalSet& other) const {
    IntervalSet out(tol_);
    for (const auto& p : other.pieces_) {
        IntervalSet part = intersect(p);
        for (const auto& q : part.pieces_) out.add(q);
    }
    return out;
}

bool IntervalSet::contains(double z) const {
    return std::any_of(pieces_.begin(), pieces_.end(), [z](const Interval& p) { return p.contains(z); });
}

double IntervalSet::measure() const {
    double m = 0.0;
    for (const auto& p : pieces_) m += p.width();
    return m;
}

}  // namespace standda
