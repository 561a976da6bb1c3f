#pragma once

#include <iosfwd>
#include <limits>
#include <vector>

namespace standda {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Closed interval on the z-line; empty is explicit and absorbing.
class Interval {
public:
    Interval() = default;  // the whole line
    Interval(double lower, double upper);

    static Interval whole() { return {}; }
    static Interval empty_set();

    double lower() const { return lower_; }
    double upper() const { return upper_; }
    bool empty() const { return empty_; }
    bool contains(double z) const { return !empty_ && lower_ <= z && z <= upper_; }
    double width() const { return empty_ ? 0.0 : upper_ - lower_; }

    /// Tighten with z >= v / z <= v.
    void raise_lower(double v);
    void lower_upper(double v);
    void make_empty() { empty_ = true; }

    Interval intersect(const Interval& other) const;

    bool operator==(const Interval&) const = default;

private:
    double lower_ = -kInf;
    double upper_ = kInf;
    bool empty_ = false;
};

std::ostream& operator<<(std::ostream& os, const Interval& iv);

/// Rows of `coeff * z <= bound`.
struct LinearConstraintSet {
    std::vector<double> coeffs;
    std::vector<double> bounds;

    void add(double coeff, double bound) {
        coeffs.push_back(coeff);
        bounds.push_back(bound);
    }
    void append(const LinearConstraintSet& other);
    std::size_t size() const { return coeffs.size(); }
};

/// Coefficients with |coeff| below this are treated as exact zeros.
inline constexpr double kSlopeEpsilon = 1e-14;

/// Folds one half-line constraint `coeff * z <= bound` into `iv`.
void apply_constraint(Interval& iv, double coeff, double bound);

/// Intersection of all half-lines; order independent.
Interval solve_constraints(const LinearConstraintSet& cs);

/// Sorted union of disjoint closed intervals. Pieces separated by a gap
/// smaller than the merge tolerance are fused.
class IntervalSet {
public:
    explicit IntervalSet(double mergeTolerance = 0.0) : tol_(mergeTolerance) {}

    void add(const Interval& iv);
    IntervalSet intersect(const Interval& iv) const;
    IntervalSet intersect(const IntervalSet& other) const;

    bool contains(double z) const;
    bool empty() const { return pieces_.empty(); }
    double measure() const;
    const std::vector<Interval>& pieces() const { return pieces_; }
    double merge_tolerance() const { return tol_; }

private:
    double tol_;
    std::vector<Interval> pieces_;
};

}  // namespace standda
