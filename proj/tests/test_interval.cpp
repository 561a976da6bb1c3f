#include "oracles.hpp"
#include "standda/interval.hpp"

#include <doctest.h>

#include <sstream>

using namespace standda;

TEST_CASE("Interval basics") {
    Interval whole;
    CHECK(whole.lower() == -kInf);
    CHECK(whole.upper() == kInf);
    CHECK(whole.contains(1e300));
    Interval iv(0, 2);
    iv.raise_lower(1);
    CHECK(iv == Interval(1, 2));
    iv.lower_upper(0.5);
    CHECK(iv.empty());
    CHECK(Interval(3, 4).intersect(Interval::empty_set()).empty());
    CHECK(Interval::empty_set().intersect(whole).empty());
    CHECK(Interval(0, 1).intersect(Interval(0.5, 3)) == Interval(0.5, 1));
    CHECK(Interval(0, 1).intersect(Interval(2, 3)).empty());
    CHECK(Interval(1, 1).width() == 0.0);
    std::ostringstream os;
    os << Interval(0, 1) << Interval::empty_set();
    CHECK(os.str() == "[0, 1]{}");
}

TEST_CASE("solve_constraints examples") {
    LinearConstraintSet cs;
    cs.add(2, 4);
    cs.add(-1, 0);
    CHECK(solve_constraints(cs) == Interval(0, 2));
    LinearConstraintSet bad;
    bad.add(0, -1);
    CHECK(solve_constraints(bad).empty());
    LinearConstraintSet ok;
    ok.add(0, 0);
    CHECK(solve_constraints(ok) == Interval());
    LinearConstraintSet tiny;
    tiny.add(1e-16, -1.0);  // below the slope floor: treated as the constant 0 <= -1
    CHECK(solve_constraints(tiny).empty());
    LinearConstraintSet crossing;
    crossing.add(1, 0);
    crossing.add(-1, -1);
    CHECK(solve_constraints(crossing).empty());
}

TEST_CASE("solve_constraints agrees with a grid oracle and ignores order") {
    std::mt19937_64 gen(1);
    std::normal_distribution<double> n(0, 1);
    int nonEmpty = 0;
    for (int t = 0; t < 200; ++t) {
        LinearConstraintSet cs;
        const int k = 1 + static_cast<int>(gen() % 6);
        const double center = n(gen);
        for (int i = 0; i < k; ++i) {
            const double c = n(gen);
            // constraints satisfied at `center` most of the time
            cs.add(c, c * center + std::abs(n(gen)) - (t % 7 == 0 ? 1.5 : 0.0));
        }
        const Interval iv = solve_constraints(cs);
        const auto [lo, hi] = oracle::grid_hull(cs, -12.0, 12.0, 1e-4);
        if (iv.empty()) {
            CHECK(lo > hi);
            continue;
        }
        ++nonEmpty;
        if (iv.lower() > -12) CHECK(std::abs(lo - iv.lower()) <= 1e-4 + 1e-12);
        if (iv.upper() < 12) CHECK(std::abs(hi - iv.upper()) <= 1e-4 + 1e-12);

        std::vector<std::size_t> idx(cs.size());
        std::iota(idx.begin(), idx.end(), 0);
        for (int perm = 0; perm < 5; ++perm) {
            std::shuffle(idx.begin(), idx.end(), gen);
            LinearConstraintSet p;
            for (auto i : idx) p.add(cs.coeffs[i], cs.bounds[i]);
            CHECK(solve_constraints(p) == iv);
        }
    }
    CHECK(nonEmpty > 100);
}

TEST_CASE("IntervalSet keeps sorted disjoint pieces") {
    IntervalSet s(1e-9);
    s.add(Interval(5, 6));
    s.add(Interval(0, 1));
    s.add(Interval(2, 3));
    REQUIRE(s.pieces().size() == 3);
    CHECK(s.pieces()[0] == Interval(0, 1));
    CHECK(s.pieces()[2] == Interval(5, 6));
    s.add(Interval(1 + 1e-10, 2));  // gap below tolerance fuses [0,1] and [2,3]
    REQUIRE(s.pieces().size() == 2);
    CHECK(s.pieces()[0] == Interval(0, 3));
    s.add(Interval(-1, 10));
    REQUIRE(s.pieces().size() == 1);
    CHECK(s.measure() == 11.0);
    s.add(Interval::empty_set());
    CHECK(s.pieces().size() == 1);

    IntervalSet exact(0.0);
    exact.add(Interval(0, 1));
    exact.add(Interval(1 + 1e-12, 2));
    CHECK(exact.pieces().size() == 2);
    exact.add(Interval(1, 1 + 1e-12));
    CHECK(exact.pieces().size() == 1);
}

TEST_CASE("IntervalSet intersection matches pointwise membership") {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(-10, 10);
    for (int t = 0; t < 50; ++t) {
        IntervalSet a, b;
        for (int i = 0; i < 4; ++i) {
            double x = u(gen), y = u(gen);
            a.add(Interval(std::min(x, y), std::max(x, y)));
            x = u(gen);
            y = u(gen);
            b.add(Interval(std::min(x, y), std::max(x, y)));
        }
        const IntervalSet c = a.intersect(b);
        for (std::size_t i = 1; i < c.pieces().size(); ++i) CHECK(c.pieces()[i - 1].upper() < c.pieces()[i].lower());
        for (int k = 0; k < 400; ++k) {
            const double z = u(gen);
            CHECK(c.contains(z) == (a.contains(z) && b.contains(z)));
        }
    }
}
