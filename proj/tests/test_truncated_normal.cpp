#include "oracles.hpp"
#include "standda/truncated_normal.hpp"

#include <doctest.h>

using namespace standda;

namespace {

IntervalSet region_of(const std::vector<std::pair<double, double>>& pieces) {
    IntervalSet s;
    for (const auto& [lo, hi] : pieces) s.add(Interval(lo, hi));
    return s;
}

std::vector<std::pair<double, double>> random_pieces(std::mt19937_64& gen, double sigma) {
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    std::uniform_int_distribution<int> count(1, 4);
    std::vector<double> cuts;
    const int k = count(gen);
    for (int i = 0; i < 2 * k; ++i) cuts.push_back(u(gen) * sigma);
    std::sort(cuts.begin(), cuts.end());
    if (gen() % 4 == 0) cuts.front() = -kInf;
    if (gen() % 4 == 0) cuts.back() = kInf;
    std::vector<std::pair<double, double>> pieces;
    for (int i = 0; i < k; ++i) pieces.emplace_back(cuts[2 * i], cuts[2 * i + 1]);
    return pieces;
}

}  // namespace

TEST_CASE("selective p examples") {
    const IntervalSet whole = region_of({{-kInf, kInf}});
    CHECK(selective_p(1.0, 0.0, whole) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(selective_p(1.0, 1.959964, whole) - 0.05) < 1e-6);
    CHECK(std::abs(selective_p(1.0, 1.0, region_of({{0.0, kInf}})) - 0.317310507862914) < 1e-9);
    CHECK(std::abs(selective_p(4.0, 2.0, region_of({{0.0, kInf}})) - 0.317310507862914) < 1e-9);
    // symmetric truncation leaves the two-sided p unchanged relative to the region mass
    CHECK(selective_p(1.0, 3.0, region_of({{-kInf, -2.5}, {2.5, kInf}})) ==
          doctest::Approx(static_cast<double>(oracle::hp_upper_tail(3.0) / oracle::hp_upper_tail(2.5))).epsilon(1e-12));
}

TEST_CASE("selective p stays in [0, 1] and is one when the region excludes the tails") {
    CHECK(selective_p(1.0, 0.5, region_of({{-0.4, 0.4}})) == 0.0);
    CHECK(selective_p(1.0, 0.5, region_of({{-0.5, 0.5}})) == 0.0);
    CHECK(selective_p(1.0, 0.0, region_of({{1.0, 2.0}})) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("naive and Bonferroni examples") {
    CHECK(naive_p(1.0, 0.0) == 1.0);
    CHECK(naive_p(1.0, 1.959964) == doctest::Approx(0.05).epsilon(1e-6));
    CHECK(naive_p(1.0, -1.959964) == doctest::Approx(0.05).epsilon(1e-6));
    CHECK(naive_p(9.0, 3.0) == doctest::Approx(0.317310507862914).epsilon(1e-12));
    CHECK(bonferroni_p(1e-10, 25) == doctest::Approx(3.3554432e-3).epsilon(1e-12));
    CHECK(bonferroni_p(0.01, 25) == 1.0);
    CHECK(bonferroni_p(0.01, 2000) == 1.0);
    CHECK(bonferroni_p(0.0, 2000) == 0.0);
}

TEST_CASE("log tails") {
    CHECK(log_upper_tail(0.0) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
    CHECK(log_upper_tail(-kInf) == 0.0);
    CHECK(log_upper_tail(kInf) == -kInf);
    for (double x : {-30.0, -5.0, -0.3, 0.7, 4.0, 12.0, 38.0, 60.0}) {
        const double expect = static_cast<double>(boost::multiprecision::log(oracle::hp_upper_tail(x)));
        CHECK(log_upper_tail(x) == doctest::Approx(expect).epsilon(1e-13));
    }
    CHECK(log_interval_mass(1.0, 1.0) == -kInf);
    CHECK(std::exp(log_interval_mass(-1.0, 1.0)) == doctest::Approx(0.682689492137086).epsilon(1e-13));
    CHECK(std::exp(log_interval_mass(8.0, 9.0)) ==
          doctest::Approx(static_cast<double>(oracle::hp_mass(8.0, 9.0))).epsilon(1e-12));
}

TEST_CASE("selective p against 50-digit arithmetic") {
    std::mt19937_64 gen(1);
    double worst = 0.0;
    for (int k = 0; k < 400; ++k) {
        const double sigma = std::exp(std::uniform_real_distribution<double>(-3, 3)(gen));
        auto pieces = random_pieces(gen, sigma);
        if (k % 5 == 0) pieces = {{std::uniform_real_distribution<double>(0, 10)(gen) * sigma, kInf}};
        // observed statistic inside the region
        const auto& [lo, hi] = pieces[static_cast<std::size_t>(gen() % pieces.size())];
        const double a = std::max(lo, -10 * sigma), b = std::min(hi, 10 * sigma);
        const double z = a + (b - a) * std::uniform_real_distribution<double>(0, 1)(gen);
        const double expect = oracle::hp_selective_p(sigma * sigma, z, pieces);
        const double got = selective_p(sigma * sigma, z, region_of(pieces));
        REQUIRE(expect > 0.0);
        const double rel = std::abs(got - expect) / expect;
        worst = std::max(worst, rel);
        CHECK(rel <= 1e-8);
    }
    MESSAGE("worst relative error " << worst);
}

TEST_CASE("region without mass raises") {
    CHECK_THROWS_AS(selective_p(1.0, 0.0, IntervalSet()), RegionMassError);
    try {
        selective_p(1.0, 50.0, region_of({{60.0, 70.0}}));
        // representable in log space; must not throw
    } catch (const RegionMassError&) {
        FAIL("far tail region should be representable");
    }
    try {
        selective_p(1.0, 0.0, region_of({{1.0, 1.0}}));
        FAIL("degenerate region accepted");
    } catch (const RegionMassError& e) {
        CHECK(e.lower() == 1.0);
        CHECK(e.upper() == 1.0);
    }
}
