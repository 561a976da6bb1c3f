#include "oracles.hpp"
#include "standda/inference.hpp"
#include "standda/selection_events.hpp"

#include <doctest.h>

using namespace standda;

namespace {

struct DetectorState {
    std::vector<bool> extractorPattern, autoencoderPattern, residuals;
    oracle::Replay detection;

    bool operator==(const DetectorState& o) const {
        return extractorPattern == o.extractorPattern && autoencoderPattern == o.autoencoderPattern &&
               residuals == o.residuals && detection.flagged == o.detection.flagged &&
               detection.thresholdRow == o.detection.thresholdRow;
    }
};

DetectorState observe(const ModelBundle& b, const Matrix& stacked, Index ns, double rate) {
    DetectorState s;
    s.extractorPattern = oracle::activation_pattern(b.extractor, stacked);
    s.autoencoderPattern = oracle::activation_pattern(b.autoencoder, oracle::plain_forward(b.extractor, stacked));
    s.residuals = oracle::residual_signs(b, stacked);
    s.detection = oracle::replay(b, stacked, ns, rate);
    return s;
}

ModelBundle small_bundle(std::uint64_t seed) {
    ModelBundle b;
    b.extractor = random_network({3, 5, 2}, seed, true);
    b.autoencoder = random_network({2, 3, 2}, seed + 1, false);
    return b;
}

}  // namespace

TEST_CASE("identical extractor and reconstruction give the whole line") {
    std::mt19937_64 gen(1);
    const AffineTriple t(oracle::random_matrix(6, 3, gen), oracle::random_matrix(6, 3, gen), 0.0);
    Detection det = detect_from_errors(Vector::Zero(6), 3, 0.3);
    CHECK(det.flagged == std::vector<Index>{0, 1});
    const auto cs = ad_event_constraints(t, t, det.thresholdRow, det.flagged);
    CHECK(solve_constraints(cs) == Interval::whole());
}

TEST_CASE("two-row hand example") {
    // rows: 1 + z and 0.5 - z against a zero reconstruction; m = 1 flags row 0
    Matrix a(2, 1), b(2, 1);
    a << 1.0, 0.5;
    b << 1.0, -1.0;
    const AffineTriple tap(a, b, 0.0);
    const AffineTriple out(Matrix::Zero(2, 1), Matrix::Zero(2, 1), 0.0);
    const Detection det = detect_from_errors((a - Matrix::Zero(2, 1)).cwiseAbs().col(0), 1, 0.5);
    REQUIRE(det.flagged == std::vector<Index>{0});
    REQUIRE(det.thresholdRow == 0);
    CHECK(det.target.empty());
    AdEventDiagnostics diag;
    const Interval iv = solve_constraints(ad_event_constraints(tap, out, det.thresholdRow, det.flagged, &diag));
    CHECK(iv.lower() == doctest::Approx(-0.25).epsilon(1e-15));
    CHECK(iv.upper() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(diag.zeroResiduals == 0);

    const LinearErrors le = linear_reconstruction_errors(tap, out);
    CHECK(le.offset(0) == 1.0);
    CHECK(le.slope(0) == 1.0);
    CHECK(le.offset(1) == 0.5);
    CHECK(le.slope(1) == -1.0);
}

TEST_CASE("zero residuals take the inactive sign and are counted") {
    const AffineTriple tap(Matrix::Zero(2, 1), Matrix::Constant(2, 1, 1.0), 0.0);
    const AffineTriple out(Matrix::Zero(2, 1), Matrix::Zero(2, 1), 0.0);
    AdEventDiagnostics diag;
    const Interval iv = solve_constraints(ad_event_constraints(tap, out, 0, {0}, &diag));
    CHECK(diag.zeroResiduals == 2);
    CHECK(iv.upper() == 0.0);
}

TEST_CASE("detector windows replay against a plain forward pass") {
    std::mt19937_64 gen(2);
    const Index ns = 12, nt = 8, d = 3;
    const double rate = 0.1;
    int probed = 0;
    for (int inst = 0; inst < 20; ++inst) {
        const ModelBundle bundle = small_bundle(200 + static_cast<std::uint64_t>(inst));
        NuisanceLine line;
        line.offset = oracle::flatten_rows(oracle::random_matrix(ns + nt, d, gen));
        line.direction = oracle::flatten_rows(oracle::random_matrix(ns + nt, d, gen, 0.5));
        line.zMin = -10;
        line.zMax = 10;
        LineSearcher searcher(bundle, ns, nt, d, SearchOptions{rate});
        searcher.set_line(line);
        const double z0 = std::normal_distribution<double>(0, 2)(gen);
        const Window w = searcher.evaluate(z0);
        REQUIRE(w.interval.contains(z0));
        const auto at = [&](double z) { return mat_rows(line.offset + line.direction * z, ns + nt, d); };
        const DetectorState ref = observe(bundle, at(z0), ns, rate);
        CHECK(ref.detection.flagged == w.detection.flagged);
        CHECK(ref.detection.thresholdRow == w.detection.thresholdRow);
        CHECK(ref.detection.target == w.detection.target);

        const double lo = std::max(w.interval.lower(), z0 - 20), hi = std::min(w.interval.upper(), z0 + 20);
        for (int p = 1; p <= 50; ++p) {
            const double z = lo + (hi - lo) * p / 51.0;
            CHECK(observe(bundle, at(z), ns, rate) == ref);
            ++probed;
        }
        if (std::isfinite(w.interval.upper())) CHECK_FALSE(observe(bundle, at(w.interval.upper() + 1e-4), ns, rate) == ref);
        if (std::isfinite(w.interval.lower())) CHECK_FALSE(observe(bundle, at(w.interval.lower() - 1e-4), ns, rate) == ref);
    }
    CHECK(probed == 1000);
}

TEST_CASE("sign event examples") {
    const Index ns = 1, nt = 2, d = 1;
    SUBCASE("constant data line gives the whole line") {
        Matrix a(3, 1);
        a << 0.0, 3.0, 1.0;
        const AffineTriple t(a, Matrix::Zero(3, 1), 0.0);
        const auto cs = sign_event_constraints(t, 0, {0}, Vector::Ones(1), ns, nt, d);
        CHECK(solve_constraints(cs) == Interval::whole());
    }
    SUBCASE("contrast 2 - z keeps a positive sign below 2") {
        Matrix a(3, 1), b(3, 1);
        a << 5.0, 2.0, 0.0;
        b << 7.0, -1.0, 0.0;
        const AffineTriple t(a, b, 0.0);
        const auto cs = sign_event_constraints(t, 0, {0}, Vector::Ones(1), ns, nt, d);
        const Interval iv = solve_constraints(cs);
        CHECK(iv.lower() == -kInf);
        CHECK(iv.upper() == 2.0);
    }
    SUBCASE("O covering the target is rejected") {
        const AffineTriple t(Matrix::Zero(3, 1), Matrix::Zero(3, 1), 0.0);
        CHECK_THROWS_AS(sign_event_constraints(t, 0, {0, 1}, Vector::Ones(1), ns, nt, d), std::invalid_argument);
        CHECK_THROWS_AS(target_contrast(Matrix::Zero(3, 1), 0, {0, 1}, ns, nt), std::invalid_argument);
    }
}

TEST_CASE("target_contrast against a direct mean") {
    std::mt19937_64 gen(3);
    const Matrix m = oracle::random_matrix(9, 4, gen);
    const Vector c = target_contrast(m, 2, {2, 4}, 4, 5);
    for (Index k = 0; k < 4; ++k) {
        const double mean = (m(4, k) + m(5, k) + m(7, k)) / 3.0;
        CHECK(c(k) == doctest::Approx(m(6, k) - mean).epsilon(1e-14));
    }
}

TEST_CASE("sign event interval replays contrast signs") {
    std::mt19937_64 gen(4);
    const Index ns = 5, nt = 7, d = 4;
    for (int inst = 0; inst < 30; ++inst) {
        const Matrix a = oracle::random_matrix(ns + nt, d, gen), b = oracle::random_matrix(ns + nt, d, gen);
        const double z0 = std::normal_distribution<double>(0, 1)(gen);
        const AffineTriple t(a, b, z0);
        const std::vector<Index> O{1, 3};
        const Index j = inst % 2 ? 1 : 3;
        const auto ref = oracle::contrast_signs(t.value, ns, nt, j, O);
        Vector signs(d);
        for (Index k = 0; k < d; ++k) signs(k) = ref[static_cast<std::size_t>(k)] ? 1.0 : -1.0;
        const Interval iv = solve_constraints(sign_event_constraints(t, j, O, signs, ns, nt, d));
        REQUIRE(iv.contains(z0));
        const double lo = std::max(iv.lower(), z0 - 20), hi = std::min(iv.upper(), z0 + 20);
        for (int p = 1; p <= 20; ++p) {
            const double z = lo + (hi - lo) * p / 21.0;
            CHECK(oracle::contrast_signs(a + b * z, ns, nt, j, O) == ref);
        }
        if (std::isfinite(iv.upper())) CHECK(oracle::contrast_signs(a + b * (iv.upper() + 1e-4), ns, nt, j, O) != ref);
        if (std::isfinite(iv.lower())) CHECK(oracle::contrast_signs(a + b * (iv.lower() - 1e-4), ns, nt, j, O) != ref);
    }
}
