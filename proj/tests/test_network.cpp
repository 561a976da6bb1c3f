#include "oracles.hpp"
#include "standda/network.hpp"

#include <doctest.h>

#include <filesystem>

using namespace standda;

namespace {

std::string affine_json(Index in, Index out, double v) {
    std::string w = "[";
    for (Index i = 0; i < in; ++i) {
        w += i ? ",[" : "[";
        for (Index j = 0; j < out; ++j) w += (j ? "," : "") + std::to_string(v);
        w += "]";
    }
    w += "]";
    std::string b = "[";
    for (Index j = 0; j < out; ++j) b += (j ? "," : "") + std::string("0.5");
    b += "]";
    return R"({"kind":"affine","weight":)" + w + R"(,"bias":)" + b + "}";
}

const std::string kRelu = R"({"kind":"relu"})";

std::string bundle_json(const std::string& ext, const std::string& ae) {
    return R"({"version":"stand-da-bundle/1","extractor":[)" + ext + R"(],"autoencoder":[)" + ae +
           R"(],"metadata":{"note":"test"}})";
}

ModelBundle random_bundle(std::uint64_t seed) {
    ModelBundle b;
    b.extractor = random_network({5, 4, 3}, seed, true);
    b.autoencoder = random_network({3, 2, 3}, seed + 1, false);
    return b;
}

}  // namespace

TEST_CASE("load_bundle reads layer chains") {
    const auto b = parse_bundle(bundle_json(affine_json(10, 4, 0.1) + "," + kRelu + "," + affine_json(4, 3, 0.2),
                                            affine_json(3, 2, 0.3) + "," + kRelu + "," + affine_json(2, 3, 0.1)));
    CHECK(b.extractor.input_dim() == 10);
    CHECK(b.extractor.output_dim() == 3);
    CHECK(b.extractor.affine_count() == 2);
    CHECK(b.extractor.layers().size() == 3);
    CHECK(std::holds_alternative<ReluLayer>(b.extractor.layers()[1]));
    CHECK(b.metadata.at("note") == "test");
}

TEST_CASE("load_bundle rejects malformed bundles with the layer index") {
    // autoencoder input does not match the extractor output
    CHECK_THROWS_AS(parse_bundle(bundle_json(affine_json(10, 4, 0.1), affine_json(3, 4, 0.1))), BundleError);
    CHECK_THROWS_WITH_AS(parse_bundle(bundle_json(affine_json(10, 4, 0.1) + "," + affine_json(5, 4, 0.1),
                                                  affine_json(4, 4, 0.1))),
                         doctest::Contains("layer 1"), BundleError);
    CHECK_THROWS_WITH_AS(parse_bundle(bundle_json(affine_json(2, 2, 0.1) + R"(,{"kind":"tanh"})",
                                                  affine_json(2, 2, 0.1))),
                         doctest::Contains("layer 1"), BundleError);
    CHECK_THROWS_AS(parse_bundle(R"({"version":"stand-da-bundle/9","extractor":[],"autoencoder":[]})"), BundleError);
    CHECK_THROWS_AS(parse_bundle("not json"), BundleError);
    CHECK_THROWS_AS(parse_bundle(R"({"version":"stand-da-bundle/1","extractor":[{"kind":"affine","weight":[[1,2],[3]],"bias":[0,0]}],"autoencoder":[]})"),
                    BundleError);
    CHECK_THROWS_AS(load_bundle("/nonexistent/bundle.json"), BundleError);
}

TEST_CASE("save_bundle then load_bundle is bit-exact") {
    const auto dir = std::filesystem::temp_directory_path() / "standda_test_network";
    std::filesystem::create_directories(dir);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        ModelBundle b = random_bundle(seed);
        b.metadata["seed"] = std::to_string(seed);
        const auto path = dir / "b.json";
        save_bundle(b, path);
        const ModelBundle r = load_bundle(path);
        REQUIRE(r.extractor.layers().size() == b.extractor.layers().size());
        for (std::size_t l = 0; l < b.extractor.layers().size(); ++l) {
            if (const auto* a = std::get_if<AffineLayer>(&b.extractor.layers()[l])) {
                const auto& x = std::get<AffineLayer>(r.extractor.layers()[l]);
                CHECK(x.weight == a->weight);
                CHECK(x.bias == a->bias);
            }
        }
        CHECK(serialize_bundle(r) == serialize_bundle(b));
        CHECK(r.metadata == b.metadata);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("forward: identity and ReLU") {
    const PiecewiseLinearNetwork id({AffineLayer{Matrix::Identity(3, 3), Vector::Zero(3)}});
    std::mt19937_64 gen(1);
    const Matrix x = oracle::random_matrix(4, 3, gen);
    CHECK(forward(id, x) == x);
    const PiecewiseLinearNetwork relu({ReluLayer{}}, 2);
    Matrix in(1, 2);
    in << -1, 2;
    const Matrix out = forward(relu, in);
    CHECK(out(0, 0) == 0.0);
    CHECK(out(0, 1) == 2.0);
    CHECK_THROWS_AS(forward(id, Matrix::Zero(2, 4)), DimensionError);
}

TEST_CASE("forward matches the matrix-arithmetic oracle") {
    std::mt19937_64 gen(2);
    const auto net = random_network({6, 5, 4, 3}, 11, true);
    for (int t = 0; t < 50; ++t) {
        const Matrix x = oracle::random_matrix(7, 6, gen);
        CHECK((forward(net, x) - oracle::plain_forward(net, x)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("forward is positively homogeneous without biases") {
    const auto net = random_network({4, 6, 3}, 3, true, 0.0);
    std::mt19937_64 gen(3);
    const Matrix x = oracle::random_matrix(5, 4, gen);
    for (double alpha : {0.0, 0.5, 2.0, 7.25}) {
        const Matrix lhs = forward(net, alpha * x), rhs = alpha * forward(net, x);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12 * (1 + rhs.cwiseAbs().maxCoeff()));
    }
}

TEST_CASE("reconstruction_errors") {
    SUBCASE("identity autoencoder reconstructs perfectly") {
        ModelBundle b;
        b.extractor = random_network({3, 2}, 1, true);
        b.autoencoder = PiecewiseLinearNetwork({AffineLayer{Matrix::Identity(2, 2), Vector::Zero(2)}});
        std::mt19937_64 gen(4);
        const Vector e = reconstruction_errors(b, oracle::random_matrix(6, 3, gen));
        CHECK(e.cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("single feature") {
        ModelBundle b;
        b.extractor = PiecewiseLinearNetwork({AffineLayer{Matrix::Identity(1, 1), Vector::Zero(1)}});
        b.autoencoder = PiecewiseLinearNetwork({AffineLayer{Matrix::Constant(1, 1, 0.25), Vector::Zero(1)}});
        const Vector e = reconstruction_errors(b, Matrix::Constant(1, 1, 2.0));
        CHECK(e(0) == 1.5);
    }
    SUBCASE("composition oracle") {
        const ModelBundle b = random_bundle(5);
        std::mt19937_64 gen(5);
        for (int t = 0; t < 20; ++t) {
            DataPair p{oracle::random_matrix(8, 5, gen), oracle::random_matrix(4, 5, gen)};
            const Vector e = reconstruction_errors(b, p);
            const Matrix f = forward(b.extractor, p.stacked());
            const Vector expect = (f - forward(b.autoencoder, f)).cwiseAbs().rowwise().sum();
            CHECK(e == expect);
            CHECK(e.minCoeff() >= 0.0);
        }
    }
}

TEST_CASE("detect_from_errors edge cases") {
    SUBCASE("m = 1 flags the largest error") {
        Vector e = Vector::LinSpaced(20, 0, 1);
        e(3) = 5.0;
        Detection d = detect_from_errors(e, 10, 0.05);
        CHECK(d.flagged == std::vector<Index>{3});
        CHECK(d.thresholdRow == 3);
        CHECK(d.target.empty());
        e(15) = 6.0;
        d = detect_from_errors(e, 10, 0.05);
        CHECK(d.target == std::vector<Index>{5});
    }
    SUBCASE("full tie flags the lowest index") {
        const Detection d = detect_from_errors(Vector::Ones(20), 10, 0.05);
        CHECK(d.flagged == std::vector<Index>{0});
        CHECK(d.target.empty());
    }
    SUBCASE("rate validation") {
        CHECK(anomaly_count(0.05, 175) == 9);
        CHECK(anomaly_count(0.05, 20) == 1);
        CHECK_THROWS_AS(anomaly_count(0.0, 10), std::invalid_argument);
        CHECK_THROWS_AS(anomaly_count(0.95, 10), std::invalid_argument);
    }
}

TEST_CASE("detect_from_errors matches the sort-and-slice oracle") {
    std::mt19937_64 gen(6);
    std::uniform_int_distribution<int> coarse(0, 9);
    for (int t = 0; t < 100; ++t) {
        const Index n = 20 + static_cast<Index>(gen() % 80), ns = static_cast<Index>(gen() % n);
        Vector e(n);
        // coarse values force ties on many draws
        for (Index i = 0; i < n; ++i) e(i) = t % 2 ? coarse(gen) : std::normal_distribution<double>()(gen);
        const double rate = 0.05 + 0.1 * static_cast<double>(t % 3);
        const Detection d = detect_from_errors(e, ns, rate);
        const auto r = oracle::sort_and_slice(e, ns, rate);
        CHECK(d.flagged == r.flagged);
        CHECK(d.thresholdRow == r.thresholdRow);
        CHECK(d.target == r.target);
        CHECK(static_cast<Index>(d.flagged.size()) == anomaly_count(rate, n));
        CHECK(std::is_sorted(d.target.begin(), d.target.end()));
        CHECK(std::adjacent_find(d.target.begin(), d.target.end()) == d.target.end());
        CHECK(static_cast<Index>(d.target.size()) <= n - ns);
    }
}

TEST_CASE("random_network shapes") {
    const auto net = random_network({4, 3, 2}, 1, false);
    CHECK(net.input_dim() == 4);
    CHECK(net.output_dim() == 2);
    CHECK(net.layers().size() == 3);
    CHECK(random_network({4, 3, 2}, 1, true).layers().size() == 4);
    CHECK_THROWS(random_network({4}, 1, false));
}
