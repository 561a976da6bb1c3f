#include "oracles.hpp"
#include "standda/csv_ingest.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>

using namespace standda;

namespace {

const char* kToy =
    "domain,a,b\n"
    "0,1,10\n"
    "0,2,20\n"
    "0,3,30\n"
    "1,4,40\n"
    "1,5,50\n"
    "1,6,60\n";

SplitSpec toy_split(Index ns, Index nt) {
    SplitSpec s;
    s.rule.column = "domain";
    s.rule.value = 0.0;
    s.ns = ns;
    s.nt = nt;
    s.standardize = false;
    s.dropColumns = {"domain"};
    return s;
}

}  // namespace

TEST_CASE("parse_csv") {
    const CsvTable t = parse_csv(kToy);
    CHECK(t.header == std::vector<std::string>{"domain", "a", "b"});
    CHECK(t.values.rows() == 6);
    CHECK(t.values(4, 2) == 50.0);
    const CsvTable crlf = parse_csv("x,y\r\n1.5,-2e3\r\n");
    CHECK(crlf.header.back() == "y");
    CHECK(crlf.values(0, 1) == -2000.0);
}

TEST_CASE("non-numeric cell names its row and column") {
    try {
        parse_csv("a,b\n1,2\n3,oops\n");
        FAIL("accepted a non-numeric cell");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("oops") != std::string::npos);
        CHECK(msg.find("b") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_csv("a,b\n1\n"), std::runtime_error);
}

TEST_CASE("split operators") {
    SplitRule r{"x", SplitRule::parse_op("le"), 2.0};
    CHECK(r.is_source(2.0));
    CHECK_FALSE(r.is_source(2.5));
    CHECK(SplitRule{"x", SplitRule::parse_op("ne"), 1.0}.is_source(0.0));
    CHECK(SplitRule{"x", SplitRule::parse_op("gt"), 1.0}.is_source(1.5));
    CHECK_FALSE(SplitRule{"x", SplitRule::parse_op("lt"), 1.0}.is_source(1.0));
    CHECK(SplitRule{"x", SplitRule::parse_op("ge"), 1.0}.is_source(1.0));
    CHECK_THROWS(SplitRule::parse_op("~"));
}

TEST_CASE("toy split keeps domains apart") {
    const IngestedData in = ingest_table(parse_csv(kToy), toy_split(3, 3));
    CHECK(in.features == std::vector<std::string>{"a", "b"});
    CHECK(in.data.source.rows() == 3);
    CHECK(in.data.target.rows() == 3);
    CHECK(in.data.source.col(0).maxCoeff() <= 3.0);
    CHECK(in.data.target.col(0).minCoeff() >= 4.0);
    CHECK(in.data.source.col(0).sum() == 6.0);
    for (Index r : in.sourceRows) CHECK(r < 3);
    for (Index r : in.targetRows) CHECK(r >= 3);
    CHECK(in.spec.row_target() == Matrix::Identity(3, 3));
    CHECK(in.spec.col_source() == Matrix::Identity(2, 2));
}

TEST_CASE("too few rows for the requested sizes") {
    try {
        ingest_table(parse_csv(kToy), toy_split(2, 5));
        FAIL("oversized n_t accepted");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("n_t") != std::string::npos);
    }
    SplitSpec s = toy_split(2, 2);
    s.rule.column = "missing";
    CHECK_THROWS(ingest_table(parse_csv(kToy), s));
}

TEST_CASE("sampling is deterministic in the seed") {
    std::string text = "domain,v\n";
    for (int i = 0; i < 40; ++i) text += std::to_string(i % 2) + "," + std::to_string(i) + "\n";
    const CsvTable t = parse_csv(text);
    SplitSpec s = toy_split(5, 5);
    s.seed = 3;
    const auto a = ingest_table(t, s);
    const auto b = ingest_table(t, s);
    CHECK(a.sourceRows == b.sourceRows);
    CHECK(a.data.target == b.data.target);
    s.seed = 4;
    const auto c = ingest_table(t, s);
    CHECK(a.sourceRows != c.sourceRows);
    std::vector<Index> sorted = a.sourceRows;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
}

TEST_CASE("standardization uses all rows or held-out moments") {
    SplitSpec s = toy_split(3, 3);
    s.standardize = true;
    const auto in = ingest_table(parse_csv(kToy), s);
    // column a is 1..6: mean 3.5, sample sd sqrt(3.5)
    const double sd = std::sqrt(3.5);
    for (Index i = 0; i < 3; ++i)
        CHECK(in.data.source(i, 0) ==
              doctest::Approx((static_cast<double>(in.sourceRows[static_cast<std::size_t>(i)] + 1) - 3.5) / sd));
    s.heldOutMoments = std::make_pair(Vector{{1.0, 10.0}}, Vector{{2.0, 5.0}});
    const auto held = ingest_table(parse_csv(kToy), s);
    const Index r0 = held.sourceRows[0];
    CHECK(held.data.source(0, 0) == doctest::Approx((static_cast<double>(r0 + 1) - 1.0) / 2.0));
    CHECK(held.data.source(0, 1) == doctest::Approx((static_cast<double>(10 * (r0 + 1)) - 10.0) / 5.0));
}

TEST_CASE("write_csv round trip and covariance file") {
    const auto dir = std::filesystem::temp_directory_path() / "standda_csv_test";
    std::filesystem::create_directories(dir);
    std::mt19937_64 gen(1);
    const Matrix m = oracle::random_matrix(7, 3, gen);
    write_csv(dir / "m.csv", {"x", "y", "z"}, m);
    const CsvTable back = read_csv(dir / "m.csv");
    CHECK(back.header == std::vector<std::string>{"x", "y", "z"});
    CHECK(back.values == m);
    CHECK_THROWS(read_csv(dir / "absent.csv"));

    nlohmann::json cov = {{"row_source", {{1, 0}, {0, 1}}},
                          {"col_source", {{2}}},
                          {"row_target", {{1, 0.5}, {0.5, 1}}},
                          {"col_target", {{3}}}};
    std::ofstream(dir / "cov.json") << cov.dump();
    const CovarianceSpec spec = load_covariance(dir / "cov.json");
    CHECK(spec.row_target()(0, 1) == 0.5);
    CHECK(spec.col_target()(0, 0) == 3.0);
    cov.erase("col_target");
    std::ofstream(dir / "bad.json") << cov.dump();
    CHECK_THROWS(load_covariance(dir / "bad.json"));
    std::filesystem::remove_all(dir);
}
