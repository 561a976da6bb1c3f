#include "standda/csv_ingest.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace standda {

bool SplitRule::is_source(double v) const {
    switch (op) {
        case Op::Equal: return v == value;
        case Op::NotEqual: return v != value;
        case Op::Less: return v < value;
        case Op::LessEqual: return v <= value;
        case Op::Greater: return v > value;
        case Op::GreaterEqual: return v >= value;
    }
    return false;
}

SplitRule::Op SplitRule::parse_op(const std::string& s) {
    if (s == "eq") return Op::Equal;
    if (s == "ne") return Op::NotEqual;
    if (s == "lt") return Op::Less;
    if (s == "le") return Op::LessEqual;
    if (s == "gt") return Op::Greater;
    if (s == "ge") return Op::GreaterEqual;
    throw std::invalid_argument("unknown split operator \"" + s + "\" (expected eq, ne, lt, le, gt, ge)");
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\"");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\"");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    CsvTable table;
    while (std::getline(in, line) && trim(line).empty()) {}
    if (trim(line).empty()) throw std::runtime_error("CSV has no header row");
    table.header = split_line(line);
    const std::size_t cols = table.header.size();
    std::vector<double> cells;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto parts = split_line(line);
        if (parts.size() != cols)
            throw std::runtime_error("CSV row " + std::to_string(rows + 1) + " has " + std::to_string(parts.size()) +
                                     " cells, header has " + std::to_string(cols));
        for (std::size_t c = 0; c < cols; ++c) {
            double v = 0.0;
            const auto& s = parts[c];
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
                throw std::runtime_error("CSV row " + std::to_string(rows + 1) + ", column \"" + table.header[c] +
                                         "\": non-numeric cell \"" + s + "\"");
            cells.push_back(v);
        }
        ++rows;
    }
    table.values = Eigen::Map<const Matrix>(cells.data(), static_cast<Index>(rows), static_cast<Index>(cols));
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const Matrix& values) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write CSV file " + path.string());
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    char buf[64];
    for (Index i = 0; i < values.rows(); ++i) {
        for (Index j = 0; j < values.cols(); ++j) {
            const auto res = std::to_chars(buf, buf + sizeof buf, values(i, j));
            out << (j ? "," : "") << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        out << '\n';
    }
}

CovarianceSpec load_covariance(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open covariance file " + path.string());
    nlohmann::json doc = nlohmann::json::parse(in);
    auto read = [&](const char* key) {
        if (!doc.contains(key)) throw std::runtime_error(std::string("covariance file: missing \"") + key + "\"");
        const auto& rows = doc[key];
        Matrix m(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows[0].size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < rows[i].size(); ++j)
                m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j].get<double>();
        return m;
    };
    return CovarianceSpec(read("row_source"), read("col_source"), read("row_target"), read("col_target"));
}

IngestedData ingest_table(const CsvTable& table, const SplitSpec& split) {
    const auto find_col = [&](const std::string& name) -> Index {
        const auto it = std::find(table.header.begin(), table.header.end(), name);
        if (it == table.header.end()) throw std::runtime_error("CSV has no column \"" + name + "\"");
        return static_cast<Index>(it - table.header.begin());
    };
    const Index splitCol = find_col(split.rule.column);
    std::vector<Index> featureCols;
    IngestedData out;
    for (Index c = 0; c < static_cast<Index>(table.header.size()); ++c) {
        const auto& name = table.header[static_cast<std::size_t>(c)];
        if (c == splitCol) continue;
        if (std::find(split.dropColumns.begin(), split.dropColumns.end(), name) != split.dropColumns.end()) continue;
        featureCols.push_back(c);
        out.features.push_back(name);
    }
    for (const auto& name : split.dropColumns) find_col(name);
    if (featureCols.empty()) throw std::runtime_error("CSV has no feature columns left after the split");

    std::vector<Index> sourcePool, targetPool;
    for (Index r = 0; r < table.values.rows(); ++r)
        (split.rule.is_source(table.values(r, splitCol)) ? sourcePool : targetPool).push_back(r);
    if (static_cast<Index>(sourcePool.size()) < split.ns)
        throw std::runtime_error("split yields " + std::to_string(sourcePool.size()) + " source rows, n_s = " +
                                 std::to_string(split.ns) + " requested");
    if (static_cast<Index>(targetPool.size()) < split.nt)
        throw std::runtime_error("split yields " + std::to_string(targetPool.size()) + " target rows, n_t = " +
                                 std::to_string(split.nt) + " requested");

    const Index d = static_cast<Index>(featureCols.size());
    Vector mean = Vector::Zero(d), sd = Vector::Ones(d);
    if (split.standardize) {
        if (split.heldOutMoments) {
            mean = split.heldOutMoments->first;
            sd = split.heldOutMoments->second;
            require_dims(mean.size() == d && sd.size() == d, "held-out moments do not match the feature count");
        } else {
            const Index n = table.values.rows();
            for (Index k = 0; k < d; ++k) {
                const auto col = table.values.col(featureCols[static_cast<std::size_t>(k)]);
                mean(k) = col.mean();
                const double var = n > 1 ? (col.array() - mean(k)).square().sum() / static_cast<double>(n - 1) : 0.0;
                sd(k) = var > 0.0 ? std::sqrt(var) : 1.0;
            }
        }
    }

    std::mt19937_64 gen(split.seed);
    std::shuffle(sourcePool.begin(), sourcePool.end(), gen);
    std::shuffle(targetPool.begin(), targetPool.end(), gen);
    out.sourceRows.assign(sourcePool.begin(), sourcePool.begin() + split.ns);
    out.targetRows.assign(targetPool.begin(), targetPool.begin() + split.nt);

    auto gather = [&](const std::vector<Index>& rows) {
        Matrix m(static_cast<Index>(rows.size()), d);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (Index k = 0; k < d; ++k)
                m(static_cast<Index>(i), k) = (table.values(rows[i], featureCols[static_cast<std::size_t>(k)]) - mean(k)) / sd(k);
        return m;
    };
    out.data.source = gather(out.sourceRows);
    out.data.target = gather(out.targetRows);
    out.data.validate();
    out.spec = split.covarianceFile ? load_covariance(*split.covarianceFile)
                                    : CovarianceSpec::identity(split.ns, split.nt, d);
    require_dims(out.spec.ns() == split.ns && out.spec.nt() == split.nt && out.spec.d() == d,
                 "covariance file shape does not match n_s, n_t, d");
    return out;
}

IngestedData ingest_csv(const std::filesystem::path& path, const SplitSpec& split) {
    return ingest_table(read_csv(path), split);
}

}  // namespace standda
