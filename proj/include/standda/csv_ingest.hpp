#pragma once

#include "standda/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace standda {

/// Rows whose `column` satisfies `op value` go to the source domain, the
/// rest to the target domain.
struct SplitRule {
    enum class Op { Equal, NotEqual, Less, LessEqual, Greater, GreaterEqual };
    std::string column;
    Op op = Op::Equal;
    double value = 0.0;

    bool is_source(double v) const;
    /// Parses "eq", "ne", "lt", "le", "gt", "ge".
    static Op parse_op(const std::string& s);
};

struct SplitSpec {
    SplitRule rule;
    Index ns = 0;
    Index nt = 0;
    bool standardize = true;
    std::uint64_t seed = 0;
    std::vector<std::string> dropColumns;  // excluded from the features (labels, ids)
    /// Per-feature mean and standard deviation estimated on held-out data.
    std::optional<std::pair<Vector, Vector>> heldOutMoments;
    std::optional<std::filesystem::path> covarianceFile;
};

struct CsvTable {
    std::vector<std::string> header;
    Matrix values;  // rows x columns, every cell numeric
};

/// Header row required; throws std::runtime_error naming the first
/// non-numeric cell (row, column).
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);

/// Matrix written with a header row and full-precision values.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const Matrix& values);

struct IngestedData {
    DataPair data;
    CovarianceSpec spec;
    std::vector<std::string> features;
    std::vector<Index> sourceRows;  // indices into the CSV table
    std::vector<Index> targetRows;
};

/// Splits by domain, optionally standardizes, and samples n_s / n_t rows
/// without replacement. The covariance file, when given, is a JSON object
/// {"row_source", "col_source", "row_target", "col_target"} of nested arrays.
IngestedData ingest_csv(const std::filesystem::path& path, const SplitSpec& split);
IngestedData ingest_table(const CsvTable& table, const SplitSpec& split);

CovarianceSpec load_covariance(const std::filesystem::path& path);

}  // namespace standda
