#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace standda {

// All data matrices are row-major so that the storage of an n x d matrix is
// exactly its row-concatenated vectorization.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Sign with the global zero rule: exact zeros count as negative (inactive).
inline double sign_of(double x) { return x > 0.0 ? 1.0 : -1.0; }

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline void require_dims(bool ok, const std::string& what) {
    if (!ok) throw DimensionError(what);
}

}  // namespace standda
