#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace mooqp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Index = Eigen::Index;

// Direction of a linear constraint w.x (cmp) bound.
enum class Cmp { LessEq, GreaterEq };

}  // namespace mooqp
