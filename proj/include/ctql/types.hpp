#pragma once

#include <Eigen/Dense>

namespace ctql {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace ctql
