#pragma once

#include <Eigen/Dense>

namespace rgib {

// All numerics run in double precision; verification tolerances demand it.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace rgib
