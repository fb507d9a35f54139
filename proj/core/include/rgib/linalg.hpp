#pragma once

#include <functional>

#include "rgib/types.hpp"

namespace rgib {

struct LeastSquaresResult {
  Matrix x;
  double residual = 0.0;  // ||M x - B||_F
};

// Minimum-norm least-squares solution of M x = B (pseudo-inverse action).
// Singular M is handled; the residual tells the caller how exact it was.
LeastSquaresResult least_squares_solve(const Matrix& m, const Matrix& b);

struct FdReport {
  double max_rel_err = 0.0;
  int n_checked = 0;
  bool pass = false;
};

// Central-difference check of an analytic gradient of a scalar function.
// Relative error per entry uses max(1, |fd|, |grad|) in the denominator so
// tiny entries are compared absolutely.
FdReport finite_difference_check(const std::function<double(const Matrix&)>& f,
                                 const Matrix& x, const Matrix& analytic_grad,
                                 double h, double tol);

}  // namespace rgib
