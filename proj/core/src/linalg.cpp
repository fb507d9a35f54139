#include "rgib/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace rgib {

LeastSquaresResult least_squares_solve(const Matrix& m, const Matrix& b) {
  if (m.rows() != b.rows())
    throw std::invalid_argument("least_squares_solve: row mismatch");
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(m);
  LeastSquaresResult r;
  r.x = cod.solve(b);
  r.residual = (m * r.x - b).norm();
  return r;
}

FdReport finite_difference_check(const std::function<double(const Matrix&)>& f,
                                 const Matrix& x, const Matrix& analytic_grad,
                                 double h, double tol) {
  if (x.rows() != analytic_grad.rows() || x.cols() != analytic_grad.cols())
    throw std::invalid_argument("finite_difference_check: shape mismatch");
  FdReport rep;
  Matrix xp = x;
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      xp(r, c) = x(r, c) + h;
      double fp = f(xp);
      xp(r, c) = x(r, c) - h;
      double fm = f(xp);
      xp(r, c) = x(r, c);
      double fd = (fp - fm) / (2.0 * h);
      double g = analytic_grad(r, c);
      double denom = std::max({1.0, std::abs(fd), std::abs(g)});
      rep.max_rel_err = std::max(rep.max_rel_err, std::abs(fd - g) / denom);
      rep.n_checked += 1;
    }
  rep.pass = rep.max_rel_err < tol;
  return rep;
}

}  // namespace rgib
