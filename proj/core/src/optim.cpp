#include "rgib/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace rgib {

void AdamState::init(const std::vector<Matrix>& params) {
  step = 0;
  m.clear();
  v.clear();
  for (const Matrix& p : params) {
    m.push_back(Matrix::Zero(p.rows(), p.cols()));
    v.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void adam_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows() != grads[i].rows() || params[i].cols() != grads[i].cols())
      throw std::invalid_argument("adam_step: shape mismatch");
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] +
                 (1.0 - state.beta2) * grads[i].cwiseProduct(grads[i]);
    Matrix mhat = state.m[i] / bc1;
    Matrix vhat = state.v[i] / bc2;
    params[i] -= state.lr * mhat.cwiseQuotient(
                     (vhat.cwiseSqrt().array() + state.eps).matrix());
  }
}

}  // namespace rgib
