#pragma once

#include <cstdint>
#include <vector>

#include "rgib/types.hpp"

namespace rgib {

// Adam with bias correction. beta1/beta2/eps follow the usual defaults; the
// learning rate is the only externally pinned hyperparameter.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  void init(const std::vector<Matrix>& params);
};

// One descent step in place. Callers maximizing an objective pass the
// gradients of its negation.
void adam_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads,
               AdamState& state);

}  // namespace rgib
