#pragma once

// Finite-difference gradient checking. The oracle path only ever evaluates
// forward passes, so it stays independent of the tape's backward rules.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "uvface/tensor.hpp"

namespace uvface {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

// Builds a scalar loss from leaf nodes (one per leaf tensor, same order).
using GradBuildFn = std::function<Node(Graph&, const std::vector<Node>&)>;

// Compares tape gradients against central finite differences (step h) for
// every entry of every leaf. Relative error uses max(|ad|, |fd|, 1e-6) as
// the denominator.
double max_rel_err_fd(const GradBuildFn& build, const std::vector<Tensor>& leaves,
                      double h = 1e-5);

// Checks every differentiable core op on small random tensors.
std::vector<GradCheckEntry> gradcheck_core_ops(uint64_t seed);

}  // namespace uvface
