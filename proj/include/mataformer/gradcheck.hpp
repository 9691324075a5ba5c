#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mataformer/tensor.hpp"

namespace mata {

struct GradCheckReport {
  bool pass = true;
  bool has_nan = false;
  double max_rel_err = 0.0;
  size_t worst_index = 0;
  std::vector<double> ad_grad;
  std::vector<double> fd_grad;
  std::vector<double> rel_err;
  std::vector<size_t> failed_indices;
  std::string message;
};

// relative error with an absolute floor so near-zero gradients compare sanely
double grad_rel_err(double a, double b);

// Compares the reverse-mode gradient of f with central finite differences,
// coordinate by coordinate, perturbing x in place. `f` must rebuild its graph
// from the current contents of x on every call. `active`, when given, limits
// pass/fail to the flagged coordinates (mismatches elsewhere are still
// reported); used to exclude known subgradient points such as clamp edges.
GradCheckReport grad_check(const std::function<Tensor()>& f, Tensor x, double h, double tol,
                           const std::vector<uint8_t>* active = nullptr);

// convenience overload matching f(x) style call sites
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h,
                           double tol, const std::vector<uint8_t>* active = nullptr);

}  // namespace mata
