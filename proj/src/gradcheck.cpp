#include "mataformer/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mata {

double grad_rel_err(double a, double b) {
  double denom = std::max({std::fabs(a), std::fabs(b), 1e-6});
  return std::fabs(a - b) / denom;
}

GradCheckReport grad_check(const std::function<Tensor()>& f, Tensor x, double h, double tol,
                           const std::vector<uint8_t>* active) {
  GradCheckReport rep;
  x.zero_grad();
  Tensor y = f();
  y.backward();
  rep.ad_grad = x.grad();

  size_t n = x.size();
  rep.fd_grad.resize(n);
  rep.rel_err.resize(n);
  auto& xd = x.data_mut();
  for (size_t i = 0; i < n; ++i) {
    double orig = xd[i];
    xd[i] = orig + h;
    double f1 = f().item();
    xd[i] = orig - h;
    double f2 = f().item();
    xd[i] = orig;
    rep.fd_grad[i] = (f1 - f2) / (2.0 * h);
  }

  for (size_t i = 0; i < n; ++i) {
    bool included = !active || (*active)[i];
    if (std::isnan(rep.ad_grad[i]) || std::isnan(rep.fd_grad[i])) {
      rep.rel_err[i] = std::numeric_limits<double>::quiet_NaN();
      if (included) {
        rep.has_nan = true;
        rep.pass = false;
        rep.failed_indices.push_back(i);
        std::ostringstream os;
        os << "NaN gradient at flat index " << i << " (ad=" << rep.ad_grad[i]
           << ", fd=" << rep.fd_grad[i] << ")";
        rep.message = os.str();
      }
      continue;
    }
    double e = grad_rel_err(rep.ad_grad[i], rep.fd_grad[i]);
    rep.rel_err[i] = e;
    if (!included) continue;
    if (e > rep.max_rel_err) {
      rep.max_rel_err = e;
      rep.worst_index = i;
    }
    if (e > tol) {
      rep.pass = false;
      rep.failed_indices.push_back(i);
    }
  }
  if (!rep.pass && rep.message.empty()) {
    std::ostringstream os;
    os << "max rel err " << rep.max_rel_err << " at flat index " << rep.worst_index
       << " (ad=" << rep.ad_grad[rep.worst_index] << ", fd=" << rep.fd_grad[rep.worst_index]
       << "), " << rep.failed_indices.size() << " coordinate(s) above tol " << tol;
    rep.message = os.str();
  }
  return rep;
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h,
                           double tol, const std::vector<uint8_t>* active) {
  return grad_check([&]() { return f(x); }, x, h, tol, active);
}

}  // namespace mata
