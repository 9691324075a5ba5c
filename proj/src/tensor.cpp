#include "mataformer/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "mataformer/errors.hpp"

namespace mata {

namespace {

std::string shape_str(const std::vector<size_t>& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

}  // namespace

size_t shape_numel(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

Tensor make_op(std::vector<size_t> shape, std::vector<double> value,
               std::vector<Tensor> parents,
               std::function<void(Tensor::Node&)> backward_fn) {
  auto node = std::make_shared<Tensor::Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = false;
  for (const auto& p : parents) {
    if (p.node()->requires_grad) needs = true;
    node->parents.push_back(p.node());
  }
  node->requires_grad = needs;
  if (needs) node->backward_fn = std::move(backward_fn);
  return Tensor(node);
}

Tensor Tensor::zeros(std::vector<size_t> shape) {
  size_t n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<size_t> shape, double v) {
  size_t n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::from_data(std::vector<size_t> shape, std::vector<double> data) {
  if (shape_numel(shape) != data.size())
    throw std::invalid_argument("tensor: data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  return Tensor(node);
}

Tensor Tensor::scalar(double v) { return from_data({1}, {v}); }

Tensor Tensor::param(std::vector<size_t> shape, std::vector<double> data) {
  Tensor t = from_data(std::move(shape), std::move(data));
  t.node_->requires_grad = true;
  return t;
}

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  node_->grad.assign(node_->value.size(), 0.0);
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item(): tensor has more than one element");
  return node_->value[0];
}

double Tensor::at(std::initializer_list<size_t> idx) const {
  const auto& s = node_->shape;
  if (idx.size() != s.size()) throw std::invalid_argument("at(): rank mismatch");
  size_t flat = 0, i = 0;
  for (size_t v : idx) {
    flat = flat * s[i] + v;
    ++i;
  }
  return node_->value[flat];
}

void Tensor::backward() const {
  if (size() != 1) throw std::invalid_argument("backward(): output must be scalar");
  // topological order by DFS
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.push_back({node_.get(), 0});
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  for (Node* n : order) n->ensure_grad();
  node_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

// ---------------------------------------------------------------------------
// broadcasting helpers
// ---------------------------------------------------------------------------

namespace {

struct Broadcast {
  std::vector<size_t> out_shape;
  std::vector<size_t> stride_a, stride_b;  // 0 stride marks a broadcast axis
  size_t numel;
};

Broadcast make_broadcast(const std::vector<size_t>& a, const std::vector<size_t>& b) {
  size_t rank = std::max(a.size(), b.size());
  Broadcast bc;
  bc.out_shape.resize(rank);
  std::vector<size_t> da(rank, 1), db(rank, 1);
  std::copy(a.begin(), a.end(), da.begin() + (rank - a.size()));
  std::copy(b.begin(), b.end(), db.begin() + (rank - b.size()));
  for (size_t i = 0; i < rank; ++i) {
    if (da[i] != db[i] && da[i] != 1 && db[i] != 1)
      throw std::invalid_argument("broadcast: incompatible shapes " + shape_str(a) + " vs " +
                                  shape_str(b));
    bc.out_shape[i] = std::max(da[i], db[i]);
  }
  auto strides_of = [&](const std::vector<size_t>& dims) {
    std::vector<size_t> st(rank, 0);
    size_t acc = 1;
    for (size_t i = rank; i-- > 0;) {
      st[i] = (dims[i] == 1) ? 0 : acc;
      acc *= dims[i];
    }
    return st;
  };
  bc.stride_a = strides_of(da);
  bc.stride_b = strides_of(db);
  bc.numel = shape_numel(bc.out_shape);
  return bc;
}

// walk the flat output index into per-operand offsets
template <typename F>
void broadcast_for_each(const Broadcast& bc, F&& f) {
  size_t rank = bc.out_shape.size();
  std::vector<size_t> idx(rank, 0);
  size_t off_a = 0, off_b = 0;
  for (size_t flat = 0; flat < bc.numel; ++flat) {
    f(flat, off_a, off_b);
    for (size_t i = rank; i-- > 0;) {
      idx[i]++;
      off_a += bc.stride_a[i];
      off_b += bc.stride_b[i];
      if (idx[i] < bc.out_shape[i]) break;
      off_a -= bc.stride_a[i] * bc.out_shape[i];
      off_b -= bc.stride_b[i] * bc.out_shape[i];
      idx[i] = 0;
    }
  }
}

Tensor binary_op(const Tensor& a, const Tensor& b, double (*fwd)(double, double),
                 void (*bwd)(double, double, double, double&, double&)) {
  Broadcast bc = make_broadcast(a.shape(), b.shape());
  std::vector<double> out(bc.numel);
  const auto& av = a.data();
  const auto& bv = b.data();
  broadcast_for_each(bc, [&](size_t flat, size_t oa, size_t ob) {
    out[flat] = fwd(av[oa], bv[ob]);
  });
  auto an = a.node();
  auto bn = b.node();
  return make_op(bc.out_shape, std::move(out), {a, b}, [bc, an, bn, bwd](Tensor::Node& n) {
    const bool ga = an->requires_grad;
    const bool gb = bn->requires_grad;
    if (ga) an->ensure_grad();
    if (gb) bn->ensure_grad();
    broadcast_for_each(bc, [&](size_t flat, size_t oa, size_t ob) {
      double da = 0, db = 0;
      bwd(an->value[oa], bn->value[ob], n.grad[flat], da, db);
      if (ga) an->grad[oa] += da;
      if (gb) bn->grad[ob] += db;
    });
  });
}

Tensor unary_op(const Tensor& a, double (*fwd)(double),
                double (*dfdx)(double /*x*/, double /*y*/)) {
  std::vector<double> out(a.size());
  const auto& av = a.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an, dfdx](Tensor::Node& n) {
    an->ensure_grad();
    for (size_t i = 0; i < n.value.size(); ++i)
      an->grad[i] += n.grad[i] * dfdx(an->value[i], n.value[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](double x, double y) { return x + y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](double x, double y) { return x - y; },
      [](double, double, double g, double& da, double& db) {
        da = g;
        db = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g * y;
        db = g * x;
      });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](double x, double y) { return x / y; },
      [](double x, double y, double g, double& da, double& db) {
        da = g / y;
        db = -g * x / (y * y);
      });
}

Tensor add(const Tensor& a, double b) { return add(a, Tensor::scalar(b)); }
Tensor sub(const Tensor& a, double b) { return sub(a, Tensor::scalar(b)); }
Tensor sub(double a, const Tensor& b) { return sub(Tensor::scalar(a), b); }
Tensor mul(const Tensor& a, double b) { return mul(a, Tensor::scalar(b)); }
Tensor div(const Tensor& a, double b) { return div(a, Tensor::scalar(b)); }
Tensor neg(const Tensor& a) { return mul(a, -1.0); }

Tensor exp(const Tensor& a) {
  return unary_op(a, [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_op(a, [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Tensor tanh(const Tensor& a) {
  return unary_op(a, [](double x) { return std::tanh(x); },
                  [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor silu(const Tensor& a) {
  return unary_op(a,
                  [](double x) { return x / (1.0 + std::exp(-x)); },
                  [](double x, double) {
                    double s = 1.0 / (1.0 + std::exp(-x));
                    return s * (1.0 + x * (1.0 - s));
                  });
}

Tensor abs(const Tensor& a) {
  return unary_op(a, [](double x) { return std::fabs(x); },
                  [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
  return unary_op(a, [](double x) { return x * x; },
                  [](double x, double) { return 2.0 * x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  std::vector<double> out(a.size());
  const auto& av = a.data();
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::min(hi, std::max(lo, av[i]));
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an, lo, hi](Tensor::Node& n) {
    an->ensure_grad();
    for (size_t i = 0; i < n.value.size(); ++i)
      if (an->value[i] >= lo && an->value[i] <= hi) an->grad[i] += n.grad[i];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2)
    throw std::invalid_argument("matmul: expects 2-D operands");
  size_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    throw std::invalid_argument("matmul: inner dimensions disagree (" + std::to_string(k) +
                                " vs " + std::to_string(k2) + ")");
  std::vector<double> out(m * n, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (size_t i = 0; i < m; ++i)
    for (size_t p = 0; p < k; ++p) {
      double aval = A[i * k + p];
      if (aval == 0.0) continue;
      const double* brow = B + p * n;
      double* orow = out.data() + i * n;
      for (size_t j = 0; j < n; ++j) orow[j] += aval * brow[j];
    }
  auto an = a.node();
  auto bn = b.node();
  return make_op({m, n}, std::move(out), {a, b}, [an, bn, m, k, n](Tensor::Node& nd) {
    const double* G = nd.grad.data();
    if (an->requires_grad) {
      an->ensure_grad();
      const double* B = bn->value.data();
      for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) {
          double g = G[i * n + j];
          if (g == 0.0) continue;
          for (size_t p = 0; p < k; ++p) an->grad[i * k + p] += g * B[p * n + j];
        }
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      const double* A = an->value.data();
      for (size_t i = 0; i < m; ++i)
        for (size_t p = 0; p < k; ++p) {
          double aval = A[i * k + p];
          if (aval == 0.0) continue;
          for (size_t j = 0; j < n; ++j) bn->grad[p * n + j] += aval * G[i * n + j];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  if (a.ndim() != 2) throw std::invalid_argument("transpose: expects 2-D");
  size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  const auto& av = a.data();
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  auto an = a.node();
  return make_op({n, m}, std::move(out), {a}, [an, m, n](Tensor::Node& nd) {
    an->ensure_grad();
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < n; ++j) an->grad[i * n + j] += nd.grad[j * m + i];
  });
}

Tensor slice_cols(const Tensor& a, size_t start, size_t count) {
  if (a.ndim() != 2) throw std::invalid_argument("slice_cols: expects 2-D");
  size_t m = a.dim(0), n = a.dim(1);
  if (start + count > n) throw std::invalid_argument("slice_cols: range out of bounds");
  std::vector<double> out(m * count);
  const auto& av = a.data();
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < count; ++j) out[i * count + j] = av[i * n + start + j];
  auto an = a.node();
  return make_op({m, count}, std::move(out), {a}, [an, m, n, start, count](Tensor::Node& nd) {
    an->ensure_grad();
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < count; ++j) an->grad[i * n + start + j] += nd.grad[i * count + j];
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
  size_t m = parts[0].dim(0);
  size_t n = 0;
  for (const auto& p : parts) {
    if (p.ndim() != 2 || p.dim(0) != m)
      throw std::invalid_argument("concat_cols: row counts disagree");
    n += p.dim(1);
  }
  std::vector<double> out(m * n);
  size_t col = 0;
  for (const auto& p : parts) {
    size_t pn = p.dim(1);
    const auto& pv = p.data();
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < pn; ++j) out[i * n + col + j] = pv[i * pn + j];
    col += pn;
  }
  std::vector<std::shared_ptr<Tensor::Node>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return make_op({m, n}, std::move(out), parts, [nodes, m, n](Tensor::Node& nd) {
    size_t col = 0;
    for (auto& pn : nodes) {
      size_t w = pn->shape[1];
      if (pn->requires_grad) {
        pn->ensure_grad();
        for (size_t i = 0; i < m; ++i)
          for (size_t j = 0; j < w; ++j) pn->grad[i * w + j] += nd.grad[i * n + col + j];
      }
      col += w;
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0;
  for (double v : a.data()) s += v;
  auto an = a.node();
  return make_op({1}, {s}, {a}, [an](Tensor::Node& nd) {
    an->ensure_grad();
    for (auto& g : an->grad) g += nd.grad[0];
  });
}

Tensor reshape(const Tensor& a, std::vector<size_t> shape) {
  if (shape_numel(shape) != a.size())
    throw std::invalid_argument("reshape: element count mismatch");
  auto an = a.node();
  std::vector<double> out = a.data();
  return make_op(std::move(shape), std::move(out), {a}, [an](Tensor::Node& nd) {
    an->ensure_grad();
    for (size_t i = 0; i < nd.grad.size(); ++i) an->grad[i] += nd.grad[i];
  });
}

Tensor stack_rows_padded(const std::vector<Tensor>& rows, size_t s_max) {
  if (rows.empty()) throw std::invalid_argument("stack_rows_padded: no inputs");
  size_t c = rows[0].dim(1);
  size_t b = rows.size();
  for (const auto& r : rows) {
    if (r.ndim() != 2 || r.dim(1) != c)
      throw std::invalid_argument("stack_rows_padded: column counts disagree");
    if (r.dim(0) > s_max) throw std::invalid_argument("stack_rows_padded: row overflow");
  }
  std::vector<double> out(b * s_max * c, 0.0);
  for (size_t bi = 0; bi < b; ++bi) {
    const auto& rv = rows[bi].data();
    std::copy(rv.begin(), rv.end(), out.begin() + bi * s_max * c);
  }
  std::vector<std::shared_ptr<Tensor::Node>> nodes;
  for (const auto& r : rows) nodes.push_back(r.node());
  return make_op({b, s_max, c}, std::move(out), rows, [nodes, s_max, c](Tensor::Node& nd) {
    for (size_t bi = 0; bi < nodes.size(); ++bi) {
      auto& rn = nodes[bi];
      if (!rn->requires_grad) continue;
      rn->ensure_grad();
      size_t len = rn->value.size();
      const double* g = nd.grad.data() + bi * s_max * c;
      for (size_t i = 0; i < len; ++i) rn->grad[i] += g[i];
    }
  });
}

Tensor softmax_lastdim(const Tensor& a) {
  if (a.ndim() < 1 || a.dim(a.ndim() - 1) < 1)
    throw std::invalid_argument("softmax_lastdim: empty last dimension");
  size_t d = a.dim(a.ndim() - 1);
  size_t slices = a.size() / d;
  const auto& av = a.data();
  for (double v : av)
    if (std::isnan(v)) throw NumericalError("softmax_lastdim: NaN in input");
  std::vector<double> out(a.size());
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  for (size_t s = 0; s < slices; ++s) {
    const double* x = av.data() + s * d;
    double* y = out.data() + s * d;
    double mx = kNegInf;
    for (size_t j = 0; j < d; ++j) mx = std::max(mx, x[j]);
    if (mx == kNegInf) {
      // fully masked slice: defined as all zeros
      std::fill(y, y + d, 0.0);
      continue;
    }
    double z = 0;
    for (size_t j = 0; j < d; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (size_t j = 0; j < d; ++j) y[j] /= z;
  }
  auto an = a.node();
  return make_op(a.shape(), std::move(out), {a}, [an, d, slices](Tensor::Node& nd) {
    an->ensure_grad();
    for (size_t s = 0; s < slices; ++s) {
      const double* y = nd.value.data() + s * d;
      const double* g = nd.grad.data() + s * d;
      double dot = 0;
      for (size_t j = 0; j < d; ++j) dot += g[j] * y[j];
      for (size_t j = 0; j < d; ++j) an->grad[s * d + j] += y[j] * (g[j] - dot);
    }
  });
}

Tensor rmsnorm(const Tensor& x, const Tensor& gain, double eps) {
  if (eps < 0) throw std::invalid_argument("rmsnorm: eps must be >= 0");
  size_t d = x.dim(x.ndim() - 1);
  if (gain.size() != d)
    throw std::invalid_argument("rmsnorm: gain length " + std::to_string(gain.size()) +
                                " does not match last dimension " + std::to_string(d));
  size_t slices = x.size() / d;
  const auto& xv = x.data();
  const auto& gv = gain.data();
  std::vector<double> out(x.size());
  std::vector<double> inv(slices);
  for (size_t s = 0; s < slices; ++s) {
    const double* xs = xv.data() + s * d;
    double ms = 0;
    for (size_t j = 0; j < d; ++j) ms += xs[j] * xs[j];
    ms /= static_cast<double>(d);
    inv[s] = 1.0 / std::sqrt(ms + eps);
    for (size_t j = 0; j < d; ++j) out[s * d + j] = xs[j] * inv[s] * gv[j];
  }
  auto xn = x.node();
  auto gn = gain.node();
  return make_op(x.shape(), std::move(out), {x, gain},
                 [xn, gn, d, slices, inv](Tensor::Node& nd) {
                   if (xn->requires_grad) xn->ensure_grad();
                   if (gn->requires_grad) gn->ensure_grad();
                   for (size_t s = 0; s < slices; ++s) {
                     const double* xs = xn->value.data() + s * d;
                     const double* g = nd.grad.data() + s * d;
                     double r = inv[s];
                     if (xn->requires_grad) {
                       double dot = 0;
                       for (size_t j = 0; j < d; ++j) dot += g[j] * gn->value[j] * xs[j];
                       double c = r * r * r * dot / static_cast<double>(d);
                       for (size_t j = 0; j < d; ++j)
                         xn->grad[s * d + j] += r * g[j] * gn->value[j] - c * xs[j];
                     }
                     if (gn->requires_grad)
                       for (size_t j = 0; j < d; ++j) gn->grad[j] += g[j] * xs[j] * r;
                   }
                 });
}

}  // namespace mata
