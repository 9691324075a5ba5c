#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mataformer/attention.hpp"
#include "mataformer/embeddings.hpp"
#include "mataformer/horizon.hpp"
#include "mataformer/metrics.hpp"
#include "mataformer/psl.hpp"
#include "mataformer/tensor.hpp"

namespace py = pybind11;

namespace {

std::vector<double> softmax_vec(const std::vector<double>& x) {
  return mata::softmax_lastdim(mata::Tensor::from_data({x.size()}, x)).data();
}

std::vector<double> rmsnorm_vec(const std::vector<double>& x, const std::vector<double>& gain,
                                double eps) {
  return mata::rmsnorm(mata::Tensor::from_data({x.size()}, x),
                       mata::Tensor::from_data({gain.size()}, gain), eps)
      .data();
}

std::vector<double> silu_vec(const std::vector<double>& x) {
  return mata::silu(mata::Tensor::from_data({x.size()}, x)).data();
}

std::vector<std::vector<double>> log_distance_mat(const std::vector<int64_t>& t, double tau) {
  auto m = mata::log_distance_matrix(t, tau);
  size_t s = t.size();
  std::vector<std::vector<double>> out(s, std::vector<double>(s));
  for (size_t i = 0; i < s; ++i)
    for (size_t j = 0; j < s; ++j) out[i][j] = m.data()[i * s + j];
  return out;
}

double displacement(int64_t t, int64_t t_start, int64_t t_end) {
  mata::RiskInterval iv;
  iv.t_start = t_start;
  iv.t_end = t_end;
  return mata::displacement_hours(t, iv);
}

}  // namespace

PYBIND11_MODULE(_mataformer, m) {
  m.doc() = "bindings for the temporal-bias risk model core";

  m.def("softmax", &softmax_vec, py::arg("x"));
  m.def("rmsnorm", &rmsnorm_vec, py::arg("x"), py::arg("gain"), py::arg("eps") = 1e-6);
  m.def("silu", &silu_vec, py::arg("x"));

  m.def("embed_synthetic", &mata::embed_synthetic, py::arg("text"), py::arg("dim"),
        py::arg("seed"));

  m.def("displacement_hours", &displacement, py::arg("t"), py::arg("t_start"), py::arg("t_end"));
  m.def("soft_label", &mata::soft_label, py::arg("delta_hours"), py::arg("sigma_hours"));

  m.def("log_distance_matrix", &log_distance_mat, py::arg("t"), py::arg("tau") = 60.0);
  m.def("project_alpha", &mata::project_alpha, py::arg("alpha_bar"), py::arg("delta_alpha"),
        py::arg("floor") = 1e-4, py::arg("ceiling") = 2.5);
  m.def("project_mu", &mata::project_mu, py::arg("mu_bar"), py::arg("delta_mu"),
        py::arg("lambda_") = 4.0, py::arg("gamma_mu") = 10.0);
  m.def("sinusoidal_time_encoding", &mata::sinusoidal_time_encoding, py::arg("t"), py::arg("d"),
        py::arg("t_horizon") = 1209600.0);

  m.def("relative_attention_ratio", &mata::relative_attention_ratio, py::arg("gamma"));
  m.def(
      "physical_bounds",
      [](double mu, double alpha, double gamma, double tau) {
        auto b = mata::physical_bounds(mu, alpha, gamma, tau);
        return py::make_tuple(b.t_min, b.t_max);
      },
      py::arg("mu"), py::arg("alpha"), py::arg("gamma_cutoff") = 5.0, py::arg("tau") = 60.0);
  m.def("bandwidth", &mata::bandwidth, py::arg("mu"), py::arg("alpha"),
        py::arg("gamma_cutoff") = 5.0, py::arg("tau") = 60.0);
  m.def("mu_time_anchor", &mata::mu_time_anchor, py::arg("mu"), py::arg("tau") = 60.0);

  m.def(
      "average_precision",
      [](const std::vector<double>& s, const std::vector<uint8_t>& l) -> py::object {
        auto ap = mata::average_precision(s, l);
        if (!ap) return py::none();
        return py::float_(*ap);
      },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "auroc",
      [](const std::vector<double>& s, const std::vector<uint8_t>& l) -> py::object {
        auto a = mata::auroc(s, l);
        if (!a) return py::none();
        return py::float_(*a);
      },
      py::arg("scores"), py::arg("labels"));
  m.def("precision_at_k", &mata::precision_at_k, py::arg("scores"), py::arg("labels"),
        py::arg("k"));
  m.def("brier_score", &mata::brier_score, py::arg("pred"), py::arg("labels"));
}
