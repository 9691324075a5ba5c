#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "mataformer/errors.hpp"
#include "mataformer/psl.hpp"
#include "mataformer/rng.hpp"

using namespace mata;

namespace {

Trajectory toy_traj(const std::string& pid, std::vector<int64_t> times) {
  Trajectory t;
  t.patient_id = pid;
  for (int64_t ts : times) {
    EventRecord e;
    e.patient_id = pid;
    e.t = ts;
    e.category = "c";
    e.text = "x";
    t.events.push_back(e);
  }
  return t;
}

// independent oracle: per-cell max over intervals, displacement re-derived
double oracle_label(int64_t t, int risk, const std::vector<RiskInterval>& ivs, double sigma) {
  double best = 0;
  for (const auto& iv : ivs) {
    if (iv.risk != risk) continue;
    double delta_h;
    if (t < iv.t_start)
      delta_h = double(iv.t_start - t) / 3600.0;
    else if (t > iv.t_end)
      delta_h = double(t - iv.t_end) / 3600.0;
    else
      delta_h = 0.0;
    best = std::max(best, std::exp(-delta_h * delta_h / (2.0 * sigma * sigma)));
  }
  return best;
}

}  // namespace

TEST_CASE("displacement hand values") {
  RiskInterval iv{"p", 0, 100000, 200000};
  CHECK(displacement_hours(150000, iv) == 0.0);
  CHECK(displacement_hours(100000, iv) == 0.0);
  CHECK(displacement_hours(200000, iv) == 0.0);
  CHECK(displacement_hours(100000 - 21600, iv) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(displacement_hours(200000 + 3600, iv) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("soft_label hand values") {
  CHECK(soft_label(0, 6) == 1.0);
  CHECK(soft_label(6, 6) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(soft_label(6, 6) == doctest::Approx(0.60653).epsilon(1e-4));
  CHECK(soft_label(12, 6) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));
  CHECK(soft_label(12, 6) == doctest::Approx(0.13534).epsilon(1e-4));
  CHECK_THROWS_AS(soft_label(1, 0), DataError);
  CHECK_THROWS_AS(soft_label(1, -2), DataError);
}

TEST_CASE("soft_label monotonicity and horizon ordering") {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    double d1 = rng.uniform(0, 40), d2 = d1 + rng.uniform(0.001, 20);
    double sigma = rng.uniform(0.5, 48);
    CHECK(soft_label(d2, sigma) <= soft_label(d1, sigma));

    double delta = rng.uniform(0.01, 60);
    double k1 = rng.uniform(0.5, 24), k2 = k1 + rng.uniform(0.01, 24);
    CHECK(soft_label(delta, k1) < soft_label(delta, k2));
  }
}

TEST_CASE("build_label_matrix basic cases") {
  std::vector<double> horizons = {6, 12, 24, 48};
  auto traj = toy_traj("p", {0, 3600, 7200});

  SUBCASE("no intervals: all zero") {
    auto y = build_label_matrix(traj, {}, 3, horizons);
    for (double v : y.values) CHECK(v == 0.0);
  }

  SUBCASE("covering interval: ones in its risk row, zeros elsewhere") {
    std::vector<RiskInterval> ivs = {{"p", 1, 0, 7200}};
    auto y = build_label_matrix(traj, ivs, 3, horizons);
    for (size_t e = 0; e < 3; ++e)
      for (size_t r = 0; r < 3; ++r)
        for (size_t k = 0; k < 4; ++k)
          CHECK(y.at(e, r, k) == (r == 1 ? 1.0 : 0.0));
  }

  SUBCASE("event between two disjoint intervals takes the max") {
    // event at t=3600 sits 1 h after the first window and 2 h before the second
    std::vector<RiskInterval> ivs = {{"p", 0, -7200, 0}, {"p", 0, 10800, 14400}};
    auto y = build_label_matrix(traj, ivs, 1, horizons);
    double d_left = 1.0, d_right = 2.0;
    for (size_t k = 0; k < 4; ++k) {
      double expect =
          std::max(soft_label(d_left, horizons[k]), soft_label(d_right, horizons[k]));
      CHECK(y.at(1, 0, k) == doctest::Approx(expect).epsilon(1e-15));
    }
  }

  SUBCASE("risk index out of range rejected") {
    std::vector<RiskInterval> ivs = {{"p", 5, 0, 1}};
    CHECK_THROWS_AS(build_label_matrix(traj, ivs, 3, horizons), DataError);
  }
}

TEST_CASE("build_label_matrix equals brute-force max over random instances") {
  Rng rng(17);
  std::vector<double> horizons = {6, 12, 24, 48};
  for (int trial = 0; trial < 200; ++trial) {
    size_t n_events = 1 + rng.next_below(12);
    size_t n_risks = 1 + rng.next_below(4);
    std::vector<int64_t> times;
    int64_t t = 0;
    for (size_t i = 0; i < n_events; ++i) {
      t += static_cast<int64_t>(rng.next_below(50000));
      times.push_back(t);
    }
    auto traj = toy_traj("p", times);
    std::vector<RiskInterval> ivs;
    size_t n_iv = rng.next_below(5);
    for (size_t i = 0; i < n_iv; ++i) {
      int64_t start = static_cast<int64_t>(rng.next_below(400000));
      RiskInterval iv{"p", static_cast<int>(rng.next_below(n_risks)), start,
                      start + static_cast<int64_t>(rng.next_below(80000))};
      ivs.push_back(iv);
    }
    // intervals of other patients must be ignored
    ivs.push_back({"other", 0, 0, 1000000});

    auto y = build_label_matrix(traj, ivs, n_risks, horizons);
    std::vector<RiskInterval> own;
    for (const auto& iv : ivs)
      if (iv.patient_id == "p") own.push_back(iv);
    for (size_t e = 0; e < n_events; ++e)
      for (size_t r = 0; r < n_risks; ++r)
        for (size_t k = 0; k < horizons.size(); ++k) {
          double expect = oracle_label(times[e], static_cast<int>(r), own, horizons[k]);
          CHECK(std::fabs(y.at(e, r, k) - expect) < 1e-12);
          bool inside = false;
          for (const auto& iv : own)
            inside |= iv.risk == static_cast<int>(r) && times[e] >= iv.t_start &&
                      times[e] <= iv.t_end;
          if (inside) CHECK(y.at(e, r, k) == 1.0);
        }
  }
}

TEST_CASE("binarize strict-greater rule") {
  SoftLabelMatrix y;
  y.n_events = 1;
  y.n_risks = 1;
  y.horizons = {6, 12, 24};
  y.values = {1.0, std::exp(-0.5), 0.0};

  auto b1 = binarize(y, 0.5);
  CHECK(b1[0] == 1);
  CHECK(b1[1] == 1);
  CHECK(b1[2] == 0);

  auto b2 = binarize(y, 0.6);
  CHECK(b2[1] == 1);  // exp(-0.5) = 0.6065 > 0.6
  auto b3 = binarize(y, 0.61);
  CHECK(b3[1] == 0);

  SoftLabelMatrix z = y;
  z.values = {0, 0, 0};
  for (auto v : binarize(z, 0.5)) CHECK(v == 0);

  CHECK_THROWS_AS(binarize(y, 0.0), DataError);
  CHECK_THROWS_AS(binarize(y, 1.0), DataError);
  CHECK_THROWS_AS(binarize(y, -0.2), DataError);
}

TEST_CASE("interval JSONL round trip") {
  const std::string path = "/tmp/mata_test_intervals.jsonl";
  std::vector<RiskInterval> ivs = {{"a", 0, 10, 20}, {"b", 3, 0, 99999}};
  save_intervals(path, ivs);
  auto loaded = load_intervals(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].patient_id == "a");
  CHECK(loaded[1].risk == 3);
  CHECK(loaded[1].t_end == 99999);
  std::remove(path.c_str());
}
