#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"

#include "aisroutes/errors.hpp"
#include "aisroutes/param_regression.hpp"

using namespace aisroutes;

namespace {

AggregateFeatures random_features(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  AggregateFeatures f;
  f.n_routes = 3 + gen() % 60;
  f.n_points = f.n_routes * (50 + gen() % 400);
  f.median_spatial_sampling = 200.0 + 3000.0 * u(gen);
  f.median_temporal_sampling = 10.0 + 300.0 * u(gen);
  f.median_duration = 3600.0 + 200'000.0 * u(gen);
  f.mean_distance = 5000.0 + 800'000.0 * u(gen);
  return f;
}

LabeledGroup row(const AggregateFeatures& f, double eps, double ms, double r, PortId id) {
  return {GroupKey{id, id + 1, VesselType::Cargo}, f, {eps, ms, r}};
}

std::vector<LabeledGroup> exact_linear(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<LabeledGroup> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = random_features(gen);
    rows.push_back(row(f, 0.5 * f.median_spatial_sampling + 200.0, 3.0 + static_cast<double>(i % 4),
                       2.0 * f.median_spatial_sampling + 1000.0, static_cast<PortId>(2 * i + 1)));
  }
  return rows;
}

// Oracle coefficients converted to raw feature units.
std::vector<double> oracle_raw(const std::vector<LabeledGroup>& rows, Target t) {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (const auto& r : rows) {
    const auto a = r.features.as_array();
    x.emplace_back(a.begin(), a.end());
    y.push_back(t == Target::Eps ? r.targets.eps : t == Target::R ? r.targets.r : r.targets.min_samples);
  }
  const auto beta = oracle::ols(x, y);
  const std::size_t p = x.front().size(), n = x.size();
  std::vector<double> mean(p, 0.0), sd(p, 0.0);
  for (const auto& v : x) {
    for (std::size_t j = 0; j < p; ++j) mean[j] += v[j] / static_cast<double>(n);
  }
  for (const auto& v : x) {
    for (std::size_t j = 0; j < p; ++j) sd[j] += (v[j] - mean[j]) * (v[j] - mean[j]) / static_cast<double>(n);
  }
  std::vector<double> raw(p + 1);
  raw[0] = beta[0];
  for (std::size_t j = 0; j < p; ++j) {
    raw[j + 1] = beta[j + 1] / std::sqrt(sd[j]);
    raw[0] -= raw[j + 1] * mean[j];
  }
  return raw;
}

double dot_raw(const std::vector<double>& c, const AggregateFeatures& f) {
  const auto a = f.as_array();
  double v = c[0];
  for (std::size_t j = 0; j < a.size(); ++j) v += c[j + 1] * a[j];
  return v;
}

}  // namespace

TEST_SUITE("param_regression") {

TEST_CASE("linear solver") {
  std::vector<double> x;
  REQUIRE(solve_linear_system({2, 1, 1, 3}, {3, 5}, 2, x));
  CHECK(x[0] == doctest::Approx(0.8));
  CHECK(x[1] == doctest::Approx(1.4));
  CHECK_FALSE(solve_linear_system({1, 2, 2, 4}, {1, 2}, 2, x));
}

TEST_CASE("exact linear labels are recovered") {
  const auto rows = exact_linear(12, 1);
  const auto m = fit(rows);
  CHECK(m.n_rows == 12);
  CHECK(m.targets[0].residual_rms < 1e-6);
  CHECK(m.targets[2].residual_rms < 1e-6);
  for (const auto& r : rows) {
    CHECK(m.predict_raw(Target::Eps, r.features) == doctest::Approx(r.targets.eps).epsilon(1e-9));
    const auto p = predict(m, r.features);
    CHECK(p.eps == doctest::Approx(r.targets.eps).epsilon(1e-9));
    CHECK(p.r == doctest::Approx(r.targets.r).epsilon(1e-9));
  }
  const auto raw = m.raw_coefficients(Target::Eps);
  CHECK(raw[0] == doctest::Approx(200.0).epsilon(1e-6));
  CHECK(raw[3] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("constant target gives its value and flat slopes") {
  auto rows = exact_linear(10, 2);
  for (auto& r : rows) r.targets.eps = 2500.0;
  const auto m = fit(rows);
  const auto& t = m.targets[static_cast<std::size_t>(Target::Eps)];
  CHECK(t.intercept == doctest::Approx(2500.0));
  for (double s : t.slopes) CHECK(std::abs(s) < 1e-8);
}

TEST_CASE("coefficients match the pseudo-inverse oracle") {
  for (std::uint64_t seed = 10; seed < 20; ++seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<LabeledGroup> rows;
    for (PortId i = 0; i < 20; ++i) {
      rows.push_back(row(random_features(gen), 500 + 5000 * u(gen), 2 + 10 * u(gen), 6000 + 20000 * u(gen), 2 * i + 1));
    }
    const auto m = fit(rows);
    for (Target t : {Target::Eps, Target::MinSamples, Target::R}) {
      const auto want = oracle_raw(rows, t);
      const auto got = m.raw_coefficients(t);
      for (std::size_t j = 0; j < want.size(); ++j) {
        CHECK(got[j] == doctest::Approx(want[j]).epsilon(1e-8).scale(0));
      }
      for (int k = 0; k < 5; ++k) {
        const auto f = random_features(gen);
        CHECK(m.predict_raw(t, f) == doctest::Approx(dot_raw(want, f)).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("clamps and rounding") {
  auto rows = exact_linear(10, 3);
  const auto m = fit(rows);
  AggregateFeatures f = rows[0].features;
  f.median_spatial_sampling = -1400.0;  // raw eps = -500
  CHECK(m.predict_raw(Target::Eps, f) == doctest::Approx(-500.0).epsilon(1e-6));
  const auto p = predict(m, f);
  CHECK(p.eps == 100.0);
  CHECK(p.r >= p.eps);
  CHECK(p.min_samples == std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(m.predict_raw(Target::MinSamples, f))), 2, 20));
}

TEST_CASE("too few rows or non-finite values are rejected") {
  auto rows = exact_linear(7, 4);
  CHECK_THROWS_AS(fit(rows), ConsistencyError);
  rows = exact_linear(9, 4);
  rows[3].features.mean_distance = std::nan("");
  CHECK_THROWS_AS(fit(rows), ConsistencyError);
}

TEST_CASE("zero-variance feature is dropped") {
  auto rows = exact_linear(10, 5);
  for (auto& r : rows) r.features.n_routes = 7;
  const auto m = fit(rows);
  CHECK_FALSE(m.retained[0]);
  CHECK(m.targets[0].slopes[0] == 0.0);
  CHECK(m.targets[0].residual_rms < 1e-6);
}

TEST_CASE("collinear features fall back to ridge") {
  auto rows = exact_linear(10, 6);
  for (auto& r : rows) r.features.n_points = r.features.n_routes * 100;
  const auto m = fit(rows);
  CHECK(m.targets[0].ridge);
  for (double s : m.targets[0].slopes) CHECK(std::isfinite(s));
  CHECK(m.targets[0].residual_rms < 1e-2);
}

TEST_CASE("fit properties on random data") {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int round = 0; round < 40; ++round) {
    std::vector<LabeledGroup> rows;
    const auto n = 8 + gen() % 20;
    for (PortId i = 0; i < n; ++i) {
      rows.push_back(row(random_features(gen), 500 + 5000 * u(gen), 2 + 10 * u(gen), 6000 + 20000 * u(gen), 2 * i + 1));
    }
    const auto m = fit(rows);
    // Training RMS from an independent pass matches the reported one.
    double ss = 0.0;
    for (const auto& r : rows) ss += std::pow(m.predict_raw(Target::R, r.features) - r.targets.r, 2);
    CHECK(std::sqrt(ss / static_cast<double>(rows.size())) <= m.targets[2].residual_rms * (1 + 1e-9) + 1e-9);
    auto shuffled = rows;
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    CHECK(to_json(fit(shuffled)) == to_json(m));
    for (int k = 0; k < 20; ++k) {
      auto f = random_features(gen);
      f.median_spatial_sampling *= (u(gen) < 0.3 ? -50.0 : 1.0);
      f.mean_distance *= (u(gen) < 0.3 ? 100.0 : 1.0);
      const auto p = predict(m, f);
      CHECK_NOTHROW(p.validate());
      CHECK(p.eps >= 100.0);
      CHECK(p.eps <= 20000.0);
      CHECK(p.r <= 50000.0);
      CHECK(p.min_samples >= 2);
      CHECK(p.min_samples <= 20);
    }
  }
}

TEST_CASE("model JSON and labels CSV") {
  const auto m = fit(exact_linear(10, 8));
  CHECK(to_json(regression_model_from_json(to_json(m))) == to_json(m));
  std::istringstream in("group_key,eps_m,min_samples,r_m\n1-2-Cargo,1500,4,6000\n");
  const auto labels = read_param_labels(in);
  REQUIRE(labels.size() == 1);
  CHECK(labels[0].key == GroupKey{1, 2, VesselType::Cargo});
  CHECK(labels[0].targets.r == 6000.0);
  std::istringstream bad("group_key,eps_m,min_samples,r_m\nbad,1,1,1\n");
  CHECK_THROWS_AS(read_param_labels(bad), ConsistencyError);
}

}
