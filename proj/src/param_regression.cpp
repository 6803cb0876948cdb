#include "aisroutes/param_regression.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <tuple>

#include "aisroutes/errors.hpp"
#include "aisroutes/text.hpp"

namespace aisroutes {

bool solve_linear_system(std::vector<double> a, std::vector<double> b, std::size_t n, std::vector<double>& x) {
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  const double tiny = std::numeric_limits<double>::epsilon() * static_cast<double>(n) * std::max(scale, 1e-300);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t row = col + 1; row < n; ++row) {
      if (std::abs(a[row * n + col]) > std::abs(a[piv * n + col])) piv = row;
    }
    if (std::abs(a[piv * n + col]) <= tiny) return false;
    if (piv != col) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a[piv * n + k], a[col * n + k]);
      std::swap(b[piv], b[col]);
    }
    for (std::size_t row = col + 1; row < n; ++row) {
      const double f = a[row * n + col] / a[col * n + col];
      if (f == 0.0) continue;
      for (std::size_t k = col; k < n; ++k) a[row * n + k] -= f * a[col * n + k];
      b[row] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i * n + k] * x[k];
    x[i] = s / a[i * n + i];
  }
  return true;
}

namespace {

double target_value(const ParamTargets& t, Target which) {
  switch (which) {
    case Target::Eps: return t.eps;
    case Target::MinSamples: return t.min_samples;
    case Target::R: return t.r;
  }
  return 0.0;
}

}  // namespace

double RegressionModel::predict_raw(Target t, const AggregateFeatures& f) const {
  const auto x = f.as_array();
  const TargetFit& fit = targets[static_cast<std::size_t>(t)];
  double y = fit.intercept;
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    if (retained[k]) y += fit.slopes[k] * (x[k] - mean[k]) / stddev[k];
  }
  return y;
}

std::array<double, kFeatureCount + 1> RegressionModel::raw_coefficients(Target t) const {
  const TargetFit& fit = targets[static_cast<std::size_t>(t)];
  std::array<double, kFeatureCount + 1> out{};
  out[0] = fit.intercept;
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    if (!retained[k]) continue;
    out[k + 1] = fit.slopes[k] / stddev[k];
    out[0] -= fit.slopes[k] * mean[k] / stddev[k];
  }
  return out;
}

RegressionModel fit(std::span<const LabeledGroup> labeled) {
  if (labeled.size() < kMinTrainingRows) {
    throw ConsistencyError("fit needs at least " + std::to_string(kMinTrainingRows) + " labeled groups, got " +
                           std::to_string(labeled.size()));
  }
  std::vector<LabeledGroup> rows(labeled.begin(), labeled.end());
  for (const auto& row : rows) {
    for (double v : row.features.as_array()) {
      if (!std::isfinite(v)) throw ConsistencyError("non-finite feature in group " + row.key.str());
    }
    for (auto t : {Target::Eps, Target::MinSamples, Target::R}) {
      if (!std::isfinite(target_value(row.targets, t))) {
        throw ConsistencyError("non-finite target in group " + row.key.str());
      }
    }
  }
  std::sort(rows.begin(), rows.end(), [](const LabeledGroup& a, const LabeledGroup& b) {
    if (a.key != b.key) return a.key < b.key;
    const auto fa = a.features.as_array(), fb = b.features.as_array();
    if (fa != fb) return fa < fb;
    return std::tie(a.targets.eps, a.targets.min_samples, a.targets.r) <
           std::tie(b.targets.eps, b.targets.min_samples, b.targets.r);
  });

  RegressionModel m;
  m.n_rows = rows.size();
  const double n = static_cast<double>(rows.size());
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    double s = 0.0;
    for (const auto& row : rows) s += row.features.as_array()[k];
    m.mean[k] = s / n;
    double ss = 0.0;
    for (const auto& row : rows) {
      const double d = row.features.as_array()[k] - m.mean[k];
      ss += d * d;
    }
    m.stddev[k] = std::sqrt(ss / n);
    m.retained[k] = m.stddev[k] > 1e-12 * std::max(1.0, std::abs(m.mean[k]));
    if (!m.retained[k]) m.stddev[k] = 1.0;
  }

  std::vector<std::size_t> cols;
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    if (m.retained[k]) cols.push_back(k);
  }
  const std::size_t p = cols.size() + 1;  // intercept first
  std::vector<std::vector<double>> design;
  design.reserve(rows.size());
  for (const auto& row : rows) {
    const auto x = row.features.as_array();
    std::vector<double> z{1.0};
    for (std::size_t k : cols) z.push_back((x[k] - m.mean[k]) / m.stddev[k]);
    design.push_back(std::move(z));
  }
  std::vector<double> gram(p * p, 0.0);
  for (const auto& z : design) {
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < p; ++j) gram[i * p + j] += z[i] * z[j];
    }
  }

  for (auto t : {Target::Eps, Target::MinSamples, Target::R}) {
    std::vector<double> rhs(p, 0.0);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const double y = target_value(rows[r].targets, t);
      for (std::size_t i = 0; i < p; ++i) rhs[i] += design[r][i] * y;
    }
    TargetFit& tf = m.targets[static_cast<std::size_t>(t)];
    std::vector<double> beta;
    if (!solve_linear_system(gram, rhs, p, beta)) {
      std::vector<double> ridged = gram;
      for (std::size_t i = 1; i < p; ++i) ridged[i * p + i] += kRidgeLambda;
      if (!solve_linear_system(ridged, rhs, p, beta)) {
        throw ConsistencyError("normal equations singular even with ridge term");
      }
      tf.ridge = true;
    }
    tf.intercept = beta[0];
    for (std::size_t c = 0; c < cols.size(); ++c) tf.slopes[cols[c]] = beta[c + 1];

    double sse = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      double yhat = 0.0;
      for (std::size_t i = 0; i < p; ++i) yhat += design[r][i] * beta[i];
      const double e = target_value(rows[r].targets, t) - yhat;
      sse += e * e;
    }
    tf.residual_rms = std::sqrt(sse / n);
  }
  return m;
}

ExtractionParams predict(const RegressionModel& model, const AggregateFeatures& features, const ParamClamp& clamp,
                         const ExtractionParams& base) {
  auto finite_or = [](double v, double fallback) { return std::isfinite(v) ? v : fallback; };
  const double eps = std::clamp(finite_or(model.predict_raw(Target::Eps, features), clamp.eps_min),
                                clamp.eps_min, clamp.eps_max);
  double r = std::clamp(finite_or(model.predict_raw(Target::R, features), clamp.r_min), clamp.r_min, clamp.r_max);
  const double ms = std::clamp(std::round(finite_or(model.predict_raw(Target::MinSamples, features), 0.0)),
                               clamp.min_samples_min, clamp.min_samples_max);
  if (r < eps) r = eps;
  ExtractionParams out = ExtractionParams::make(eps, static_cast<std::size_t>(ms), r, clamp.d_complete_min);
  out.expansion_factor = base.expansion_factor;
  out.max_expansions = base.max_expansions;
  out.max_iterations = base.max_iterations;
  return out;
}

std::vector<ParamLabel> read_param_labels(std::istream& in) {
  std::vector<ParamLabel> out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto row = text::split_csv(line);
    if (header) {
      header = false;
      if (row && !row->empty() && text::trim((*row)[0]) == "group_key") continue;
    }
    if (!row || row->size() != 4) throw ConsistencyError("malformed label row: " + line);
    const auto key = GroupKey::parse(text::trim((*row)[0]));
    const auto eps = text::parse_double((*row)[1]);
    const auto ms = text::parse_double((*row)[2]);
    const auto r = text::parse_double((*row)[3]);
    if (!key || !eps || !ms || !r) throw ConsistencyError("malformed label row: " + line);
    if (!(*eps > 0.0) || !(*ms >= 1.0) || *r < *eps) {
      throw ConsistencyError("label violates eps > 0, min_samples >= 1, r >= eps: " + line);
    }
    out.push_back({*key, {*eps, *ms, *r}});
  }
  return out;
}

nlohmann::json to_json(const RegressionModel& m) {
  static const char* kTargetNames[] = {"eps_m", "min_samples", "r_m"};
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t k = 0; k < kFeatureCount; ++k) {
    features.push_back({{"name", AggregateFeatures::names()[k]},
                        {"mean", m.mean[k]},
                        {"stddev", m.stddev[k]},
                        {"retained", m.retained[k]}});
  }
  nlohmann::json targets = nlohmann::json::object();
  for (std::size_t t = 0; t < kTargetCount; ++t) {
    const auto& tf = m.targets[t];
    targets[kTargetNames[t]] = {{"intercept", tf.intercept},
                                {"slopes", tf.slopes},
                                {"residual_rms", tf.residual_rms},
                                {"ridge", tf.ridge}};
  }
  return {{"n_rows", m.n_rows}, {"features", features}, {"targets", targets}};
}

RegressionModel regression_model_from_json(const nlohmann::json& j) {
  static const char* kTargetNames[] = {"eps_m", "min_samples", "r_m"};
  try {
    RegressionModel m;
    m.n_rows = j.at("n_rows").get<std::size_t>();
    const auto& features = j.at("features");
    if (features.size() != kFeatureCount) throw ConsistencyError("model feature count mismatch");
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
      m.mean[k] = features[k].at("mean").get<double>();
      m.stddev[k] = features[k].at("stddev").get<double>();
      m.retained[k] = features[k].at("retained").get<bool>();
    }
    for (std::size_t t = 0; t < kTargetCount; ++t) {
      const auto& e = j.at("targets").at(kTargetNames[t]);
      auto& tf = m.targets[t];
      tf.intercept = e.at("intercept").get<double>();
      tf.slopes = e.at("slopes").get<std::array<double, kFeatureCount>>();
      tf.residual_rms = e.at("residual_rms").get<double>();
      tf.ridge = e.at("ridge").get<bool>();
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConsistencyError(std::string("malformed regression model: ") + e.what());
  }
}

}  // namespace aisroutes
