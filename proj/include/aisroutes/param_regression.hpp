// Scaling hand-tuned extraction parameters to every route group with
// per-target linear regression on the aggregate features.
#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "json.hpp"

#include "aisroutes/aggregation.hpp"
#include "aisroutes/standard_route.hpp"

namespace aisroutes {

struct ParamTargets {
  Meters eps{};
  double min_samples{};
  Meters r{};
};

struct LabeledGroup {
  GroupKey key;
  AggregateFeatures features;
  ParamTargets targets;
};

enum class Target : std::size_t { Eps = 0, MinSamples = 1, R = 2 };
inline constexpr std::size_t kTargetCount = 3;
inline constexpr std::size_t kFeatureCount = AggregateFeatures::kCount;

struct TargetFit {
  double intercept{};
  std::array<double, kFeatureCount> slopes{};  // per standardized feature
  double residual_rms{};
  bool ridge{};  // Gram matrix was singular; a small ridge term was added
};

struct RegressionModel {
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> stddev{};
  std::array<bool, kFeatureCount> retained{};  // false: zero variance, slope pinned to 0
  std::array<TargetFit, kTargetCount> targets{};
  std::size_t n_rows{};

  /// Unclamped prediction for one target.
  double predict_raw(Target t, const AggregateFeatures& f) const;
  /// Intercept followed by slopes in raw (unstandardized) feature units.
  std::array<double, kFeatureCount + 1> raw_coefficients(Target t) const;
};

inline constexpr double kRidgeLambda = 1e-6;
inline constexpr std::size_t kMinTrainingRows = 8;

/// Ordinary least squares on standardized features via the normal
/// equations. Throws ConsistencyError on fewer than 8 rows or a non-finite
/// feature/target. Rows are put in canonical order first, so the result
/// does not depend on input order.
RegressionModel fit(std::span<const LabeledGroup> labeled);

struct ParamClamp {
  Meters eps_min{100.0}, eps_max{20'000.0};
  Meters r_min{500.0}, r_max{50'000.0};
  double min_samples_min{2.0}, min_samples_max{20.0};
  Meters d_complete_min{5000.0};
};

/// Clamped prediction; always satisfies the ExtractionParams invariants.
ExtractionParams predict(const RegressionModel& model, const AggregateFeatures& features,
                         const ParamClamp& clamp = {}, const ExtractionParams& base = {});

/// Solves A x = b (row-major n x n) by Gaussian elimination with partial
/// pivoting. Returns false when a pivot falls below machine precision.
bool solve_linear_system(std::vector<double> a, std::vector<double> b, std::size_t n, std::vector<double>& x);

/// Labels CSV: group_key,eps_m,min_samples,r_m.
struct ParamLabel {
  GroupKey key;
  ParamTargets targets;
};
std::vector<ParamLabel> read_param_labels(std::istream& in);

nlohmann::json to_json(const RegressionModel& m);
RegressionModel regression_model_from_json(const nlohmann::json& j);

}  // namespace aisroutes
