#include "eyedas/explain.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "eyedas/error.hpp"
#include "eyedas/parallel.hpp"

namespace eyedas::explain {
namespace {

// w(s) = s! (n - s - 1)! / n!
std::vector<double> coalition_weights(std::size_t n) {
  std::vector<double> factorial(n + 1, 1.0);
  for (std::size_t i = 1; i <= n; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);
  std::vector<double> w(n);
  for (std::size_t s = 0; s < n; ++s) w[s] = factorial[s] * factorial[n - s - 1] / factorial[n];
  return w;
}

}  // namespace

double ShapleyAttribution::efficiency_residual() const noexcept {
  double total = base_value;
  for (const double p : phi) total += p;
  return prediction - total;
}

ShapleyAttribution shapley(const gbm::GbmModel& model, std::span<const double> x,
                           const gbm::FeatureMatrix& background) {
  const std::size_t n = x.size();
  if (background.rows() == 0) throw InvalidArgument("shapley: empty background set");
  if (background.cols() != n || static_cast<std::size_t>(model.n_features) != n) {
    throw InvalidArgument("shapley: instance, background and model widths differ");
  }
  if (n == 0 || n > kMaxExactFeatures) {
    throw InvalidArgument("shapley: exact enumeration supports 1.." + std::to_string(kMaxExactFeatures) +
                          " features");
  }

  const std::size_t coalitions = std::size_t{1} << n;
  std::vector<double> value(coalitions);
  std::vector<double> z(n);
  for (std::size_t mask = 0; mask < coalitions; ++mask) {
    double total = 0.0;
    for (std::size_t r = 0; r < background.rows(); ++r) {
      const auto row = background.row(r);
      for (std::size_t j = 0; j < n; ++j) z[j] = (mask >> j) & 1U ? x[j] : row[j];
      total += gbm::predict_margin(model, z);
    }
    value[mask] = total / static_cast<double>(background.rows());
  }

  const auto weights = coalition_weights(n);
  ShapleyAttribution out;
  out.phi.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t bit = std::size_t{1} << j;
    double phi = 0.0;
    for (std::size_t mask = 0; mask < coalitions; ++mask) {
      if (mask & bit) continue;
      const auto size = static_cast<std::size_t>(std::popcount(mask));
      phi += weights[size] * (value[mask | bit] - value[mask]);
    }
    out.phi[j] = phi;
  }
  out.base_value = value[0];
  out.prediction = value[coalitions - 1];
  return out;
}

std::vector<ShapleyAttribution> shapley_all(const gbm::GbmModel& model,
                                            const gbm::FeatureMatrix& instances,
                                            const gbm::FeatureMatrix& background) {
  std::vector<ShapleyAttribution> out(instances.rows());
  parallel_for(instances.rows(), [&](std::size_t i) { out[i] = shapley(model, instances.row(i), background); });
  return out;
}

bool disagreement(const ShapleyAttribution& attribution, const experts::Committee& committee) {
  if (attribution.phi.size() != experts::kAllExperts.size()) {
    throw InvalidArgument("disagreement: expected attributions for B, S, C and E");
  }
  bool positive = false;
  bool negative = false;
  for (const experts::Expert e : committee.members()) {
    const double phi = attribution.phi[static_cast<std::size_t>(e)];
    positive = positive || phi > 0.0;
    negative = negative || phi < 0.0;
  }
  return positive && negative;
}

double disagreement_rate(std::span<const ShapleyAttribution> attributions,
                         const experts::Committee& committee) {
  if (attributions.empty()) throw InvalidArgument("disagreement_rate: no instances");
  std::size_t hits = 0;
  for (const auto& a : attributions) hits += disagreement(a, committee) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(attributions.size());
}

double disagreement_rate(const gbm::GbmModel& model, const gbm::FeatureMatrix& instances,
                         const experts::Committee& committee, const gbm::FeatureMatrix& background) {
  const auto attributions = shapley_all(model, instances, background);
  return disagreement_rate(attributions, committee);
}

std::vector<DisagreementRow> disagreement_table(std::span<const ShapleyAttribution> attributions,
                                                std::span<const experts::Committee> committees) {
  std::vector<DisagreementRow> rows;
  rows.reserve(committees.size());
  for (const auto& committee : committees) {
    DisagreementRow row{committee, 0, attributions.size(), 0.0};
    for (const auto& a : attributions) row.disagreeing += disagreement(a, committee) ? 1 : 0;
    row.rate = attributions.empty() ? 0.0
                                    : static_cast<double>(row.disagreeing) / static_cast<double>(row.total);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace eyedas::explain
