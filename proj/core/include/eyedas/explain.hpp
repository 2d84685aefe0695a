#pragma once

#include <span>
#include <vector>

#include "eyedas/experts.hpp"
#include "eyedas/gbm.hpp"

// Exact Shapley attribution of the meta-classifier's margin to its input
// features, and the committee-disagreement measure built on it.
namespace eyedas::explain {

inline constexpr std::size_t kMaxExactFeatures = 12;

struct ShapleyAttribution {
  std::vector<double> phi;  // one value per feature (B, S, C, E for the full committee)
  double base_value = 0.0;  // mean background margin, v(empty set)
  double prediction = 0.0;  // margin of the explained instance, v(all features)

  // prediction - (base_value + sum(phi)); zero up to rounding.
  double efficiency_residual() const noexcept;
};

/// Interventional Shapley values in margin (log-odds) space.
///
/// For every coalition S the value v(S) is the mean model margin over the
/// background rows with features in S taken from x and the others from the
/// row. All 2^n coalitions are enumerated, so the result is exact. Throws
/// InvalidArgument for an empty background or a width mismatch.
ShapleyAttribution shapley(const gbm::GbmModel& model, std::span<const double> x,
                           const gbm::FeatureMatrix& background);

// Attributions for every row of `instances`, computed in parallel.
std::vector<ShapleyAttribution> shapley_all(const gbm::GbmModel& model,
                                            const gbm::FeatureMatrix& instances,
                                            const gbm::FeatureMatrix& background);

// True iff some committee member has phi < 0 and another has phi > 0. Zeros
// count as neither sign. Requires four attributions (B, S, C, E).
bool disagreement(const ShapleyAttribution& attribution, const experts::Committee& committee);

double disagreement_rate(std::span<const ShapleyAttribution> attributions,
                         const experts::Committee& committee);
double disagreement_rate(const gbm::GbmModel& model, const gbm::FeatureMatrix& instances,
                         const experts::Committee& committee, const gbm::FeatureMatrix& background);

struct DisagreementRow {
  experts::Committee committee;
  std::size_t disagreeing = 0;
  std::size_t total = 0;
  double rate = 0.0;
};

// One row per committee, in the order given.
std::vector<DisagreementRow> disagreement_table(std::span<const ShapleyAttribution> attributions,
                                                std::span<const experts::Committee> committees);

}  // namespace eyedas::explain
