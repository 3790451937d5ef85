#pragma once

#include "diagno/mlp.hpp"

#include <string>
#include <vector>

namespace diagno {

inline constexpr int kDefaultIgSteps = 200;
inline constexpr std::size_t kDefaultTopK = 5;

/**
 * Integrated Gradients of the pre-sigmoid logit with the midpoint rule:
 * (x - b) * mean_k grad f(b + (k - 0.5) / steps (x - b)). Inputs are raw feature vectors;
 * features the model dropped get attribution 0.
 */
Vector integrated_gradients(const MlpModel& model, const Vector& x, const Vector& baseline, int steps = kDefaultIgSteps);

/// Baseline at the training mean (the origin of standardized space).
Vector default_baseline(const MlpModel& model);

struct RankedFeature {
    std::string name;
    double value = 0.0;
    double attribution = 0.0;
};

/// Sorted by |attribution| descending, ties by name.
std::vector<RankedFeature> top_k_features(const Vector& attributions, const std::vector<std::string>& names,
                                          const Vector& values, std::size_t k = kDefaultTopK);

} // namespace diagno
