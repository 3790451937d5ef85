#pragma once

#include "diagno/features.hpp"
#include "diagno/llm_client.hpp"
#include "diagno/mlp.hpp"

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace diagno {

inline constexpr std::size_t kConflictSubsetSize = 100;
inline constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

/// Per-feature training mean and sd (n - 1 denominator).
struct FeatureStats {
    std::vector<std::string> names;
    Vector mean;
    Vector sd;
};

FeatureStats feature_stats(const FeatureSet& fs);

/// Rows labelled AD with at least one BETA feature below zero, in dataset order, at most `size`.
std::vector<std::size_t> symbolic_conflict_subset(const LabelledDataset& ds, std::size_t size = kConflictSubsetSize);

/**
 * Rows whose largest per-feature z-score |x - mean| / sd exceeds `threshold`, in dataset order.
 * A feature with sd = 0 counts as an infinite deviation when x differs from the mean.
 */
std::vector<std::size_t> ood_subset(const LabelledDataset& ds, const FeatureStats& train, std::size_t size = kUnlimited,
                                    double threshold = 1.0);

/// Naive sign heuristic: AD iff the BETA features sum to a positive value.
int sign_rule_predict(const FeatureSet& fs, std::size_t row);

struct Subset {
    std::string name;
    std::vector<std::size_t> rows;
};

struct CaseRow {
    std::string sample;
    std::string features;
    int label = 0;
    int mlp_pred = 0;
    double mlp_probability = 0.0;
    std::optional<int> llm_pred;
    int sign_rule_pred = 0;
    std::string insight;
};

struct DivergenceReport {
    std::string subset_name;
    std::size_t subset_size = 0;
    double mlp_accuracy = 0.0;
    /// Absent when no LLM client was used.
    std::optional<double> llm_accuracy;
    double sign_rule_accuracy = 0.0;
    std::vector<CaseRow> cases;
};

struct DivergenceOptions {
    /// Queried through the direct clinician prompt when set.
    const LlmClient* client = nullptr;
    /// Free-text insight per sample for the case table.
    std::map<std::string, std::string> insights;
    unsigned threads = 1;
};

std::vector<DivergenceReport> run_divergence(const MlpModel& model, const LabelledDataset& ds,
                                             const std::vector<Subset>& subsets, const DivergenceOptions& options = {});

std::string format_divergence_json(const std::vector<DivergenceReport>& reports);
std::vector<DivergenceReport> parse_divergence_json(std::string_view text);
std::string format_divergence_markdown(const std::vector<DivergenceReport>& reports);

/// Synthetic labelled dataset with named CTS, eQTL and covariate features.
struct ClassificationScenario {
    std::size_t samples = 400;
    std::size_t eqtl_genes = 5;
    std::size_t cts_pairs = 10;
    /// CTS pairs whose mean shifts with the label.
    std::size_t informative_pairs = 3;
    /// Mean shift of informative CTS features, +signal for AD and -signal for nonAD.
    double signal = 1.0;
    /// When true, AD rows get negative BETA values and nonAD rows positive ones.
    bool beta_anticorrelated = false;
    std::uint64_t seed = 1;
};

/// Features: CTS pairs, then BETA/SE/PVAL per gene, then age, sex, batch. Labels alternate 1, 0.
LabelledDataset make_classification_dataset(const ClassificationScenario& scenario);

} // namespace diagno
