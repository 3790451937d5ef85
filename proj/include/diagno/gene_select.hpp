#pragma once

#include "diagno/reference_prior.hpp"

#include <compare>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace diagno {

struct GeneCellPair {
    std::string gene;
    std::string cell_type;

    auto operator<=>(const GeneCellPair&) const = default;
};

using MarkerSet = std::set<GeneCellPair>;

/// Marker JSON `{gene: [cellTypes]}`. Genes not in any dataset are kept here and filtered at selection.
MarkerSet parse_marker_list(std::string_view text, const std::string& source = "<memory>");
MarkerSet load_marker_list(const std::filesystem::path& path);

struct RankSumResult {
    /// Mann-Whitney U of the first sample: pairs with a > b, ties counting one half.
    double u = 0.0;
    /// Two-sided p-value.
    double p_value = 1.0;
    bool exact = false;
};

/// Samples with a combined size at or below this are tested by full enumeration.
inline constexpr std::size_t kExactRankSumLimit = 12;

/**
 * Wilcoxon rank-sum test with mid-ranks for ties. Exact permutation p-value when
 * |a| + |b| <= 12, otherwise the normal approximation with tie-corrected variance
 * and continuity correction.
 */
RankSumResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b);

/// Benjamini-Hochberg step-up adjusted p-values, returned in input order.
std::vector<double> benjamini_hochberg(std::span<const double> pvalues);

/// log2((mean(2^a) + pseudo) / (mean(2^b) + pseudo)) for log2-scale inputs.
double log2_fold_change(std::span<const double> a, std::span<const double> b, double pseudo);

enum class Provenance { Marker, Stability, Both };
std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

struct SelectedPair {
    std::string gene;
    std::string cell_type;
    Provenance provenance = Provenance::Stability;
    /// DE score -log10(p_adj) * |log2 FC| of the one-vs-rest test for this pair.
    double score = 0.0;
};

struct PairSelection {
    /// Sorted by (gene, cell_type).
    std::vector<SelectedPair> pairs;
    /// Marker pairs whose gene or cell type is absent from the reference.
    std::vector<GeneCellPair> unmatched_markers;

    bool contains(std::string_view gene, std::string_view cell_type) const;
    /// Distinct genes, sorted.
    std::vector<std::string> genes() const;
};

std::string format_selection(const PairSelection& sel);
PairSelection parse_selection(std::string_view text);
void save_selection(const PairSelection& sel, const std::filesystem::path& path);
PairSelection load_selection(const std::filesystem::path& path);

/// Every (gene, cell type) pair of the reference tagged as a marker; for runs without filtering.
PairSelection select_all_pairs(const std::vector<std::string>& genes, const std::vector<std::string>& cell_types);

struct SelectionOptions {
    double fdr_threshold = 0.01;
    double lfc_threshold = 1.0;
    double noise_quantile = 0.10;
    double dropout_ceiling = 0.95;
    double pseudo_count = 1.0;
    unsigned threads = 1;
};

/// One-vs-rest test result for one (gene, type) pair.
struct PairTest {
    std::size_t gene = 0;
    std::size_t cell_type = 0;
    double p_value = 1.0;
    double p_adjusted = 1.0;
    double log2_fc = 0.0;
    double score = 0.0;
};

/// One-vs-rest Wilcoxon and fold change for every (gene, type), BH-adjusted jointly. Gene-major order.
std::vector<PairTest> test_all_pairs(const ReferenceDataset& ref, const SelectionOptions& opts);

/// Fraction of exactly-zero reference entries per gene.
std::vector<double> dropout_rates(const ReferenceDataset& ref);

/// Tests passing p_adj < fdr and |log2 FC| > lfc, before noise suppression.
std::vector<PairTest> stability_pairs(const std::vector<PairTest>& tests, double fdr_threshold, double lfc_threshold);

/// Lower empirical quantile: the ceil(q n)-th smallest value.
double lower_quantile(std::vector<double> values, double q);

PairSelection select_pairs(const ReferenceDataset& ref, const MarkerSet& markers, const SelectionOptions& opts = {});

} // namespace diagno
