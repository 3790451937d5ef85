#pragma once

#include "diagno/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace diagno {

/**
 * Single-cell reference: G genes by M cells of log-expression with one cell-type label per cell.
 * Cell types are indexed in sorted label order. Every type needs at least two cells.
 */
class ReferenceDataset {
public:
    ReferenceDataset(std::vector<std::string> genes, std::vector<std::string> cells, std::vector<std::string> labels,
                     Matrix values);

    const std::vector<std::string>& genes() const { return genes_; }
    const std::vector<std::string>& cells() const { return cells_; }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::vector<std::string>& cell_types() const { return cell_types_; }
    const Matrix& values() const { return values_; }
    std::size_t num_genes() const { return genes_.size(); }
    std::size_t num_cells() const { return cells_.size(); }
    std::size_t num_cell_types() const { return cell_types_.size(); }
    /// Cell-type index of each cell.
    const std::vector<std::size_t>& type_of_cell() const { return type_of_cell_; }
    /// Cell indices belonging to each type, in cell order.
    const std::vector<std::vector<std::size_t>>& members() const { return members_; }
    std::optional<std::size_t> gene_index(std::string_view gene) const { return gene_index_.find(gene); }
    std::optional<std::size_t> cell_type_index(std::string_view ct) const { return type_index_.find(ct); }

private:
    std::vector<std::string> genes_;
    std::vector<std::string> cells_;
    std::vector<std::string> labels_;
    Matrix values_;
    std::vector<std::string> cell_types_;
    std::vector<std::size_t> type_of_cell_;
    std::vector<std::vector<std::size_t>> members_;
    IdIndex gene_index_;
    IdIndex type_index_;
};

/// Matrix TSV (genes x cells) plus a JSON sidecar `{cell_id: cell_type}`.
ReferenceDataset load_reference(const std::filesystem::path& matrix_path, const std::filesystem::path& labels_path);
void save_reference(const ReferenceDataset& ref, const std::filesystem::path& matrix_path,
                    const std::filesystem::path& labels_path);

inline constexpr double kDefaultShrinkage = 0.5;
inline constexpr int kPseudoReplicates = 20;

/**
 * Empirical per-gene priors from the reference.
 *
 * mu[c] is the mean of the gene over cells of type c. The covariance starts from S, the
 * C x C covariance of per-type pseudo-replicate means: each of `resamples` replicates
 * averages a random half of every type's cells, and the halves are shared across genes.
 * sigma = (1 - shrinkage) S + shrinkage diag(S), then eps I is added (eps = 1e-6 tr(S) / C,
 * doubling) until the matrix is positive definite. noise_var is the pooled within-type variance.
 */
std::vector<GenePrior> estimate_priors(const ReferenceDataset& ref, double shrinkage = kDefaultShrinkage,
                                       std::uint64_t seed = 0, int resamples = kPseudoReplicates,
                                       unsigned threads = 1);

/// G x C matrix of per-type mean expression.
Matrix signature_matrix(const ReferenceDataset& ref);

/// G x C matrix of per-type sample variance (n - 1 denominator).
Matrix within_type_variance(const ReferenceDataset& ref);

} // namespace diagno
