#pragma once

#include "diagno/reference_prior.hpp"
#include "diagno/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace diagno {

/// Sample Pearson correlation. Throws on length mismatch, fewer than 2 points or zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

/// Linear-interpolated quantile of the sorted values (q in [0, 1]).
double quantile(std::vector<double> values, double q);

struct PccStats {
    std::size_t count = 0;
    /// Rows skipped because either side had zero variance.
    std::size_t excluded = 0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
};

struct CellTypeRecovery {
    std::string cell_type;
    PccStats per_gene;
    PccStats per_sample;
};

struct RecoveryReport {
    std::vector<CellTypeRecovery> cell_types;
    /// Pooled over every (gene, cell type) and every (sample, cell type).
    PccStats per_gene;
    PccStats per_sample;
    /// G x C per-gene PCC, NaN where excluded.
    Matrix gene_pcc;
    std::vector<std::string> genes;
};

/// Per-gene PCC across samples for each (g, c) and per-sample PCC across genes for each (i, c).
RecoveryReport evaluate_recovery(const CtsTensor& estimate, const CtsTensor& truth);

std::string format_recovery_json(const RecoveryReport& report);
/// `gene<TAB>cell_type<TAB>pcc`, NA where excluded.
std::string format_gene_pcc_tsv(const RecoveryReport& report);

/// Lawson-Hanson active-set solution of min ||A x - b||^2 subject to x >= 0.
Vector nnls(const Matrix& a, const Vector& b);

/// NNLS fit of a bulk column on a signature matrix, renormalized onto the simplex.
Vector nnls_proportions(const Vector& bulk_column, const Matrix& signature);

/// Every sample gets the reference type mean; variance is the within-type variance.
CtsTensor baseline_reference_mean(const ReferenceDataset& ref, const BulkMatrix& bulk);

/**
 * Per-gene OLS of x on the proportions, ignoring covariates: beta = argmin ||x - W beta||.
 * The per-sample estimate adds the minimum-norm share of that sample's residual,
 * z_i = beta + w_i (x_i - w_i . beta) / ||w_i||^2, so that w_i . z_i = x_i.
 */
CtsTensor baseline_ols(const BulkMatrix& bulk, const std::vector<SampleMeta>& metas,
                       const std::vector<std::string>& cell_types);

} // namespace diagno
