#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace diagno {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Lookup from identifier to position; rejects duplicates on construction.
class IdIndex {
public:
    IdIndex() = default;
    IdIndex(const std::vector<std::string>& ids, std::string_view what);

    std::optional<std::size_t> find(std::string_view id) const;
    std::size_t at(std::string_view id) const;

private:
    std::unordered_map<std::string, std::size_t> map_;
    std::string what_;
};

/**
 * Observed bulk expression, G genes by N samples, already on a log-normalized scale.
 * Rows and columns keep the order they were given in.
 */
class BulkMatrix {
public:
    BulkMatrix(std::vector<std::string> genes, std::vector<std::string> samples, Matrix values);

    const std::vector<std::string>& genes() const { return genes_; }
    const std::vector<std::string>& samples() const { return samples_; }
    const Matrix& values() const { return values_; }
    std::size_t num_genes() const { return genes_.size(); }
    std::size_t num_samples() const { return samples_.size(); }
    std::optional<std::size_t> gene_index(std::string_view gene) const { return gene_index_.find(gene); }
    std::optional<std::size_t> sample_index(std::string_view sample) const { return sample_index_.find(sample); }

    BulkMatrix select_genes(std::span<const std::size_t> rows) const;

private:
    std::vector<std::string> genes_;
    std::vector<std::string> samples_;
    Matrix values_;
    IdIndex gene_index_;
    IdIndex sample_index_;
};

/**
 * Cell-type-specific expression, G x C x N, with a posterior mean and variance per entry.
 * Storage is gene-major: ((g * C) + c) * N + i.
 */
class CtsTensor {
public:
    CtsTensor(std::vector<std::string> genes, std::vector<std::string> cell_types, std::vector<std::string> samples,
              std::vector<double> mean, std::vector<double> variance);

    const std::vector<std::string>& genes() const { return genes_; }
    const std::vector<std::string>& cell_types() const { return cell_types_; }
    const std::vector<std::string>& samples() const { return samples_; }
    std::size_t num_genes() const { return genes_.size(); }
    std::size_t num_cell_types() const { return cell_types_.size(); }
    std::size_t num_samples() const { return samples_.size(); }

    std::size_t offset(std::size_t g, std::size_t c, std::size_t i) const {
        return (g * cell_types_.size() + c) * samples_.size() + i;
    }
    double mean(std::size_t g, std::size_t c, std::size_t i) const { return mean_[offset(g, c, i)]; }
    double variance(std::size_t g, std::size_t c, std::size_t i) const { return variance_[offset(g, c, i)]; }
    const std::vector<double>& mean_data() const { return mean_; }
    const std::vector<double>& variance_data() const { return variance_; }

    std::optional<std::size_t> gene_index(std::string_view gene) const { return gene_index_.find(gene); }
    std::optional<std::size_t> cell_type_index(std::string_view ct) const { return cell_type_index_.find(ct); }
    std::optional<std::size_t> sample_index(std::string_view s) const { return sample_index_.find(s); }

private:
    std::vector<std::string> genes_;
    std::vector<std::string> cell_types_;
    std::vector<std::string> samples_;
    std::vector<double> mean_;
    std::vector<double> variance_;
    IdIndex gene_index_;
    IdIndex cell_type_index_;
    IdIndex sample_index_;
};

/// Per-gene Normal prior over the C-vector of cell-type expression, plus observation noise variance.
class GenePrior {
public:
    GenePrior(std::string gene, Vector mu, Matrix sigma, double noise_var);

    const std::string& gene() const { return gene_; }
    const Vector& mu() const { return mu_; }
    const Matrix& sigma() const { return sigma_; }
    double noise_var() const { return noise_var_; }
    std::size_t num_cell_types() const { return static_cast<std::size_t>(mu_.size()); }

private:
    std::string gene_;
    Vector mu_;
    Matrix sigma_;
    double noise_var_;
};

/// Absolute tolerance for the proportion simplex. Inside it inputs are renormalized, outside rejected.
inline constexpr double kSimplexTolerance = 1e-8;

class SampleMeta {
public:
    SampleMeta(std::string sample_id, Vector proportions, Vector bulk_cov = {}, Vector cts_cov = {});

    const std::string& sample_id() const { return sample_id_; }
    const Vector& proportions() const { return proportions_; }
    const Vector& bulk_cov() const { return bulk_cov_; }
    const Vector& cts_cov() const { return cts_cov_; }

private:
    std::string sample_id_;
    Vector proportions_;
    Vector bulk_cov_;
    Vector cts_cov_;
};

/// Covariate coefficients for one gene: gamma (d1) on bulk covariates, b (C x d2) on CTS covariates.
struct AdjustmentParams {
    Vector gamma;
    Matrix b;

    static AdjustmentParams zeros(std::size_t num_cell_types, std::size_t d1, std::size_t d2);
    void validate(std::size_t num_cell_types, std::size_t d1, std::size_t d2) const;
};

/// Covariate contribution gamma . c1 + w . (b c2) for one sample.
double covariate_effect(const AdjustmentParams& adj, const SampleMeta& meta);

struct RefinementConfig {
    double tau = 0.1;
    /// Inverse-Wishart degrees of freedom; unset means C + 2.
    std::optional<double> nu;
    int rounds = 2;
    int chains = 4;
    int iters = 2000;
    /// Unset means iters / 2.
    std::optional<int> burnin;
    double rhat_threshold = 1.05;

    double resolved_nu(std::size_t num_cell_types) const;
    int resolved_burnin() const;
    void validate(std::size_t num_cell_types) const;
};

} // namespace diagno
