#include "diagno/types.hpp"

#include "diagno/errors.hpp"

#include <cmath>
#include <limits>

namespace diagno {

namespace {

bool all_finite(const Eigen::Ref<const Matrix>& m) {
    return m.allFinite();
}

} // namespace

IdIndex::IdIndex(const std::vector<std::string>& ids, std::string_view what) : what_(what) {
    map_.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (!map_.emplace(ids[i], i).second) {
            throw ValidationError("duplicate " + what_ + " ID '" + ids[i] + "'");
        }
    }
}

std::optional<std::size_t> IdIndex::find(std::string_view id) const {
    auto it = map_.find(std::string(id));
    if (it == map_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t IdIndex::at(std::string_view id) const {
    auto found = find(id);
    if (!found) {
        throw ValidationError("unknown " + what_ + " ID '" + std::string(id) + "'");
    }
    return *found;
}

BulkMatrix::BulkMatrix(std::vector<std::string> genes, std::vector<std::string> samples, Matrix values)
    : genes_(std::move(genes)), samples_(std::move(samples)), values_(std::move(values)) {
    if (genes_.empty() || samples_.empty()) {
        throw ValidationError("bulk matrix needs at least one gene and one sample");
    }
    if (static_cast<std::size_t>(values_.rows()) != genes_.size() ||
        static_cast<std::size_t>(values_.cols()) != samples_.size()) {
        throw ValidationError("bulk matrix dimensions do not match its labels");
    }
    if (!all_finite(values_)) {
        throw ValidationError("bulk matrix contains non-finite values");
    }
    gene_index_ = IdIndex(genes_, "gene");
    sample_index_ = IdIndex(samples_, "sample");
}

BulkMatrix BulkMatrix::select_genes(std::span<const std::size_t> rows) const {
    std::vector<std::string> genes;
    Matrix values(static_cast<Eigen::Index>(rows.size()), values_.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        genes.push_back(genes_.at(rows[k]));
        values.row(static_cast<Eigen::Index>(k)) = values_.row(static_cast<Eigen::Index>(rows[k]));
    }
    return BulkMatrix(std::move(genes), samples_, std::move(values));
}

CtsTensor::CtsTensor(std::vector<std::string> genes, std::vector<std::string> cell_types,
                     std::vector<std::string> samples, std::vector<double> mean, std::vector<double> variance)
    : genes_(std::move(genes)),
      cell_types_(std::move(cell_types)),
      samples_(std::move(samples)),
      mean_(std::move(mean)),
      variance_(std::move(variance)) {
    const std::size_t total = genes_.size() * cell_types_.size() * samples_.size();
    if (mean_.size() != total || variance_.size() != total) {
        throw ValidationError("CTS tensor data size does not match its axes");
    }
    for (std::size_t k = 0; k < total; ++k) {
        if (!std::isfinite(mean_[k]) || !std::isfinite(variance_[k])) {
            throw ValidationError("CTS tensor contains non-finite values");
        }
        if (variance_[k] < 0.0) {
            throw ValidationError("CTS tensor variance is negative");
        }
    }
    gene_index_ = IdIndex(genes_, "gene");
    cell_type_index_ = IdIndex(cell_types_, "cell type");
    sample_index_ = IdIndex(samples_, "sample");
}

GenePrior::GenePrior(std::string gene, Vector mu, Matrix sigma, double noise_var)
    : gene_(std::move(gene)), mu_(std::move(mu)), sigma_(std::move(sigma)), noise_var_(noise_var) {
    const auto c = mu_.size();
    if (c < 1 || sigma_.rows() != c || sigma_.cols() != c) {
        throw ValidationError("prior for gene '" + gene_ + "' has inconsistent dimensions");
    }
    if (!mu_.allFinite() || !sigma_.allFinite()) {
        throw ValidationError("prior for gene '" + gene_ + "' is not finite");
    }
    if ((sigma_ - sigma_.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
        throw ValidationError("prior covariance for gene '" + gene_ + "' is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma_, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0) {
        throw ValidationError("prior covariance for gene '" + gene_ + "' is not positive definite");
    }
    if (!(noise_var_ > 0.0) || !std::isfinite(noise_var_)) {
        throw ValidationError("prior noise variance for gene '" + gene_ + "' must be positive");
    }
}

SampleMeta::SampleMeta(std::string sample_id, Vector proportions, Vector bulk_cov, Vector cts_cov)
    : sample_id_(std::move(sample_id)),
      proportions_(std::move(proportions)),
      bulk_cov_(std::move(bulk_cov)),
      cts_cov_(std::move(cts_cov)) {
    if (proportions_.size() < 1) {
        throw ValidationError("sample '" + sample_id_ + "' has no cell-type proportions");
    }
    if (!proportions_.allFinite() || (proportions_.array() < 0.0).any()) {
        throw ValidationError("sample '" + sample_id_ + "' has negative or non-finite proportions");
    }
    const double total = proportions_.sum();
    if (std::abs(total - 1.0) > kSimplexTolerance) {
        throw ValidationError("proportions of sample '" + sample_id_ + "' sum to " + std::to_string(total));
    }
    // leave vectors that already sum to 1 up to rounding untouched so that renormalization is idempotent
    const double rounding = 4.0 * static_cast<double>(proportions_.size()) * std::numeric_limits<double>::epsilon();
    if (std::abs(total - 1.0) > rounding) {
        proportions_ /= total;
    }
    if (!bulk_cov_.allFinite() || !cts_cov_.allFinite()) {
        throw ValidationError("sample '" + sample_id_ + "' has non-finite covariates");
    }
}

AdjustmentParams AdjustmentParams::zeros(std::size_t num_cell_types, std::size_t d1, std::size_t d2) {
    return {Vector::Zero(static_cast<Eigen::Index>(d1)),
            Matrix::Zero(static_cast<Eigen::Index>(num_cell_types), static_cast<Eigen::Index>(d2))};
}

void AdjustmentParams::validate(std::size_t num_cell_types, std::size_t d1, std::size_t d2) const {
    if (static_cast<std::size_t>(gamma.size()) != d1 || static_cast<std::size_t>(b.rows()) != num_cell_types ||
        static_cast<std::size_t>(b.cols()) != d2) {
        throw ValidationError("adjustment parameters do not match covariate dimensions");
    }
    if (!gamma.allFinite() || !b.allFinite()) {
        throw ValidationError("adjustment parameters are not finite");
    }
}

double covariate_effect(const AdjustmentParams& adj, const SampleMeta& meta) {
    double out = 0.0;
    if (adj.gamma.size() > 0) {
        out += adj.gamma.dot(meta.bulk_cov());
    }
    if (adj.b.cols() > 0) {
        out += meta.proportions().dot(adj.b * meta.cts_cov());
    }
    return out;
}

double RefinementConfig::resolved_nu(std::size_t num_cell_types) const {
    return nu.value_or(static_cast<double>(num_cell_types) + 2.0);
}

int RefinementConfig::resolved_burnin() const {
    return burnin.value_or(iters / 2);
}

void RefinementConfig::validate(std::size_t num_cell_types) const {
    if (!(tau >= 0.0) || !std::isfinite(tau)) {
        throw ValidationError("tau must be a non-negative finite number");
    }
    if (!(resolved_nu(num_cell_types) >= static_cast<double>(num_cell_types) + 2.0)) {
        throw ValidationError("nu must be at least C + 2");
    }
    if (rounds < 1) {
        throw ValidationError("rounds must be positive");
    }
    if (chains < 2) {
        throw ValidationError("at least two chains are required");
    }
    // iters == 0 is accepted so a degenerate run can report non-convergence instead of failing
    if (iters < 0) {
        throw ValidationError("iters must be non-negative");
    }
    const int b = resolved_burnin();
    if (b < 0 || (iters > 0 && b >= iters) || (iters == 0 && b != 0)) {
        throw ValidationError("burnin must be in [0, iters)");
    }
    if (!(rhat_threshold > 1.0)) {
        throw ValidationError("rhat threshold must exceed 1");
    }
}

} // namespace diagno
