#pragma once

#include "diagno/reference_prior.hpp"
#include "diagno/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace diagno {

struct SyntheticScenario {
    std::size_t genes = 50;
    std::size_t cell_types = 3;
    std::size_t samples = 60;
    std::size_t d1 = 2;
    std::size_t d2 = 1;
    /// Empty means 10 for every cell type.
    std::vector<double> dirichlet_alpha;
    double noise_sd = 0.5;
    double covariate_effect_scale = 0.5;
    std::uint64_t seed = 1;
    std::size_t cells_per_type = 50;

    Vector alpha() const;
    void validate() const;
};

std::string format_scenario(const SyntheticScenario& s);
/// Missing keys keep their defaults; unknown keys are rejected.
SyntheticScenario parse_scenario(std::string_view text);

struct GroundTruthBundle {
    BulkMatrix bulk;
    /// Variance is zero everywhere.
    CtsTensor true_z;
    std::vector<SampleMeta> metas;
    ReferenceDataset ref;
    std::vector<AdjustmentParams> true_params;
    /// G x N observation noise added to the bulk.
    Matrix noise;
    std::vector<GenePrior> true_priors;
};

/**
 * Draws a full synthetic instance. Per gene mu ~ N(5, 2^2) per type and
 * Sigma = D^1/2 (rho 11^T + (1 - rho) I) D^1/2 with D_cc ~ U(1, 3), rho ~ U(0.85, 0.95);
 * z ~ N(mu, Sigma); w ~ Dirichlet(alpha); covariates ~ N(0, 1); gamma, B ~ N(0, scale^2).
 * Reference cells are N(mu_c, Sigma_cc) per type.
 */
GroundTruthBundle generate(const SyntheticScenario& scenario);

/// Writes bulk.tsv, metas.json, reference.tsv, reference_labels.json, truth_{mean,variance}.tsv,
/// true_params.json and scenario.json into `dir`.
void save_bundle(const GroundTruthBundle& bundle, const SyntheticScenario& scenario, const std::filesystem::path& dir);

} // namespace diagno
