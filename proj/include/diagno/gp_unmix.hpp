#pragma once

#include "diagno/gene_select.hpp"
#include "diagno/random.hpp"
#include "diagno/reference_prior.hpp"
#include "diagno/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace diagno {

/// Hyperpriors of the blocked Gibbs sampler.
struct HyperPriors {
    /// Prior variance of every covariate coefficient (mean 0).
    double coef_var = 10.0;
    /// Inverse-Gamma(shape, rate) prior on the per-gene noise variance.
    double noise_shape = 2.0;
    double noise_rate = 1.0;
    /// When false the corresponding block stays at its initial value.
    bool sample_noise = true;
    bool sample_coefficients = true;
};

struct ConditionalNormal {
    Vector mean;
    Matrix cov;
};

/**
 * Exact Gaussian conditional of z_{g,.,i} given one bulk value:
 * cov = (Sigma^-1 + w w^T / s2)^-1, mean = cov (Sigma^-1 mu + w r / s2),
 * where r = x - gamma . c1 - w . (B c2). Computed in the equivalent rank-one update
 * form, which stays finite as s2 grows.
 */
ConditionalNormal z_conditional(const GenePrior& prior, double x, const SampleMeta& meta, const AdjustmentParams& adj,
                                double noise_var);
inline ConditionalNormal z_conditional(const GenePrior& prior, double x, const SampleMeta& meta,
                                       const AdjustmentParams& adj) {
    return z_conditional(prior, x, meta, adj, prior.noise_var());
}

/// Sampler state for one gene within one chain.
struct GeneChainState {
    /// C x N current draws.
    Matrix z;
    AdjustmentParams adj;
    double noise_var = 1.0;
    Random rng{0};
};

struct ChainState {
    std::vector<GeneChainState> genes;
    std::uint64_t iteration = 0;
    std::uint64_t seed = 0;
};

/**
 * Over-dispersed start: z = mu + 2 L xi per sample, coefficients from N(0, 1) (or `initial`
 * when given), noise variance from the prior. Gene g draws from stream (seed, chain, g).
 */
ChainState init_chain(const BulkMatrix& bulk, const std::vector<GenePrior>& priors,
                      const std::vector<SampleMeta>& metas, std::uint64_t seed, std::uint64_t chain,
                      const HyperPriors& hyper = {}, const std::vector<AdjustmentParams>* initial = nullptr);

/**
 * One full sweep: per gene, (a) every z_{g,.,i} from its exact conditional, (b) gamma and B
 * jointly from the Bayesian linear-regression conditional against x - w^T z, (c) the noise
 * variance from Inverse-Gamma(a0 + N/2, b0 + SS/2).
 */
ChainState gibbs_sweep(ChainState state, const BulkMatrix& bulk, const std::vector<GenePrior>& priors,
                       const std::vector<SampleMeta>& metas, const HyperPriors& hyper = {});

struct PosteriorSummary {
    CtsTensor cts;
    std::vector<Vector> mu_hat;
    std::vector<Matrix> sigma_hat;
    std::vector<double> noise_var_hat;
    std::vector<AdjustmentParams> adj_hat;
    /// G x C split R-hat of the per-iteration sample-average of z; NaN when undefined.
    Matrix rhat;
    bool converged = false;
    std::string diagnostic;
    /// G x C, 1 where the entry was modeled, 0 where it carries the reference prior.
    std::vector<unsigned char> modeled;

    double max_rhat() const;
};

struct McmcOptions {
    HyperPriors hyper;
    unsigned threads = 1;
    /// Fixed or starting coefficients per gene; zero-initialised when absent and not sampled.
    const std::vector<AdjustmentParams>* initial_adjustments = nullptr;
};

/**
 * Runs `config.chains` independent chains, discards burn-in, and pools post-burn-in draws.
 * Posterior moments of z are Rao-Blackwellized: each kept draw contributes the exact
 * conditional mean and covariance of z given its coefficients and noise variance.
 * mu_hat and sigma_hat are the mean and covariance of z pooled over samples, iterations
 * and chains. Non-convergence is reported through `converged`.
 */
PosteriorSummary run_mcmc(const BulkMatrix& bulk, const std::vector<GenePrior>& priors,
                          const std::vector<SampleMeta>& metas, const std::vector<std::string>& cell_types,
                          const RefinementConfig& config, std::uint64_t seed, const McmcOptions& options = {});

/// Split R-hat over >= 2 chains of equal length >= 4; odd lengths drop their first draw.
double split_rhat(const std::vector<std::vector<double>>& chains);

/**
 * New priors per gene: mean ~ N(mu_hat, tau^2 I), covariance ~ InvWishart(sigma_hat (nu - C - 1), nu)
 * so that the Inverse-Wishart mean is sigma_hat. Non-SPD draws are retried up to 100 times.
 */
std::vector<GenePrior> refine_priors(const PosteriorSummary& summary, const std::vector<GenePrior>& priors,
                                     const RefinementConfig& config, std::uint64_t seed);

struct DeconvolveOptions {
    McmcOptions mcmc;
    double shrinkage = kDefaultShrinkage;
};

struct DeconvolutionResult {
    /// Summary of the last round over all output genes.
    PosteriorSummary final_summary;
    /// Per-round summaries over the same genes, first round first.
    std::vector<PosteriorSummary> rounds;
};

/// Seed of the MCMC run of round r (round 0 uses the master seed).
std::uint64_t round_seed(std::uint64_t seed, int round);

/**
 * Reference priors, restriction to genes with at least one selected pair, then MCMC and
 * prior refinement alternated for `config.rounds` runs. Output genes are the bulk genes
 * present in the reference; unselected pairs carry the reference prior mean and variance.
 */
DeconvolutionResult deconvolve(const BulkMatrix& bulk, const ReferenceDataset& ref, const PairSelection& selection,
                               const std::vector<SampleMeta>& metas, const RefinementConfig& config,
                               std::uint64_t seed, const DeconvolveOptions& options = {});

/// Diagnostic TSV `gene<TAB>cell_type<TAB>rhat`.
std::string format_rhat_table(const PosteriorSummary& summary);

} // namespace diagno
