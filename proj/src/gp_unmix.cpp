#include "diagno/gp_unmix.hpp"

#include "diagno/errors.hpp"
#include "diagno/io.hpp"
#include "diagno/numeric_format.hpp"
#include "diagno/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace diagno {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Everything about the samples that stays fixed within a run.
struct Design {
    Eigen::Index C = 0, N = 0, d1 = 0, d2 = 0;
    Matrix W;   // C x N proportions
    Matrix D;   // N x p covariate design: [c1, w (x) c2]
    Matrix DtD; // p x p

    Eigen::Index p() const { return d1 + C * d2; }
};

Design build_design(const std::vector<SampleMeta>& metas, std::size_t num_cell_types) {
    Design d;
    d.C = static_cast<Eigen::Index>(num_cell_types);
    d.N = static_cast<Eigen::Index>(metas.size());
    d.d1 = metas.empty() ? 0 : metas.front().bulk_cov().size();
    d.d2 = metas.empty() ? 0 : metas.front().cts_cov().size();
    d.W.resize(d.C, d.N);
    d.D.resize(d.N, d.p());
    for (Eigen::Index i = 0; i < d.N; ++i) {
        const auto& m = metas[static_cast<std::size_t>(i)];
        if (m.proportions().size() != d.C) {
            throw ValidationError("sample '" + m.sample_id() + "' has the wrong number of proportions");
        }
        if (m.bulk_cov().size() != d.d1 || m.cts_cov().size() != d.d2) {
            throw ValidationError("sample '" + m.sample_id() + "' has inconsistent covariate lengths");
        }
        d.W.col(i) = m.proportions();
        for (Eigen::Index k = 0; k < d.d1; ++k) {
            d.D(i, k) = m.bulk_cov()[k];
        }
        // w^T B c2 = sum_c sum_k w_c c2_k B(c, k); B is flattened row-major
        for (Eigen::Index c = 0; c < d.C; ++c) {
            for (Eigen::Index k = 0; k < d.d2; ++k) {
                d.D(i, d.d1 + c * d.d2 + k) = m.proportions()[c] * m.cts_cov()[k];
            }
        }
    }
    d.DtD = d.D.transpose() * d.D;
    return d;
}

Vector pack(const AdjustmentParams& adj, const Design& d) {
    Vector theta(d.p());
    for (Eigen::Index k = 0; k < d.d1; ++k) {
        theta[k] = adj.gamma[k];
    }
    for (Eigen::Index c = 0; c < d.C; ++c) {
        for (Eigen::Index k = 0; k < d.d2; ++k) {
            theta[d.d1 + c * d.d2 + k] = adj.b(c, k);
        }
    }
    return theta;
}

void unpack(const Vector& theta, const Design& d, AdjustmentParams& adj) {
    for (Eigen::Index k = 0; k < d.d1; ++k) {
        adj.gamma[k] = theta[k];
    }
    for (Eigen::Index c = 0; c < d.C; ++c) {
        for (Eigen::Index k = 0; k < d.d2; ++k) {
            adj.b(c, k) = theta[d.d1 + c * d.d2 + k];
        }
    }
}

/// Prior quantities reused by every sweep of one gene.
struct PreparedPrior {
    Vector mu;
    Matrix L;       // lower Cholesky factor of Sigma
    Matrix sigma_w; // C x N, Sigma w_i
    Vector w_sigma_w;
    Vector sigma;       // diagonal of Sigma
    Matrix sigma_full;
};

PreparedPrior prepare(const GenePrior& prior, const Design& d) {
    if (static_cast<Eigen::Index>(prior.num_cell_types()) != d.C) {
        throw ValidationError("prior for gene '" + prior.gene() + "' has the wrong number of cell types");
    }
    PreparedPrior pp;
    pp.mu = prior.mu();
    Eigen::LLT<Matrix> llt(prior.sigma());
    if (llt.info() != Eigen::Success) {
        throw NumericalError("prior covariance of gene '" + prior.gene() + "' has no Cholesky factor");
    }
    pp.L = llt.matrixL();
    pp.sigma_w = prior.sigma() * d.W;
    pp.w_sigma_w = (d.W.array() * pp.sigma_w.array()).colwise().sum().transpose();
    pp.sigma = prior.sigma().diagonal();
    pp.sigma_full = prior.sigma();
    return pp;
}

GeneChainState init_gene(const GenePrior& prior, const PreparedPrior& pp, const Design& d, std::uint64_t seed,
                         std::uint64_t chain, std::size_t gene, const HyperPriors& hyper,
                         const AdjustmentParams* initial) {
    GeneChainState s;
    s.rng = Random(derive_seed(seed, {chain, static_cast<std::uint64_t>(gene)}));
    s.z.resize(d.C, d.N);
    for (Eigen::Index i = 0; i < d.N; ++i) {
        s.z.col(i) = pp.mu + 2.0 * (pp.L * s.rng.normal_vector(d.C));
    }
    if (initial) {
        initial->validate(static_cast<std::size_t>(d.C), static_cast<std::size_t>(d.d1), static_cast<std::size_t>(d.d2));
        s.adj = *initial;
    } else {
        s.adj = AdjustmentParams::zeros(static_cast<std::size_t>(d.C), static_cast<std::size_t>(d.d1),
                                        static_cast<std::size_t>(d.d2));
        if (hyper.sample_coefficients) {
            Vector theta = s.rng.normal_vector(d.p());
            unpack(theta, d, s.adj);
        }
    }
    s.noise_var = prior.noise_var();
    return s;
}

void sweep_gene(GeneChainState& s, const Eigen::Ref<const Eigen::RowVectorXd>& x, const PreparedPrior& pp,
                const Design& d, const HyperPriors& hyper) {
    const Eigen::Index p = d.p();
    Vector theta = pack(s.adj, d);
    Vector effect = p > 0 ? Vector(d.D * theta) : Vector::Zero(d.N);

    // (a) z | rest, by conditioning a joint prior draw on the observed residual
    const double noise_sd = std::sqrt(s.noise_var);
    for (Eigen::Index i = 0; i < d.N; ++i) {
        const double r = x[i] - effect[i];
        Vector z0 = pp.mu + pp.L * s.rng.normal_vector(d.C);
        const double y0 = d.W.col(i).dot(z0) + noise_sd * s.rng.normal();
        const double denom = pp.w_sigma_w[i] + s.noise_var;
        s.z.col(i) = z0 + pp.sigma_w.col(i) * ((r - y0) / denom);
    }
    const Vector mixed = (d.W.array() * s.z.array()).colwise().sum().transpose();

    // (b) gamma, B | rest
    if (hyper.sample_coefficients && p > 0) {
        const Vector y = x.transpose() - mixed;
        Matrix precision = d.DtD / s.noise_var;
        precision.diagonal().array() += 1.0 / hyper.coef_var;
        Eigen::LLT<Matrix> llt(precision);
        if (llt.info() != Eigen::Success) {
            throw NumericalError("coefficient precision is not positive definite");
        }
        const Vector mean = llt.solve(d.D.transpose() * y / s.noise_var);
        theta = mean + llt.matrixU().solve(s.rng.normal_vector(p));
        unpack(theta, d, s.adj);
        effect = d.D * theta;
    }

    // (c) noise variance | rest
    if (hyper.sample_noise) {
        const double ss = (x.transpose() - mixed - effect).squaredNorm();
        const double shape = hyper.noise_shape + 0.5 * static_cast<double>(d.N);
        const double rate = hyper.noise_rate + 0.5 * ss;
        s.noise_var = 1.0 / s.rng.gamma(shape, 1.0 / rate);
    }
}

void check_inputs(const BulkMatrix& bulk, const std::vector<GenePrior>& priors, const std::vector<SampleMeta>& metas) {
    if (priors.size() != bulk.num_genes()) {
        throw ValidationError("need one prior per bulk gene");
    }
    if (metas.size() != bulk.num_samples()) {
        throw ValidationError("need one metadata record per bulk sample");
    }
    for (std::size_t i = 0; i < metas.size(); ++i) {
        if (metas[i].sample_id() != bulk.samples()[i]) {
            throw ValidationError("metadata order does not match bulk samples at '" + bulk.samples()[i] + "'");
        }
    }
    for (std::size_t g = 0; g < priors.size(); ++g) {
        if (priors[g].gene() != bulk.genes()[g]) {
            throw ValidationError("prior order does not match bulk genes at '" + bulk.genes()[g] + "'");
        }
    }
}

} // namespace

ConditionalNormal z_conditional(const GenePrior& prior, double x, const SampleMeta& meta, const AdjustmentParams& adj,
                                double noise_var) {
    const Vector& w = meta.proportions();
    if (w.size() != prior.mu().size()) {
        throw ValidationError("proportions and prior disagree on the number of cell types");
    }
    const double r = x - covariate_effect(adj, meta);
    if (!std::isfinite(r)) {
        throw ValidationError("residual target is not finite");
    }
    const Vector sigma_w = prior.sigma() * w;
    const double denom = w.dot(sigma_w) + noise_var;
    if (!(denom > 0.0)) {
        throw NumericalError("conditional precision is singular");
    }
    ConditionalNormal out;
    if (std::isinf(noise_var)) {
        out.mean = prior.mu();
        out.cov = prior.sigma();
        return out;
    }
    out.mean = prior.mu() + sigma_w * ((r - w.dot(prior.mu())) / denom);
    out.cov = prior.sigma() - sigma_w * sigma_w.transpose() / denom;
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    return out;
}

ChainState init_chain(const BulkMatrix& bulk, const std::vector<GenePrior>& priors,
                      const std::vector<SampleMeta>& metas, std::uint64_t seed, std::uint64_t chain,
                      const HyperPriors& hyper, const std::vector<AdjustmentParams>* initial) {
    check_inputs(bulk, priors, metas);
    const auto design = build_design(metas, priors.front().num_cell_types());
    ChainState state;
    state.seed = seed;
    for (std::size_t g = 0; g < priors.size(); ++g) {
        const auto pp = prepare(priors[g], design);
        state.genes.push_back(init_gene(priors[g], pp, design, seed, chain, g, hyper, initial ? &initial->at(g) : nullptr));
    }
    return state;
}

ChainState gibbs_sweep(ChainState state, const BulkMatrix& bulk, const std::vector<GenePrior>& priors,
                       const std::vector<SampleMeta>& metas, const HyperPriors& hyper) {
    check_inputs(bulk, priors, metas);
    if (state.genes.size() != priors.size()) {
        throw ValidationError("chain state does not match the number of genes");
    }
    const auto design = build_design(metas, priors.front().num_cell_types());
    for (std::size_t g = 0; g < priors.size(); ++g) {
        const auto pp = prepare(priors[g], design);
        auto& s = state.genes[g];
        if (s.z.rows() != design.C || s.z.cols() != design.N) {
            throw ValidationError("chain state has the wrong z dimensions");
        }
        sweep_gene(s, bulk.values().row(static_cast<Eigen::Index>(g)), pp, design, hyper);
    }
    ++state.iteration;
    return state;
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
    if (chains.size() < 2) {
        throw ValidationError("split R-hat needs at least two chains");
    }
    const std::size_t len = chains.front().size();
    for (const auto& c : chains) {
        if (c.size() != len) {
            throw ValidationError("split R-hat needs chains of equal length");
        }
    }
    if (len < 4) {
        throw ValidationError("split R-hat needs chains of length at least 4");
    }
    const std::size_t skip = len % 2;
    const std::size_t n = (len - skip) / 2;
    std::vector<double> means, vars;
    for (const auto& c : chains) {
        for (std::size_t h = 0; h < 2; ++h) {
            const auto begin = c.begin() + static_cast<std::ptrdiff_t>(skip + h * n);
            double m = 0.0;
            for (auto it = begin; it != begin + static_cast<std::ptrdiff_t>(n); ++it) {
                m += *it;
            }
            m /= static_cast<double>(n);
            double v = 0.0;
            for (auto it = begin; it != begin + static_cast<std::ptrdiff_t>(n); ++it) {
                v += (*it - m) * (*it - m);
            }
            means.push_back(m);
            vars.push_back(v / static_cast<double>(n - 1));
        }
    }
    const double m_count = static_cast<double>(means.size());
    double grand = 0.0;
    for (double m : means) {
        grand += m;
    }
    grand /= m_count;
    double between = 0.0;
    for (double m : means) {
        between += (m - grand) * (m - grand);
    }
    const double nd = static_cast<double>(n);
    between *= nd / (m_count - 1.0);
    double within = 0.0;
    for (double v : vars) {
        within += v;
    }
    within /= m_count;
    if (!(within > 0.0)) {
        return between > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    }
    return std::sqrt(((nd - 1.0) / nd * within + between / nd) / within);
}

double PosteriorSummary::max_rhat() const {
    double out = kNaN;
    for (Eigen::Index k = 0; k < rhat.size(); ++k) {
        const double v = rhat.data()[k];
        if (!std::isnan(v) && (std::isnan(out) || v > out)) {
            out = v;
        }
    }
    return out;
}

namespace {

struct GeneAccumulator {
    std::vector<double> sum;   // C*N, deviations from the prior mean
    std::vector<double> sumsq; // C*N
    std::vector<double> sum_condvar; // C*N, conditional variances
    Vector sum_dev;            // C, pooled over samples
    Matrix sum_outer;          // C x C
    double sum_noise = 0.0;
    Vector sum_theta;
    std::vector<double> rhat;  // C
    std::size_t draws = 0;     // per (c, i)
};

} // namespace

PosteriorSummary run_mcmc(const BulkMatrix& bulk, const std::vector<GenePrior>& priors,
                          const std::vector<SampleMeta>& metas, const std::vector<std::string>& cell_types,
                          const RefinementConfig& config, std::uint64_t seed, const McmcOptions& options) {
    check_inputs(bulk, priors, metas);
    const std::size_t C = cell_types.size();
    config.validate(C);
    const auto design = build_design(metas, C);
    const std::size_t G = bulk.num_genes(), N = bulk.num_samples();
    const int burnin = config.resolved_burnin();
    const auto keep = static_cast<std::size_t>(config.iters - burnin);
    const auto chains = static_cast<std::size_t>(config.chains);
    if (options.initial_adjustments && options.initial_adjustments->size() != G) {
        throw ValidationError("need one set of initial adjustments per gene");
    }

    std::vector<GeneAccumulator> acc(G);
    parallel_for(G, options.threads, [&](std::size_t g) {
        const auto pp = prepare(priors[g], design);
        auto& a = acc[g];
        const auto Ci = static_cast<Eigen::Index>(C);
        a.sum.assign(C * N, 0.0);
        a.sumsq.assign(C * N, 0.0);
        a.sum_condvar.assign(C * N, 0.0);
        a.sum_dev = Vector::Zero(Ci);
        a.sum_outer = Matrix::Zero(Ci, Ci);
        a.sum_theta = Vector::Zero(design.p());
        // traces[c][chain][t]: sample-average of z_{g,c,.} at kept iteration t
        std::vector<std::vector<std::vector<double>>> traces(C, std::vector<std::vector<double>>(chains));
        const auto x = bulk.values().row(static_cast<Eigen::Index>(g));
        for (std::size_t k = 0; k < chains; ++k) {
            const AdjustmentParams* init = options.initial_adjustments ? &(*options.initial_adjustments)[g] : nullptr;
            auto state = init_gene(priors[g], pp, design, seed, k, g, options.hyper, init);
            for (auto& t : traces) {
                t[k].reserve(keep);
            }
            for (int it = 0; it < config.iters; ++it) {
                sweep_gene(state, x, pp, design, options.hyper);
                if (it < burnin) {
                    continue;
                }
                for (std::size_t c = 0; c < C; ++c) {
                    traces[c][k].push_back(state.z.row(static_cast<Eigen::Index>(c)).mean());
                }
                // Rao-Blackwellized moments: average the exact conditional of z given the other blocks
                const Vector effect = design.p() > 0 ? Vector(design.D * pack(state.adj, design)) : Vector::Zero(design.N);
                for (std::size_t i = 0; i < N; ++i) {
                    const auto ii = static_cast<Eigen::Index>(i);
                    const double denom = pp.w_sigma_w[ii] + state.noise_var;
                    const double resid = x[ii] - effect[ii] - design.W.col(ii).dot(pp.mu);
                    const Vector dm = pp.sigma_w.col(ii) * (resid / denom);
                    for (std::size_t c = 0; c < C; ++c) {
                        const auto ci = static_cast<Eigen::Index>(c);
                        a.sum[c * N + i] += dm[ci];
                        a.sumsq[c * N + i] += dm[ci] * dm[ci];
                        a.sum_condvar[c * N + i] += pp.sigma[ci] - pp.sigma_w(ci, ii) * pp.sigma_w(ci, ii) / denom;
                    }
                    a.sum_dev += dm;
                    a.sum_outer += dm * dm.transpose() - pp.sigma_w.col(ii) * pp.sigma_w.col(ii).transpose() / denom;
                }
                a.sum_outer += static_cast<double>(N) * pp.sigma_full;
                a.sum_noise += state.noise_var;
                a.sum_theta += pack(state.adj, design);
            }
        }
        a.draws = chains * keep;
        a.rhat.assign(C, kNaN);
        if (keep >= 4) {
            for (std::size_t c = 0; c < C; ++c) {
                a.rhat[c] = split_rhat(traces[c]);
            }
        }
    });

    std::vector<double> mean(G * C * N), var(G * C * N);
    PosteriorSummary out{CtsTensor({"_"}, {"_"}, {"_"}, {0.0}, {0.0}), {}, {}, {}, {}, Matrix(G, C), false, {}, {}};
    out.modeled.assign(G * C, 1);
    for (std::size_t g = 0; g < G; ++g) {
        const auto& a = acc[g];
        const auto& prior = priors[g];
        const auto Ci = static_cast<Eigen::Index>(C);
        AdjustmentParams adj = AdjustmentParams::zeros(C, static_cast<std::size_t>(design.d1), static_cast<std::size_t>(design.d2));
        if (a.draws == 0) {
            for (std::size_t c = 0; c < C; ++c) {
                for (std::size_t i = 0; i < N; ++i) {
                    mean[(g * C + c) * N + i] = prior.mu()[static_cast<Eigen::Index>(c)];
                    var[(g * C + c) * N + i] = prior.sigma()(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
                }
            }
            out.mu_hat.push_back(prior.mu());
            out.sigma_hat.push_back(prior.sigma());
            out.noise_var_hat.push_back(prior.noise_var());
            if (options.initial_adjustments) {
                adj = (*options.initial_adjustments)[g];
            }
        } else {
            const double n = static_cast<double>(a.draws);
            for (std::size_t c = 0; c < C; ++c) {
                for (std::size_t i = 0; i < N; ++i) {
                    const std::size_t k = c * N + i;
                    const double m = a.sum[k] / n;
                    const double spread = a.draws > 1 ? (a.sumsq[k] - n * m * m) / (n - 1.0) : 0.0;
                    mean[(g * C + c) * N + i] = prior.mu()[static_cast<Eigen::Index>(c)] + m;
                    var[(g * C + c) * N + i] = std::max(a.sum_condvar[k] / n + spread, 0.0);
                }
            }
            const double total = n * static_cast<double>(N);
            const Vector dev_mean = a.sum_dev / total;
            Matrix cov = a.sum_outer / total - dev_mean * dev_mean.transpose();
            cov = 0.5 * (cov + cov.transpose());
            out.mu_hat.push_back(prior.mu() + dev_mean);
            out.sigma_hat.push_back(std::move(cov));
            out.noise_var_hat.push_back(a.sum_noise / n);
            unpack(a.sum_theta / n, design, adj);
        }
        out.adj_hat.push_back(std::move(adj));
        for (Eigen::Index c = 0; c < Ci; ++c) {
            out.rhat(static_cast<Eigen::Index>(g), c) = a.rhat[static_cast<std::size_t>(c)];
        }
    }
    out.cts = CtsTensor(bulk.genes(), cell_types, bulk.samples(), std::move(mean), std::move(var));

    bool defined = true;
    double worst = 1.0;
    for (Eigen::Index k = 0; k < out.rhat.size(); ++k) {
        const double v = out.rhat.data()[k];
        if (std::isnan(v)) {
            defined = false;
        } else {
            worst = std::max(worst, v);
        }
    }
    if (!defined) {
        out.converged = false;
        out.diagnostic = "R-hat undefined: " + std::to_string(keep) +
                         " post-burn-in draws per chain (split R-hat needs at least 4)";
    } else {
        out.converged = worst < config.rhat_threshold;
        out.diagnostic = "max R-hat " + format_short(worst, 6) + (out.converged ? " < " : " >= ") +
                         format_short(config.rhat_threshold, 6);
    }
    return out;
}

std::vector<GenePrior> refine_priors(const PosteriorSummary& summary, const std::vector<GenePrior>& priors,
                                     const RefinementConfig& config, std::uint64_t seed) {
    if (summary.mu_hat.size() != priors.size() || summary.sigma_hat.size() != priors.size()) {
        throw ValidationError("posterior summary does not cover the priors");
    }
    std::vector<GenePrior> out;
    out.reserve(priors.size());
    for (std::size_t g = 0; g < priors.size(); ++g) {
        const std::size_t C = priors[g].num_cell_types();
        config.validate(C);
        const double nu = config.resolved_nu(C);
        Random rng(derive_seed(seed, {static_cast<std::uint64_t>(g)}));
        Vector mu = summary.mu_hat[g];
        if (config.tau > 0.0) {
            mu += config.tau * rng.normal_vector(static_cast<Eigen::Index>(C));
        }
        const Matrix scale = summary.sigma_hat[g] * (nu - static_cast<double>(C) - 1.0);
        std::optional<GenePrior> refined;
        for (int attempt = 0; attempt < 100 && !refined; ++attempt) {
            try {
                refined.emplace(priors[g].gene(), mu, sample_inverse_wishart(rng, scale, nu), summary.noise_var_hat[g]);
            } catch (const ValidationError&) {
            } catch (const NumericalError&) {
            }
        }
        if (!refined) {
            throw NumericalError("inverse-Wishart refinement for gene '" + priors[g].gene() +
                                 "' produced no positive-definite draw in 100 attempts");
        }
        out.push_back(std::move(*refined));
    }
    return out;
}

std::uint64_t round_seed(std::uint64_t seed, int round) {
    return round == 0 ? seed : derive_seed(seed, {0x524f554eULL, static_cast<std::uint64_t>(round)});
}

namespace {

/// Expands a summary over the modeled genes to all output genes, filling the rest from the reference prior.
PosteriorSummary expand_summary(const PosteriorSummary& run, const std::vector<std::size_t>& modeled_rows,
                                const std::vector<std::string>& out_genes, const std::vector<GenePrior>& ref_priors,
                                const PairSelection& selection, const std::vector<std::string>& cell_types,
                                const std::vector<std::string>& samples) {
    const std::size_t G = out_genes.size(), C = cell_types.size(), N = samples.size();
    std::vector<long> run_row(G, -1);
    for (std::size_t m = 0; m < modeled_rows.size(); ++m) {
        run_row[modeled_rows[m]] = static_cast<long>(m);
    }
    std::vector<double> mean(G * C * N), var(G * C * N);
    PosteriorSummary out{run.cts, {}, {}, {}, {}, Matrix::Constant(G, C, kNaN), run.converged, run.diagnostic, {}};
    out.modeled.assign(G * C, 0);
    for (std::size_t g = 0; g < G; ++g) {
        const auto& prior = ref_priors[g];
        const long r = run_row[g];
        for (std::size_t c = 0; c < C; ++c) {
            const bool use_run = r >= 0 && selection.contains(out_genes[g], cell_types[c]);
            out.modeled[g * C + c] = use_run ? 1 : 0;
            for (std::size_t i = 0; i < N; ++i) {
                const std::size_t off = (g * C + c) * N + i;
                if (use_run) {
                    mean[off] = run.cts.mean(static_cast<std::size_t>(r), c, i);
                    var[off] = run.cts.variance(static_cast<std::size_t>(r), c, i);
                } else {
                    mean[off] = prior.mu()[static_cast<Eigen::Index>(c)];
                    var[off] = prior.sigma()(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c));
                }
            }
            if (r >= 0) {
                out.rhat(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(c)) =
                    run.rhat(r, static_cast<Eigen::Index>(c));
            }
        }
        if (r >= 0) {
            out.mu_hat.push_back(run.mu_hat[static_cast<std::size_t>(r)]);
            out.sigma_hat.push_back(run.sigma_hat[static_cast<std::size_t>(r)]);
            out.noise_var_hat.push_back(run.noise_var_hat[static_cast<std::size_t>(r)]);
            out.adj_hat.push_back(run.adj_hat[static_cast<std::size_t>(r)]);
        } else {
            out.mu_hat.push_back(prior.mu());
            out.sigma_hat.push_back(prior.sigma());
            out.noise_var_hat.push_back(prior.noise_var());
            out.adj_hat.push_back(run.adj_hat.empty() ? AdjustmentParams{} : AdjustmentParams::zeros(C, static_cast<std::size_t>(run.adj_hat.front().gamma.size()), static_cast<std::size_t>(run.adj_hat.front().b.cols())));
        }
    }
    out.cts = CtsTensor(out_genes, cell_types, samples, std::move(mean), std::move(var));
    return out;
}

} // namespace

DeconvolutionResult deconvolve(const BulkMatrix& bulk, const ReferenceDataset& ref, const PairSelection& selection,
                               const std::vector<SampleMeta>& metas_in, const RefinementConfig& config,
                               std::uint64_t seed, const DeconvolveOptions& options) {
    const auto& cell_types = ref.cell_types();
    config.validate(cell_types.size());
    const auto metas = align_metas(metas_in, bulk.samples());

    for (const auto& p : selection.pairs) {
        if (!bulk.gene_index(p.gene)) {
            throw ValidationError("selected gene '" + p.gene + "' is not in the bulk matrix");
        }
        if (!ref.cell_type_index(p.cell_type)) {
            throw ValidationError("selected cell type '" + p.cell_type + "' is not in the reference");
        }
    }

    const auto all_priors = estimate_priors(ref, options.shrinkage, derive_seed(seed, {0x50524952ULL}),
                                            kPseudoReplicates, options.mcmc.threads);

    // output genes: bulk genes known to the reference, in bulk order
    std::vector<std::size_t> out_bulk_rows;
    std::vector<std::string> out_genes;
    std::vector<GenePrior> out_priors;
    for (std::size_t g = 0; g < bulk.num_genes(); ++g) {
        if (auto r = ref.gene_index(bulk.genes()[g])) {
            out_bulk_rows.push_back(g);
            out_genes.push_back(bulk.genes()[g]);
            out_priors.push_back(all_priors[*r]);
        }
    }
    const auto selected_genes = selection.genes();
    std::vector<std::size_t> modeled;      // positions in out_genes
    std::vector<std::size_t> modeled_bulk; // rows of bulk
    std::vector<GenePrior> priors;
    for (std::size_t k = 0; k < out_genes.size(); ++k) {
        if (std::binary_search(selected_genes.begin(), selected_genes.end(), out_genes[k])) {
            modeled.push_back(k);
            modeled_bulk.push_back(out_bulk_rows[k]);
            priors.push_back(out_priors[k]);
        }
    }
    if (modeled.empty()) {
        throw ValidationError("no selected gene is present in both the bulk matrix and the reference");
    }
    const auto sub = bulk.select_genes(modeled_bulk);

    McmcOptions mcmc = options.mcmc;
    std::vector<AdjustmentParams> sub_initial;
    if (mcmc.initial_adjustments) {
        if (mcmc.initial_adjustments->size() != bulk.num_genes()) {
            throw ValidationError("need one set of initial adjustments per bulk gene");
        }
        for (auto row : modeled_bulk) {
            sub_initial.push_back((*mcmc.initial_adjustments)[row]);
        }
        mcmc.initial_adjustments = &sub_initial;
    }

    DeconvolutionResult result{PosteriorSummary{CtsTensor({"_"}, {"_"}, {"_"}, {0.0}, {0.0}), {}, {}, {}, {}, {}, false, {}, {}}, {}};
    for (int r = 0; r < config.rounds; ++r) {
        auto summary = run_mcmc(sub, priors, metas, cell_types, config, round_seed(seed, r), mcmc);
        if (r + 1 < config.rounds) {
            priors = refine_priors(summary, priors, config, derive_seed(seed, {0x52454649ULL, static_cast<std::uint64_t>(r)}));
        }
        result.rounds.push_back(expand_summary(summary, modeled, out_genes, out_priors, selection, cell_types, bulk.samples()));
    }
    result.final_summary = result.rounds.back();
    return result;
}

std::string format_rhat_table(const PosteriorSummary& summary) {
    std::string out = "gene\tcell_type\trhat\n";
    const auto& cts = summary.cts;
    for (std::size_t g = 0; g < cts.num_genes(); ++g) {
        for (std::size_t c = 0; c < cts.num_cell_types(); ++c) {
            const double v = summary.rhat(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(c));
            out += cts.genes()[g] + "\t" + cts.cell_types()[c] + "\t" + (std::isnan(v) ? std::string("NA") : format_double(v)) + "\n";
        }
    }
    return out;
}

} // namespace diagno
