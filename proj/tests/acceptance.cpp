#include "diagno/attribution.hpp"
#include "diagno/divergence.hpp"
#include "diagno/evaluate.hpp"
#include "diagno/gene_select.hpp"
#include "diagno/gp_unmix.hpp"
#include "diagno/io.hpp"
#include "diagno/manifest.hpp"
#include "diagno/mlp.hpp"
#include "diagno/report.hpp"
#include "diagno/simulate.hpp"

#include "cli_pipeline.hpp"
#include "fixtures.hpp"
#include "report_fixtures.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <limits>
#include <tuple>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace diagno;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
    void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

unsigned all_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

Matrix random_spd(Random& rng, Eigen::Index c) {
    const Matrix a = Matrix::NullaryExpr(c, c, [&] { return rng.normal(); });
    return a * a.transpose() + 0.5 * Matrix::Identity(c, c);
}

// 1. Conjugate-posterior oracle

Outcome criterion1() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = 5, chains = 2, burnin = 200, keep_per_chain = 5000, batches = 50;
    int compared = 0;
    double worst = 0.0;
    for (Eigen::Index C = 1; C <= 3; ++C) {
        Random rng(100 + static_cast<std::uint64_t>(C));
        Vector mu(C);
        for (Eigen::Index c = 0; c < C; ++c) {
            mu[c] = 4.0 + rng.normal();
        }
        const double s2 = 0.4;
        const GenePrior prior("g", mu, random_spd(rng, C), s2);
        std::vector<SampleMeta> metas;
        std::vector<std::string> samples;
        Matrix x(1, static_cast<Eigen::Index>(n));
        AdjustmentParams adj = AdjustmentParams::zeros(static_cast<std::size_t>(C), 1, 1);
        adj.gamma[0] = 0.7;
        for (Eigen::Index c = 0; c < C; ++c) {
            adj.b(c, 0) = 0.3 * rng.normal();
        }
        for (std::size_t i = 0; i < n; ++i) {
            samples.push_back("s" + std::to_string(i));
            Vector c1(1), c2(1);
            c1[0] = rng.normal();
            c2[0] = rng.normal();
            metas.emplace_back(samples.back(), sample_dirichlet(rng, Vector::Constant(C, 2.0)), c1, c2);
            x(0, static_cast<Eigen::Index>(i)) = 5.0 + rng.normal();
        }
        const BulkMatrix bulk({"g"}, samples, x);
        const std::vector<GenePrior> priors{prior};
        HyperPriors hyper;
        hyper.sample_noise = false;
        hyper.sample_coefficients = false;
        const std::vector<AdjustmentParams> initial{adj};

        // draws[c * n + i] holds every kept draw of z_{c,i}
        std::vector<std::vector<double>> draws(static_cast<std::size_t>(C) * n);
        for (std::size_t k = 0; k < chains; ++k) {
            auto state = init_chain(bulk, priors, metas, 17, k, hyper, &initial);
            state.genes[0].noise_var = s2;
            state.genes[0].adj = adj;
            for (std::size_t it = 0; it < burnin + keep_per_chain; ++it) {
                state = gibbs_sweep(std::move(state), bulk, priors, metas, hyper);
                if (it < burnin) {
                    continue;
                }
                for (Eigen::Index c = 0; c < C; ++c) {
                    for (std::size_t i = 0; i < n; ++i) {
                        draws[static_cast<std::size_t>(c) * n + i].push_back(state.genes[0].z(c, static_cast<Eigen::Index>(i)));
                    }
                }
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto cond = z_conditional(prior, x(0, static_cast<Eigen::Index>(i)), metas[i], adj, s2);
            for (Eigen::Index c = 0; c < C; ++c) {
                const auto& d = draws[static_cast<std::size_t>(c) * n + i];
                const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
                const std::size_t len = d.size() / batches;
                double ss = 0.0;
                for (std::size_t b = 0; b < batches; ++b) {
                    const double bm = std::accumulate(d.begin() + static_cast<std::ptrdiff_t>(b * len),
                                                      d.begin() + static_cast<std::ptrdiff_t>((b + 1) * len), 0.0) /
                                      static_cast<double>(len);
                    ss += (bm - mean) * (bm - mean);
                }
                const double mcse = std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
                const double z = std::abs(mean - cond.mean[c]) / mcse;
                worst = std::max(worst, z);
                ++compared;
                o.require(z < 3.0, "C=" + std::to_string(C) + " sample " + std::to_string(i) + " type " +
                                       std::to_string(c) + " off by " + fmt(z) + " MCSE");
            }
        }
    }
    const double secs = seconds_since(t0);
    o.require(secs < 30.0, "runtime " + fmt(secs) + " s");
    o.note(std::to_string(compared) + " posterior means over 10000 draws, worst deviation " + fmt(worst, 3) +
           " MCSE, " + fmt(secs, 3) + " s");
    return o;
}

// 2. Gelman-Rubin behavior

Outcome criterion2() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    Random rng(2);
    std::vector<std::vector<double>> chains(4, std::vector<double>(2000));
    for (auto& c : chains) {
        double prev = rng.normal();
        for (auto& v : c) {
            prev = 0.3 * prev + std::sqrt(1.0 - 0.09) * rng.normal();
            v = prev;
        }
    }
    const double mixed = split_rhat(chains);
    auto offset = chains;
    for (auto& v : offset[0]) {
        v += 5.0;
    }
    const double stuck = split_rhat(offset);
    o.require(mixed < 1.05, "well-mixed R-hat " + fmt(mixed));
    o.require(stuck > 1.5, "offset R-hat " + fmt(stuck));
    const double secs = seconds_since(t0);
    o.require(secs < 5.0, "runtime " + fmt(secs) + " s");
    o.note("well-mixed " + fmt(mixed, 5) + ", offset " + fmt(stuck, 5));
    return o;
}

// 3. Synthetic recovery

Outcome criterion3() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        SyntheticScenario s;
        s.seed = seed;
        const auto b = generate(s);
        const auto sel = select_all_pairs(b.bulk.genes(), b.ref.cell_types());
        DeconvolveOptions opts;
        opts.mcmc.threads = all_threads();
        const auto res = deconvolve(b.bulk, b.ref, sel, b.metas, RefinementConfig{}, seed, opts);
        const double r1 = evaluate_recovery(res.rounds.front().cts, b.true_z).per_gene.median;
        const double r2 = evaluate_recovery(res.final_summary.cts, b.true_z).per_gene.median;
        const double ols =
            evaluate_recovery(baseline_ols(b.bulk, b.metas, b.ref.cell_types()), b.true_z).per_gene.median;
        const std::string tag = "seed " + std::to_string(seed);
        o.require(r2 >= 0.85, tag + " median PCC " + fmt(r2) + " < 0.85");
        o.require(r2 - ols > 0.05, tag + " margin over OLS " + fmt(r2 - ols) + " <= 0.05");
        o.require(r2 >= r1 - 0.02, tag + " round 2 " + fmt(r2) + " < round 1 " + fmt(r1) + " - 0.02");
        o.note(tag + ": round1 " + fmt(r1) + " round2 " + fmt(r2) + " OLS " + fmt(ols));
    }
    const double secs = seconds_since(t0);
    o.require(secs < 600.0, "runtime " + fmt(secs) + " s");
    o.note(fmt(secs, 3) + " s");
    return o;
}

// 4. Gene selection planted signal

Outcome criterion4() {
    Outcome o;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto ref = fixtures::planted_reference(seed);
        const auto sel = select_pairs(ref, {});
        std::set<std::string> genes;
        bool all_type1 = true;
        for (const auto& p : sel.pairs) {
            genes.insert(p.gene);
            all_type1 &= p.cell_type == "type01";
        }
        std::set<std::string> want;
        for (int k = 1; k <= 10; ++k) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "G%03d", k);
            want.insert(buf);
        }
        o.require(genes == want && all_type1 && sel.pairs.size() == 10,
                  "seed " + std::to_string(seed) + " selected " + std::to_string(sel.pairs.size()) + " pairs");
    }
    if (o.pass) {
        o.note("exactly the 10 planted pairs on 5 references");
    }

    // hand adjustment: sorted p times m / rank, then running minimum from the top
    const std::vector<double> p{0.01, 0.02, 0.03};
    const std::vector<double> hand{std::min({0.01 * 3 / 1, 0.02 * 3 / 2, 0.03}), std::min(0.02 * 3 / 2, 0.03), 0.03};
    const auto bh = benjamini_hochberg(p);
    for (std::size_t k = 0; k < 3; ++k) {
        o.require(std::abs(bh[k] - hand[k]) < 1e-15, "BH entry " + std::to_string(k) + " = " + fmt(bh[k], 17));
    }
    o.note("BH [0.01, 0.02, 0.03] -> [" + fmt(bh[0]) + ", " + fmt(bh[1]) + ", " + fmt(bh[2]) + "]");

    // exact p by enumerating the 6 ways to pick the first group from {1,2,3,4}
    const std::vector<double> a{1.0, 2.0}, b{3.0, 4.0};
    int extreme = 0, total = 0;
    for (int i = 1; i <= 4; ++i) {
        for (int j = i + 1; j <= 4; ++j) {
            double u = 0.0;
            for (int other = 1; other <= 4; ++other) {
                if (other != i && other != j) {
                    u += (i > other) + (j > other);
                }
            }
            ++total;
            extreme += std::abs(u - 2.0) >= 2.0;
        }
    }
    const double want_p = static_cast<double>(extreme) / total;
    const double got_p = wilcoxon_rank_sum(a, b).p_value;
    o.require(std::abs(got_p - want_p) < 1e-12 && std::abs(want_p - 1.0 / 3.0) < 1e-12,
              "Wilcoxon exact p " + fmt(got_p, 17));
    o.note("Wilcoxon (2,2) p = " + fmt(got_p, 6));
    return o;
}

// 5. Classifier correctness

MlpModel random_model(Eigen::Index d, std::uint64_t seed) {
    Random rng(seed);
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < d; ++j) {
        names.push_back("f" + std::to_string(j));
    }
    auto m = he_init(names, identity_standardizer(d), 0.2, rng);
    m.b1 = 0.1 * rng.normal_vector(kHidden1);
    m.b2 = 0.1 * rng.normal_vector(kHidden2);
    m.b3 = 0.1 * rng.normal();
    return m;
}

/// Parameters of a model as pointers in a fixed order.
std::vector<double*> parameters(MlpModel& m) {
    std::vector<double*> out;
    for (Eigen::Index k = 0; k < m.w1.size(); ++k) out.push_back(m.w1.data() + k);
    for (Eigen::Index k = 0; k < m.b1.size(); ++k) out.push_back(m.b1.data() + k);
    for (Eigen::Index k = 0; k < m.w2.size(); ++k) out.push_back(m.w2.data() + k);
    for (Eigen::Index k = 0; k < m.b2.size(); ++k) out.push_back(m.b2.data() + k);
    for (Eigen::Index k = 0; k < m.w3.size(); ++k) out.push_back(m.w3.data() + k);
    out.push_back(&m.b3);
    return out;
}

std::vector<double> flatten(const Gradients& g) {
    std::vector<double> out;
    out.insert(out.end(), g.w1.data(), g.w1.data() + g.w1.size());
    out.insert(out.end(), g.b1.data(), g.b1.data() + g.b1.size());
    out.insert(out.end(), g.w2.data(), g.w2.data() + g.w2.size());
    out.insert(out.end(), g.b2.data(), g.b2.data() + g.b2.size());
    out.insert(out.end(), g.w3.data(), g.w3.data() + g.w3.size());
    out.push_back(g.b3);
    return out;
}

Outcome criterion5() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();

    double worst_grad = 0.0;
    for (std::uint64_t t = 0; t < 20; ++t) {
        auto m = random_model(8, 1000 + t);
        Random rng(t);
        const Vector x = rng.normal_vector(8);
        const int y = static_cast<int>(t % 2);
        const auto analytic = flatten(backprop_gradient(m, x, y));
        const Matrix row = x.transpose();
        const std::vector<int> lab{y};
        auto params = parameters(m);
        for (std::size_t k = 0; k < params.size(); ++k) {
            const double keep = *params[k], h = 1e-5;
            *params[k] = keep + h;
            const double up = bce_loss(m, row, lab);
            *params[k] = keep - h;
            const double down = bce_loss(m, row, lab);
            *params[k] = keep;
            const double fd = (up - down) / (2.0 * h);
            const double denom = std::abs(fd) + std::abs(analytic[k]);
            if (denom > 0.0) {
                worst_grad = std::max(worst_grad, std::abs(fd - analytic[k]) / std::max(denom, 1e-8));
            }
        }
    }
    o.require(worst_grad < 1e-4, "gradient relative error " + fmt(worst_grad));
    o.note("gradient rel. error <= " + fmt(worst_grad, 3) + " over every coordinate of 20 instances");

    // linear regime: one hidden path stays active, so the logit is 0.5 * v.x + const
    auto lin = zero_model({"a", "b", "c", "d"}, identity_standardizer(4));
    Vector v(4);
    v << 1.0, 2.0, -1.0, 0.5;
    lin.w1.row(0) = v.transpose();
    lin.b1[0] = 100.0;
    lin.w2(0, 0) = 1.0;
    lin.w3(0, 0) = 0.5;
    Random rng(5);
    double worst_lin = 0.0;
    for (int t = 0; t < 20; ++t) {
        const Vector x = rng.normal_vector(4), b = rng.normal_vector(4);
        const Vector closed = 0.5 * v.cwiseProduct(x - b);
        worst_lin = std::max(worst_lin, (integrated_gradients(lin, x, b, 200) - closed).cwiseAbs().maxCoeff());
    }
    o.require(worst_lin < 1e-8, "linear IG error " + fmt(worst_lin));
    o.note("linear IG error " + fmt(worst_lin, 3));

    // separable blobs
    Matrix blobs(400, 4);
    std::vector<int> labels;
    std::vector<std::string> names{"x0", "x1", "x2", "x3"};
    for (Eigen::Index i = 0; i < 400; ++i) {
        const int y = static_cast<int>(i % 2);
        labels.push_back(y);
        for (Eigen::Index j = 0; j < 4; ++j) {
            blobs(i, j) = (y ? 2.0 : -2.0) + 0.5 * rng.normal();
        }
    }
    TrainConfig cfg;
    cfg.seed = 11;
    cfg.lr = 0.01;
    const auto blob_model = train(blobs, labels, names, cfg).model;
    const double blob_acc = accuracy(blob_model, blobs, labels);
    o.require(blob_acc >= 0.99, "blob accuracy " + fmt(blob_acc));
    o.note("blob accuracy " + fmt(blob_acc));

    // 28-feature dataset, 100 held-out rows
    ClassificationScenario sc;
    sc.samples = 500;
    const auto ds = make_classification_dataset(sc);
    const Matrix train_rows = ds.features.values.topRows(400);
    const Matrix test_rows = ds.features.values.bottomRows(100);
    const std::vector<int> train_y(ds.labels.begin(), ds.labels.begin() + 400);
    const std::vector<int> test_y(ds.labels.begin() + 400, ds.labels.end());
    TrainConfig cfg28;
    cfg28.seed = 1;
    const auto model = train(train_rows, train_y, ds.features.names, cfg28).model;
    const double held = accuracy(model, test_rows, test_y);
    o.require(held >= 0.85, "held-out accuracy " + fmt(held));
    o.note(std::to_string(ds.features.dim()) + "-feature held-out accuracy " + fmt(held));

    // completeness on the trained classifiers at their own inputs
    double worst_ig = 0.0;
    auto completeness = [&](const MlpModel& m, const Matrix& inputs) {
        const Vector base = default_baseline(m);
        for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
            const Vector x = inputs.row(i).transpose();
            worst_ig = std::max(worst_ig, std::abs(integrated_gradients(m, x, base, 200).sum() - (logit(m, x) - logit(m, base))));
        }
    };
    completeness(model, test_rows);
    completeness(blob_model, blobs.topRows(100));
    o.require(worst_ig < 1e-3, "IG completeness gap " + fmt(worst_ig));
    o.note("IG completeness gap <= " + fmt(worst_ig, 3) + " at 200 steps over 200 inputs");

    const double secs = seconds_since(t0);
    o.require(secs < 60.0, "runtime " + fmt(secs) + " s");
    o.note(fmt(secs, 3) + " s");
    return o;
}

// 6. Divergence construction

LabelledDataset numeric_dataset(const Matrix& values, const std::string& prefix) {
    LabelledDataset ds;
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
        ds.features.names.push_back("m" + std::to_string(j));
        ds.features.tags.push_back(FeatureTag::Covariate);
    }
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
        ds.features.samples.push_back(prefix + std::to_string(i));
        ds.labels.push_back(static_cast<int>(1 - i % 2));
    }
    ds.features.values = values;
    return ds;
}

Outcome criterion6() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();

    const auto ds = make_classification_dataset({});
    const auto conflict = symbolic_conflict_subset(ds);
    bool only_ad_negative = !conflict.empty();
    for (auto r : conflict) {
        bool negative = false;
        for (std::size_t j = 0; j < ds.features.dim(); ++j) {
            negative |= ds.features.tags[j] == FeatureTag::EqtlBeta &&
                        ds.features.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) < 0.0;
        }
        only_ad_negative &= ds.labels[r] == 1 && negative;
    }
    o.require(only_ad_negative, "conflict subset holds a row that is not AD with a negative beta");
    o.note("conflict subset " + std::to_string(conflict.size()) + " rows, all AD with a negative beta");

    Random rng(6);
    const Matrix train_values = Matrix::NullaryExpr(300, 10, [&] { return rng.normal(); });
    Matrix test_values = Matrix::NullaryExpr(200, 10, [&] { return rng.uniform() - 0.5; });
    std::vector<std::size_t> rows(200);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::shuffle(rows.begin(), rows.end(), rng.engine());
    std::vector<std::size_t> planted(rows.begin(), rows.begin() + 30);
    std::sort(planted.begin(), planted.end());
    for (auto r : planted) {
        const auto j = static_cast<Eigen::Index>(rng.index(10));
        test_values(static_cast<Eigen::Index>(r), j) = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (3.0 + rng.uniform());
    }
    const auto stats = feature_stats(numeric_dataset(train_values, "T").features);
    const auto ood = ood_subset(numeric_dataset(test_values, "Q"), stats);
    o.require(ood == planted, "OOD subset has " + std::to_string(ood.size()) + " rows, expected the 30 planted");
    o.note("OOD subset recovers " + std::to_string(ood.size()) + " of 30 planted outliers");

    ClassificationScenario anti;
    anti.beta_anticorrelated = true;
    const auto train_ds = make_classification_dataset(anti);
    anti.seed = 2;
    anti.samples = 200;
    const auto test_ds = make_classification_dataset(anti);
    TrainConfig cfg;
    cfg.seed = 4;
    const auto model = train(train_ds.features.values, train_ds.labels, train_ds.features.names, cfg).model;
    std::vector<std::size_t> all(test_ds.labels.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto rep = run_divergence(model, test_ds, {{"anticorrelated", all}}).front();
    o.require(rep.sign_rule_accuracy < 0.5, "sign rule accuracy " + fmt(rep.sign_rule_accuracy));
    o.require(rep.mlp_accuracy > 0.8, "MLP accuracy " + fmt(rep.mlp_accuracy));
    o.note("anticorrelated: sign rule " + fmt(rep.sign_rule_accuracy) + ", MLP " + fmt(rep.mlp_accuracy));

    const double secs = seconds_since(t0);
    o.require(secs < 60.0, "runtime " + fmt(secs) + " s");
    o.note(fmt(secs, 3) + " s");
    return o;
}

// 7. NNLS oracle

Outcome criterion7() {
    Outcome o;
    Random rng(7);
    double worst_noiseless = 0.0;
    for (int t = 0; t < 50; ++t) {
        const Matrix sig = Matrix::NullaryExpr(20, 4, [&] { return 1.0 + 9.0 * rng.uniform(); });
        const Vector w = sample_dirichlet(rng, Vector::Constant(4, 1.0));
        worst_noiseless = std::max(worst_noiseless, (nnls_proportions(sig * w, sig) - w).cwiseAbs().maxCoeff());
    }
    o.require(worst_noiseless < 1e-8, "noiseless proportion error " + fmt(worst_noiseless));
    o.note("noiseless proportion error " + fmt(worst_noiseless, 3));

    double worst_grid = 0.0;
    const double step = 1e-3;
    const int points = 2001;
    for (int t = 0; t < 20; ++t) {
        const Matrix a = Matrix::NullaryExpr(6, 2, [&] { return rng.uniform() + 0.2; });
        Vector truth(2);
        truth << rng.uniform(), t % 3 == 0 ? 0.0 : rng.uniform();
        Vector b = a * truth;
        for (Eigen::Index k = 0; k < 6; ++k) {
            b[k] += 0.1 * rng.normal();
        }
        const Matrix ata = a.transpose() * a;
        const Vector atb = a.transpose() * b;
        double best = std::numeric_limits<double>::infinity();
        Vector arg(2);
        for (int i = 0; i < points; ++i) {
            for (int j = 0; j < points; ++j) {
                Vector v(2);
                v << i * step, j * step;
                const double cost = v.dot(ata * v) - 2.0 * atb.dot(v);
                if (cost < best) {
                    best = cost;
                    arg = v;
                }
            }
        }
        worst_grid = std::max(worst_grid, (nnls(a, b) - arg).cwiseAbs().maxCoeff());
    }
    o.require(worst_grid < 2e-3, "grid disagreement " + fmt(worst_grid));
    o.note("grid-oracle disagreement " + fmt(worst_grid, 3) + " on G=6, C=2");
    return o;
}

// 8. Report contract

Outcome criterion8() {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    Random rng(8);
    int violations = 0, leaks = 0, flips = 0;
    for (int t = 0; t < 500; ++t) {
        auto in = fixtures::random_input(rng);
        const auto r = render_offline(in);
        violations += !report_violations(r, in).empty();
        if (in.audience == Audience::Patient) {
            bool leak = find_blocklisted(r.rationale).has_value();
            for (const auto& s : r.recommendations) {
                leak |= find_blocklisted(s).has_value();
            }
            leaks += leak;
        }
        in.probability = 0.5;
        in.predicted = Diagnosis::AD;
        const bool at = render_offline(in).decision == Diagnosis::AD;
        in.probability = std::nextafter(0.5, 0.0);
        in.predicted = Diagnosis::NonAD;
        const bool below = render_offline(in).decision == Diagnosis::NonAD;
        flips += !(at && below);
    }
    o.require(violations == 0, std::to_string(violations) + " reports violate invariants");
    o.require(leaks == 0, std::to_string(leaks) + " patient reports contain technical terms");
    o.require(flips == 0, std::to_string(flips) + " inputs do not flip at 0.5");

    const auto a = render_offline(fixtures::patient_a());
    const bool lipid = std::any_of(a.recommendations.begin(), a.recommendations.end(),
                                   [](const std::string& s) { return s.find("lipid management") != std::string::npos; });
    o.require(a.decision == Diagnosis::AD && lipid, "patient A is not AD with lipid management");
    const auto b = render_offline(fixtures::patient_b());
    const bool monitoring = std::any_of(b.recommendations.begin(), b.recommendations.end(),
                                        [](const std::string& s) { return s.find("monitoring") != std::string::npos; });
    o.require(b.decision == Diagnosis::NonAD && monitoring, "patient B is not nonAD with monitoring");

    const double secs = seconds_since(t0);
    o.require(secs < 10.0, "runtime " + fmt(secs) + " s");
    o.note("500 random inputs valid, threshold inclusive at 0.5, patient A AD + lipid management, patient B nonAD + "
           "monitoring, " + fmt(secs, 3) + " s");
    return o;
}

// 9. Determinism and round-trips

template <typename Fmt, typename Parse>
bool stable(const std::string& text, Fmt format, Parse parse) {
    return format(parse(text)) == text;
}

double wild(Random& rng) {
    const double mag = std::pow(10.0, static_cast<double>(static_cast<int>(rng.index(25)) - 12));
    return (rng.uniform() < 0.5 ? -1.0 : 1.0) * mag * rng.uniform();
}

Outcome criterion9() {
    Outcome o;
    fixtures::pin_environment();
    const auto base = std::filesystem::temp_directory_path() / "diagno_acceptance_cli";
    const std::vector<std::string> counts{"1", "2", "3"};
    std::vector<std::map<std::string, std::string>> snaps;
    for (const auto& n : counts) {
        const auto failure = fixtures::run_pipeline(base / ("t" + n), n);
        o.require(failure.empty(), failure);
        if (failure.empty()) {
            snaps.push_back(fixtures::snapshot(base / ("t" + n)));
        }
    }
    if (snaps.size() == counts.size()) {
        for (std::size_t k = 1; k < snaps.size(); ++k) {
            o.require(snaps[k].size() == snaps[0].size(), "file sets differ at " + counts[k] + " threads");
            for (const auto& [path, text] : snaps[0]) {
                auto it = snaps[k].find(path);
                o.require(it != snaps[k].end() && it->second == text, path + " differs at " + counts[k] + " threads");
            }
        }
        o.note(std::to_string(snaps[0].size()) + " CLI output files byte-identical at 1, 2 and 3 threads");
    }

    Random rng(9);
    int checked = 0, broken = 0;
    auto expect = [&](bool ok, const std::string& what) {
        ++checked;
        if (!ok) {
            ++broken;
            o.require(false, what + " does not round-trip");
        }
    };
    const std::vector<std::string> types{"astro", "micro", "neuron"};
    for (int t = 0; t < 20; ++t) {
        const auto G = static_cast<Eigen::Index>(1 + rng.index(6));
        const auto N = static_cast<Eigen::Index>(1 + rng.index(6));
        std::vector<std::string> genes, samples;
        for (Eigen::Index g = 0; g < G; ++g) genes.push_back("G" + std::to_string(g));
        for (Eigen::Index i = 0; i < N; ++i) samples.push_back("S" + std::to_string(i));
        const Matrix x = Matrix::NullaryExpr(G, N, [&] { return wild(rng); });
        const BulkMatrix bulk(genes, samples, x);
        const auto bulk_back = parse_bulk_matrix(format_bulk_matrix(bulk));
        expect(bulk_back.values() == x && bulk_back.genes() == genes, "bulk matrix");

        std::vector<double> mean, var;
        for (Eigen::Index k = 0; k < G * 3 * N; ++k) {
            mean.push_back(wild(rng));
            var.push_back(std::abs(wild(rng)));
        }
        const CtsTensor cts(genes, types, samples, mean, var);
        const auto dir = base / ("tensor" + std::to_string(t));
        std::filesystem::create_directories(dir);
        save_cts_tensor(cts, dir / "cts");
        const auto cts_back = load_cts_tensor(dir / "cts");
        expect(cts_back.mean_data() == mean && cts_back.variance_data() == var, "CTS tensor");

        std::vector<SampleMeta> metas;
        for (const auto& s : samples) {
            Vector c1(2), c2(1);
            c1 << wild(rng), wild(rng);
            c2 << wild(rng);
            metas.emplace_back(s, sample_dirichlet(rng, Vector::Constant(3, 1.0)), c1, c2);
        }
        const auto meta_text = format_sample_metas(metas, types);
        const auto metas_back = parse_sample_metas(meta_text, types);
        bool same = metas_back.size() == metas.size();
        for (std::size_t i = 0; same && i < metas.size(); ++i) {
            same = metas_back[i].proportions() == metas[i].proportions() && metas_back[i].bulk_cov() == metas[i].bulk_cov();
        }
        expect(same && format_sample_metas(metas_back, types) == meta_text, "sample metadata");

        std::vector<AdjustmentParams> adj;
        for (Eigen::Index g = 0; g < G; ++g) {
            auto a = AdjustmentParams::zeros(3, 2, 1);
            a.gamma << wild(rng), wild(rng);
            a.b << wild(rng), wild(rng), wild(rng);
            adj.push_back(a);
        }
        expect(stable(format_adjustments(adj, genes), [&](const auto& v) { return format_adjustments(v, genes); },
                      [&](const std::string& s) { return parse_adjustments(s, genes); }),
               "adjustments");

        PairSelection sel;
        for (Eigen::Index g = 0; g < G; ++g) {
            sel.pairs.push_back({genes[static_cast<std::size_t>(g)], types[rng.index(3)], Provenance::Both, std::abs(wild(rng))});
        }
        std::sort(sel.pairs.begin(), sel.pairs.end(), [](const auto& l, const auto& r) {
            return std::tie(l.gene, l.cell_type) < std::tie(r.gene, r.cell_type);
        });
        expect(stable(format_selection(sel), format_selection, parse_selection), "selection");

        auto model = random_model(static_cast<Eigen::Index>(2 + rng.index(5)), 500 + static_cast<std::uint64_t>(t));
        expect(stable(format_model(model), format_model, parse_model) && parse_model(format_model(model)).w2 == model.w2,
               "model");

        ClassificationScenario sc;
        sc.samples = 10;
        sc.seed = static_cast<std::uint64_t>(t + 1);
        const auto ds = make_classification_dataset(sc);
        expect(stable(format_dataset(ds), format_dataset, [](const std::string& s) { return parse_dataset(s); }) &&
                   parse_dataset(format_dataset(ds)).features.values == ds.features.values,
               "dataset");

        const auto report = render_offline(fixtures::random_input(rng));
        expect(stable(format_report_json(report), format_report_json,
                      [](const std::string& s) { return parse_report_json(s); }),
               "report");

        SyntheticScenario scen;
        scen.noise_sd = std::abs(wild(rng));
        scen.seed = rng.engine()();
        expect(stable(format_scenario(scen), format_scenario, [](const std::string& s) { return parse_scenario(s); }),
               "scenario");

        TrainConfig tc;
        tc.lr = std::abs(wild(rng)) + 1e-9;
        tc.seed = rng.engine()();
        expect(stable(format_train_config(tc), format_train_config,
                      [](const std::string& s) { return parse_train_config(s); }),
               "training config");

        RunManifest m;
        m.command = "deconvolve";
        m.config_hash = sha256_hex(std::to_string(t));
        m.seed = rng.engine()();
        m.inputs["bulk.tsv"] = sha256_hex("b");
        m.timestamp = manifest_timestamp();
        m.outputs = {"cts_mean.tsv", "diagnostics.json"};
        m.status = "ok";
        expect(stable(format_manifest(m), format_manifest, [](const std::string& s) { return parse_manifest(s); }),
               "manifest");
    }
    for (const auto& f : {"divergence.json"}) {
        const auto text = read_text_file(base / "t1" / "diverge" / f);
        expect(stable(text, format_divergence_json, [](const std::string& s) { return parse_divergence_json(s); }),
               "divergence report");
    }
    o.note(std::to_string(checked - broken) + " of " + std::to_string(checked) + " format round-trips lossless");
    return o;
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<Outcome()>> criteria{criterion1, criterion2, criterion3, criterion4, criterion5,
                                                         criterion6, criterion7, criterion8, criterion9};
    std::vector<int> selected;
    if (argc > 1) {
        const int n = std::atoi(argv[1]);
        if (n < 1 || n > static_cast<int>(criteria.size())) {
            std::cerr << "usage: acceptance [1-" << criteria.size() << "]\n";
            return 2;
        }
        selected.push_back(n);
    } else {
        for (int n = 1; n <= static_cast<int>(criteria.size()); ++n) {
            selected.push_back(n);
        }
    }
    bool all = true;
    for (int n : selected) {
        Outcome o;
        try {
            o = criteria[static_cast<std::size_t>(n - 1)]();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        all &= o.pass;
        std::cout << "Criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail << std::endl;
    }
    return all ? 0 : 1;
}
