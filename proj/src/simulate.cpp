#include "diagno/simulate.hpp"

#include "diagno/errors.hpp"
#include "diagno/io.hpp"
#include "diagno/random.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <set>

namespace diagno {

using nlohmann::json;

namespace {

std::string numbered(const char* prefix, std::size_t k, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, k);
    return buf;
}

} // namespace

Vector SyntheticScenario::alpha() const {
    if (dirichlet_alpha.empty()) {
        return Vector::Constant(static_cast<Eigen::Index>(cell_types), 10.0);
    }
    return Eigen::Map<const Vector>(dirichlet_alpha.data(), static_cast<Eigen::Index>(dirichlet_alpha.size()));
}

void SyntheticScenario::validate() const {
    if (genes < 1 || cell_types < 1 || samples < 1) {
        throw ValidationError("scenario needs at least one gene, cell type and sample");
    }
    if (cell_types > 99) {
        throw ValidationError("scenario supports at most 99 cell types");
    }
    if (!dirichlet_alpha.empty() && dirichlet_alpha.size() != cell_types) {
        throw ValidationError("dirichlet_alpha needs one entry per cell type");
    }
    for (double a : dirichlet_alpha) {
        if (!(a > 0.0) || !std::isfinite(a)) {
            throw ValidationError("dirichlet_alpha entries must be positive");
        }
    }
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
        throw ValidationError("noise_sd must be non-negative");
    }
    if (!(covariate_effect_scale >= 0.0) || !std::isfinite(covariate_effect_scale)) {
        throw ValidationError("covariate_effect_scale must be non-negative");
    }
    if (cells_per_type < 2) {
        throw ValidationError("cells_per_type must be at least 2");
    }
}

std::string format_scenario(const SyntheticScenario& s) {
    json j;
    j["genes"] = s.genes;
    j["cell_types"] = s.cell_types;
    j["samples"] = s.samples;
    j["d1"] = s.d1;
    j["d2"] = s.d2;
    const Vector a = s.alpha();
    j["dirichlet_alpha"] = std::vector<double>(a.data(), a.data() + a.size());
    j["noise_sd"] = s.noise_sd;
    j["covariate_effect_scale"] = s.covariate_effect_scale;
    j["seed"] = s.seed;
    j["cells_per_type"] = s.cells_per_type;
    return j.dump(2) + "\n";
}

SyntheticScenario parse_scenario(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError("scenario JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) {
        throw ValidationError("scenario JSON must be an object");
    }
    static const std::set<std::string> known{"genes",    "cell_types",             "samples", "d1",
                                             "d2",       "dirichlet_alpha",        "noise_sd",
                                             "seed",     "covariate_effect_scale", "cells_per_type"};
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) {
            throw ValidationError("scenario JSON has unknown key '" + key + "'");
        }
    }
    SyntheticScenario s;
    try {
        s.genes = j.value("genes", s.genes);
        s.cell_types = j.value("cell_types", s.cell_types);
        s.samples = j.value("samples", s.samples);
        s.d1 = j.value("d1", s.d1);
        s.d2 = j.value("d2", s.d2);
        s.dirichlet_alpha = j.value("dirichlet_alpha", s.dirichlet_alpha);
        s.noise_sd = j.value("noise_sd", s.noise_sd);
        s.covariate_effect_scale = j.value("covariate_effect_scale", s.covariate_effect_scale);
        s.seed = j.value("seed", s.seed);
        s.cells_per_type = j.value("cells_per_type", s.cells_per_type);
    } catch (const json::exception& e) {
        throw ValidationError("scenario JSON: " + std::string(e.what()));
    }
    s.validate();
    return s;
}

GroundTruthBundle generate(const SyntheticScenario& sc) {
    sc.validate();
    const auto G = static_cast<Eigen::Index>(sc.genes);
    const auto C = static_cast<Eigen::Index>(sc.cell_types);
    const auto N = static_cast<Eigen::Index>(sc.samples);
    const auto d1 = static_cast<Eigen::Index>(sc.d1);
    const auto d2 = static_cast<Eigen::Index>(sc.d2);
    Random rng(sc.seed);

    std::vector<std::string> genes, samples, types;
    for (Eigen::Index g = 0; g < G; ++g) {
        genes.push_back(numbered("G", static_cast<std::size_t>(g + 1), 4));
    }
    for (Eigen::Index i = 0; i < N; ++i) {
        samples.push_back(numbered("S", static_cast<std::size_t>(i + 1), 4));
    }
    for (Eigen::Index c = 0; c < C; ++c) {
        types.push_back(numbered("type", static_cast<std::size_t>(c + 1), 2));
    }

    std::vector<GenePrior> priors;
    std::vector<Matrix> chol;
    for (Eigen::Index g = 0; g < G; ++g) {
        Vector mu(C);
        for (Eigen::Index c = 0; c < C; ++c) {
            mu[c] = 5.0 + 2.0 * rng.normal();
        }
        Vector sd(C);
        for (Eigen::Index c = 0; c < C; ++c) {
            sd[c] = std::sqrt(1.0 + 2.0 * rng.uniform());
        }
        const double rho = 0.85 + 0.10 * rng.uniform();
        Matrix corr = Matrix::Constant(C, C, rho);
        corr.diagonal().setOnes();
        Matrix sigma = sd.asDiagonal() * corr * sd.asDiagonal();
        sigma = 0.5 * (sigma + sigma.transpose());
        chol.push_back(Eigen::LLT<Matrix>(sigma).matrixL());
        priors.emplace_back(genes[static_cast<std::size_t>(g)], std::move(mu), std::move(sigma),
                            std::max(sc.noise_sd * sc.noise_sd, 1e-8));
    }

    const Vector alpha = sc.alpha();
    std::vector<SampleMeta> metas;
    for (Eigen::Index i = 0; i < N; ++i) {
        Vector w = sample_dirichlet(rng, alpha);
        Vector c1 = rng.normal_vector(d1);
        Vector c2 = rng.normal_vector(d2);
        metas.emplace_back(samples[static_cast<std::size_t>(i)], std::move(w), std::move(c1), std::move(c2));
    }

    std::vector<AdjustmentParams> params;
    for (Eigen::Index g = 0; g < G; ++g) {
        AdjustmentParams adj = AdjustmentParams::zeros(sc.cell_types, sc.d1, sc.d2);
        for (Eigen::Index k = 0; k < d1; ++k) {
            adj.gamma[k] = sc.covariate_effect_scale * rng.normal();
        }
        for (Eigen::Index c = 0; c < C; ++c) {
            for (Eigen::Index k = 0; k < d2; ++k) {
                adj.b(c, k) = sc.covariate_effect_scale * rng.normal();
            }
        }
        params.push_back(std::move(adj));
    }

    std::vector<double> z(static_cast<std::size_t>(G * C * N));
    Matrix noise(G, N);
    Matrix bulk(G, N);
    for (Eigen::Index g = 0; g < G; ++g) {
        const auto& prior = priors[static_cast<std::size_t>(g)];
        for (Eigen::Index i = 0; i < N; ++i) {
            const Vector zi = sample_mvn(rng, prior.mu(), chol[static_cast<std::size_t>(g)]);
            for (Eigen::Index c = 0; c < C; ++c) {
                z[static_cast<std::size_t>((g * C + c) * N + i)] = zi[c];
            }
            noise(g, i) = sc.noise_sd * rng.normal();
            const auto& meta = metas[static_cast<std::size_t>(i)];
            bulk(g, i) = meta.proportions().dot(zi) + covariate_effect(params[static_cast<std::size_t>(g)], meta) +
                         noise(g, i);
        }
    }

    const auto cells_per_type = static_cast<Eigen::Index>(sc.cells_per_type);
    std::vector<std::string> cells, labels;
    for (Eigen::Index c = 0; c < C; ++c) {
        for (Eigen::Index k = 0; k < cells_per_type; ++k) {
            cells.push_back(numbered("cell", static_cast<std::size_t>(c * cells_per_type + k + 1), 5));
            labels.push_back(types[static_cast<std::size_t>(c)]);
        }
    }
    Matrix ref_values(G, C * cells_per_type);
    for (Eigen::Index g = 0; g < G; ++g) {
        const auto& prior = priors[static_cast<std::size_t>(g)];
        for (Eigen::Index c = 0; c < C; ++c) {
            const double sd = std::sqrt(prior.sigma()(c, c));
            for (Eigen::Index k = 0; k < cells_per_type; ++k) {
                ref_values(g, c * cells_per_type + k) = prior.mu()[c] + sd * rng.normal();
            }
        }
    }

    std::vector<double> zero(z.size(), 0.0);
    return GroundTruthBundle{
        BulkMatrix(genes, samples, std::move(bulk)),
        CtsTensor(genes, types, samples, std::move(z), std::move(zero)),
        std::move(metas),
        ReferenceDataset(genes, std::move(cells), std::move(labels), std::move(ref_values)),
        std::move(params),
        std::move(noise),
        std::move(priors),
    };
}

void save_bundle(const GroundTruthBundle& b, const SyntheticScenario& scenario, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& types = b.true_z.cell_types();
    save_bulk_matrix(b.bulk, dir / "bulk.tsv");
    save_sample_metas(b.metas, types, dir / "metas.json");
    save_reference(b.ref, dir / "reference.tsv", dir / "reference_labels.json");
    save_cts_tensor(b.true_z, dir / "truth");
    write_text_atomic(dir / "true_params.json", format_adjustments(b.true_params, b.bulk.genes()));
    write_text_atomic(dir / "scenario.json", format_scenario(scenario));
}

} // namespace diagno
