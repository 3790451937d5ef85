#include "diagno/evaluate.hpp"

#include "diagno/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace diagno {

using nlohmann::json;

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ValidationError("pearson: vectors differ in length");
    }
    if (a.size() < 2) {
        throw ValidationError("pearson: need at least two points");
    }
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        ma += a[k];
        mb += b[k];
    }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double da = a[k] - ma, db = b[k] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) {
        throw ValidationError("pearson: zero variance");
    }
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

bool has_variance(std::span<const double> v) {
    return std::any_of(v.begin(), v.end(), [&](double x) { return x != v.front(); });
}

PccStats summarize(const std::vector<double>& values, std::size_t excluded) {
    PccStats s;
    s.count = values.size();
    s.excluded = excluded;
    s.median = quantile(values, 0.5);
    s.q1 = quantile(values, 0.25);
    s.q3 = quantile(values, 0.75);
    return s;
}

json stats_json(const PccStats& s) {
    auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
    return {{"count", s.count}, {"excluded", s.excluded}, {"median", num(s.median)}, {"q1", num(s.q1)}, {"q3", num(s.q3)}};
}

} // namespace

RecoveryReport evaluate_recovery(const CtsTensor& est, const CtsTensor& truth) {
    if (est.genes() != truth.genes() || est.cell_types() != truth.cell_types() || est.samples() != truth.samples()) {
        throw ValidationError("estimate and truth tensors have different axes");
    }
    const std::size_t G = est.num_genes(), C = est.num_cell_types(), N = est.num_samples();
    RecoveryReport rep;
    rep.genes = est.genes();
    rep.gene_pcc = Matrix::Constant(static_cast<Eigen::Index>(G), static_cast<Eigen::Index>(C),
                                    std::numeric_limits<double>::quiet_NaN());
    std::vector<double> all_gene, all_sample;
    std::size_t all_gene_excl = 0, all_sample_excl = 0;
    std::vector<double> a, b;
    for (std::size_t c = 0; c < C; ++c) {
        CellTypeRecovery ct;
        ct.cell_type = est.cell_types()[c];
        std::vector<double> per_gene, per_sample;
        std::size_t gene_excl = 0, sample_excl = 0;
        if (N >= 2) {
            for (std::size_t g = 0; g < G; ++g) {
                a.assign(est.mean_data().begin() + static_cast<std::ptrdiff_t>(est.offset(g, c, 0)),
                         est.mean_data().begin() + static_cast<std::ptrdiff_t>(est.offset(g, c, 0) + N));
                b.assign(truth.mean_data().begin() + static_cast<std::ptrdiff_t>(truth.offset(g, c, 0)),
                         truth.mean_data().begin() + static_cast<std::ptrdiff_t>(truth.offset(g, c, 0) + N));
                if (!has_variance(a) || !has_variance(b)) {
                    ++gene_excl;
                    continue;
                }
                const double r = pearson(a, b);
                rep.gene_pcc(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(c)) = r;
                per_gene.push_back(r);
            }
        } else {
            gene_excl = G;
        }
        if (G >= 2) {
            for (std::size_t i = 0; i < N; ++i) {
                a.resize(G);
                b.resize(G);
                for (std::size_t g = 0; g < G; ++g) {
                    a[g] = est.mean(g, c, i);
                    b[g] = truth.mean(g, c, i);
                }
                if (!has_variance(a) || !has_variance(b)) {
                    ++sample_excl;
                    continue;
                }
                per_sample.push_back(pearson(a, b));
            }
        } else {
            sample_excl = N;
        }
        all_gene.insert(all_gene.end(), per_gene.begin(), per_gene.end());
        all_sample.insert(all_sample.end(), per_sample.begin(), per_sample.end());
        all_gene_excl += gene_excl;
        all_sample_excl += sample_excl;
        ct.per_gene = summarize(per_gene, gene_excl);
        ct.per_sample = summarize(per_sample, sample_excl);
        rep.cell_types.push_back(std::move(ct));
    }
    rep.per_gene = summarize(all_gene, all_gene_excl);
    rep.per_sample = summarize(all_sample, all_sample_excl);
    return rep;
}

std::string format_recovery_json(const RecoveryReport& rep) {
    json types = json::array();
    for (const auto& ct : rep.cell_types) {
        types.push_back({{"cell_type", ct.cell_type}, {"per_gene", stats_json(ct.per_gene)},
                         {"per_sample", stats_json(ct.per_sample)}});
    }
    json doc = {{"per_gene", stats_json(rep.per_gene)}, {"per_sample", stats_json(rep.per_sample)}, {"cell_types", types}};
    return doc.dump(2) + "\n";
}

std::string format_gene_pcc_tsv(const RecoveryReport& rep) {
    std::string out = "gene\tcell_type\tpcc\n";
    for (std::size_t g = 0; g < rep.genes.size(); ++g) {
        for (std::size_t c = 0; c < rep.cell_types.size(); ++c) {
            const double v = rep.gene_pcc(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(c));
            out += rep.genes[g] + "\t" + rep.cell_types[c].cell_type + "\t";
            if (std::isnan(v)) {
                out += "NA\n";
            } else {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.6f", v);
                out += std::string(buf) + "\n";
            }
        }
    }
    return out;
}

Vector nnls(const Matrix& A, const Vector& b) {
    const Eigen::Index m = A.rows(), n = A.cols();
    if (b.size() != m) {
        throw ValidationError("nnls: dimension mismatch");
    }
    const double tol = 10.0 * std::numeric_limits<double>::epsilon() * A.cwiseAbs().colwise().sum().maxCoeff() *
                       static_cast<double>(std::max(m, n));
    Vector x = Vector::Zero(n);
    std::vector<bool> passive(static_cast<std::size_t>(n), false);
    Vector w = A.transpose() * (b - A * x);

    auto solve_passive = [&](Vector& s) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (passive[static_cast<std::size_t>(j)]) {
                idx.push_back(j);
            }
        }
        Matrix Ap(m, static_cast<Eigen::Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            Ap.col(static_cast<Eigen::Index>(k)) = A.col(idx[k]);
        }
        const Vector sp = Ap.colPivHouseholderQr().solve(b);
        s = Vector::Zero(n);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            s[idx[k]] = sp[static_cast<Eigen::Index>(k)];
        }
    };

    const int max_outer = static_cast<int>(3 * n + 10);
    for (int outer = 0; outer < max_outer; ++outer) {
        Eigen::Index best = -1;
        double best_w = tol;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && w[j] > best_w) {
                best_w = w[j];
                best = j;
            }
        }
        if (best < 0) {
            break;
        }
        passive[static_cast<std::size_t>(best)] = true;
        Vector s;
        solve_passive(s);
        for (int inner = 0; inner < max_outer; ++inner) {
            double alpha = 1.0;
            bool feasible = true;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && s[j] <= 0.0) {
                    feasible = false;
                    alpha = std::min(alpha, x[j] / (x[j] - s[j]));
                }
            }
            if (feasible) {
                break;
            }
            x += alpha * (s - x);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (passive[static_cast<std::size_t>(j)] && x[j] <= tol) {
                    passive[static_cast<std::size_t>(j)] = false;
                    x[j] = 0.0;
                }
            }
            solve_passive(s);
        }
        x = s;
        w = A.transpose() * (b - A * x);
    }
    return x.cwiseMax(0.0);
}

Vector nnls_proportions(const Vector& bulk_column, const Matrix& signature) {
    if (signature.rows() < signature.cols()) {
        throw ValidationError("nnls_proportions needs at least as many genes as cell types");
    }
    if (bulk_column.size() != signature.rows()) {
        throw ValidationError("bulk column and signature differ in gene count");
    }
    if (signature.colPivHouseholderQr().rank() < signature.cols()) {
        throw ValidationError("signature matrix is rank-deficient");
    }
    const Vector x = nnls(signature, bulk_column);
    const double total = x.sum();
    if (!(total > 0.0)) {
        throw NumericalError("nnls_proportions: all proportions are zero");
    }
    return x / total;
}

CtsTensor baseline_reference_mean(const ReferenceDataset& ref, const BulkMatrix& bulk) {
    const Matrix sig = signature_matrix(ref);
    const Matrix var = within_type_variance(ref);
    std::vector<std::string> genes;
    std::vector<std::size_t> rows;
    for (const auto& g : bulk.genes()) {
        if (auto r = ref.gene_index(g)) {
            genes.push_back(g);
            rows.push_back(*r);
        }
    }
    if (genes.empty()) {
        throw ValidationError("bulk and reference share no genes");
    }
    const std::size_t C = ref.num_cell_types(), N = bulk.num_samples();
    std::vector<double> mean, variance;
    mean.reserve(genes.size() * C * N);
    variance.reserve(genes.size() * C * N);
    for (auto r : rows) {
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t i = 0; i < N; ++i) {
                mean.push_back(sig(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
                variance.push_back(var(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
            }
        }
    }
    return CtsTensor(std::move(genes), ref.cell_types(), bulk.samples(), std::move(mean), std::move(variance));
}

CtsTensor baseline_ols(const BulkMatrix& bulk, const std::vector<SampleMeta>& metas,
                       const std::vector<std::string>& cell_types) {
    const auto N = static_cast<Eigen::Index>(bulk.num_samples());
    const auto C = static_cast<Eigen::Index>(cell_types.size());
    if (static_cast<Eigen::Index>(metas.size()) != N) {
        throw ValidationError("need one metadata record per bulk sample");
    }
    Matrix W(N, C);
    for (Eigen::Index i = 0; i < N; ++i) {
        const auto& m = metas[static_cast<std::size_t>(i)];
        if (m.sample_id() != bulk.samples()[static_cast<std::size_t>(i)] || m.proportions().size() != C) {
            throw ValidationError("metadata does not match bulk sample '" + bulk.samples()[static_cast<std::size_t>(i)] + "'");
        }
        W.row(i) = m.proportions().transpose();
    }
    const auto qr = W.colPivHouseholderQr();
    if (qr.rank() < C) {
        throw ValidationError("proportion matrix is rank-deficient; OLS baseline is undefined");
    }
    const std::size_t G = bulk.num_genes();
    std::vector<double> mean(G * static_cast<std::size_t>(C * N)), variance(mean.size(), 0.0);
    for (std::size_t g = 0; g < G; ++g) {
        const Vector x = bulk.values().row(static_cast<Eigen::Index>(g)).transpose();
        const Vector beta = qr.solve(x);
        for (Eigen::Index i = 0; i < N; ++i) {
            const Vector w = W.row(i).transpose();
            const Vector z = beta + w * ((x[i] - w.dot(beta)) / w.squaredNorm());
            for (Eigen::Index c = 0; c < C; ++c) {
                mean[(g * static_cast<std::size_t>(C) + static_cast<std::size_t>(c)) * static_cast<std::size_t>(N) +
                     static_cast<std::size_t>(i)] = z[c];
            }
        }
    }
    return CtsTensor(bulk.genes(), cell_types, bulk.samples(), std::move(mean), std::move(variance));
}

} // namespace diagno
