#include "diagno/reference_prior.hpp"

#include "diagno/errors.hpp"
#include "diagno/io.hpp"
#include "diagno/parallel.hpp"
#include "diagno/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace diagno {

ReferenceDataset::ReferenceDataset(std::vector<std::string> genes, std::vector<std::string> cells,
                                   std::vector<std::string> labels, Matrix values)
    : genes_(std::move(genes)), cells_(std::move(cells)), labels_(std::move(labels)), values_(std::move(values)) {
    if (genes_.empty() || cells_.empty()) {
        throw ValidationError("reference needs at least one gene and one cell");
    }
    if (labels_.size() != cells_.size()) {
        throw ValidationError("reference has " + std::to_string(labels_.size()) + " labels for " +
                              std::to_string(cells_.size()) + " cells");
    }
    if (static_cast<std::size_t>(values_.rows()) != genes_.size() ||
        static_cast<std::size_t>(values_.cols()) != cells_.size()) {
        throw ValidationError("reference matrix dimensions do not match its labels");
    }
    if (!values_.allFinite()) {
        throw ValidationError("reference contains non-finite values");
    }
    gene_index_ = IdIndex(genes_, "gene");
    IdIndex cell_index(cells_, "cell");

    std::set<std::string> distinct(labels_.begin(), labels_.end());
    cell_types_.assign(distinct.begin(), distinct.end());
    type_index_ = IdIndex(cell_types_, "cell type");
    members_.resize(cell_types_.size());
    type_of_cell_.reserve(cells_.size());
    for (std::size_t j = 0; j < labels_.size(); ++j) {
        const auto c = type_index_.at(labels_[j]);
        type_of_cell_.push_back(c);
        members_[c].push_back(j);
    }
    for (std::size_t c = 0; c < cell_types_.size(); ++c) {
        if (members_[c].size() < 2) {
            throw ValidationError("degenerate reference: cell type '" + cell_types_[c] + "' has fewer than 2 cells");
        }
    }
}

ReferenceDataset load_reference(const std::filesystem::path& matrix_path, const std::filesystem::path& labels_path) {
    auto lm = parse_labelled_matrix(read_text_file(matrix_path), matrix_path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_text_file(labels_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("reference label JSON: " + std::string(e.what()));
    }
    if (!doc.is_object()) {
        throw ValidationError("reference label JSON must map cell IDs to cell types");
    }
    std::vector<std::string> labels;
    labels.reserve(lm.cols.size());
    for (const auto& cell : lm.cols) {
        auto it = doc.find(cell);
        if (it == doc.end() || !it->is_string()) {
            throw ValidationError("no cell-type label for cell '" + cell + "'");
        }
        labels.push_back(it->get<std::string>());
    }
    return ReferenceDataset(std::move(lm.rows), std::move(lm.cols), std::move(labels), std::move(lm.values));
}

void save_reference(const ReferenceDataset& ref, const std::filesystem::path& matrix_path,
                    const std::filesystem::path& labels_path) {
    write_text_atomic(matrix_path, format_labelled_matrix("gene", ref.genes(), ref.cells(), ref.values()));
    nlohmann::json doc = nlohmann::json::object();
    for (std::size_t j = 0; j < ref.num_cells(); ++j) {
        doc[ref.cells()[j]] = ref.labels()[j];
    }
    write_text_atomic(labels_path, doc.dump(2) + "\n");
}

Matrix signature_matrix(const ReferenceDataset& ref) {
    const auto G = static_cast<Eigen::Index>(ref.num_genes());
    const auto C = static_cast<Eigen::Index>(ref.num_cell_types());
    Matrix out = Matrix::Zero(G, C);
    for (Eigen::Index c = 0; c < C; ++c) {
        const auto& cells = ref.members()[static_cast<std::size_t>(c)];
        for (auto j : cells) {
            out.col(c) += ref.values().col(static_cast<Eigen::Index>(j));
        }
        out.col(c) /= static_cast<double>(cells.size());
    }
    return out;
}

Matrix within_type_variance(const ReferenceDataset& ref) {
    const Matrix means = signature_matrix(ref);
    const auto G = static_cast<Eigen::Index>(ref.num_genes());
    const auto C = static_cast<Eigen::Index>(ref.num_cell_types());
    Matrix out = Matrix::Zero(G, C);
    for (Eigen::Index c = 0; c < C; ++c) {
        const auto& cells = ref.members()[static_cast<std::size_t>(c)];
        for (auto j : cells) {
            out.col(c) += (ref.values().col(static_cast<Eigen::Index>(j)) - means.col(c)).array().square().matrix();
        }
        out.col(c) /= static_cast<double>(cells.size() - 1);
    }
    return out;
}

namespace {

bool positive_definite(const Matrix& m) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) {
        return false;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
    return eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 0.0;
}

} // namespace

std::vector<GenePrior> estimate_priors(const ReferenceDataset& ref, double shrinkage, std::uint64_t seed,
                                       int resamples, unsigned threads) {
    if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) {
        throw ValidationError("shrinkage must lie in [0, 1]");
    }
    if (resamples < 2) {
        throw ValidationError("at least two pseudo-replicates are required");
    }
    const std::size_t C = ref.num_cell_types();
    const auto Ci = static_cast<Eigen::Index>(C);

    // halves[r][c] = cell indices of the r-th random half of type c, shared by all genes
    Random rng(derive_seed(seed, {0x5245u}));
    std::vector<std::vector<std::vector<std::size_t>>> halves(static_cast<std::size_t>(resamples));
    for (auto& replicate : halves) {
        replicate.resize(C);
        for (std::size_t c = 0; c < C; ++c) {
            auto pool = ref.members()[c];
            const std::size_t take = pool.size() / 2;
            for (std::size_t k = 0; k < take; ++k) {
                std::swap(pool[k], pool[k + rng.index(pool.size() - k)]);
            }
            pool.resize(take);
            replicate[c] = std::move(pool);
        }
    }

    const Matrix means = signature_matrix(ref);
    const Matrix within = within_type_variance(ref);
    const double pooled_dof = static_cast<double>(ref.num_cells() - C);

    std::vector<std::optional<GenePrior>> slots(ref.num_genes());
    parallel_for(ref.num_genes(), threads, [&](std::size_t g) {
        const auto gi = static_cast<Eigen::Index>(g);
        Matrix reps(resamples, Ci);
        for (int r = 0; r < resamples; ++r) {
            for (std::size_t c = 0; c < C; ++c) {
                double sum = 0.0;
                for (auto j : halves[static_cast<std::size_t>(r)][c]) {
                    sum += ref.values()(gi, static_cast<Eigen::Index>(j));
                }
                reps(r, static_cast<Eigen::Index>(c)) = sum / static_cast<double>(halves[static_cast<std::size_t>(r)][c].size());
            }
        }
        const Matrix centered = reps.rowwise() - reps.colwise().mean();
        const Matrix S = centered.transpose() * centered / static_cast<double>(resamples - 1);

        Matrix sigma = (1.0 - shrinkage) * S;
        sigma.diagonal() += shrinkage * S.diagonal();
        sigma = 0.5 * (sigma + sigma.transpose());
        double eps = 1e-6 * S.trace() / static_cast<double>(C);
        if (!(eps > 0.0)) {
            eps = 1e-10;
        }
        while (!positive_definite(sigma)) {
            sigma.diagonal().array() += eps;
            eps *= 2.0;
        }

        double pooled = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            pooled += within(gi, static_cast<Eigen::Index>(c)) * static_cast<double>(ref.members()[c].size() - 1);
        }
        pooled /= pooled_dof;
        slots[g].emplace(ref.genes()[g], Vector(means.row(gi).transpose()), std::move(sigma), std::max(pooled, 1e-8));
    });

    std::vector<GenePrior> out;
    out.reserve(slots.size());
    for (auto& s : slots) {
        out.push_back(std::move(*s));
    }
    return out;
}

} // namespace diagno
