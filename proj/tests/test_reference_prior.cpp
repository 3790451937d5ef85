#include "diagno/errors.hpp"
#include "diagno/random.hpp"
#include "diagno/reference_prior.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace diagno;

namespace {

ReferenceDataset random_reference(std::uint64_t seed, std::size_t genes, std::size_t per_type, std::size_t types) {
    Random rng(seed);
    std::vector<std::string> g, cells, labels;
    for (std::size_t k = 0; k < genes; ++k) {
        g.push_back("G" + std::to_string(k));
    }
    for (std::size_t t = 0; t < types; ++t) {
        for (std::size_t k = 0; k < per_type; ++k) {
            cells.push_back("c" + std::to_string(t) + "_" + std::to_string(k));
            labels.push_back("type" + std::to_string(t));
        }
    }
    Matrix v(static_cast<Eigen::Index>(genes), static_cast<Eigen::Index>(cells.size()));
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        v.data()[k] = 3.0 + rng.normal();
    }
    return ReferenceDataset(g, cells, labels, v);
}

ReferenceDataset permuted(const ReferenceDataset& ref, const std::vector<std::size_t>& order) {
    std::vector<std::string> cells, labels;
    Matrix v(ref.values().rows(), static_cast<Eigen::Index>(order.size()));
    for (std::size_t k = 0; k < order.size(); ++k) {
        cells.push_back(ref.cells()[order[k]] + "_" + std::to_string(k));
        labels.push_back(ref.labels()[order[k]]);
        v.col(static_cast<Eigen::Index>(k)) = ref.values().col(static_cast<Eigen::Index>(order[k]));
    }
    return ReferenceDataset(ref.genes(), cells, labels, v);
}

} // namespace

TEST_CASE("constant reference gives exact means and a regularized diagonal") {
    Matrix v(1, 6);
    v << 5.0, 5.0, 5.0, 2.0, 2.0, 2.0;
    const ReferenceDataset ref({"g"}, {"a", "b", "c", "d", "e", "f"}, {"t1", "t1", "t1", "t2", "t2", "t2"}, v);
    const auto priors = estimate_priors(ref, 0.5);
    REQUIRE(priors.size() == 1);
    CHECK(priors[0].mu()[0] == 5.0);
    CHECK(priors[0].mu()[1] == 2.0);
    CHECK(priors[0].sigma()(0, 1) == 0.0);
    CHECK(priors[0].sigma()(0, 0) > 0.0);
    CHECK(priors[0].sigma()(0, 0) < 1e-8);
    const Matrix sig = signature_matrix(ref);
    CHECK(sig(0, 0) == 5.0);
    CHECK(sig(0, 1) == 2.0);
}

TEST_CASE("full shrinkage makes sigma diagonal") {
    const auto ref = random_reference(4, 20, 10, 3);
    for (const auto& p : estimate_priors(ref, 1.0)) {
        const Matrix s = p.sigma();
        for (Eigen::Index a = 0; a < 3; ++a) {
            for (Eigen::Index b = 0; b < 3; ++b) {
                if (a != b) {
                    CHECK(s(a, b) == 0.0);
                }
            }
        }
    }
}

TEST_CASE("prior covariances are symmetric positive definite") {
    const auto ref = random_reference(9, 40, 8, 4);
    for (double shrink : {0.0, 0.5, 1.0}) {
        for (const auto& p : estimate_priors(ref, shrink, 3)) {
            const Matrix s = p.sigma();
            CHECK((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
            Eigen::SelfAdjointEigenSolver<Matrix> es(s);
            CHECK(es.eigenvalues().minCoeff() > 0.0);
            CHECK(p.noise_var() > 0.0);
        }
    }
}

TEST_CASE("prior means match known Normal means within three standard errors") {
    Random rng(21);
    const std::size_t n = 200;
    std::vector<std::string> cells, labels;
    Matrix v(1, static_cast<Eigen::Index>(2 * n));
    for (std::size_t k = 0; k < 2 * n; ++k) {
        const bool first = k < n;
        cells.push_back("c" + std::to_string(k));
        labels.push_back(first ? "A" : "B");
        v(0, static_cast<Eigen::Index>(k)) = (first ? 3.0 : 1.0) + 0.5 * rng.normal();
    }
    const ReferenceDataset ref({"g"}, cells, labels, v);
    const auto p = estimate_priors(ref)[0];
    const double se = 0.5 / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(p.mu()[0] - 3.0) < 3.0 * se);
    CHECK(std::abs(p.mu()[1] - 1.0) < 3.0 * se);
    CHECK(p.noise_var() == doctest::Approx(0.25).epsilon(0.2));
}

TEST_CASE("a cell type with fewer than two cells is rejected") {
    Matrix v(1, 3);
    v << 1.0, 2.0, 3.0;
    CHECK_THROWS_AS(ReferenceDataset({"g"}, {"a", "b", "c"}, {"t1", "t1", "t2"}, v), ValidationError);
}

TEST_CASE("signature matrix equals brute-force type means and ignores cell order") {
    const auto ref = random_reference(13, 15, 7, 3);
    const Matrix sig = signature_matrix(ref);
    for (std::size_t g = 0; g < ref.num_genes(); ++g) {
        for (std::size_t c = 0; c < ref.num_cell_types(); ++c) {
            double sum = 0.0;
            int count = 0;
            for (std::size_t j = 0; j < ref.num_cells(); ++j) {
                if (ref.labels()[j] == ref.cell_types()[c]) {
                    sum += ref.values()(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(j));
                    ++count;
                }
            }
            CHECK(sig(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(c)) == doctest::Approx(sum / count).epsilon(1e-14));
        }
    }
    std::vector<std::size_t> order(ref.num_cells());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::reverse(order.begin(), order.end());
    const Matrix sig_perm = signature_matrix(permuted(ref, order));
    CHECK((sig_perm - sig).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("prior means are invariant to cell order and to duplicating the cells") {
    const auto ref = random_reference(17, 10, 6, 2);
    std::vector<std::size_t> rev(ref.num_cells()), twice;
    std::iota(rev.begin(), rev.end(), std::size_t{0});
    twice = rev;
    twice.insert(twice.end(), rev.begin(), rev.end());
    std::reverse(rev.begin(), rev.end());
    const auto base = estimate_priors(ref);
    const auto p1 = estimate_priors(permuted(ref, rev));
    const auto p2 = estimate_priors(permuted(ref, twice));
    for (std::size_t g = 0; g < base.size(); ++g) {
        CHECK((p1[g].mu() - base[g].mu()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((p2[g].mu() - base[g].mu()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("prior estimation is deterministic and independent of thread count") {
    const auto ref = random_reference(23, 30, 6, 3);
    const auto a = estimate_priors(ref, 0.5, 7, kPseudoReplicates, 1);
    const auto b = estimate_priors(ref, 0.5, 7, kPseudoReplicates, 3);
    for (std::size_t g = 0; g < a.size(); ++g) {
        CHECK((a[g].sigma().array() == b[g].sigma().array()).all());
        CHECK(a[g].noise_var() == b[g].noise_var());
    }
}

TEST_CASE("reference files round-trip") {
    const auto ref = random_reference(29, 5, 3, 2);
    const auto dir = test_util::temp_dir("reference_roundtrip");
    save_reference(ref, dir / "ref.tsv", dir / "labels.json");
    const auto back = load_reference(dir / "ref.tsv", dir / "labels.json");
    CHECK(back.genes() == ref.genes());
    CHECK(back.cells() == ref.cells());
    CHECK(back.labels() == ref.labels());
    CHECK((back.values().array() == ref.values().array()).all());
}
