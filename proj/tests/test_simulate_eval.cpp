#include "diagno/errors.hpp"
#include "diagno/evaluate.hpp"
#include "diagno/io.hpp"
#include "diagno/random.hpp"
#include "diagno/simulate.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace diagno;

namespace {

SyntheticScenario small_scenario(std::uint64_t seed) {
    SyntheticScenario s;
    s.genes = 12;
    s.samples = 25;
    s.cells_per_type = 10;
    s.seed = seed;
    return s;
}

CtsTensor map_tensor(const CtsTensor& t, double scale, double noise_sd, std::uint64_t seed) {
    Random rng(seed);
    auto mean = t.mean_data();
    for (auto& v : mean) {
        v = scale * v + noise_sd * rng.normal();
    }
    return CtsTensor(t.genes(), t.cell_types(), t.samples(), mean, t.variance_data());
}

} // namespace

TEST_CASE("synthetic bulk is the exact mixture of its parts") {
    const auto b = generate(small_scenario(3));
    const auto& x = b.bulk.values();
    const std::size_t C = b.true_z.num_cell_types();
    for (std::size_t g = 0; g < b.bulk.num_genes(); ++g) {
        for (std::size_t i = 0; i < b.bulk.num_samples(); ++i) {
            const auto& meta = b.metas[i];
            double v = covariate_effect(b.true_params[g], meta) + b.noise(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(i));
            for (std::size_t c = 0; c < C; ++c) {
                v += meta.proportions()[static_cast<Eigen::Index>(c)] * b.true_z.mean(g, c, i);
            }
            CHECK(std::abs(v - x(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(i))) < 1e-10);
        }
    }
    for (const auto& m : b.metas) {
        CHECK(std::abs(m.proportions().sum() - 1.0) < 1e-12);
        CHECK(m.proportions().minCoeff() >= 0.0);
        CHECK(m.bulk_cov().size() == 2);
        CHECK(m.cts_cov().size() == 1);
    }
}

TEST_CASE("generation is a function of the scenario") {
    const auto a = generate(small_scenario(5));
    const auto b = generate(small_scenario(5));
    const auto c = generate(small_scenario(6));
    CHECK(a.bulk.values() == b.bulk.values());
    CHECK(a.true_z.mean_data() == b.true_z.mean_data());
    CHECK(a.bulk.values() != c.bulk.values());
}

TEST_CASE("scenario JSON round-trips and rejects bad values") {
    auto s = small_scenario(17);
    s.dirichlet_alpha = {1.0, 2.0, 3.0};
    s.noise_sd = 0.125;
    const auto back = parse_scenario(format_scenario(s));
    CHECK(format_scenario(back) == format_scenario(s));
    CHECK(back.dirichlet_alpha == s.dirichlet_alpha);
    CHECK(parse_scenario("{}").genes == SyntheticScenario{}.genes);
    CHECK_THROWS_AS(parse_scenario(R"({"noise_sd": -1})"), ValidationError);
    CHECK_THROWS_AS(parse_scenario(R"({"dirichlet_alpha": [1, 2]})"), ValidationError);
    CHECK_THROWS_AS(parse_scenario("[1]"), ValidationError);
}

TEST_CASE("saved bundle loads back") {
    const auto s = small_scenario(2);
    const auto b = generate(s);
    const auto dir = test_util::temp_dir("bundle");
    save_bundle(b, s, dir);
    const auto bulk = load_bulk_matrix(dir / "bulk.tsv");
    CHECK(bulk.values() == b.bulk.values());
    const auto truth = load_cts_tensor(dir / "truth");
    CHECK(truth.mean_data() == b.true_z.mean_data());
    const auto metas = load_sample_metas(dir / "metas.json", b.ref.cell_types());
    CHECK(metas.size() == b.metas.size());
    CHECK(metas[4].proportions() == b.metas[4].proportions());
    CHECK(std::filesystem::exists(dir / "scenario.json"));
}

TEST_CASE("pearson hand values") {
    const std::vector<double> x{1, 2, 3}, y{2, 4, 6}, z{1, 3, 2};
    CHECK(pearson(x, y) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pearson(x, z) == doctest::Approx(0.5).epsilon(1e-12));
    const std::vector<double> neg{3, 2, 1};
    CHECK(pearson(x, neg) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 1, 1}), ValidationError);
    CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), ValidationError);
    CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2}), ValidationError);
}

TEST_CASE("quantile interpolates linearly") {
    CHECK(quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
    CHECK(quantile({4, 1, 3, 2}, 0.25) == doctest::Approx(1.75));
    CHECK(quantile({7}, 0.9) == 7.0);
}

TEST_CASE("recovery of the truth itself, its negation and a noisy copy") {
    const auto b = generate(small_scenario(8));
    const auto self = evaluate_recovery(b.true_z, b.true_z);
    CHECK(self.per_gene.median == doctest::Approx(1.0));
    CHECK(self.per_sample.median == doctest::Approx(1.0));
    CHECK(self.per_gene.count == 12 * 3);
    CHECK(self.per_sample.count == 25 * 3);
    const auto neg = evaluate_recovery(map_tensor(b.true_z, -1.0, 0.0, 1), b.true_z);
    CHECK(neg.per_gene.median == doctest::Approx(-1.0));
    const auto noisy = evaluate_recovery(map_tensor(b.true_z, 1.0, 0.2, 2), b.true_z);
    CHECK(noisy.per_gene.median >= 0.97);
    CHECK(noisy.per_gene.median <= 1.0);
    CHECK(noisy.per_gene.q1 <= noisy.per_gene.median);
    CHECK(noisy.per_gene.median <= noisy.per_gene.q3);
    REQUIRE(self.cell_types.size() == 3);
    CHECK(self.cell_types[0].per_gene.count == 12);
}

TEST_CASE("reference-mean baseline has no per-gene variation") {
    const auto b = generate(small_scenario(9));
    const auto base = baseline_reference_mean(b.ref, b.bulk);
    const auto rep = evaluate_recovery(base, b.true_z);
    CHECK(rep.per_gene.excluded == 12 * 3);
    CHECK(rep.per_gene.count == 0);
    CHECK(std::isnan(rep.gene_pcc(0, 0)));
    CHECK(format_gene_pcc_tsv(rep).find("NA") != std::string::npos);
}

TEST_CASE("OLS baseline reproduces each bulk value") {
    const auto b = generate(small_scenario(10));
    const auto ols = baseline_ols(b.bulk, b.metas, b.ref.cell_types());
    for (std::size_t g = 0; g < 12; ++g) {
        for (std::size_t i = 0; i < 25; ++i) {
            double v = 0.0;
            for (std::size_t c = 0; c < 3; ++c) {
                v += b.metas[i].proportions()[static_cast<Eigen::Index>(c)] * ols.mean(g, c, i);
            }
            CHECK(std::abs(v - b.bulk.values()(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(i))) < 1e-9);
        }
    }
}

TEST_CASE("NNLS recovers a positive solution exactly") {
    Random rng(4);
    Matrix a = Matrix::NullaryExpr(20, 4, [&] { return rng.uniform(); });
    Vector x(4);
    x << 0.5, 1.5, 0.25, 2.0;
    CHECK((nnls(a, a * x) - x).norm() < 1e-8);
}

TEST_CASE("NNLS matches the best of every active set on two unknowns") {
    Random rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix a = Matrix::NullaryExpr(6, 2, [&] { return rng.normal(); });
        Vector b = rng.normal_vector(6);
        auto cost = [&](const Vector& v) { return (a * v - b).squaredNorm(); };
        double best = cost(Vector::Zero(2));
        for (int j = 0; j < 2; ++j) {
            const double t = std::max(0.0, a.col(j).dot(b) / a.col(j).squaredNorm());
            Vector v = Vector::Zero(2);
            v[j] = t;
            best = std::min(best, cost(v));
        }
        const Vector ls = a.colPivHouseholderQr().solve(b);
        if (ls.minCoeff() >= 0.0) {
            best = std::min(best, cost(ls));
        }
        const Vector got = nnls(a, b);
        CHECK(got.minCoeff() >= 0.0);
        CHECK(cost(got) <= best + 1e-10);
    }
}

TEST_CASE("NNLS proportions recover Dirichlet mixtures") {
    const auto b = generate(small_scenario(11));
    const Matrix sig = signature_matrix(b.ref);
    double mae = 0.0;
    for (std::size_t i = 0; i < 25; ++i) {
        const Vector& w = b.metas[i].proportions();
        const Vector est = nnls_proportions(sig * w, sig);
        CHECK(std::abs(est.sum() - 1.0) < 1e-12);
        mae += (est - w).cwiseAbs().mean() / 25.0;
    }
    CHECK(mae < 0.02);
}
