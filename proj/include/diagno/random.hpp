#pragma once

#include "diagno/types.hpp"

#include <cstdint>
#include <initializer_list>
#include <random>

namespace diagno {

/// Mixes a master seed with stream keys (round, chain, gene, ...) into an independent stream seed.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

/// One RNG stream. Draws depend only on the seed and call sequence.
class Random {
public:
    explicit Random(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    double gamma(double shape, double scale) { return std::gamma_distribution<double>(shape, scale)(engine_); }
    double chi_square(double dof) { return gamma(0.5 * dof, 2.0); }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
    Vector normal_vector(Eigen::Index n);

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

Vector sample_dirichlet(Random& rng, const Vector& alpha);

/// Draw from N(mu, L L^T) given the lower Cholesky factor L.
Vector sample_mvn(Random& rng, const Vector& mu, const Matrix& chol_lower);

/// Draw from Inverse-Wishart(scale, dof) via the Bartlett decomposition of the Wishart precision.
Matrix sample_inverse_wishart(Random& rng, const Matrix& scale, double dof);

/// Random orthonormal C x C matrix (QR of a Gaussian matrix with sign fix).
Matrix sample_orthogonal(Random& rng, Eigen::Index n);

} // namespace diagno
