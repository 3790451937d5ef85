#include "diagno/random.hpp"

#include "diagno/errors.hpp"

namespace diagno {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = splitmix64(seed);
    for (auto k : keys) {
        h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
    }
    return h;
}

Vector Random::normal_vector(Eigen::Index n) {
    Vector out(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        out[k] = normal();
    }
    return out;
}

Vector sample_dirichlet(Random& rng, const Vector& alpha) {
    Vector out(alpha.size());
    for (Eigen::Index c = 0; c < alpha.size(); ++c) {
        out[c] = rng.gamma(alpha[c], 1.0);
    }
    const double total = out.sum();
    if (!(total > 0.0)) {
        throw NumericalError("Dirichlet draw collapsed to zero");
    }
    return out / total;
}

Vector sample_mvn(Random& rng, const Vector& mu, const Matrix& chol_lower) {
    return mu + chol_lower * rng.normal_vector(mu.size());
}

Matrix sample_inverse_wishart(Random& rng, const Matrix& scale, double dof) {
    const Eigen::Index p = scale.rows();
    if (!(dof > static_cast<double>(p) - 1.0)) {
        throw ValidationError("inverse-Wishart degrees of freedom must exceed dimension - 1");
    }
    Eigen::LLT<Matrix> scale_llt(scale);
    if (scale_llt.info() != Eigen::Success) {
        throw NumericalError("inverse-Wishart scale matrix is not positive definite");
    }
    // precision ~ Wishart(scale^-1, dof); factor of scale^-1
    const Matrix scale_inv = scale_llt.solve(Matrix::Identity(p, p));
    Eigen::LLT<Matrix> inv_llt(0.5 * (scale_inv + scale_inv.transpose()));
    if (inv_llt.info() != Eigen::Success) {
        throw NumericalError("inverse-Wishart scale inverse is not positive definite");
    }
    const Matrix L = inv_llt.matrixL();
    Matrix A = Matrix::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
        A(i, i) = std::sqrt(rng.chi_square(dof - static_cast<double>(i)));
        for (Eigen::Index j = 0; j < i; ++j) {
            A(i, j) = rng.normal();
        }
    }
    const Matrix LA = L * A;
    const Matrix precision = LA * LA.transpose();
    Eigen::LLT<Matrix> prec_llt(precision);
    if (prec_llt.info() != Eigen::Success) {
        throw NumericalError("Wishart draw is singular");
    }
    Matrix out = prec_llt.solve(Matrix::Identity(p, p));
    return 0.5 * (out + out.transpose());
}

Matrix sample_orthogonal(Random& rng, Eigen::Index n) {
    Matrix g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            g(i, j) = rng.normal();
        }
    }
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR();
    for (Eigen::Index j = 0; j < n; ++j) {
        if (r(j, j) < 0.0) {
            q.col(j) *= -1.0;
        }
    }
    return q;
}

} // namespace diagno
