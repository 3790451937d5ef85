#pragma once

#include "diagno/random.hpp"
#include "diagno/reference_prior.hpp"

#include <cstdio>
#include <string>
#include <vector>

namespace fixtures {

/**
 * 100 genes over 6 cell types with 20 cells each, log2 expression N(3, 0.2^2).
 * Genes G001..G010 are raised by 2 (a 4x fold) in type01.
 */
inline diagno::ReferenceDataset planted_reference(std::uint64_t seed, std::size_t genes = 100, std::size_t planted = 10) {
    diagno::Random rng(seed);
    const std::size_t types = 6, per_type = 20;
    std::vector<std::string> g, cells, labels;
    char buf[32];
    for (std::size_t k = 0; k < genes; ++k) {
        std::snprintf(buf, sizeof buf, "G%03zu", k + 1);
        g.push_back(buf);
    }
    for (std::size_t t = 0; t < types; ++t) {
        for (std::size_t k = 0; k < per_type; ++k) {
            std::snprintf(buf, sizeof buf, "cell%zu_%02zu", t + 1, k + 1);
            cells.push_back(buf);
            std::snprintf(buf, sizeof buf, "type%02zu", t + 1);
            labels.push_back(buf);
        }
    }
    diagno::Matrix v(static_cast<Eigen::Index>(genes), static_cast<Eigen::Index>(cells.size()));
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        const bool type1 = static_cast<std::size_t>(j) < per_type;
        for (Eigen::Index k = 0; k < v.rows(); ++k) {
            const bool up = type1 && static_cast<std::size_t>(k) < planted;
            v(k, j) = 3.0 + (up ? 2.0 : 0.0) + 0.2 * rng.normal();
        }
    }
    return diagno::ReferenceDataset(g, cells, labels, v);
}

} // namespace fixtures
