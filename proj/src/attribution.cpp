#include "diagno/attribution.hpp"

#include "diagno/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace diagno {

Vector integrated_gradients(const MlpModel& model, const Vector& x, const Vector& baseline, int steps) {
    if (steps < 1) {
        throw ValidationError("integrated gradients needs at least one step");
    }
    if (x.size() != baseline.size()) {
        throw ValidationError("input and baseline differ in dimension");
    }
    const Vector xs = model.standardizer.apply(x);
    const Vector bs = model.standardizer.apply(baseline);
    const Vector delta = xs - bs;
    Vector total = Vector::Zero(xs.size());
    for (int k = 1; k <= steps; ++k) {
        const double t = (static_cast<double>(k) - 0.5) / static_cast<double>(steps);
        total += logit_input_gradient(model, bs + t * delta);
    }
    const Vector kept = delta.cwiseProduct(total) / static_cast<double>(steps);
    Vector out = Vector::Zero(x.size());
    Eigen::Index j = 0;
    for (Eigen::Index f = 0; f < x.size(); ++f) {
        if (model.standardizer.keep[static_cast<std::size_t>(f)]) {
            out[f] = kept[j++];
        }
    }
    return out;
}

Vector default_baseline(const MlpModel& model) { return model.standardizer.mean; }

std::vector<RankedFeature> top_k_features(const Vector& attributions, const std::vector<std::string>& names,
                                          const Vector& values, std::size_t k) {
    const auto d = static_cast<std::size_t>(attributions.size());
    if (names.size() != d || static_cast<std::size_t>(values.size()) != d) {
        throw ValidationError("attributions, names and values differ in length");
    }
    if (k > d) {
        throw ValidationError("k = " + std::to_string(k) + " exceeds the " + std::to_string(d) + " features");
    }
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ma = std::abs(attributions[static_cast<Eigen::Index>(a)]);
        const double mb = std::abs(attributions[static_cast<Eigen::Index>(b)]);
        if (ma != mb) {
            return ma > mb;
        }
        return names[a] < names[b];
    });
    std::vector<RankedFeature> out;
    for (std::size_t r = 0; r < k; ++r) {
        const auto j = static_cast<Eigen::Index>(order[r]);
        out.push_back({names[order[r]], values[j], attributions[j]});
    }
    return out;
}

} // namespace diagno
