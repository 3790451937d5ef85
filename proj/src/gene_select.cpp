#include "diagno/gene_select.hpp"

#include "diagno/errors.hpp"
#include "diagno/io.hpp"
#include "diagno/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace diagno {

using nlohmann::json;

MarkerSet parse_marker_list(std::string_view text, const std::string& source) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(source + ": " + e.what());
    }
    if (!doc.is_object()) {
        throw ValidationError(source + ": marker list must be an object {gene: [cell types]}");
    }
    MarkerSet out;
    for (const auto& [gene, types] : doc.items()) {
        if (!types.is_array()) {
            throw ValidationError(source + ": markers of '" + gene + "' must be an array");
        }
        for (const auto& t : types) {
            if (!t.is_string()) {
                throw ValidationError(source + ": cell types of '" + gene + "' must be strings");
            }
            out.insert({gene, t.get<std::string>()});
        }
    }
    return out;
}

MarkerSet load_marker_list(const std::filesystem::path& path) {
    return parse_marker_list(read_text_file(path), path.string());
}

namespace {

/// Mid-ranks (1-based) of the pooled values, plus sum over tie groups of t^3 - t.
std::vector<double> mid_ranks(const std::vector<double>& pooled, double& tie_term) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return pooled[x] < pooled[y]; });
    std::vector<double> ranks(n);
    tie_term = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) {
            ++j;
        }
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = rank;
        }
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    return ranks;
}

} // namespace

RankSumResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        throw ValidationError("rank-sum test needs non-empty samples");
    }
    const std::size_t na = a.size(), nb = b.size(), n = na + nb;
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    double tie_term = 0.0;
    const auto ranks = mid_ranks(pooled, tie_term);

    const double rank_sum = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(na), 0.0);
    const double offset = static_cast<double>(na) * static_cast<double>(na + 1) / 2.0;
    RankSumResult out;
    out.u = rank_sum - offset;
    const double mean_u = static_cast<double>(na) * static_cast<double>(nb) / 2.0;

    if (n <= kExactRankSumLimit) {
        // every assignment of na of the pooled ranks to the first sample is equally likely under the null
        const double observed = std::abs(out.u - mean_u);
        std::size_t extreme = 0, total = 0;
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            if (static_cast<std::size_t>(std::popcount(mask)) != na) {
                continue;
            }
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                if (mask & (1u << k)) {
                    s += ranks[k];
                }
            }
            ++total;
            if (std::abs(s - offset - mean_u) >= observed - 1e-9) {
                ++extreme;
            }
        }
        out.p_value = static_cast<double>(extreme) / static_cast<double>(total);
        out.exact = true;
        return out;
    }

    const double nn = static_cast<double>(n);
    const double var_u = static_cast<double>(na) * static_cast<double>(nb) / 12.0 *
                         ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    if (!(var_u > 0.0)) {
        out.p_value = 1.0;
        return out;
    }
    const double diff = out.u - mean_u;
    const double correction = diff > 0.0 ? 0.5 : (diff < 0.0 ? -0.5 : 0.0);
    const double z = (diff - correction) / std::sqrt(var_u);
    out.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
    return out;
}

std::vector<double> benjamini_hochberg(std::span<const double> pvalues) {
    const std::size_t n = pvalues.size();
    for (double p : pvalues) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ValidationError("p-values must lie in [0, 1]");
        }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return pvalues[x] < pvalues[y]; });
    std::vector<double> out(n);
    double running = 1.0;
    for (std::size_t k = n; k-- > 0;) {
        const double scaled = pvalues[order[k]] * (static_cast<double>(n) / static_cast<double>(k + 1));
        running = std::min(running, scaled);
        out[order[k]] = std::min(1.0, running);
    }
    return out;
}

double log2_fold_change(std::span<const double> a, std::span<const double> b, double pseudo) {
    if (!(pseudo > 0.0)) {
        throw ValidationError("pseudo-count must be positive");
    }
    if (a.empty() || b.empty()) {
        throw ValidationError("fold change needs non-empty groups");
    }
    auto linear_mean = [](std::span<const double> v) {
        double s = 0.0;
        for (double x : v) {
            s += std::exp2(x);
        }
        return s / static_cast<double>(v.size());
    };
    return std::log2((linear_mean(a) + pseudo) / (linear_mean(b) + pseudo));
}

std::string_view to_string(Provenance p) {
    switch (p) {
    case Provenance::Marker:
        return "marker";
    case Provenance::Stability:
        return "stability";
    case Provenance::Both:
        return "both";
    }
    return "stability";
}

Provenance provenance_from_string(std::string_view s) {
    if (s == "marker") {
        return Provenance::Marker;
    }
    if (s == "stability") {
        return Provenance::Stability;
    }
    if (s == "both") {
        return Provenance::Both;
    }
    throw ValidationError("unknown provenance '" + std::string(s) + "'");
}

bool PairSelection::contains(std::string_view gene, std::string_view cell_type) const {
    auto it = std::lower_bound(pairs.begin(), pairs.end(), std::pair{gene, cell_type},
                               [](const SelectedPair& p, const std::pair<std::string_view, std::string_view>& key) {
                                   return std::pair<std::string_view, std::string_view>(p.gene, p.cell_type) < key;
                               });
    return it != pairs.end() && it->gene == gene && it->cell_type == cell_type;
}

std::vector<std::string> PairSelection::genes() const {
    std::vector<std::string> out;
    for (const auto& p : pairs) {
        if (out.empty() || out.back() != p.gene) {
            out.push_back(p.gene);
        }
    }
    return out;
}

std::string format_selection(const PairSelection& sel) {
    json arr = json::array();
    for (const auto& p : sel.pairs) {
        arr.push_back({{"gene", p.gene}, {"cell_type", p.cell_type}, {"provenance", to_string(p.provenance)}, {"score", p.score}});
    }
    return arr.dump(2) + "\n";
}

PairSelection parse_selection(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("selection JSON: ") + e.what());
    }
    if (!doc.is_array()) {
        throw ValidationError("selection JSON must be an array");
    }
    PairSelection out;
    try {
        for (const auto& rec : doc) {
            out.pairs.push_back({rec.at("gene").get<std::string>(), rec.at("cell_type").get<std::string>(),
                                 provenance_from_string(rec.at("provenance").get<std::string>()),
                                 rec.at("score").is_null() ? 0.0 : rec.at("score").get<double>()});
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("selection JSON: ") + e.what());
    }
    std::sort(out.pairs.begin(), out.pairs.end(),
              [](const auto& x, const auto& y) { return std::tie(x.gene, x.cell_type) < std::tie(y.gene, y.cell_type); });
    return out;
}

void save_selection(const PairSelection& sel, const std::filesystem::path& path) {
    write_text_atomic(path, format_selection(sel));
}

PairSelection load_selection(const std::filesystem::path& path) {
    return parse_selection(read_text_file(path));
}

PairSelection select_all_pairs(const std::vector<std::string>& genes, const std::vector<std::string>& cell_types) {
    PairSelection out;
    for (const auto& g : genes) {
        for (const auto& c : cell_types) {
            out.pairs.push_back({g, c, Provenance::Marker, 0.0});
        }
    }
    std::sort(out.pairs.begin(), out.pairs.end(),
              [](const auto& x, const auto& y) { return std::tie(x.gene, x.cell_type) < std::tie(y.gene, y.cell_type); });
    return out;
}

std::vector<double> dropout_rates(const ReferenceDataset& ref) {
    std::vector<double> out(ref.num_genes());
    for (std::size_t g = 0; g < ref.num_genes(); ++g) {
        const auto row = ref.values().row(static_cast<Eigen::Index>(g));
        out[g] = static_cast<double>((row.array() == 0.0).count()) / static_cast<double>(ref.num_cells());
    }
    return out;
}

std::vector<PairTest> test_all_pairs(const ReferenceDataset& ref, const SelectionOptions& opts) {
    const std::size_t G = ref.num_genes(), C = ref.num_cell_types();
    std::vector<PairTest> tests(G * C);
    parallel_for(G, opts.threads, [&](std::size_t g) {
        const auto row = ref.values().row(static_cast<Eigen::Index>(g));
        std::vector<double> in, out;
        for (std::size_t c = 0; c < C; ++c) {
            in.clear();
            out.clear();
            for (std::size_t j = 0; j < ref.num_cells(); ++j) {
                (ref.type_of_cell()[j] == c ? in : out).push_back(row[static_cast<Eigen::Index>(j)]);
            }
            auto& t = tests[g * C + c];
            t.gene = g;
            t.cell_type = c;
            t.p_value = wilcoxon_rank_sum(in, out).p_value;
            t.log2_fc = log2_fold_change(in, out, opts.pseudo_count);
        }
    });
    std::vector<double> p(tests.size());
    for (std::size_t k = 0; k < tests.size(); ++k) {
        p[k] = tests[k].p_value;
    }
    const auto adjusted = benjamini_hochberg(p);
    for (std::size_t k = 0; k < tests.size(); ++k) {
        tests[k].p_adjusted = adjusted[k];
        const double floored = std::max(adjusted[k], std::numeric_limits<double>::min());
        tests[k].score = -std::log10(floored) * std::abs(tests[k].log2_fc);
    }
    return tests;
}

std::vector<PairTest> stability_pairs(const std::vector<PairTest>& tests, double fdr_threshold, double lfc_threshold) {
    std::vector<PairTest> out;
    for (const auto& t : tests) {
        if (t.p_adjusted < fdr_threshold && std::abs(t.log2_fc) > lfc_threshold) {
            out.push_back(t);
        }
    }
    return out;
}

double lower_quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        throw ValidationError("quantile of an empty set");
    }
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    auto k = static_cast<std::size_t>(std::ceil(q * n));
    k = std::clamp<std::size_t>(k, 1, values.size());
    return values[k - 1];
}

PairSelection select_pairs(const ReferenceDataset& ref, const MarkerSet& markers, const SelectionOptions& opts) {
    if (!(opts.fdr_threshold > 0.0) || !(opts.lfc_threshold > 0.0)) {
        throw ValidationError("selection thresholds must be positive");
    }
    if (!(opts.noise_quantile > 0.0 && opts.noise_quantile < 1.0)) {
        throw ValidationError("noise quantile must lie in (0, 1)");
    }
    const std::size_t C = ref.num_cell_types();
    const auto tests = test_all_pairs(ref, opts);
    const auto dropout = dropout_rates(ref);

    auto stable = stability_pairs(tests, opts.fdr_threshold, opts.lfc_threshold);
    if (!stable.empty()) {
        std::vector<double> scores;
        for (const auto& t : stable) {
            scores.push_back(t.score);
        }
        const double floor = lower_quantile(scores, opts.noise_quantile);
        std::erase_if(stable, [&](const PairTest& t) { return t.score < floor || dropout[t.gene] > opts.dropout_ceiling; });
    }

    std::map<GeneCellPair, SelectedPair> merged;
    for (const auto& t : stable) {
        GeneCellPair key{ref.genes()[t.gene], ref.cell_types()[t.cell_type]};
        merged[key] = {key.gene, key.cell_type, Provenance::Stability, t.score};
    }
    PairSelection out;
    for (const auto& m : markers) {
        auto g = ref.gene_index(m.gene);
        auto c = ref.cell_type_index(m.cell_type);
        if (!g || !c) {
            out.unmatched_markers.push_back(m);
            continue;
        }
        auto it = merged.find(m);
        if (it != merged.end()) {
            it->second.provenance = Provenance::Both;
        } else {
            merged[m] = {m.gene, m.cell_type, Provenance::Marker, tests[*g * C + *c].score};
        }
    }
    for (auto& [_, p] : merged) {
        out.pairs.push_back(std::move(p));
    }
    return out;
}

} // namespace diagno
