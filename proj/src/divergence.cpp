#include "diagno/divergence.hpp"

#include "diagno/attribution.hpp"
#include "diagno/errors.hpp"
#include "diagno/numeric_format.hpp"
#include "diagno/parallel.hpp"
#include "diagno/random.hpp"
#include "diagno/report.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>

namespace diagno {

using nlohmann::json;

FeatureStats feature_stats(const FeatureSet& fs) {
    const auto n = fs.values.rows();
    if (n < 2) {
        throw ValidationError("feature statistics need at least two samples");
    }
    FeatureStats s;
    s.names = fs.names;
    s.mean = fs.values.colwise().mean().transpose();
    const Matrix centered = fs.values.rowwise() - s.mean.transpose();
    s.sd = (centered.colwise().squaredNorm().transpose() / static_cast<double>(n - 1)).cwiseSqrt();
    return s;
}

std::vector<std::size_t> symbolic_conflict_subset(const LabelledDataset& ds, std::size_t size) {
    const auto& fs = ds.features;
    std::vector<Eigen::Index> beta_cols;
    for (std::size_t j = 0; j < fs.tags.size(); ++j) {
        if (fs.tags[j] == FeatureTag::EqtlBeta) {
            beta_cols.push_back(static_cast<Eigen::Index>(j));
        }
    }
    if (beta_cols.empty()) {
        throw ValidationError("dataset has no BETA features");
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ds.labels.size() && out.size() < size; ++i) {
        if (ds.labels[i] != 1) {
            continue;
        }
        const auto row = static_cast<Eigen::Index>(i);
        if (std::any_of(beta_cols.begin(), beta_cols.end(), [&](Eigen::Index j) { return fs.values(row, j) < 0.0; })) {
            out.push_back(i);
        }
    }
    if (out.empty()) {
        throw ValidationError("no AD sample has a negative BETA feature; symbolic-conflict subset is empty");
    }
    return out;
}

std::vector<std::size_t> ood_subset(const LabelledDataset& ds, const FeatureStats& train, std::size_t size,
                                    double threshold) {
    const auto& fs = ds.features;
    if (train.names != fs.names) {
        throw ValidationError("training statistics do not cover the dataset features");
    }
    std::vector<std::size_t> out;
    for (Eigen::Index i = 0; i < fs.values.rows() && out.size() < size; ++i) {
        double worst = 0.0;
        for (Eigen::Index j = 0; j < fs.values.cols(); ++j) {
            const double dev = std::abs(fs.values(i, j) - train.mean[j]);
            if (train.sd[j] > 0.0) {
                worst = std::max(worst, dev / train.sd[j]);
            } else if (dev > 0.0) {
                worst = std::numeric_limits<double>::infinity();
            }
        }
        if (worst > threshold) {
            out.push_back(static_cast<std::size_t>(i));
        }
    }
    if (out.empty()) {
        throw ValidationError("no sample deviates beyond the threshold; out-of-distribution subset is empty");
    }
    return out;
}

int sign_rule_predict(const FeatureSet& fs, std::size_t row) {
    double sum = 0.0;
    for (std::size_t j = 0; j < fs.tags.size(); ++j) {
        if (fs.tags[j] == FeatureTag::EqtlBeta) {
            sum += fs.values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j));
        }
    }
    return sum > 0.0 ? 1 : 0;
}

namespace {

std::string shown_features(const FeatureSet& fs, std::size_t row) {
    const auto i = static_cast<Eigen::Index>(row);
    auto col = [&](const std::string& name) -> std::optional<Eigen::Index> {
        auto it = std::find(fs.names.begin(), fs.names.end(), name);
        if (it == fs.names.end()) {
            return std::nullopt;
        }
        return static_cast<Eigen::Index>(it - fs.names.begin());
    };
    std::optional<Eigen::Index> best;
    for (std::size_t j = 0; j < fs.tags.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (fs.tags[j] == FeatureTag::EqtlBeta && (!best || fs.values(i, jj) < fs.values(i, *best))) {
            best = jj;
        }
    }
    if (best) {
        const std::string gene = fs.names[static_cast<std::size_t>(*best)].substr(5);
        std::string out = gene + ": BETA = " + format_short(fs.values(i, *best), 5);
        if (auto se = col("se:" + gene)) {
            out += "; SE = " + format_short(fs.values(i, *se), 5);
        }
        if (auto p = col("pval:" + gene)) {
            out += "; PVAL = " + format_short(fs.values(i, *p), 5);
        }
        return out;
    }
    std::string out;
    for (std::size_t j = 0; j < std::min<std::size_t>(3, fs.names.size()); ++j) {
        out += (j ? "; " : "") + fs.names[j] + " = " + format_short(fs.values(i, static_cast<Eigen::Index>(j)), 5);
    }
    return out;
}

int llm_decision(const MlpModel& model, const FeatureSet& fs, std::size_t row, double probability,
                 const LlmClient& client) {
    const Vector x = fs.values.row(static_cast<Eigen::Index>(row)).transpose();
    const Vector attr = integrated_gradients(model, x, default_baseline(model));
    const auto top = top_k_features(attr, fs.names, x, std::min(kDefaultTopK, fs.names.size()));
    PromptInput in;
    in.probability = probability;
    in.predicted = decide(probability);
    for (const auto& t : top) {
        in.top_features.push_back({t.name, t.value, t.attribution, std::nullopt});
    }
    in.audience = Audience::Clinician;
    in.strategy = Strategy::Direct;
    return generate_report(in, &client).decision == Diagnosis::AD ? 1 : 0;
}

} // namespace

std::vector<DivergenceReport> run_divergence(const MlpModel& model, const LabelledDataset& ds,
                                             const std::vector<Subset>& subsets, const DivergenceOptions& options) {
    const auto& fs = ds.features;
    if (fs.names != model.feature_names) {
        throw ValidationError("dataset features do not match the model's feature names");
    }
    std::vector<DivergenceReport> out;
    for (const auto& subset : subsets) {
        if (subset.rows.empty()) {
            throw ValidationError("subset '" + subset.name + "' is empty");
        }
        DivergenceReport rep;
        rep.subset_name = subset.name;
        rep.subset_size = subset.rows.size();
        rep.cases.resize(subset.rows.size());
        parallel_for(subset.rows.size(), options.threads, [&](std::size_t k) {
            const std::size_t row = subset.rows.at(k);
            if (row >= ds.labels.size()) {
                throw ValidationError("subset row out of range");
            }
            CaseRow& c = rep.cases[k];
            c.sample = fs.samples[row];
            c.features = shown_features(fs, row);
            c.label = ds.labels[row];
            c.mlp_probability = forward(model, fs.values.row(static_cast<Eigen::Index>(row)).transpose());
            c.mlp_pred = c.mlp_probability >= 0.5 ? 1 : 0;
            c.sign_rule_pred = sign_rule_predict(fs, row);
            if (options.client) {
                c.llm_pred = llm_decision(model, fs, row, c.mlp_probability, *options.client);
            }
            if (auto it = options.insights.find(c.sample); it != options.insights.end()) {
                c.insight = it->second;
            }
        });
        double mlp = 0.0, sign = 0.0, llm = 0.0;
        for (const auto& c : rep.cases) {
            mlp += c.mlp_pred == c.label;
            sign += c.sign_rule_pred == c.label;
            llm += c.llm_pred && *c.llm_pred == c.label;
        }
        const double n = static_cast<double>(rep.cases.size());
        rep.mlp_accuracy = mlp / n;
        rep.sign_rule_accuracy = sign / n;
        if (options.client) {
            rep.llm_accuracy = llm / n;
        }
        out.push_back(std::move(rep));
    }
    return out;
}

std::string format_divergence_json(const std::vector<DivergenceReport>& reports) {
    json arr = json::array();
    for (const auto& r : reports) {
        json cases = json::array();
        for (const auto& c : r.cases) {
            json jc = {{"sample", c.sample},
                       {"features", c.features},
                       {"label", c.label},
                       {"mlp_pred", c.mlp_pred},
                       {"mlp_probability", c.mlp_probability},
                       {"sign_rule_pred", c.sign_rule_pred},
                       {"insight", c.insight}};
            if (c.llm_pred) {
                jc["llm_pred"] = *c.llm_pred;
            }
            cases.push_back(std::move(jc));
        }
        json jr = {{"subset_name", r.subset_name},
                   {"subset_size", r.subset_size},
                   {"mlp_accuracy", r.mlp_accuracy},
                   {"sign_rule_accuracy", r.sign_rule_accuracy},
                   {"cases", cases}};
        if (r.llm_accuracy) {
            jr["llm_accuracy"] = *r.llm_accuracy;
        }
        arr.push_back(std::move(jr));
    }
    return arr.dump(2) + "\n";
}

std::vector<DivergenceReport> parse_divergence_json(std::string_view text) {
    std::vector<DivergenceReport> out;
    try {
        for (const auto& jr : json::parse(text)) {
            DivergenceReport r;
            r.subset_name = jr.at("subset_name").get<std::string>();
            r.subset_size = jr.at("subset_size").get<std::size_t>();
            r.mlp_accuracy = jr.at("mlp_accuracy").get<double>();
            r.sign_rule_accuracy = jr.at("sign_rule_accuracy").get<double>();
            if (jr.contains("llm_accuracy")) {
                r.llm_accuracy = jr.at("llm_accuracy").get<double>();
            }
            for (const auto& jc : jr.at("cases")) {
                CaseRow c;
                c.sample = jc.at("sample").get<std::string>();
                c.features = jc.at("features").get<std::string>();
                c.label = jc.at("label").get<int>();
                c.mlp_pred = jc.at("mlp_pred").get<int>();
                c.mlp_probability = jc.at("mlp_probability").get<double>();
                c.sign_rule_pred = jc.at("sign_rule_pred").get<int>();
                c.insight = jc.at("insight").get<std::string>();
                if (jc.contains("llm_pred")) {
                    c.llm_pred = jc.at("llm_pred").get<int>();
                }
                r.cases.push_back(std::move(c));
            }
            if (r.cases.size() != r.subset_size) {
                throw ValidationError("divergence report '" + r.subset_name + "' has a case count different from its size");
            }
            out.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("divergence JSON: ") + e.what());
    }
    return out;
}

std::string format_divergence_markdown(const std::vector<DivergenceReport>& reports) {
    auto label = [](int y) { return y == 1 ? std::string("AD") : std::string("nonAD"); };
    auto pct = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
        return std::string(buf);
    };
    std::string out;
    for (const auto& r : reports) {
        out += "## " + r.subset_name + " (n = " + std::to_string(r.subset_size) + ")\n\n";
        out += "- MLP accuracy: " + pct(r.mlp_accuracy) + "\n";
        out += "- LLM accuracy: " + (r.llm_accuracy ? pct(*r.llm_accuracy) : std::string("not run (offline)")) + "\n";
        out += "- Sign-rule accuracy: " + pct(r.sign_rule_accuracy) + "\n\n";
        out += "| Case | Features | Label | MLP | LLM | Key Insight |\n";
        out += "|---|---|---|---|---|---|\n";
        for (const auto& c : r.cases) {
            const std::string llm = c.llm_pred ? label(*c.llm_pred) : "offline (sign rule: " + label(c.sign_rule_pred) + ")";
            out += "| " + c.sample + " | " + c.features + " | " + label(c.label) + " | " + label(c.mlp_pred) + " | " + llm +
                   " | " + c.insight + " |\n";
        }
        out += "\n";
    }
    return out;
}

LabelledDataset make_classification_dataset(const ClassificationScenario& s) {
    if (s.samples < 4 || s.informative_pairs > s.cts_pairs) {
        throw ValidationError("classification scenario needs at least 4 samples and informative_pairs <= cts_pairs");
    }
    Random rng(s.seed);
    LabelledDataset ds;
    auto& fs = ds.features;
    char buf[64];
    for (std::size_t p = 0; p < s.cts_pairs; ++p) {
        std::snprintf(buf, sizeof buf, "cts:G%04zu:type%02zu", p / 3 + 1, p % 3 + 1);
        fs.names.push_back(buf);
    }
    for (std::size_t g = 0; g < s.eqtl_genes; ++g) {
        std::snprintf(buf, sizeof buf, "E%04zu", g + 1);
        fs.names.push_back(std::string("beta:") + buf);
        fs.names.push_back(std::string("se:") + buf);
        fs.names.push_back(std::string("pval:") + buf);
    }
    fs.names.insert(fs.names.end(), {"age", "sex", "batch"});
    for (const auto& n : fs.names) {
        fs.tags.push_back(tag_of(n));
    }
    const auto d = static_cast<Eigen::Index>(fs.names.size());
    fs.values.resize(static_cast<Eigen::Index>(s.samples), d);
    for (std::size_t i = 0; i < s.samples; ++i) {
        const int y = i % 2 == 0 ? 1 : 0;
        const double sign = y == 1 ? 1.0 : -1.0;
        std::snprintf(buf, sizeof buf, "P%05zu", i + 1);
        fs.samples.push_back(buf);
        ds.labels.push_back(y);
        const auto row = static_cast<Eigen::Index>(i);
        Eigen::Index col = 0;
        for (std::size_t p = 0; p < s.cts_pairs; ++p) {
            fs.values(row, col++) = (p < s.informative_pairs ? sign * s.signal : 0.0) + rng.normal();
        }
        for (std::size_t g = 0; g < s.eqtl_genes; ++g) {
            const double beta = s.beta_anticorrelated ? -sign * std::abs(0.04 + 0.02 * rng.normal()) : 0.05 * rng.normal();
            const double se = 0.03 + 0.04 * rng.uniform();
            fs.values(row, col++) = beta;
            fs.values(row, col++) = se;
            fs.values(row, col++) = std::erfc(std::abs(beta) / se / std::sqrt(2.0));
        }
        fs.values(row, col++) = 72.0 + 2.0 * sign + 6.0 * rng.normal();
        fs.values(row, col++) = rng.uniform() < 0.5 ? 1.0 : 0.0;
        fs.values(row, col++) = static_cast<double>(rng.index(3));
    }
    return ds;
}

} // namespace diagno
