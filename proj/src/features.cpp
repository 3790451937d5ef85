#include "diagno/features.hpp"

#include "diagno/errors.hpp"
#include "diagno/io.hpp"
#include "diagno/numeric_format.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace diagno {

std::string_view to_string(FeatureTag tag) {
    switch (tag) {
    case FeatureTag::Cts:
        return "cts";
    case FeatureTag::EqtlBeta:
        return "eqtl_beta";
    case FeatureTag::EqtlSe:
        return "eqtl_se";
    case FeatureTag::EqtlPval:
        return "eqtl_pval";
    case FeatureTag::Covariate:
        return "covariate";
    }
    return "covariate";
}

FeatureTag tag_of(std::string_view name) {
    if (name.starts_with("cts:")) {
        return FeatureTag::Cts;
    }
    if (name.starts_with("beta:")) {
        return FeatureTag::EqtlBeta;
    }
    if (name.starts_with("se:")) {
        return FeatureTag::EqtlSe;
    }
    if (name.starts_with("pval:")) {
        return FeatureTag::EqtlPval;
    }
    return FeatureTag::Covariate;
}

std::string cts_feature_name(std::string_view gene, std::string_view cell_type) {
    return "cts:" + std::string(gene) + ":" + std::string(cell_type);
}

std::optional<EqtlRow> EqtlTable::lookup(const std::string& sample, const std::string& gene) const {
    if (auto it = per_sample.find(sample); it != per_sample.end()) {
        if (auto jt = it->second.find(gene); jt != it->second.end()) {
            return jt->second;
        }
    }
    if (auto it = shared.find(gene); it != shared.end()) {
        return it->second;
    }
    return std::nullopt;
}

namespace {

double field(const std::string& text, const std::string& source, std::size_t line, const char* what) {
    auto v = parse_double(text);
    if (!v || !std::isfinite(*v)) {
        throw ParseError(source, line, std::string("invalid ") + what + " value '" + text + "'");
    }
    return *v;
}

} // namespace

EqtlTable parse_eqtl_table(std::string_view text, const std::string& source) {
    const auto lines = split_lines(text);
    if (lines.empty()) {
        throw ParseError(source, 1, "empty eQTL table");
    }
    const auto header = split_tabs(lines[0]);
    const std::vector<std::string> plain{"gene", "beta", "se", "pval"};
    const std::vector<std::string> with_sample{"sample", "gene", "beta", "se", "pval"};
    const bool per_sample = header == with_sample;
    if (!per_sample && header != plain) {
        throw ParseError(source, 1, "eQTL header must be 'gene beta se pval' with an optional leading 'sample'");
    }
    EqtlTable out;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        if (lines[k].empty()) {
            continue;
        }
        auto f = split_tabs(lines[k]);
        if (f.size() != header.size()) {
            throw ParseError(source, k + 1, "expected " + std::to_string(header.size()) + " fields");
        }
        const std::size_t o = per_sample ? 1 : 0;
        EqtlRow row{field(f[o + 1], source, k + 1, "beta"), field(f[o + 2], source, k + 1, "se"),
                    field(f[o + 3], source, k + 1, "pval")};
        if (row.se < 0.0 || row.pval < 0.0 || row.pval > 1.0) {
            throw ParseError(source, k + 1, "se must be non-negative and pval in [0, 1]");
        }
        auto& target = (per_sample && !f[0].empty()) ? out.per_sample[f[0]] : out.shared;
        if (!target.emplace(f[o], row).second) {
            throw ParseError(source, k + 1, "duplicate eQTL row for gene '" + f[o] + "'");
        }
    }
    return out;
}

EqtlTable load_eqtl_table(const std::filesystem::path& path) {
    return parse_eqtl_table(read_text_file(path), path.string());
}

CovariateTable parse_covariate_table(std::string_view text, const std::string& source) {
    const auto lines = split_lines(text);
    if (lines.empty()) {
        throw ParseError(source, 1, "empty covariate table");
    }
    auto header = split_tabs(lines[0]);
    if (header.empty() || header[0] != "sample") {
        throw ParseError(source, 1, "covariate header must start with 'sample'");
    }
    CovariateTable out;
    out.names.assign(header.begin() + 1, header.end());
    IdIndex(out.names, "covariate");
    for (std::size_t k = 1; k < lines.size(); ++k) {
        if (lines[k].empty()) {
            continue;
        }
        auto f = split_tabs(lines[k]);
        if (f.size() != header.size()) {
            throw ParseError(source, k + 1, "expected " + std::to_string(header.size()) + " fields");
        }
        Vector v(static_cast<Eigen::Index>(out.names.size()));
        for (std::size_t j = 0; j < out.names.size(); ++j) {
            v[static_cast<Eigen::Index>(j)] = field(f[j + 1], source, k + 1, "covariate");
        }
        if (!out.rows.emplace(f[0], std::move(v)).second) {
            throw ParseError(source, k + 1, "duplicate sample '" + f[0] + "'");
        }
    }
    return out;
}

CovariateTable load_covariate_table(const std::filesystem::path& path) {
    return parse_covariate_table(read_text_file(path), path.string());
}

FeatureSet build_features(const CtsTensor& cts, const PairSelection& selection, const EqtlTable& eqtl,
                          const CovariateTable& covariates) {
    FeatureSet fs;
    fs.samples = cts.samples();

    std::vector<std::pair<std::size_t, std::size_t>> pair_slots;
    for (const auto& p : selection.pairs) {
        auto g = cts.gene_index(p.gene);
        auto c = cts.cell_type_index(p.cell_type);
        if (!g || !c) {
            throw ValidationError("selected pair (" + p.gene + ", " + p.cell_type + ") is not in the tensor");
        }
        fs.names.push_back(cts_feature_name(p.gene, p.cell_type));
        fs.tags.push_back(FeatureTag::Cts);
        pair_slots.emplace_back(*g, *c);
    }

    std::vector<std::string> genes;
    for (const auto& gene : selection.genes()) {
        const bool covered = std::all_of(fs.samples.begin(), fs.samples.end(),
                                         [&](const std::string& s) { return eqtl.lookup(s, gene).has_value(); });
        if (!covered) {
            fs.omitted_genes.push_back(gene);
            continue;
        }
        genes.push_back(gene);
        fs.names.push_back("beta:" + gene);
        fs.tags.push_back(FeatureTag::EqtlBeta);
        fs.names.push_back("se:" + gene);
        fs.tags.push_back(FeatureTag::EqtlSe);
        fs.names.push_back("pval:" + gene);
        fs.tags.push_back(FeatureTag::EqtlPval);
    }
    for (const auto& name : covariates.names) {
        if (tag_of(name) != FeatureTag::Covariate) {
            throw ValidationError("covariate name '" + name + "' collides with a reserved feature prefix");
        }
        fs.names.push_back(name);
        fs.tags.push_back(FeatureTag::Covariate);
    }
    IdIndex(fs.names, "feature");

    const auto n = static_cast<Eigen::Index>(fs.samples.size());
    fs.values.resize(n, static_cast<Eigen::Index>(fs.names.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& sample = fs.samples[static_cast<std::size_t>(i)];
        Eigen::Index col = 0;
        for (const auto& [g, c] : pair_slots) {
            fs.values(i, col++) = cts.mean(g, c, static_cast<std::size_t>(i));
        }
        for (const auto& gene : genes) {
            const auto row = *eqtl.lookup(sample, gene);
            fs.values(i, col++) = row.beta;
            fs.values(i, col++) = row.se;
            fs.values(i, col++) = row.pval;
        }
        if (!covariates.names.empty()) {
            auto it = covariates.rows.find(sample);
            if (it == covariates.rows.end()) {
                throw ValidationError("no covariates for sample '" + sample + "'");
            }
            for (Eigen::Index k = 0; k < it->second.size(); ++k) {
                fs.values(i, col++) = it->second[k];
            }
        }
    }
    return fs;
}

namespace {

std::string format_rows(const FeatureSet& fs, const std::vector<int>* labels) {
    std::string out = "sample";
    for (const auto& n : fs.names) {
        out += "\t" + n;
    }
    out += labels ? "\tlabel\n" : "\n";
    for (std::size_t i = 0; i < fs.samples.size(); ++i) {
        out += fs.samples[i];
        for (std::size_t j = 0; j < fs.names.size(); ++j) {
            out += "\t" + format_double(fs.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
        if (labels) {
            out += "\t" + std::to_string((*labels)[i]);
        }
        out += "\n";
    }
    return out;
}

} // namespace

std::string format_dataset(const LabelledDataset& ds) {
    if (ds.labels.size() != ds.features.samples.size()) {
        throw ValidationError("dataset needs one label per sample");
    }
    return format_rows(ds.features, &ds.labels);
}

std::string format_feature_set(const FeatureSet& fs) { return format_rows(fs, nullptr); }

namespace {

LabelledDataset parse_table(std::string_view text, const std::string& source, bool require_label) {
    const auto lines = split_lines(text);
    if (lines.empty()) {
        throw ParseError(source, 1, "empty feature table");
    }
    auto header = split_tabs(lines[0]);
    const bool has_label = !header.empty() && header.back() == "label";
    if (require_label && !has_label) {
        throw ParseError(source, 1, "dataset header must end with 'label'");
    }
    const bool has_sample = !header.empty() && header.front() == "sample";
    LabelledDataset ds;
    auto& fs = ds.features;
    fs.names.assign(header.begin() + (has_sample ? 1 : 0), header.end() - (has_label ? 1 : 0));
    if (fs.names.empty()) {
        throw ParseError(source, 1, "table has no feature columns");
    }
    IdIndex(fs.names, "feature");
    for (const auto& n : fs.names) {
        fs.tags.push_back(tag_of(n));
    }
    std::vector<std::vector<double>> rows;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        if (lines[k].empty()) {
            continue;
        }
        auto f = split_tabs(lines[k]);
        if (f.size() != header.size()) {
            throw ParseError(source, k + 1, "expected " + std::to_string(header.size()) + " fields");
        }
        fs.samples.push_back(has_sample ? f[0] : "row" + std::to_string(k));
        std::vector<double> row;
        for (std::size_t j = has_sample ? 1 : 0; j < f.size() - (has_label ? 1 : 0); ++j) {
            row.push_back(field(f[j], source, k + 1, "feature"));
        }
        rows.push_back(std::move(row));
        if (!has_label) {
            continue;
        }
        if (f.back() == "1" || f.back() == "AD") {
            ds.labels.push_back(1);
        } else if (f.back() == "0" || f.back() == "nonAD") {
            ds.labels.push_back(0);
        } else {
            throw ParseError(source, k + 1, "label must be 0/1 or AD/nonAD");
        }
    }
    IdIndex(fs.samples, "sample");
    fs.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(fs.names.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            fs.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return ds;
}

} // namespace

LabelledDataset parse_dataset(std::string_view text, const std::string& source) {
    return parse_table(text, source, true);
}

FeatureSet parse_feature_set(std::string_view text, const std::string& source) {
    return parse_table(text, source, false).features;
}

FeatureSet load_feature_set(const std::filesystem::path& path) {
    return parse_feature_set(read_text_file(path), path.string());
}

LabelledDataset load_dataset(const std::filesystem::path& path) {
    return parse_dataset(read_text_file(path), path.string());
}

} // namespace diagno
