#pragma once

#include "diagno/gene_select.hpp"
#include "diagno/types.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace diagno {

enum class FeatureTag { Cts, EqtlBeta, EqtlSe, EqtlPval, Covariate };
std::string_view to_string(FeatureTag tag);

/// Tag implied by a feature name: `cts:GENE:TYPE`, `beta:GENE`, `se:GENE`, `pval:GENE`, anything else is a covariate.
FeatureTag tag_of(std::string_view name);

std::string cts_feature_name(std::string_view gene, std::string_view cell_type);

struct EqtlRow {
    double beta = 0.0;
    double se = 0.0;
    double pval = 1.0;
};

/**
 * eQTL summary table. TSV columns `gene, beta, se, pval`, optionally preceded by a
 * `sample` column giving per-sample values; rows without a sample apply to every sample.
 */
struct EqtlTable {
    std::map<std::string, EqtlRow> shared;
    std::map<std::string, std::map<std::string, EqtlRow>> per_sample;

    std::optional<EqtlRow> lookup(const std::string& sample, const std::string& gene) const;
};

EqtlTable parse_eqtl_table(std::string_view text, const std::string& source = "<memory>");
EqtlTable load_eqtl_table(const std::filesystem::path& path);

/// Per-sample covariates. TSV `sample<TAB>name1<TAB>...`.
struct CovariateTable {
    std::vector<std::string> names;
    std::map<std::string, Vector> rows;
};

CovariateTable parse_covariate_table(std::string_view text, const std::string& source = "<memory>");
CovariateTable load_covariate_table(const std::filesystem::path& path);

/// Row-per-sample feature matrix with named, tagged columns.
struct FeatureSet {
    std::vector<std::string> names;
    std::vector<FeatureTag> tags;
    std::vector<std::string> samples;
    /// samples x features
    Matrix values;
    /// Selected genes left out because the eQTL table does not cover them.
    std::vector<std::string> omitted_genes;

    std::size_t dim() const { return names.size(); }
};

/**
 * Per sample: CTS means of the selected pairs (sorted), then beta, se, pval per selected gene,
 * then covariates in table order. Rows follow the tensor's sample order.
 */
FeatureSet build_features(const CtsTensor& cts, const PairSelection& selection, const EqtlTable& eqtl,
                          const CovariateTable& covariates);

struct LabelledDataset {
    FeatureSet features;
    /// 1 = AD, 0 = nonAD.
    std::vector<int> labels;
};

/// Dataset TSV: header `sample<TAB>features...<TAB>label`; the sample column is optional on input.
std::string format_dataset(const LabelledDataset& ds);
LabelledDataset parse_dataset(std::string_view text, const std::string& source = "<memory>");
LabelledDataset load_dataset(const std::filesystem::path& path);

/// Features only, no label column; used for unlabelled inference inputs.
std::string format_feature_set(const FeatureSet& fs);
/// Feature TSV with an optional leading `sample` column; a trailing `label` column is ignored.
FeatureSet parse_feature_set(std::string_view text, const std::string& source = "<memory>");
FeatureSet load_feature_set(const std::filesystem::path& path);

} // namespace diagno
