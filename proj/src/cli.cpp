#include "diagno/cli.hpp"

#include "diagno/attribution.hpp"
#include "diagno/divergence.hpp"
#include "diagno/errors.hpp"
#include "diagno/evaluate.hpp"
#include "diagno/features.hpp"
#include "diagno/gp_unmix.hpp"
#include "diagno/io.hpp"
#include "diagno/manifest.hpp"
#include "diagno/mlp.hpp"
#include "diagno/numeric_format.hpp"
#include "diagno/parallel.hpp"
#include "diagno/report.hpp"
#include "diagno/simulate.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <set>

namespace diagno {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_object(std::string_view text, const char* what, std::initializer_list<const char*> allowed) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string(what) + " JSON: " + e.what());
    }
    if (!j.is_object()) {
        throw ValidationError(std::string(what) + " JSON must be an object");
    }
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
        if (!keys.count(key)) {
            throw ValidationError(std::string(what) + " JSON has unknown key '" + key + "'");
        }
    }
    return j;
}

template <typename T>
void read_key(const json& j, const char* key, T& target, const char* what) {
    if (!j.contains(key)) {
        return;
    }
    try {
        target = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string(what) + " JSON key '" + key + "': " + e.what());
    }
}

} // namespace

std::string format_deconvolve_config(const DeconvolveConfig& c) {
    const auto& r = c.refinement;
    json j = {{"tau", r.tau},
              {"nu", r.nu ? json(*r.nu) : json(nullptr)},
              {"rounds", r.rounds},
              {"chains", r.chains},
              {"iters", r.iters},
              {"burnin", r.burnin ? json(*r.burnin) : json(nullptr)},
              {"rhat_threshold", r.rhat_threshold},
              {"shrinkage", c.shrinkage}};
    return j.dump(2) + "\n";
}

DeconvolveConfig parse_deconvolve_config(std::string_view text) {
    const char* what = "deconvolve config";
    const json j = parse_object(text, what, {"tau", "nu", "rounds", "chains", "iters", "burnin", "rhat_threshold", "shrinkage"});
    DeconvolveConfig c;
    auto& r = c.refinement;
    read_key(j, "tau", r.tau, what);
    if (j.contains("nu") && !j.at("nu").is_null()) {
        double nu = 0.0;
        read_key(j, "nu", nu, what);
        r.nu = nu;
    }
    read_key(j, "rounds", r.rounds, what);
    read_key(j, "chains", r.chains, what);
    read_key(j, "iters", r.iters, what);
    if (j.contains("burnin") && !j.at("burnin").is_null()) {
        int burnin = 0;
        read_key(j, "burnin", burnin, what);
        r.burnin = burnin;
    }
    read_key(j, "rhat_threshold", r.rhat_threshold, what);
    read_key(j, "shrinkage", c.shrinkage, what);
    if (!(c.shrinkage >= 0.0 && c.shrinkage <= 1.0)) {
        throw ValidationError("shrinkage must lie in [0, 1]");
    }
    return c;
}

std::string format_selection_options(const SelectionOptions& o) {
    json j = {{"fdr_threshold", o.fdr_threshold},
              {"lfc_threshold", o.lfc_threshold},
              {"noise_quantile", o.noise_quantile},
              {"dropout_ceiling", o.dropout_ceiling},
              {"pseudo_count", o.pseudo_count}};
    return j.dump(2) + "\n";
}

SelectionOptions parse_selection_options(std::string_view text) {
    const char* what = "selection config";
    const json j =
        parse_object(text, what, {"fdr_threshold", "lfc_threshold", "noise_quantile", "dropout_ceiling", "pseudo_count"});
    SelectionOptions o;
    read_key(j, "fdr_threshold", o.fdr_threshold, what);
    read_key(j, "lfc_threshold", o.lfc_threshold, what);
    read_key(j, "noise_quantile", o.noise_quantile, what);
    read_key(j, "dropout_ceiling", o.dropout_ceiling, what);
    read_key(j, "pseudo_count", o.pseudo_count, what);
    return o;
}

std::string format_attribution_config(const AttributionConfig& c) {
    json j = {{"steps", c.steps}, {"top_k", c.top_k}, {"model", c.model}};
    return j.dump(2) + "\n";
}

AttributionConfig parse_attribution_config(std::string_view text) {
    const char* what = "attribution config";
    const json j = parse_object(text, what, {"steps", "top_k", "model"});
    AttributionConfig c;
    read_key(j, "steps", c.steps, what);
    read_key(j, "top_k", c.top_k, what);
    read_key(j, "model", c.model, what);
    if (c.steps < 1 || c.top_k < 1) {
        throw ValidationError("steps and top_k must be at least 1");
    }
    return c;
}

std::string format_divergence_config(const DivergenceConfig& c) {
    json j = {{"conflict_size", c.conflict_size}, {"ood_threshold", c.ood_threshold}, {"ood_size", c.ood_size}};
    return j.dump(2) + "\n";
}

DivergenceConfig parse_divergence_config(std::string_view text) {
    const char* what = "divergence config";
    const json j = parse_object(text, what, {"conflict_size", "ood_threshold", "ood_size"});
    DivergenceConfig c;
    read_key(j, "conflict_size", c.conflict_size, what);
    read_key(j, "ood_threshold", c.ood_threshold, what);
    read_key(j, "ood_size", c.ood_size, what);
    if (c.conflict_size < 1 || !(c.ood_threshold >= 0.0)) {
        throw ValidationError("conflict_size must be positive and ood_threshold non-negative");
    }
    return c;
}

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    unsigned threads = 0;
};

struct Paths {
    std::string bulk, metas, reference, labels, markers, selection, dataset, train_dataset, model, features, sample,
        knowledge, ranges, population, estimate, truth, insights;
    std::string audience = "clinician";
    std::string strategy = "direct";
    bool offline = false;
};

/// Records outputs in the manifest as they are written.
class Outputs {
public:
    Outputs(fs::path dir, RunManifest& m) : dir_(std::move(dir)), m_(m) {}
    void text(const std::string& name, std::string_view content) {
        write_text_atomic(dir_ / name, content);
        m_.outputs.push_back(name);
    }
    void record(const std::string& name) { m_.outputs.push_back(name); }
    const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    RunManifest& m_;
};

std::string input(RunManifest& m, const std::string& path) {
    m.inputs[path] = sha256_file(path);
    return path;
}

std::string config_text(RunManifest& m, const Common& c) {
    if (c.config.empty()) {
        return "{}";
    }
    return read_text_file(input(m, c.config));
}

void cmd_simulate(const Common& c, const Paths&, RunManifest& m, Outputs& out) {
    SyntheticScenario sc = parse_scenario(config_text(m, c));
    if (c.seed) {
        sc.seed = *c.seed;
    }
    sc.validate();
    m.seed = sc.seed;
    m.config_hash = sha256_hex(format_scenario(sc));
    save_bundle(generate(sc), sc, out.dir());
    for (const char* name : {"bulk.tsv", "metas.json", "reference.tsv", "reference_labels.json", "truth_mean.tsv",
                             "truth_variance.tsv", "true_params.json", "scenario.json"}) {
        out.record(name);
    }
}

ReferenceDataset reference_from(RunManifest& m, const Paths& p) {
    if (p.reference.empty() || p.labels.empty()) {
        throw ValidationError("--reference and --labels are required");
    }
    return load_reference(input(m, p.reference), input(m, p.labels));
}

void cmd_select_genes(const Common& c, const Paths& p, RunManifest& m, Outputs& out) {
    SelectionOptions opts = parse_selection_options(config_text(m, c));
    m.seed = c.seed.value_or(0);
    m.config_hash = sha256_hex(format_selection_options(opts));
    opts.threads = resolve_threads(c.threads);
    const auto ref = reference_from(m, p);
    const MarkerSet markers = p.markers.empty() ? MarkerSet{} : load_marker_list(input(m, p.markers));
    out.text("selection.json", format_selection(select_pairs(ref, markers, opts)));
}

void cmd_deconvolve(const Common& c, const Paths& p, RunManifest& m, Outputs& out) {
    const DeconvolveConfig cfg = parse_deconvolve_config(config_text(m, c));
    m.seed = c.seed.value_or(0);
    m.config_hash = sha256_hex(format_deconvolve_config(cfg));
    if (p.bulk.empty() || p.metas.empty()) {
        throw ValidationError("--bulk and --metas are required");
    }
    const auto bulk = load_bulk_matrix(input(m, p.bulk));
    const auto ref = reference_from(m, p);
    const auto metas = load_sample_metas(input(m, p.metas), ref.cell_types());
    PairSelection selection;
    if (p.selection.empty()) {
        std::vector<std::string> genes;
        for (const auto& g : bulk.genes()) {
            if (ref.gene_index(g)) {
                genes.push_back(g);
            }
        }
        selection = select_all_pairs(genes, ref.cell_types());
    } else {
        selection = load_selection(input(m, p.selection));
    }
    DeconvolveOptions opts;
    opts.shrinkage = cfg.shrinkage;
    opts.mcmc.threads = resolve_threads(c.threads);
    const auto result = deconvolve(bulk, ref, selection, metas, cfg.refinement, m.seed, opts);
    const auto& s = result.final_summary;
    save_cts_tensor(s.cts, out.dir() / "cts");
    out.record("cts_mean.tsv");
    out.record("cts_variance.tsv");
    auto rhat_json = [](const PosteriorSummary& ps) {
        const double r = ps.max_rhat();
        return std::isnan(r) ? json(nullptr) : json(r);
    };
    json rounds = json::array();
    for (std::size_t r = 0; r < result.rounds.size(); ++r) {
        rounds.push_back({{"round", r + 1},
                          {"converged", result.rounds[r].converged},
                          {"max_rhat", rhat_json(result.rounds[r])},
                          {"diagnostic", result.rounds[r].diagnostic}});
    }
    std::size_t modeled = 0;
    for (auto v : s.modeled) {
        modeled += v;
    }
    json diag = {{"converged", s.converged},
                 {"max_rhat", rhat_json(s)},
                 {"rhat_threshold", cfg.refinement.rhat_threshold},
                 {"diagnostic", s.diagnostic},
                 {"modeled_pairs", modeled},
                 {"rounds", rounds}};
    out.text("diagnostics.json", diag.dump(2) + "\n");
    out.text("rhat.tsv", format_rhat_table(s));
    out.text("adjustments.json", format_adjustments(s.adj_hat, s.cts.genes()));
}

void cmd_train(const Common& c, const Paths& p, RunManifest& m, Outputs& out) {
    TrainConfig cfg = parse_train_config(config_text(m, c));
    if (c.seed) {
        cfg.seed = *c.seed;
    }
    cfg.validate();
    m.seed = cfg.seed;
    m.config_hash = sha256_hex(format_train_config(cfg));
    if (p.dataset.empty()) {
        throw ValidationError("--dataset is required");
    }
    const auto ds = load_dataset(input(m, p.dataset));
    const auto res = train(ds.features.values, ds.labels, ds.features.names, cfg);
    out.text("model.json", format_model(res.model));
    out.text("training_log.tsv", format_training_log(res.log));
    std::vector<std::string> dropped;
    for (std::size_t j = 0; j < res.model.standardizer.keep.size(); ++j) {
        if (!res.model.standardizer.keep[j]) {
            dropped.push_back(res.model.feature_names[j]);
        }
    }
    auto subset_accuracy = [&](const std::vector<std::size_t>& rows) {
        if (rows.empty()) {
            return json(nullptr);
        }
        std::size_t hits = 0;
        for (auto r : rows) {
            const double prob = forward(res.model, ds.features.values.row(static_cast<Eigen::Index>(r)).transpose());
            hits += (prob >= 0.5 ? 1 : 0) == ds.labels[r];
        }
        return json(static_cast<double>(hits) / static_cast<double>(rows.size()));
    };
    json summary = {{"best_epoch", res.best_epoch},
                    {"epochs_run", res.log.size()},
                    {"train_rows", res.train_rows.size()},
                    {"val_rows", res.val_rows.size()},
                    {"train_accuracy", subset_accuracy(res.train_rows)},
                    {"val_accuracy", subset_accuracy(res.val_rows)},
                    {"dropped_features", dropped}};
    out.text("training.json", summary.dump(2) + "\n");
}

MlpModel model_from(RunManifest& m, const Paths& p) {
    if (p.model.empty()) {
        throw ValidationError("--model is required");
    }
    return load_model(input(m, p.model));
}

FeatureSet features_for(RunManifest& m, const std::string& path, const MlpModel& model) {
    if (path.empty()) {
        throw ValidationError("--features is required");
    }
    auto fs = load_feature_set(input(m, path));
    if (fs.names != model.feature_names) {
        throw ValidationError("feature columns of '" + path + "' do not match the model");
    }
    return fs;
}

void cmd_attribute(const Common& c, const Paths& p, RunManifest& m, Outputs& out) {
    const AttributionConfig cfg = parse_attribution_config(config_text(m, c));
    m.seed = c.seed.value_or(0);
    m.config_hash = sha256_hex(format_attribution_config(cfg));
    const auto model = model_from(m, p);
    const auto fs = features_for(m, p.features, model);
    const auto n = fs.samples.size();
    const std::size_t k = std::min(cfg.top_k, fs.names.size());
    std::vector<Vector> attr(n);
    std::vector<double> prob(n);
    parallel_for(n, resolve_threads(c.threads), [&](std::size_t i) {
        const Vector x = fs.values.row(static_cast<Eigen::Index>(i)).transpose();
        prob[i] = forward(model, x);
        attr[i] = integrated_gradients(model, x, default_baseline(model), cfg.steps);
    });
    std::string table = "sample\tprobability";
    for (const auto& name : fs.names) {
        table += "\t" + name;
    }
    table += "\n";
    std::string top = "sample\trank\tfeature\tvalue\tattribution\n";
    for (std::size_t i = 0; i < n; ++i) {
        table += fs.samples[i] + "\t" + format_double(prob[i]);
        for (Eigen::Index j = 0; j < attr[i].size(); ++j) {
            table += "\t" + format_double(attr[i][j]);
        }
        table += "\n";
        const auto ranked =
            top_k_features(attr[i], fs.names, fs.values.row(static_cast<Eigen::Index>(i)).transpose(), k);
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            top += fs.samples[i] + "\t" + std::to_string(r + 1) + "\t" + ranked[r].name + "\t" +
                   format_double(ranked[r].value) + "\t" + format_double(ranked[r].attribution) + "\n";
        }
    }
    out.text("attributions.tsv", table);
    out.text("top_features.tsv", top);
}

std::unique_ptr<LlmClient> client_for(bool offline, const std::string& model, std::ostream& err) {
    if (offline) {
        return nullptr;
    }
    auto cfg = llm_config_from_env();
    if (!cfg) {
        err << "warning: DIAGNO_LLM_URL is not set; using the offline renderer\n";
        return nullptr;
    }
    cfg->model = model;
    return std::make_unique<HttpLlmClient>(*cfg);
}

void cmd_report(const Common& c, const Paths& p, RunManifest& m, Outputs& out, std::ostream& err) {
    const AttributionConfig cfg = parse_attribution_config(config_text(m, c));
    m.seed = c.seed.value_or(0);
    const Audience audience = parse_audience(p.audience);
    const Strategy strategy = parse_strategy(p.strategy);
    json settings = json::parse(format_attribution_config(cfg));
    settings["audience"] = to_string(audience);
    settings["strategy"] = to_string(strategy);
    settings["offline"] = p.offline;
    m.config_hash = sha256_hex(settings.dump());

    const auto model = model_from(m, p);
    const auto fs = features_for(m, p.features, model);
    std::size_t row = 0;
    if (!p.sample.empty()) {
        auto it = std::find(fs.samples.begin(), fs.samples.end(), p.sample);
        if (it == fs.samples.end()) {
            throw ValidationError("sample '" + p.sample + "' is not in '" + p.features + "'");
        }
        row = static_cast<std::size_t>(it - fs.samples.begin());
    } else if (fs.samples.empty()) {
        throw ValidationError("feature table has no samples");
    }
    const Vector x = fs.values.row(static_cast<Eigen::Index>(row)).transpose();
    const Vector attr = integrated_gradients(model, x, default_baseline(model), cfg.steps);

    PromptInput in;
    in.probability = forward(model, x);
    in.predicted = decide(in.probability);
    in.audience = audience;
    in.strategy = strategy;
    std::map<std::string, ReferenceRange> ranges;
    if (!p.ranges.empty()) {
        ranges = parse_reference_ranges(read_text_file(input(m, p.ranges)));
    }
    for (const auto& t : top_k_features(attr, fs.names, x, std::min(cfg.top_k, fs.names.size()))) {
        TopFeature f{t.name, t.value, t.attribution, std::nullopt};
        if (auto it = ranges.find(t.name); it != ranges.end()) {
            f.range = it->second;
        }
        in.top_features.push_back(std::move(f));
    }
    if (!p.knowledge.empty()) {
        in.domain_knowledge = parse_knowledge(read_text_file(input(m, p.knowledge)));
    }
    if (!p.population.empty()) {
        const auto pop = load_dataset(input(m, p.population));
        const auto& pf = pop.features;
        for (const auto& f : in.top_features) {
            auto it = std::find(pf.names.begin(), pf.names.end(), f.name);
            if (it == pf.names.end()) {
                continue;
            }
            const auto j = static_cast<Eigen::Index>(it - pf.names.begin());
            double sum_ad = 0.0, sum_non = 0.0, n_ad = 0.0, n_non = 0.0;
            for (Eigen::Index i = 0; i < pf.values.rows(); ++i) {
                if (pop.labels[static_cast<std::size_t>(i)] == 1) {
                    sum_ad += pf.values(i, j);
                    n_ad += 1.0;
                } else {
                    sum_non += pf.values(i, j);
                    n_non += 1.0;
                }
            }
            if (n_ad < 1.0 || n_non < 1.0 || pf.values.rows() < 2) {
                throw ValidationError("population dataset needs both classes and at least two rows");
            }
            const double mean = pf.values.col(j).mean();
            const double sd = std::sqrt((pf.values.col(j).array() - mean).square().sum() /
                                        static_cast<double>(pf.values.rows() - 1));
            in.population_stats[f.name] = {sum_ad / n_ad, sum_non / n_non, sd};
        }
    }
    const std::string prompt = build_prompt(in);
    const auto client = client_for(p.offline, cfg.model, err);
    const auto report = generate_report(in, client.get());
    for (const auto& w : report.warnings) {
        err << "warning: " << w << "\n";
    }
    out.text("prompt.txt", prompt);
    out.text("report.json", format_report_json(report));
    out.text("report.md", format_report_markdown(report));
}

void cmd_eval(const Common& c, const Paths& p, RunManifest& m, Outputs& out) {
    m.seed = c.seed.value_or(0);
    m.config_hash = sha256_hex("{}");
    if (p.estimate.empty() || p.truth.empty()) {
        throw ValidationError("--estimate and --truth are required");
    }
    for (const auto& prefix : {p.estimate, p.truth}) {
        input(m, cts_mean_path(prefix).string());
        input(m, cts_variance_path(prefix).string());
    }
    const auto est = load_cts_tensor(p.estimate);
    const auto truth = load_cts_tensor(p.truth);
    const auto rep = evaluate_recovery(est, truth);
    out.text("recovery.json", format_recovery_json(rep));
    out.text("gene_pcc.tsv", format_gene_pcc_tsv(rep));
    if (!p.bulk.empty() || !p.metas.empty()) {
        if (p.bulk.empty() || p.metas.empty()) {
            throw ValidationError("the OLS baseline needs both --bulk and --metas");
        }
        const auto bulk = load_bulk_matrix(input(m, p.bulk));
        const auto metas = align_metas(load_sample_metas(input(m, p.metas), truth.cell_types()), bulk.samples());
        const auto ols = baseline_ols(bulk, metas, truth.cell_types());
        const auto base = evaluate_recovery(ols, truth);
        out.text("baseline_recovery.json", format_recovery_json(base));
        out.text("baseline_gene_pcc.tsv", format_gene_pcc_tsv(base));
    }
}

void cmd_diverge(const Common& c, const Paths& p, RunManifest& m, Outputs& out, std::ostream& err) {
    const DivergenceConfig cfg = parse_divergence_config(config_text(m, c));
    m.seed = c.seed.value_or(0);
    json settings = json::parse(format_divergence_config(cfg));
    settings["offline"] = p.offline;
    m.config_hash = sha256_hex(settings.dump());
    const auto model = model_from(m, p);
    if (p.dataset.empty()) {
        throw ValidationError("--dataset is required");
    }
    const auto ds = load_dataset(input(m, p.dataset));
    const auto train_ds = p.train_dataset.empty() ? ds : load_dataset(input(m, p.train_dataset));
    const auto stats = feature_stats(train_ds.features);
    std::vector<Subset> subsets;
    try {
        subsets.push_back({"symbolic-conflict", symbolic_conflict_subset(ds, cfg.conflict_size)});
    } catch (const ValidationError& e) {
        err << "warning: " << e.what() << "\n";
    }
    try {
        subsets.push_back({"out-of-distribution",
                           ood_subset(ds, stats, cfg.ood_size == 0 ? kUnlimited : cfg.ood_size, cfg.ood_threshold)});
    } catch (const ValidationError& e) {
        err << "warning: " << e.what() << "\n";
    }
    if (subsets.empty()) {
        throw ValidationError("both divergence subsets are empty");
    }
    DivergenceOptions opts;
    opts.threads = resolve_threads(c.threads);
    if (!p.insights.empty()) {
        try {
            opts.insights = json::parse(read_text_file(input(m, p.insights))).get<std::map<std::string, std::string>>();
        } catch (const json::exception& e) {
            throw ValidationError(std::string("insights JSON: ") + e.what());
        }
    }
    const auto client = client_for(p.offline, AttributionConfig{}.model, err);
    opts.client = client.get();
    const auto reports = run_divergence(model, ds, subsets, opts);
    out.text("divergence.json", format_divergence_json(reports));
    out.text("divergence.md", format_divergence_markdown(reports));
}

using Handler = std::function<void(const Common&, const Paths&, RunManifest&, Outputs&)>;

int execute(const std::string& command, const Common& c, const Paths& p, const Handler& handler, std::ostream& out,
            std::ostream& err) {
    RunManifest m;
    m.command = command;
    m.timestamp = manifest_timestamp();
    m.seed = c.seed.value_or(0);
    const fs::path dir(c.out);
    try {
        fs::create_directories(dir);
        write_manifest(m, dir);
    } catch (const std::exception& e) {
        err << "error: cannot prepare output directory '" << c.out << "': " << e.what() << "\n";
        return 2;
    }
    Outputs outputs(dir, m);
    int code = 0;
    try {
        handler(c, p, m, outputs);
        m.status = "ok";
    } catch (const ValidationError& e) {
        m.status = "failed";
        m.error = e.what();
        code = 1;
    } catch (const std::exception& e) {
        m.status = "failed";
        m.error = e.what();
        code = 2;
    }
    try {
        write_manifest(m, dir);
    } catch (const std::exception& e) {
        err << "error: cannot write manifest: " << e.what() << "\n";
        return 2;
    }
    if (code != 0) {
        err << "error: " << m.error << "\n";
    } else {
        out << command << ": wrote " << m.outputs.size() << " file(s) to " << c.out << "\n";
    }
    return code;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cell-type deconvolution and interpretable diagnosis toolkit", "diagno"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    Common common;
    Paths paths;
    auto add_common = [&](CLI::App* sub, bool with_seed) {
        sub->add_option("--config", common.config, "JSON config file")->check(CLI::ExistingFile);
        if (with_seed) {
            sub->add_option("--seed", common.seed, "Master random seed");
        }
        sub->add_option("--out", common.out, "Output directory")->required();
        sub->add_option("--threads", common.threads, "Worker threads (0 = all cores)");
    };

    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic ground-truth bundle");
    add_common(simulate, true);

    auto* select = app.add_subcommand("select-genes", "Select gene/cell-type pairs from a reference");
    add_common(select, false);
    select->add_option("--reference", paths.reference, "Reference matrix TSV (genes x cells)")->required();
    select->add_option("--labels", paths.labels, "Reference cell labels JSON")->required();
    select->add_option("--markers", paths.markers, "Marker list JSON {gene: [cellTypes]}");

    auto* deconv = app.add_subcommand("deconvolve", "Recover cell-type-specific expression from bulk");
    add_common(deconv, true);
    deconv->add_option("--bulk", paths.bulk, "Bulk matrix TSV")->required();
    deconv->add_option("--metas", paths.metas, "Sample metadata JSON")->required();
    deconv->add_option("--reference", paths.reference, "Reference matrix TSV")->required();
    deconv->add_option("--labels", paths.labels, "Reference cell labels JSON")->required();
    deconv->add_option("--selection", paths.selection, "Pair selection JSON (default: all pairs)");

    auto* train_cmd = app.add_subcommand("train", "Train the MLP classifier");
    add_common(train_cmd, true);
    train_cmd->add_option("--dataset", paths.dataset, "Labelled dataset TSV")->required();

    auto* attribute = app.add_subcommand("attribute", "Integrated Gradients attributions per sample");
    add_common(attribute, false);
    attribute->add_option("--model", paths.model, "Model checkpoint JSON")->required();
    attribute->add_option("--features", paths.features, "Feature TSV")->required();

    auto* report = app.add_subcommand("report", "Audience-specific diagnostic report for one sample");
    add_common(report, false);
    report->add_option("--model", paths.model, "Model checkpoint JSON")->required();
    report->add_option("--features", paths.features, "Feature TSV")->required();
    report->add_option("--sample", paths.sample, "Sample ID (default: first row)");
    report->add_option("--audience", paths.audience, "clinician or patient")
        ->check(CLI::IsMember({"clinician", "patient"}));
    report->add_option("--strategy", paths.strategy, "direct, step or step-domain")
        ->check(CLI::IsMember({"direct", "step", "step-domain"}));
    report->add_flag("--offline", paths.offline, "Use the deterministic offline renderer");
    report->add_option("--knowledge", paths.knowledge, "Knowledge JSON {key: snippet}");
    report->add_option("--ranges", paths.ranges, "Reference ranges JSON {feature: {low, high, unit}}");
    report->add_option("--population", paths.population, "Labelled dataset for population statistics");

    auto* eval = app.add_subcommand("eval", "Recovery of estimated against true CTS expression");
    add_common(eval, false);
    eval->add_option("--estimate", paths.estimate, "Estimated tensor prefix (e.g. out/cts)")->required();
    eval->add_option("--truth", paths.truth, "True tensor prefix (e.g. sim/truth)")->required();
    eval->add_option("--bulk", paths.bulk, "Bulk matrix TSV for the OLS baseline");
    eval->add_option("--metas", paths.metas, "Sample metadata JSON for the OLS baseline");

    auto* diverge = app.add_subcommand("diverge", "Symbolic-conflict and out-of-distribution divergence");
    add_common(diverge, false);
    diverge->add_option("--model", paths.model, "Model checkpoint JSON")->required();
    diverge->add_option("--dataset", paths.dataset, "Labelled evaluation dataset TSV")->required();
    diverge->add_option("--train-dataset", paths.train_dataset, "Training dataset for feature statistics");
    diverge->add_option("--insights", paths.insights, "Case insights JSON {sample: text}");
    diverge->add_flag("--offline", paths.offline, "Do not query an LLM");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << (e.get_name() == "CallForVersion" ? std::string(kToolVersion) + "\n" : app.help());
            return 0;
        }
        err << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return 1;
    }

    auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    auto wrap = [&](auto fn) -> Handler {
        return [fn](const Common& c, const Paths& p, RunManifest& m, Outputs& o) { fn(c, p, m, o); };
    };
    Handler handler;
    if (name == "simulate") {
        handler = wrap(cmd_simulate);
    } else if (name == "select-genes") {
        handler = wrap(cmd_select_genes);
    } else if (name == "deconvolve") {
        handler = wrap(cmd_deconvolve);
    } else if (name == "train") {
        handler = wrap(cmd_train);
    } else if (name == "attribute") {
        handler = wrap(cmd_attribute);
    } else if (name == "report") {
        handler = [&err](const Common& c, const Paths& p, RunManifest& m, Outputs& o) { cmd_report(c, p, m, o, err); };
    } else if (name == "eval") {
        handler = wrap(cmd_eval);
    } else {
        handler = [&err](const Common& c, const Paths& p, RunManifest& m, Outputs& o) { cmd_diverge(c, p, m, o, err); };
    }
    return execute(name, common, paths, handler, out, err);
}

} // namespace diagno
