#include "diagno/cli.hpp"
#include "diagno/errors.hpp"
#include "diagno/manifest.hpp"
#include "diagno/report.hpp"

#include "cli_pipeline.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace diagno;
using fixtures::run;

TEST_CASE("simulate is byte-reproducible") {
    fixtures::pin_environment();
    const auto a = test_util::temp_dir("cli_sim_a");
    const auto b = test_util::temp_dir("cli_sim_b");
    CHECK(run({"simulate", "--seed", "7", "--out", a.string()}).code == 0);
    CHECK(run({"simulate", "--seed", "7", "--out", b.string(), "--threads", "2"}).code == 0);
    for (const char* f : {"bulk.tsv", "metas.json", "reference.tsv", "truth_mean.tsv", "scenario.json"}) {
        CHECK(read_text_file(a / f) == read_text_file(b / f));
    }
    const auto m = parse_manifest(read_text_file(a / "manifest.json"));
    CHECK(m.status == "ok");
    CHECK(m.seed == 7);
    CHECK(m.command == "simulate");
    CHECK(m.tool_version == kToolVersion);
}

TEST_CASE("the full pipeline runs and reports are valid") {
    fixtures::pin_environment();
    const auto root = test_util::temp_dir("cli_pipeline");
    const auto failure = fixtures::run_pipeline(root, "1");
    REQUIRE_MESSAGE(failure.empty(), failure);
    CHECK(std::filesystem::exists(root / "dec" / "diagnostics.json"));
    CHECK(std::filesystem::exists(root / "dec" / "rhat.tsv"));
    CHECK(std::filesystem::exists(root / "eval" / "baseline_recovery.json"));
    const auto report = parse_report_json(read_text_file(root / "report" / "report.json"));
    CHECK(report.audience == Audience::Patient);
    CHECK_FALSE(find_blocklisted(report.rationale).has_value());
    CHECK_FALSE(read_text_file(root / "report" / "prompt.txt").empty());
    CHECK(read_text_file(root / "diverge" / "divergence.md").find("| Case |") != std::string::npos);
}

TEST_CASE("usage and runtime failures map to exit codes") {
    fixtures::pin_environment();
    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"simulate"}).code == 1);
    CHECK(run({"--version"}).code == 0);
    CHECK(run({"simulate", "--help"}).code == 0);

    const auto dir = test_util::temp_dir("cli_errors");
    write_text_atomic(dir / "bad.json", R"({"genes": 5, "nonsense": 1})");
    write_text_atomic(dir / "bad_dec.json", R"({"iterations": 5})");
    const auto r = run({"simulate", "--config", (dir / "bad.json").string(), "--out", (dir / "o1").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("nonsense") != std::string::npos);
    const auto m = parse_manifest(read_text_file(dir / "o1" / "manifest.json"));
    CHECK(m.status == "failed");
    CHECK_FALSE(m.error.empty());

    CHECK(run({"deconvolve", "--bulk", (dir / "missing.tsv").string(), "--metas", (dir / "m.json").string(),
               "--reference", (dir / "r.tsv").string(), "--labels", (dir / "l.json").string(), "--out",
               (dir / "o2").string()})
              .code == 1);
    write_text_atomic(dir / "occupied", "a file where the output directory should go");
    CHECK(run({"simulate", "--out", (dir / "occupied").string()}).code == 2);
}

TEST_CASE("config formats round-trip and reject unknown keys") {
    DeconvolveConfig d;
    d.refinement.nu = 9.0;
    d.refinement.burnin = 100;
    d.shrinkage = 0.3;
    CHECK(format_deconvolve_config(parse_deconvolve_config(format_deconvolve_config(d))) == format_deconvolve_config(d));
    CHECK_THROWS_AS(parse_deconvolve_config(R"({"iterations": 5})"), ValidationError);
    SelectionOptions s;
    s.fdr_threshold = 0.05;
    CHECK(format_selection_options(parse_selection_options(format_selection_options(s))) == format_selection_options(s));
    AttributionConfig a;
    a.top_k = 3;
    CHECK(format_attribution_config(parse_attribution_config(format_attribution_config(a))) == format_attribution_config(a));
    DivergenceConfig v;
    v.ood_size = 12;
    CHECK(format_divergence_config(parse_divergence_config(format_divergence_config(v))) == format_divergence_config(v));
}

TEST_CASE("manifest round-trip") {
    RunManifest m;
    m.command = "train";
    m.config_hash = sha256_hex("{}");
    m.seed = 99;
    m.inputs["a.tsv"] = sha256_hex("x");
    m.tool_version = std::string(kToolVersion);
    m.timestamp = "2023-11-14T22:13:20Z";
    m.outputs = {"model.json"};
    m.status = "ok";
    CHECK(format_manifest(parse_manifest(format_manifest(m))) == format_manifest(m));
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
