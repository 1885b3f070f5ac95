#include <cmath>
#include <filesystem>
#include <fstream>
#include <doctest.h>

#include "admp/errors.hpp"
#include "admp/harness.hpp"
#include "admp/textio.hpp"

using namespace admp;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const char* name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

ExperimentConfig tiny_experiment(const std::string& out) {
    ExperimentConfig ec;
    ec.dataset.kind = DatasetKind::Moons;
    ec.dataset.n = 60;
    ec.dataset.shift = 30.0;
    ec.hidden = {6};
    ec.train.pretrain_iters = 40;
    ec.train.admp_iters = 30;
    ec.train.warmup_iters = 10;
    ec.train.finetune_iters = 30;
    ec.train.batch_size = 16;
    ec.train.eval_interval = 10;
    ec.sparsities = {0.5};
    ec.seeds = {1};
    ec.out_dir = out;
    ec.deterministic_output = true;
    return ec;
}

}  // namespace

TEST_CASE("config files parse with defaults, lists and comments") {
    const ConfigFile cfg = ConfigFile::parse_text(
        "# comment\n"
        "dataset.kind = blobs\n"
        "dataset.classes = 4\n"
        "train.lr = 0.01\n"
        "experiment.sparsities = 0.3, 0.5\n"
        "experiment.seeds = 7,8\n");
    const ExperimentConfig ec = ExperimentConfig::from_config(cfg);
    CHECK(ec.dataset.kind == DatasetKind::Blobs);
    CHECK(ec.dataset.classes == 4);
    CHECK(ec.train.lr == 0.01);
    CHECK(ec.sparsities == std::vector<double>{0.3, 0.5});
    CHECK(ec.seeds == std::vector<std::uint64_t>{7, 8});
    CHECK(ec.train.admp_iters == 1500);  // untouched default
    CHECK(ec.variant == "full_admp");
}

TEST_CASE("unknown and malformed config keys fail fast") {
    CHECK_THROWS_AS(ExperimentConfig::from_config(ConfigFile::parse_text("train.typo = 1\n")),
                    ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse_text("no equals sign here\n"), ConfigError);
    CHECK_THROWS_AS(ConfigFile::parse_text("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_config(
                        ConfigFile::parse_text("experiment.sparsities = 0.95\n")),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_config(
                        ConfigFile::parse_text("experiment.variant = nonsense\n")),
                    ConfigError);
}

TEST_CASE("config hash is canonical and stable") {
    ExperimentConfig a;
    ExperimentConfig b;
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    // golden value pins the canonical serialization across platforms
    CHECK(a.hash() == "9f5f1889c2177aa4");
    b.train.lr = 0.01;
    CHECK(a.hash() != b.hash());

    // run hashes mix the resolved run coordinates
    CHECK(a.run_hash("full_admp", 0.5, 1) != a.run_hash("full_admp", 0.5, 2));
    CHECK(a.run_hash("full_admp", 0.5, 1) != a.run_hash("kd_only", 0.5, 1));
}

TEST_CASE("variant names map onto mask machinery flags") {
    CHECK(flags_for_variant("full_admp").use_hard_mask);
    CHECK(flags_for_variant("full_admp").use_clustering);
    CHECK_FALSE(flags_for_variant("no_clustering").use_clustering);
    CHECK(flags_for_variant("no_clustering").use_hard_mask);
    CHECK_FALSE(flags_for_variant("kd_only").use_hard_mask);
    CHECK_FALSE(flags_for_variant("kd_only").use_clustering);
    CHECK(flags_for_variant("one_mask").adversarial_soft_mask);
    CHECK_FALSE(flags_for_variant("one_mask").use_hard_mask);
    CHECK(variant_known("prune_then_adapt"));
    CHECK_THROWS_AS(flags_for_variant("prune_then_adapt"), ConfigError);
}

TEST_CASE("metrics files round-trip exactly") {
    const std::string dir = temp_dir("admp_metrics_test");
    const std::string path = dir + "/m.csv";

    emit_metrics({}, path);
    {
        std::ifstream in(path);
        std::string line;
        REQUIRE(std::getline(in, line));
        CHECK(line ==
              "phase,iteration,source_acc,target_acc,discrepancy,clustering,sparsity,"
              "param_reduction,wall_seconds");
        CHECK_FALSE(std::getline(in, line));
    }

    std::vector<MetricsRecord> records;
    MetricsRecord r;
    r.phase = "admp";
    r.iteration = 50;
    r.source_acc = 0.96875;
    r.target_acc = 1.0 / 3.0;
    r.discrepancy = 0.1234567890123456789;
    r.clustering = 1e-17;
    r.sparsity = 0.5;
    r.param_reduction = 32.0 / 67.0;
    r.wall_seconds = 1.25;
    records.push_back(r);
    r.phase = "finetune";
    r.iteration = 100;
    records.push_back(r);
    emit_metrics(records, path);
    const auto parsed = parse_metrics_csv(path);
    REQUIRE(parsed.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(parsed[i].phase == records[i].phase);
        CHECK(parsed[i].iteration == records[i].iteration);
        CHECK(parsed[i].source_acc == records[i].source_acc);
        CHECK(parsed[i].target_acc == records[i].target_acc);
        CHECK(parsed[i].discrepancy == records[i].discrepancy);
        CHECK(parsed[i].clustering == records[i].clustering);
        CHECK(parsed[i].sparsity == records[i].sparsity);
        CHECK(parsed[i].param_reduction == records[i].param_reduction);
        CHECK(parsed[i].wall_seconds == records[i].wall_seconds);
    }
    emit_metrics(records, dir + "/m.jsonl", MetricsFormat::Jsonl);
    CHECK(fs::exists(dir + "/m.jsonl"));
    fs::remove_all(dir);
}

TEST_CASE("magnitude plans keep the strongest filters") {
    NetworkSpec spec = make_mlp_spec(2, {4}, 2);
    Network net;
    net.spec = spec;
    net.params["dense0"] = {
        Tensor::from_data({2, 4}, {0.1, 2.0, 0.05, 1.0, -0.1, -2.0, 0.05, 1.0}, true),
        Tensor::from_data({4}, {0.0, 0.0, 0.0, 0.0}, true)};
    net.params["dense2"] = {Tensor::from_data({4, 2}, std::vector<double>(8, 0.3), true),
                            Tensor::from_data({2}, {0.0, 0.0}, true)};
    const PrunePlan plan = magnitude_prune_plan(net, 0.5);
    CHECK(plan.keep.at(0) == std::vector<int>{1, 3});
}

TEST_CASE("a tiny experiment runs end to end and is reconstructible from disk") {
    const std::string dir = temp_dir("admp_exp_test");
    const ExperimentConfig ec = tiny_experiment(dir);
    const RunResult rr = run_experiment(ec);

    REQUIRE(rr.per_seed.size() == 1);
    REQUIRE(rr.aggregates.size() == 1);
    CHECK(rr.aggregates[0].count == 1);
    CHECK(rr.aggregates[0].mean_target_acc == rr.per_seed[0].final_record.target_acc);

    // final record equals the last fine-tune row of the per-run CSV
    const auto rows = parse_metrics_csv(rr.per_seed[0].metrics_path);
    REQUIRE(!rows.empty());
    CHECK(rows.back().phase == "finetune");
    CHECK(rows.back().target_acc == rr.per_seed[0].final_record.target_acc);
    CHECK(rows.back().param_reduction == rr.per_seed[0].final_record.param_reduction);

    // the stored result re-parses to the identical aggregates
    const RunResult parsed = parse_run_result(dir + "/result_" + rr.config_hash + ".json");
    CHECK(parsed.config_hash == rr.config_hash);
    REQUIRE(parsed.per_seed.size() == rr.per_seed.size());
    CHECK(parsed.per_seed[0].final_record.target_acc == rr.per_seed[0].final_record.target_acc);
    const auto recomputed = aggregate_outcomes(parsed.per_seed, {});
    CHECK(recomputed[0].mean_target_acc == parsed.aggregates[0].mean_target_acc);
    CHECK(recomputed[0].stddev_target_acc == parsed.aggregates[0].stddev_target_acc);
    fs::remove_all(dir);
}

TEST_CASE("experiment runs are byte-identical for identical configs and seeds") {
    const std::string dir_a = temp_dir("admp_det_a");
    const std::string dir_b = temp_dir("admp_det_b");
    ExperimentConfig a = tiny_experiment(dir_a);
    ExperimentConfig b = tiny_experiment(dir_b);
    const RunResult ra = run_experiment(a);
    const RunResult rb = run_experiment(b);

    auto slurp = [](const std::string& p) {
        std::ifstream in(p);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    REQUIRE(ra.per_seed.size() == rb.per_seed.size());
    CHECK(slurp(ra.per_seed[0].metrics_path) == slurp(rb.per_seed[0].metrics_path));
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("the ablation grid covers variants x sparsities and shares teachers") {
    const std::string dir = temp_dir("admp_grid_test");
    ExperimentConfig ec = tiny_experiment(dir);
    ec.sparsities = {0.3, 0.5};
    const GridResult grid = run_ablation_grid(ec, {"full_admp", "kd_only"});

    CHECK(grid.cells.size() == 4);  // 2 variants x 2 sparsities
    REQUIRE(grid.runs.size() == 2);

    // identical pretrained teachers under the same seed
    CHECK(grid.runs[0].per_seed[0].teacher_checksum == grid.runs[1].per_seed[0].teacher_checksum);

    REQUIRE(fs::exists(grid.grid_csv_path));
    REQUIRE(fs::exists(grid.plot_data_path));
    std::ifstream in(grid.grid_csv_path);
    std::string line;
    int rows = 0;
    std::getline(in, line);
    CHECK(line == "variant,sparsity,mean_target_acc,stddev_target_acc,seeds");
    while (std::getline(in, line))
        if (!trim(line).empty()) ++rows;
    CHECK(rows == 4);
    fs::remove_all(dir);
}

TEST_CASE("a single-cell grid equals the plain experiment") {
    const std::string dir_a = temp_dir("admp_cell_a");
    const std::string dir_b = temp_dir("admp_cell_b");
    ExperimentConfig ea = tiny_experiment(dir_a);
    ExperimentConfig eb = tiny_experiment(dir_b);
    const RunResult direct = run_experiment(ea);
    const GridResult grid = run_ablation_grid(eb, {"full_admp"});
    REQUIRE(grid.runs.size() == 1);
    CHECK(grid.runs[0].aggregates[0].mean_target_acc == direct.aggregates[0].mean_target_acc);
    CHECK(grid.runs[0].per_seed[0].final_record.source_acc ==
          direct.per_seed[0].final_record.source_acc);
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
}

TEST_CASE("prune-then-adapt runs the naive baseline pipeline") {
    const std::string dir = temp_dir("admp_pta_test");
    ExperimentConfig ec = tiny_experiment(dir);
    ec.variant = "prune_then_adapt";
    const RunResult rr = run_experiment(ec);
    REQUIRE(rr.per_seed.size() == 1);
    CHECK(rr.per_seed[0].final_record.param_reduction > 0.0);
    CHECK(fs::exists(dir + "/metrics_" + ec.hash() + "_s1_source_only.csv"));
    fs::remove_all(dir);
}

TEST_CASE("at sparsity zero the pipeline tracks the teacher") {
    const std::string dir = temp_dir("admp_zero_test");
    ExperimentConfig ec = tiny_experiment(dir);
    ec.sparsities = {0.0};
    ec.train.pretrain_iters = 300;
    ec.train.admp_iters = 60;
    ec.train.finetune_iters = 60;
    ec.dataset.n = 120;
    TeacherCache cache;
    const RunResult rr = run_experiment(ec, &cache);
    const double teacher_acc = cache.uda_target_acc.at(1);
    CHECK(rr.per_seed[0].final_record.param_reduction == 0.0);
    CHECK(std::abs(rr.per_seed[0].final_record.target_acc - teacher_acc) < 0.15);
    fs::remove_all(dir);
}

TEST_CASE("unwritable output directories fail before any compute") {
    ExperimentConfig ec = tiny_experiment("/proc/definitely/not/writable");
    CHECK_THROWS_AS(run_experiment(ec), IoError);
}
