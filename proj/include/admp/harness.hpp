#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "admp/domdata.hpp"
#include "admp/trainer.hpp"

namespace admp {

// Flat key-value configuration with dotted sections. Unknown keys are errors.
struct ConfigFile {
    std::map<std::string, std::string> values;

    static ConfigFile parse_text(const std::string& text);
    static ConfigFile parse_file(const std::string& path);
};

struct ExperimentConfig {
    DatasetSpec dataset;
    std::vector<int> hidden = {16, 16};       // mlp sizes (moons/blobs)
    std::vector<int> conv_channels = {6, 8};  // conv sizes (strokes)
    int conv_kernel = 3;
    TrainConfig train;
    std::string variant = "full_admp";
    std::vector<double> sparsities = {0.5};
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::string out_dir = ".";
    bool deterministic_output = false;  // zero wall_seconds in emitted files

    static ExperimentConfig from_config(const ConfigFile& cfg);
    void validate() const;
    NetworkSpec network_spec() const;
    std::string canonical() const;  // sorted key=value lines, round-trip exact
    std::string hash() const;       // 16 hex digits, stable across platforms
    std::string run_hash(const std::string& variant, double sparsity, std::uint64_t seed) const;
};

extern const std::vector<std::string> kAblationVariants;  // fig-4 style grid
bool variant_known(const std::string& name);
AdmpVariantFlags flags_for_variant(const std::string& name);

// ---------------------------------------------------------------------------
// metrics persistence

enum class MetricsFormat { Csv, Jsonl };

std::string metrics_csv_header();
std::string metrics_row_csv(const MetricsRecord& rec);
void emit_metrics(const std::vector<MetricsRecord>& records, const std::string& path,
                  MetricsFormat format = MetricsFormat::Csv);
std::vector<MetricsRecord> parse_metrics_csv(const std::string& path);

// Streaming writer: header on open, one flushed line per record.
class MetricsWriter {
public:
    MetricsWriter(const std::string& path, bool zero_wall_seconds);
    void append(const MetricsRecord& rec);
    const std::string& path() const { return path_; }

private:
    std::string path_;
    bool zero_wall_;
};

// ---------------------------------------------------------------------------
// experiment execution

struct SeedOutcome {
    std::uint64_t seed = 0;
    double sparsity = 0.0;
    MetricsRecord final_record;
    std::uint64_t teacher_checksum = 0;
    std::string metrics_path;
};

struct SparsityAggregate {
    double sparsity = 0.0;
    int count = 0;
    double mean_target_acc = 0.0;
    double stddev_target_acc = 0.0;
    double mean_source_acc = 0.0;
    double mean_param_reduction = 0.0;
    double mean_teacher_target_acc = 0.0;
};

struct RunResult {
    std::string config_hash;
    std::string variant;
    std::vector<SeedOutcome> per_seed;
    std::vector<SparsityAggregate> aggregates;
};

std::vector<SparsityAggregate> aggregate_outcomes(const std::vector<SeedOutcome>& outcomes,
                                                  const std::map<std::uint64_t, double>& teacher_acc);

// Pretrained models shared between variants and sparsities of one grid.
struct TeacherCache {
    std::map<std::uint64_t, Network> uda;          // per seed
    std::map<std::uint64_t, Network> source_only;  // per seed (prune-then-adapt)
    std::map<std::uint64_t, double> uda_target_acc;
};

RunResult run_experiment(const ExperimentConfig& config, TeacherCache* cache = nullptr);
void write_run_result(const RunResult& result, const std::string& path);
RunResult parse_run_result(const std::string& path);

struct GridCell {
    std::string variant;
    double sparsity = 0.0;
    double mean_target_acc = 0.0;
    double stddev_target_acc = 0.0;
};

struct GridResult {
    std::vector<GridCell> cells;
    std::vector<RunResult> runs;
    std::string grid_csv_path;
    std::string plot_data_path;
};

GridResult run_ablation_grid(const ExperimentConfig& config,
                             const std::vector<std::string>& variants = kAblationVariants);

// Per-layer L1 filter-magnitude plan, the naive prune-then-adapt baseline.
PrunePlan magnitude_prune_plan(const Network& net, double ratio);

// Dataset for one run seed; mixes the run seed into the dataset stream.
DatasetSpec dataset_for_seed(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace admp
