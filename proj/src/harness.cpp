#include "admp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "admp/checkpoint.hpp"
#include "admp/errors.hpp"
#include "admp/rng.hpp"
#include "admp/textio.hpp"

namespace admp {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string> kAblationVariants = {"full_admp", "no_clustering", "one_mask",
                                                    "kd_only"};

bool variant_known(const std::string& name) {
    return name == "full_admp" || name == "no_clustering" || name == "one_mask" ||
           name == "kd_only" || name == "prune_then_adapt";
}

AdmpVariantFlags flags_for_variant(const std::string& name) {
    if (name == "full_admp") return {true, true, false};
    if (name == "no_clustering") return {true, false, false};
    if (name == "one_mask") return {false, true, true};
    if (name == "kd_only") return {false, false, false};
    throw ConfigError("variant '" + name + "' has no mask-flag mapping");
}

// ---------------------------------------------------------------------------
// config file

ConfigFile ConfigFile::parse_text(const std::string& text) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        if (cfg.values.count(key))
            throw ConfigError("config key '" + key + "' appears twice");
        cfg.values[key] = value;
    }
    return cfg;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str());
}

namespace {

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("not a boolean: '" + s + "'");
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    for (const std::string& part : split(s, ','))
        out.push_back(static_cast<int>(parse_long(trim(part))));
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    for (const std::string& part : split(s, ',')) out.push_back(parse_double(trim(part)));
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> out;
    for (const std::string& part : split(s, ','))
        out.push_back(static_cast<std::uint64_t>(parse_long(trim(part))));
    return out;
}

template <typename T>
std::string join_list(const std::vector<T>& v, const std::function<std::string(T)>& fmt) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += fmt(v[i]);
    }
    return s;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_config(const ConfigFile& cfg) {
    ExperimentConfig ec;
    using Setter = std::function<void(ExperimentConfig&, const std::string&)>;
    static const std::map<std::string, Setter> registry = {
        {"dataset.kind", [](auto& c, const auto& v) { c.dataset.kind = dataset_kind_from_string(v); }},
        {"dataset.n", [](auto& c, const auto& v) { c.dataset.n = static_cast<int>(parse_long(v)); }},
        {"dataset.noise", [](auto& c, const auto& v) { c.dataset.noise = parse_double(v); }},
        {"dataset.shift", [](auto& c, const auto& v) { c.dataset.shift = parse_double(v); }},
        {"dataset.classes", [](auto& c, const auto& v) { c.dataset.classes = static_cast<int>(parse_long(v)); }},
        {"dataset.seed", [](auto& c, const auto& v) { c.dataset.seed = static_cast<std::uint64_t>(parse_long(v)); }},
        {"dataset.paired", [](auto& c, const auto& v) { c.dataset.paired = parse_bool(v); }},
        {"net.hidden", [](auto& c, const auto& v) { c.hidden = parse_int_list(v); }},
        {"net.conv_channels", [](auto& c, const auto& v) { c.conv_channels = parse_int_list(v); }},
        {"net.kernel", [](auto& c, const auto& v) { c.conv_kernel = static_cast<int>(parse_long(v)); }},
        {"train.pretrain_iters", [](auto& c, const auto& v) { c.train.pretrain_iters = parse_long(v); }},
        {"train.admp_iters", [](auto& c, const auto& v) { c.train.admp_iters = parse_long(v); }},
        {"train.warmup_iters", [](auto& c, const auto& v) { c.train.warmup_iters = parse_long(v); }},
        {"train.finetune_iters", [](auto& c, const auto& v) { c.train.finetune_iters = parse_long(v); }},
        {"train.lr", [](auto& c, const auto& v) { c.train.lr = parse_double(v); }},
        {"train.mask_lr", [](auto& c, const auto& v) { c.train.mask_lr = parse_double(v); }},
        {"train.decay1", [](auto& c, const auto& v) { c.train.decay1 = parse_double(v); }},
        {"train.decay2", [](auto& c, const auto& v) { c.train.decay2 = parse_double(v); }},
        {"train.lambda_disc", [](auto& c, const auto& v) { c.train.lambda_disc = parse_double(v); }},
        {"train.lambda_clu", [](auto& c, const auto& v) { c.train.lambda_clu = parse_double(v); }},
        {"train.margin", [](auto& c, const auto& v) { c.train.margin = parse_double(v); }},
        {"train.mmd_weight", [](auto& c, const auto& v) { c.train.mmd_weight = parse_double(v); }},
        {"train.rho_init", [](auto& c, const auto& v) { c.train.rho_init = parse_double(v); }},
        {"train.rho_growth", [](auto& c, const auto& v) { c.train.rho_growth = parse_double(v); }},
        {"train.rho_max", [](auto& c, const auto& v) { c.train.rho_max = parse_double(v); }},
        {"train.rho_every", [](auto& c, const auto& v) { c.train.rho_every = static_cast<int>(parse_long(v)); }},
        {"train.batch_size", [](auto& c, const auto& v) { c.train.batch_size = static_cast<int>(parse_long(v)); }},
        {"train.eval_interval", [](auto& c, const auto& v) { c.train.eval_interval = parse_long(v); }},
        {"train.patience", [](auto& c, const auto& v) { c.train.patience = static_cast<int>(parse_long(v)); }},
        {"experiment.variant", [](auto& c, const auto& v) { c.variant = v; }},
        {"experiment.sparsities", [](auto& c, const auto& v) { c.sparsities = parse_double_list(v); }},
        {"experiment.seeds", [](auto& c, const auto& v) { c.seeds = parse_seed_list(v); }},
        {"output.deterministic", [](auto& c, const auto& v) { c.deterministic_output = parse_bool(v); }},
    };
    for (const auto& [key, value] : cfg.values) {
        auto it = registry.find(key);
        if (it == registry.end()) throw ConfigError("unknown config key '" + key + "'");
        it->second(ec, value);
    }
    ec.validate();
    return ec;
}

void ExperimentConfig::validate() const {
    dataset.validate();
    train.validate();
    if (!variant_known(variant)) throw ConfigError("unknown variant '" + variant + "'");
    if (sparsities.empty()) throw ConfigError("sparsity list must not be empty");
    for (double s : sparsities)
        if (s < 0.0 || s > 0.9) throw ConfigError("sparsity values must lie in [0, 0.9]");
    if (seeds.empty()) throw ConfigError("seed list must not be empty");
    if (hidden.empty() || conv_channels.empty())
        throw ConfigError("network layout lists must not be empty");
    for (int h : hidden)
        if (h < 2) throw ConfigError("hidden sizes must be at least 2");
    for (int c : conv_channels)
        if (c < 2) throw ConfigError("conv channel counts must be at least 2");
    network_spec();  // structural check
}

NetworkSpec ExperimentConfig::network_spec() const {
    switch (dataset.kind) {
        case DatasetKind::Moons: return make_mlp_spec(2, hidden, 2);
        case DatasetKind::Blobs: return make_mlp_spec(5, hidden, dataset.classes);
        case DatasetKind::Strokes:
            return make_conv_spec(1, 12, 12, conv_channels, conv_kernel, 4);
    }
    throw ConfigError("unknown dataset kind");
}

std::string ExperimentConfig::canonical() const {
    std::map<std::string, std::string> kv;
    kv["dataset.kind"] = to_string(dataset.kind);
    kv["dataset.n"] = std::to_string(dataset.n);
    kv["dataset.noise"] = format_double(dataset.effective_noise());
    kv["dataset.shift"] = format_double(dataset.shift);
    kv["dataset.classes"] = std::to_string(dataset.classes);
    kv["dataset.seed"] = std::to_string(dataset.seed);
    kv["dataset.paired"] = dataset.paired ? "true" : "false";
    kv["net.hidden"] = join_list<int>(hidden, [](int v) { return std::to_string(v); });
    kv["net.conv_channels"] =
        join_list<int>(conv_channels, [](int v) { return std::to_string(v); });
    kv["net.kernel"] = std::to_string(conv_kernel);
    kv["train.pretrain_iters"] = std::to_string(train.pretrain_iters);
    kv["train.admp_iters"] = std::to_string(train.admp_iters);
    kv["train.warmup_iters"] = std::to_string(train.warmup_iters);
    kv["train.finetune_iters"] = std::to_string(train.finetune_iters);
    kv["train.lr"] = format_double(train.lr);
    kv["train.mask_lr"] = format_double(train.mask_lr);
    kv["train.decay1"] = format_double(train.decay1);
    kv["train.decay2"] = format_double(train.decay2);
    kv["train.lambda_disc"] = format_double(train.lambda_disc);
    kv["train.lambda_clu"] = format_double(train.lambda_clu);
    kv["train.margin"] = format_double(train.margin);
    kv["train.mmd_weight"] = format_double(train.mmd_weight);
    kv["train.rho_init"] = format_double(train.rho_init);
    kv["train.rho_growth"] = format_double(train.rho_growth);
    kv["train.rho_max"] = format_double(train.rho_max);
    kv["train.rho_every"] = std::to_string(train.rho_every);
    kv["train.batch_size"] = std::to_string(train.batch_size);
    kv["train.eval_interval"] = std::to_string(train.eval_interval);
    kv["train.patience"] = std::to_string(train.patience);
    kv["experiment.variant"] = variant;
    kv["experiment.sparsities"] =
        join_list<double>(sparsities, [](double v) { return format_double(v); });
    kv["experiment.seeds"] =
        join_list<std::uint64_t>(seeds, [](std::uint64_t v) { return std::to_string(v); });
    kv["output.deterministic"] = deterministic_output ? "true" : "false";
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
}

namespace {

std::string fnv_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace

std::string ExperimentConfig::hash() const { return fnv_hex(canonical()); }

std::string ExperimentConfig::run_hash(const std::string& run_variant, double sparsity,
                                       std::uint64_t seed) const {
    return fnv_hex(canonical() + "run.variant=" + run_variant +
                   "\nrun.sparsity=" + format_double(sparsity) +
                   "\nrun.seed=" + std::to_string(seed) + "\n");
}

// ---------------------------------------------------------------------------
// metrics persistence

std::string metrics_csv_header() {
    return "phase,iteration,source_acc,target_acc,discrepancy,clustering,sparsity,"
           "param_reduction,wall_seconds";
}

std::string metrics_row_csv(const MetricsRecord& r) {
    std::string s;
    s += r.phase;
    s += "," + std::to_string(r.iteration);
    s += "," + format_double(r.source_acc);
    s += "," + format_double(r.target_acc);
    s += "," + format_double(r.discrepancy);
    s += "," + format_double(r.clustering);
    s += "," + format_double(r.sparsity);
    s += "," + format_double(r.param_reduction);
    s += "," + format_double(r.wall_seconds);
    return s;
}

void emit_metrics(const std::vector<MetricsRecord>& records, const std::string& path,
                  MetricsFormat format) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write metrics file: " + path);
    if (format == MetricsFormat::Csv) {
        out << metrics_csv_header() << "\n";
        for (const MetricsRecord& r : records) {
            out << metrics_row_csv(r) << "\n";
            out.flush();
        }
    } else {
        for (const MetricsRecord& r : records) {
            json j = {{"phase", r.phase},
                      {"iteration", r.iteration},
                      {"source_acc", r.source_acc},
                      {"target_acc", r.target_acc},
                      {"discrepancy", r.discrepancy},
                      {"clustering", r.clustering},
                      {"sparsity", r.sparsity},
                      {"param_reduction", r.param_reduction},
                      {"wall_seconds", r.wall_seconds}};
            out << j.dump() << "\n";
            out.flush();
        }
    }
    if (!out) throw IoError("failed writing metrics file: " + path);
}

std::vector<MetricsRecord> parse_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != metrics_csv_header())
        throw IoError("metrics file " + path + " has an unexpected header");
    std::vector<MetricsRecord> out;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto cols = split(line, ',');
        if (cols.size() != 9) throw IoError("malformed metrics row in " + path);
        MetricsRecord r;
        r.phase = cols[0];
        r.iteration = parse_long(cols[1]);
        r.source_acc = parse_double(cols[2]);
        r.target_acc = parse_double(cols[3]);
        r.discrepancy = parse_double(cols[4]);
        r.clustering = parse_double(cols[5]);
        r.sparsity = parse_double(cols[6]);
        r.param_reduction = parse_double(cols[7]);
        r.wall_seconds = parse_double(cols[8]);
        out.push_back(std::move(r));
    }
    return out;
}

MetricsWriter::MetricsWriter(const std::string& path, bool zero_wall_seconds)
    : path_(path), zero_wall_(zero_wall_seconds) {
    std::ofstream out(path_);
    if (!out) throw IoError("cannot write metrics file: " + path_);
    out << metrics_csv_header() << "\n";
}

void MetricsWriter::append(const MetricsRecord& rec) {
    MetricsRecord r = rec;
    if (zero_wall_) r.wall_seconds = 0.0;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw IoError("cannot append to metrics file: " + path_);
    out << metrics_row_csv(r) << "\n";
    out.flush();
}

// ---------------------------------------------------------------------------
// experiment execution

DatasetSpec dataset_for_seed(const ExperimentConfig& config, std::uint64_t seed) {
    DatasetSpec ds = config.dataset;
    ds.seed = Rng::mix(config.dataset.seed, "run:" + std::to_string(seed));
    return ds;
}

PrunePlan magnitude_prune_plan(const Network& net, double ratio) {
    PrunePlan plan;
    for (int idx : net.spec.prunable_layers()) {
        const LayerParams& lp = net.params_for(idx);
        const LayerSpec& l = net.spec.layers[static_cast<std::size_t>(idx)];
        const std::size_t oc = static_cast<std::size_t>(l.out_channels);
        std::vector<double> score(oc, 0.0);
        const auto& w = lp.weights.data();
        if (l.kind == LayerKind::Dense) {
            const std::size_t rows = w.size() / oc;
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < oc; ++c) score[c] += std::abs(w[r * oc + c]);
        } else {
            const std::size_t per = w.size() / oc;
            for (std::size_t c = 0; c < oc; ++c)
                for (std::size_t i = 0; i < per; ++i) score[c] += std::abs(w[c * per + i]);
        }
        const int t = keep_count(static_cast<int>(oc), ratio);
        std::vector<int> order(oc);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&score](int a, int b) {
            if (score[a] != score[b]) return score[a] > score[b];
            return a < b;
        });
        std::vector<int> keep(order.begin(), order.begin() + t);
        std::sort(keep.begin(), keep.end());
        plan.keep[idx] = std::move(keep);
    }
    return plan;
}

namespace {

void ensure_writable_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    const std::string probe = dir + "/.write_probe";
    std::ofstream out(probe);
    if (!out) throw IoError("output directory is not writable: " + dir);
    out.close();
    fs::remove(probe, ec);
}

Network& cached_teacher(const ExperimentConfig& config, std::uint64_t seed, TeacherCache& cache,
                        const DomainPair& data) {
    auto it = cache.uda.find(seed);
    if (it != cache.uda.end()) return it->second;
    TrainConfig tc = config.train;
    tc.seed = seed;
    MetricsWriter writer(config.out_dir + "/metrics_" + config.hash() + "_s" +
                             std::to_string(seed) + "_pretrain.csv",
                         config.deterministic_output);
    Network net = init_network(config.network_spec(), Rng::mix(seed, "init"));
    Network teacher = pretrain_uda(std::move(net), tc, data,
                                   [&writer](const MetricsRecord& r) { writer.append(r); });
    cache.uda_target_acc[seed] = evaluate(teacher, data).target_acc;
    return cache.uda.emplace(seed, std::move(teacher)).first->second;
}

Network& cached_source_only(const ExperimentConfig& config, std::uint64_t seed,
                            TeacherCache& cache, const DomainPair& data) {
    auto it = cache.source_only.find(seed);
    if (it != cache.source_only.end()) return it->second;
    TrainConfig tc = config.train;
    tc.seed = seed;
    tc.mmd_weight = 0.0;
    MetricsWriter writer(config.out_dir + "/metrics_" + config.hash() + "_s" +
                             std::to_string(seed) + "_source_only.csv",
                         config.deterministic_output);
    Network net = init_network(config.network_spec(), Rng::mix(seed, "init-source"));
    Network model = pretrain_uda(std::move(net), tc, data,
                                 [&writer](const MetricsRecord& r) { writer.append(r); });
    return cache.source_only.emplace(seed, std::move(model)).first->second;
}

// MMD-based adaptation of an already pruned model; the prune-then-adapt tail.
MetricsRecord mmd_adapt(Network& net, const Network& teacher, const TrainConfig& config,
                        const DomainPair& data, double sparsity, double reduction,
                        const MetricsSink& sink) {
    net.set_requires_grad(true);
    BatchIterator batches(data.train_view(), config.batch_size, Rng::mix(config.seed, "adapt"));
    Batch batch;
    MetricsRecord last;
    const auto emit = [&](long iter) {
        const EvalResult ev = evaluate(net, data, &teacher, nullptr);
        MetricsRecord rec;
        rec.phase = "finetune";
        rec.iteration = iter;
        rec.source_acc = ev.source_acc;
        rec.target_acc = ev.target_acc;
        rec.discrepancy = ev.discrepancy;
        rec.sparsity = sparsity;
        rec.param_reduction = reduction;
        last = rec;
        if (sink) sink(rec);
    };
    for (long iter = 1; iter <= config.finetune_iters; ++iter) {
        if (!batches.next(batch)) break;
        const ForwardResult fs = forward_full(net, batch.source_x);
        Tensor loss = cross_entropy(fs.probs, batch.source_y);
        if (config.mmd_weight > 0.0) {
            const ForwardResult ft = forward_full(net, batch.target_x);
            const auto bw = median_bandwidths(fs.penultimate, ft.penultimate);
            loss = add(loss, affine(mmd_rbf(fs.penultimate, ft.penultimate, bw),
                                    config.mmd_weight, 0.0));
        }
        if (!std::isfinite(loss.item()))
            throw TrainingError("adaptation diverged at iteration " + std::to_string(iter));
        backward(loss);
        sgd_step(net, lr_at(iter, config.finetune_iters, config.lr, config.decay1, config.decay2));
        zero_grads(net);
        if (iter % config.eval_interval == 0 || iter == config.finetune_iters) emit(iter);
    }
    if (config.finetune_iters == 0) emit(0);
    return last;
}

SeedOutcome run_single(const ExperimentConfig& config, double sparsity, std::uint64_t seed,
                       TeacherCache& cache) {
    const DomainPair data = generate(dataset_for_seed(config, seed));
    TrainConfig tc = config.train;
    tc.seed = seed;
    tc.ratio = sparsity;

    const Network& teacher = cached_teacher(config, seed, cache, data);

    SeedOutcome outcome;
    outcome.seed = seed;
    outcome.sparsity = sparsity;
    outcome.teacher_checksum = param_checksum(teacher);
    outcome.metrics_path = config.out_dir + "/metrics_" +
                           config.run_hash(config.variant, sparsity, seed) + "_s" +
                           std::to_string(seed) + ".csv";
    MetricsWriter writer(outcome.metrics_path, config.deterministic_output);
    MetricsRecord final_record;
    const MetricsSink sink = [&](const MetricsRecord& r) {
        writer.append(r);
        final_record = r;
    };

    if (config.variant == "prune_then_adapt") {
        Network& src = cached_source_only(config, seed, cache, data);
        const PrunePlan plan = magnitude_prune_plan(src, sparsity);
        Network pruned = finalize_prune(src, plan);
        const double reduction = param_reduction(src.spec, plan);
        std::size_t total = 0, dropped = 0;
        for (const auto& [idx, keep] : plan.keep) {
            const std::size_t oc = static_cast<std::size_t>(
                src.spec.layers[static_cast<std::size_t>(idx)].out_channels);
            total += oc;
            dropped += oc - keep.size();
        }
        const double frac = total ? static_cast<double>(dropped) / total : 0.0;
        final_record = mmd_adapt(pruned, teacher, tc, data, frac, reduction, sink);
    } else {
        const AdmpVariantFlags flags = flags_for_variant(config.variant);
        auto [student, masks] = admp_prune(teacher, tc, data, flags, sink);
        finetune(student, masks, tc, data, teacher, flags, sink);
    }
    outcome.final_record = final_record;
    return outcome;
}

}  // namespace

std::vector<SparsityAggregate> aggregate_outcomes(
    const std::vector<SeedOutcome>& outcomes,
    const std::map<std::uint64_t, double>& teacher_acc) {
    std::vector<double> order;
    for (const SeedOutcome& o : outcomes)
        if (std::find(order.begin(), order.end(), o.sparsity) == order.end())
            order.push_back(o.sparsity);
    std::vector<SparsityAggregate> out;
    for (double s : order) {
        SparsityAggregate agg;
        agg.sparsity = s;
        double sum = 0.0, sum_sq = 0.0;
        for (const SeedOutcome& o : outcomes) {
            if (o.sparsity != s) continue;
            ++agg.count;
            sum += o.final_record.target_acc;
            sum_sq += o.final_record.target_acc * o.final_record.target_acc;
            agg.mean_source_acc += o.final_record.source_acc;
            agg.mean_param_reduction += o.final_record.param_reduction;
            auto it = teacher_acc.find(o.seed);
            if (it != teacher_acc.end()) agg.mean_teacher_target_acc += it->second;
        }
        const double n = static_cast<double>(agg.count);
        agg.mean_target_acc = sum / n;
        agg.stddev_target_acc = std::sqrt(std::max(0.0, sum_sq / n - (sum / n) * (sum / n)));
        agg.mean_source_acc /= n;
        agg.mean_param_reduction /= n;
        agg.mean_teacher_target_acc /= n;
        out.push_back(agg);
    }
    return out;
}

RunResult run_experiment(const ExperimentConfig& config, TeacherCache* cache) {
    config.validate();
    ensure_writable_dir(config.out_dir);
    TeacherCache local;
    TeacherCache& use_cache = cache ? *cache : local;

    RunResult result;
    result.config_hash = config.hash();
    result.variant = config.variant;
    for (double sparsity : config.sparsities)
        for (std::uint64_t seed : config.seeds)
            result.per_seed.push_back(run_single(config, sparsity, seed, use_cache));
    result.aggregates = aggregate_outcomes(result.per_seed, use_cache.uda_target_acc);
    write_run_result(result, config.out_dir + "/result_" + result.config_hash + ".json");
    return result;
}

void write_run_result(const RunResult& result, const std::string& path) {
    json per_seed = json::array();
    for (const SeedOutcome& o : result.per_seed) {
        per_seed.push_back({{"seed", o.seed},
                            {"sparsity", o.sparsity},
                            {"teacher_checksum", o.teacher_checksum},
                            {"metrics_path", o.metrics_path},
                            {"final", {{"phase", o.final_record.phase},
                                       {"iteration", o.final_record.iteration},
                                       {"source_acc", o.final_record.source_acc},
                                       {"target_acc", o.final_record.target_acc},
                                       {"discrepancy", o.final_record.discrepancy},
                                       {"clustering", o.final_record.clustering},
                                       {"sparsity", o.final_record.sparsity},
                                       {"param_reduction", o.final_record.param_reduction},
                                       {"wall_seconds", o.final_record.wall_seconds}}}});
    }
    json aggregates = json::array();
    for (const SparsityAggregate& a : result.aggregates) {
        aggregates.push_back({{"sparsity", a.sparsity},
                              {"count", a.count},
                              {"mean_target_acc", a.mean_target_acc},
                              {"stddev_target_acc", a.stddev_target_acc},
                              {"mean_source_acc", a.mean_source_acc},
                              {"mean_param_reduction", a.mean_param_reduction},
                              {"mean_teacher_target_acc", a.mean_teacher_target_acc}});
    }
    json doc = {{"config_hash", result.config_hash},
                {"variant", result.variant},
                {"per_seed", per_seed},
                {"aggregates", aggregates}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write result file: " + path);
    out << doc.dump(1) << "\n";
}

RunResult parse_run_result(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open result file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw IoError("corrupt result file " + path + ": " + e.what());
    }
    RunResult result;
    result.config_hash = doc.at("config_hash").get<std::string>();
    result.variant = doc.at("variant").get<std::string>();
    for (const json& jo : doc.at("per_seed")) {
        SeedOutcome o;
        o.seed = jo.at("seed").get<std::uint64_t>();
        o.sparsity = jo.at("sparsity").get<double>();
        o.teacher_checksum = jo.at("teacher_checksum").get<std::uint64_t>();
        o.metrics_path = jo.at("metrics_path").get<std::string>();
        const json& f = jo.at("final");
        o.final_record.phase = f.at("phase").get<std::string>();
        o.final_record.iteration = f.at("iteration").get<long>();
        o.final_record.source_acc = f.at("source_acc").get<double>();
        o.final_record.target_acc = f.at("target_acc").get<double>();
        o.final_record.discrepancy = f.at("discrepancy").get<double>();
        o.final_record.clustering = f.at("clustering").get<double>();
        o.final_record.sparsity = f.at("sparsity").get<double>();
        o.final_record.param_reduction = f.at("param_reduction").get<double>();
        o.final_record.wall_seconds = f.at("wall_seconds").get<double>();
        result.per_seed.push_back(std::move(o));
    }
    for (const json& ja : doc.at("aggregates")) {
        SparsityAggregate a;
        a.sparsity = ja.at("sparsity").get<double>();
        a.count = ja.at("count").get<int>();
        a.mean_target_acc = ja.at("mean_target_acc").get<double>();
        a.stddev_target_acc = ja.at("stddev_target_acc").get<double>();
        a.mean_source_acc = ja.at("mean_source_acc").get<double>();
        a.mean_param_reduction = ja.at("mean_param_reduction").get<double>();
        a.mean_teacher_target_acc = ja.at("mean_teacher_target_acc").get<double>();
        result.aggregates.push_back(a);
    }
    return result;
}

GridResult run_ablation_grid(const ExperimentConfig& config,
                             const std::vector<std::string>& variants) {
    config.validate();
    if (variants.empty()) throw ConfigError("ablation grid needs at least one variant");
    ensure_writable_dir(config.out_dir);
    TeacherCache cache;
    GridResult grid;
    for (const std::string& variant : variants) {
        ExperimentConfig sub = config;
        sub.variant = variant;
        RunResult rr = run_experiment(sub, &cache);
        for (const SparsityAggregate& a : rr.aggregates)
            grid.cells.push_back({variant, a.sparsity, a.mean_target_acc, a.stddev_target_acc});
        grid.runs.push_back(std::move(rr));
    }

    grid.grid_csv_path = config.out_dir + "/ablation_" + config.hash() + ".csv";
    {
        std::ofstream out(grid.grid_csv_path);
        if (!out) throw IoError("cannot write " + grid.grid_csv_path);
        out << "variant,sparsity,mean_target_acc,stddev_target_acc,seeds\n";
        for (const GridCell& c : grid.cells)
            out << c.variant << "," << format_double(c.sparsity) << ","
                << format_double(c.mean_target_acc) << "," << format_double(c.stddev_target_acc)
                << "," << config.seeds.size() << "\n";
    }

    // plot data: one row per sparsity, one column per variant
    grid.plot_data_path = config.out_dir + "/ablation_plot_" + config.hash() + ".csv";
    {
        std::ofstream out(grid.plot_data_path);
        if (!out) throw IoError("cannot write " + grid.plot_data_path);
        out << "sparsity";
        for (const std::string& v : variants) out << "," << v;
        out << "\n";
        for (double s : config.sparsities) {
            out << format_double(s);
            for (const std::string& v : variants) {
                double acc = 0.0;
                for (const GridCell& c : grid.cells)
                    if (c.variant == v && c.sparsity == s) acc = c.mean_target_acc;
                out << "," << format_double(acc);
            }
            out << "\n";
        }
    }
    return grid;
}

}  // namespace admp
