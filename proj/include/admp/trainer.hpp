#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>

#include "admp/domdata.hpp"
#include "admp/lpbox.hpp"
#include "admp/masking.hpp"
#include "admp/network.hpp"
#include "admp/objectives.hpp"

namespace admp {

struct TrainConfig {
    long pretrain_iters = 2000;
    long admp_iters = 1500;
    long warmup_iters = 300;  // hard-mask generation starts after warm-up
    long finetune_iters = 1000;
    double lr = 0.05;
    double mask_lr = 0.05;
    double decay1 = 0.6, decay2 = 0.85;  // phase fractions where lr drops by 10x
    double ratio = 0.5;                  // uniform per-layer pruning ratio
    double lambda_disc = 1.0;
    double lambda_clu = 0.1;
    double margin = 1.0;
    double mmd_weight = 1.0;
    double rho_init = 1.0;
    double rho_growth = 1.05;
    double rho_max = 10.0;
    int rho_every = 100;
    int batch_size = 32;
    std::uint64_t seed = 1;
    long eval_interval = 50;
    int patience = 5;

    void validate() const;
};

// Which pieces of the double-mask machinery a run uses; the harness maps
// experiment variants onto these.
struct AdmpVariantFlags {
    bool use_hard_mask = true;
    bool use_clustering = true;
    // one-mask setting: the soft mask descends on (source CE - disc) while
    // the weights keep descending on the full update objective
    bool adversarial_soft_mask = false;
};

struct MetricsRecord {
    std::string phase;
    long iteration = 0;
    double source_acc = 0.0;
    double target_acc = 0.0;
    double discrepancy = 0.0;
    double clustering = 0.0;
    double sparsity = 0.0;
    double param_reduction = 0.0;
    double wall_seconds = 0.0;
};

using MetricsSink = std::function<void(const MetricsRecord&)>;

struct PhaseState {
    Network net;
    Network teacher;  // frozen
    MaskPair masks;
    std::map<int, AdmmState> admm;
    long iteration = 0;
    std::string phase;
    int mask_updates = 0;
};

struct EvalResult {
    double source_acc = 0.0;
    double target_acc = 0.0;
    double discrepancy = 0.0;
};

double lr_at(long iteration, long total, double base, double decay1, double decay2);

// Phase 1: source cross-entropy plus MMD on penultimate features. Returns the
// trained network with gradients frozen.
Network pretrain_uda(Network net, const TrainConfig& config, const DomainPair& data,
                     const MetricsSink& sink = {});

// Phase 2 building blocks. channel_search_step regenerates the hard mask and
// leaves weights and soft masks untouched; adversarial_update_step leaves the
// hard mask untouched.
void channel_search_step(PhaseState& state, const Batch& batch, double ratio);
void adversarial_update_step(PhaseState& state, const Batch& batch, const TrainConfig& config,
                             const AdmpVariantFlags& flags, double lr, double mask_lr);

// Phase 2: alternates the two steps once each per iteration on a student
// initialized from the teacher.
std::pair<Network, MaskPair> admp_prune(const Network& teacher, const TrainConfig& config,
                                        const DomainPair& data,
                                        const AdmpVariantFlags& flags = {},
                                        const MetricsSink& sink = {});

struct FinetuneResult {
    Network net;
    PrunePlan plan;
};

// Phase 3: drops the hard mask, prunes physically along the binarized soft
// mask and trains the smaller network. Early-stops on a plateau of source
// accuracy minus teacher discrepancy.
FinetuneResult finetune(const Network& student, const MaskPair& masks, const TrainConfig& config,
                        const DomainPair& data, const Network& teacher,
                        const AdmpVariantFlags& flags = {}, const MetricsSink& sink = {});

EvalResult evaluate(const Network& net, const DomainPair& pair, const Network* teacher = nullptr,
                    const MaskPair* masks = nullptr);

// Mean distance of the soft masks from exact binary values.
double mask_binariness_gap(const MaskPair& masks);

}  // namespace admp
