#pragma once

#include <map>
#include <utility>
#include <vector>

#include "admp/network.hpp"
#include "admp/tensor.hpp"

namespace admp {

// Per-prunable-layer mask pair. The soft mask is a continuous per-output-
// channel scale on weights and bias; training holds it as a gradient-enabled
// leaf tensor. The hard mask is strictly binary and multiplies the layer's
// post-activation feature map; it is regenerated, never trained.
struct MaskPair {
    std::map<int, Tensor> soft;
    std::map<int, std::vector<double>> hard;

    MaskPair clone() const;
};

MaskPair identity_masks(const NetworkSpec& spec, bool soft_requires_grad);

// Scales output-channel slice c of weights and bias by soft[c]. Dense weights
// are [in, out] (channel axis 1); conv weights are [out, in, k, k] (axis 0).
std::pair<Tensor, Tensor> apply_soft_mask(const Tensor& weights, const Tensor& bias,
                                          const Tensor& soft);

// First-order channel importance for the channel-search objective: the
// estimated change of the objective when a channel's post-activation map is
// zeroed. Channels whose removal would drive the objective down the most
// (towards high teacher-student discrepancy) score lowest and are pruned
// first. Requires the hard mask to be all-ones.
std::map<int, std::vector<double>> taylor_importance(const Network& net, const MaskPair& masks,
                                                     const Tensor& batch_s,
                                                     const std::vector<int>& labels_s,
                                                     const Tensor& batch_t,
                                                     const Network& teacher);

// Zeroes exactly floor(ratio * out_channels) channels with the smallest
// importance per layer; ties break towards the lowest index.
std::map<int, std::vector<double>> generate_hard_mask(
    const std::map<int, std::vector<double>>& importance, double ratio);

struct PrunePlan {
    std::map<int, std::vector<int>> keep;  // layer index -> sorted kept channels
};

// Keeps the out_channels - floor(ratio * out_channels) highest-valued soft
// mask entries per layer; ties break towards the lowest index.
PrunePlan binarize_soft_mask(const MaskPair& masks, double ratio);

NetworkSpec apply_plan_to_spec(const NetworkSpec& spec, const PrunePlan& plan);

// Physically removes pruned output channels and the matching input slices of
// each consumer layer (channel-block aware across flatten).
Network finalize_prune(const Network& net, const PrunePlan& plan);

double param_reduction(const NetworkSpec& spec, const PrunePlan& plan);

// Channels kept per layer at a uniform pruning ratio.
int keep_count(int out_channels, double ratio);

}  // namespace admp
