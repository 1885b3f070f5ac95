#pragma once

#include <map>
#include <string>
#include <vector>

#include "admp/masking.hpp"
#include "admp/network.hpp"
#include "admp/tensor.hpp"

namespace admp {

// One source/target training batch. Target labels never appear here.
struct Batch {
    Tensor source_x;
    std::vector<int> source_y;
    Tensor target_x;
};

struct LossReport {
    Tensor total;  // scalar, differentiable
    std::map<std::string, double> components;
};

struct ObjectiveWeights {
    double lambda_disc = 1.0;
    double lambda_clu = 0.1;
    double margin = 1.0;
};

// Mean over the batch of -log p[label], probabilities floored at 1e-12.
Tensor cross_entropy(const Tensor& probs, const std::vector<int>& labels);

// Mean over the batch of (1/K) * sum_k |student_k - teacher_k|; bounded by 2/K.
Tensor l1_discrepancy(const Tensor& student_probs, const Tensor& teacher_probs);

// Pairwise contrastive alignment over all ordered pairs (including i = j):
// same-pseudo-class pairs pull together, different-class pairs push apart to
// at least `margin`, normalized by batch size squared.
Tensor clustering_loss(const Tensor& student_probs, const std::vector<int>& teacher_labels,
                       double margin);

// Biased V-statistic MMD^2 with an RBF kernel, summed over the bandwidth set.
Tensor mmd_rbf(const Tensor& feats_s, const Tensor& feats_t,
               const std::vector<double>& bandwidths);

// Median pairwise-distance heuristic scaled by {0.5, 1, 2}.
std::vector<double> median_bandwidths(const Tensor& feats_s, const Tensor& feats_t);

std::vector<int> argmax_rows(const Tensor& probs);

// Channel-search objective: source cross-entropy minus target discrepancy.
// Only used to score channels; the hard mask is not gradient-trained.
LossReport channel_search_objective(const Network& net, const MaskPair& masks, const Batch& batch,
                                    const Network& teacher);

// Adversarial-update objective: source cross-entropy plus weighted target
// discrepancy plus weighted clustering loss.
LossReport adversarial_update_objective(const Network& net, const MaskPair& masks,
                                        const Batch& batch, const Network& teacher,
                                        const ObjectiveWeights& weights);

}  // namespace admp
