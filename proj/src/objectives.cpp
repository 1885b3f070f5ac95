#include "admp/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "admp/errors.hpp"

namespace admp {

namespace {
constexpr double kProbFloor = 1e-12;
}

Tensor cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
    if (probs.rank() != 2) throw DimensionError("cross_entropy expects [batch, classes] probabilities");
    const Tensor picked = gather_rows(probs, labels);
    return affine(mean_all(log_clamped(picked, kProbFloor)), -1.0, 0.0);
}

Tensor l1_discrepancy(const Tensor& student_probs, const Tensor& teacher_probs) {
    if (student_probs.shape() != teacher_probs.shape())
        throw DimensionError("l1_discrepancy: probability matrices differ in shape");
    if (student_probs.rank() != 2) throw DimensionError("l1_discrepancy expects matrices");
    const double k = static_cast<double>(student_probs.shape()[1]);
    const double batch = static_cast<double>(student_probs.shape()[0]);
    const Tensor total = sum_all(abs_val(sub(student_probs, teacher_probs)));
    return affine(total, 1.0 / (k * batch), 0.0);
}

Tensor clustering_loss(const Tensor& student_probs, const std::vector<int>& teacher_labels,
                       double margin) {
    if (margin <= 0.0) throw ConfigError("clustering margin must be positive");
    if (student_probs.rank() != 2) throw DimensionError("clustering_loss expects a matrix");
    const std::size_t b = student_probs.shape()[0];
    if (teacher_labels.size() != b)
        throw DimensionError("clustering_loss: one teacher label per sample required");

    const Tensor dist = pairwise_euclidean(student_probs);
    std::vector<double> same(b * b, 0.0), diff(b * b, 0.0);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) {
            if (teacher_labels[i] == teacher_labels[j])
                same[i * b + j] = 1.0;
            else
                diff[i * b + j] = 1.0;
        }
    const Tensor same_mask = Tensor::from_data({b, b}, std::move(same), false);
    const Tensor diff_mask = Tensor::from_data({b, b}, std::move(diff), false);
    const Tensor pull = mul(same_mask, dist);
    const Tensor push = mul(diff_mask, relu(affine(dist, -1.0, margin)));
    const double norm = 1.0 / (static_cast<double>(b) * static_cast<double>(b));
    return affine(sum_all(add(pull, push)), norm, 0.0);
}

Tensor mmd_rbf(const Tensor& feats_s, const Tensor& feats_t,
               const std::vector<double>& bandwidths) {
    if (bandwidths.empty()) throw ConfigError("mmd_rbf requires at least one bandwidth");
    if (feats_s.rank() != 2 || feats_t.rank() != 2 || feats_s.shape()[1] != feats_t.shape()[1])
        throw DimensionError("mmd_rbf: feature dimensions differ");
    if (feats_s.shape()[0] == 0 || feats_t.shape()[0] == 0)
        throw DimensionError("mmd_rbf: empty sample set");

    const Tensor d_ss = pairwise_sqdist(feats_s, feats_s);
    const Tensor d_tt = pairwise_sqdist(feats_t, feats_t);
    const Tensor d_st = pairwise_sqdist(feats_s, feats_t);
    Tensor total = Tensor::scalar(0.0, false);
    for (double sigma : bandwidths) {
        if (sigma <= 0.0) throw ConfigError("mmd_rbf bandwidths must be positive");
        const double gamma = -1.0 / (2.0 * sigma * sigma);
        const Tensor k_ss = mean_all(exp_val(affine(d_ss, gamma, 0.0)));
        const Tensor k_tt = mean_all(exp_val(affine(d_tt, gamma, 0.0)));
        const Tensor k_st = mean_all(exp_val(affine(d_st, gamma, 0.0)));
        total = add(total, sub(add(k_ss, k_tt), affine(k_st, 2.0, 0.0)));
    }
    return relu(total);  // clears negative floating-point dust
}

std::vector<double> median_bandwidths(const Tensor& feats_s, const Tensor& feats_t) {
    const std::size_t ns = feats_s.shape()[0], nt = feats_t.shape()[0], d = feats_s.shape()[1];
    std::vector<double> dists;
    auto row = [d](const Tensor& t, std::size_t i) { return t.data().data() + i * d; };
    auto push_pairs = [&](const Tensor& a, std::size_t na, const Tensor& b, std::size_t nb,
                          bool same) {
        for (std::size_t i = 0; i < na; ++i)
            for (std::size_t j = same ? i + 1 : 0; j < nb; ++j) {
                double acc = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    const double diff = row(a, i)[c] - row(b, j)[c];
                    acc += diff * diff;
                }
                dists.push_back(std::sqrt(acc));
            }
    };
    push_pairs(feats_s, ns, feats_s, ns, true);
    push_pairs(feats_t, nt, feats_t, nt, true);
    push_pairs(feats_s, ns, feats_t, nt, false);
    if (dists.empty()) return {0.5, 1.0, 2.0};
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    double med = dists[dists.size() / 2];
    if (med <= 0.0) med = 1.0;
    return {0.5 * med, med, 2.0 * med};
}

std::vector<int> argmax_rows(const Tensor& probs) {
    const std::size_t rows = probs.shape()[0], cols = probs.shape()[1];
    std::vector<int> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* p = probs.data().data() + r * cols;
        std::size_t best = 0;
        for (std::size_t c = 1; c < cols; ++c)
            if (p[c] > p[best]) best = c;
        out[r] = static_cast<int>(best);
    }
    return out;
}

LossReport channel_search_objective(const Network& net, const MaskPair& masks, const Batch& batch,
                                    const Network& teacher) {
    MaskBindings bindings = bindings_from_masks(masks, true);
    const Tensor probs_s = forward_full(net, batch.source_x, &bindings).probs;
    const Tensor probs_t = forward_full(net, batch.target_x, &bindings).probs;
    const Tensor teacher_t = forward(teacher, batch.target_x);

    const Tensor ce = cross_entropy(probs_s, batch.source_y);
    const Tensor disc = l1_discrepancy(probs_t, teacher_t);
    LossReport report;
    report.total = sub(ce, disc);
    report.components["source_ce"] = ce.item();
    report.components["discrepancy"] = disc.item();
    return report;
}

LossReport adversarial_update_objective(const Network& net, const MaskPair& masks,
                                        const Batch& batch, const Network& teacher,
                                        const ObjectiveWeights& weights) {
    if (weights.lambda_disc < 0.0 || weights.lambda_clu < 0.0)
        throw ConfigError("objective weights must be non-negative");
    MaskBindings bindings = bindings_from_masks(masks, true);
    const Tensor probs_s = forward_full(net, batch.source_x, &bindings).probs;
    const Tensor probs_t = forward_full(net, batch.target_x, &bindings).probs;
    const Tensor teacher_t = forward(teacher, batch.target_x);

    const Tensor ce = cross_entropy(probs_s, batch.source_y);
    const Tensor disc = l1_discrepancy(probs_t, teacher_t);
    LossReport report;
    report.components["source_ce"] = ce.item();
    report.components["discrepancy"] = disc.item();
    Tensor total = add(ce, affine(disc, weights.lambda_disc, 0.0));
    if (weights.lambda_clu > 0.0) {
        const Tensor clu = clustering_loss(probs_t, argmax_rows(teacher_t), weights.margin);
        report.components["clustering"] = clu.item();
        total = add(total, affine(clu, weights.lambda_clu, 0.0));
    } else {
        report.components["clustering"] = 0.0;
    }
    report.total = total;
    return report;
}

}  // namespace admp
