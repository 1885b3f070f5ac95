#include "admp/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "admp/errors.hpp"
#include "admp/objectives.hpp"

namespace admp {

MaskPair MaskPair::clone() const {
    MaskPair out;
    for (const auto& [idx, t] : soft) out.soft[idx] = t.clone(t.requires_grad());
    out.hard = hard;
    return out;
}

MaskPair identity_masks(const NetworkSpec& spec, bool soft_requires_grad) {
    MaskPair mp;
    for (int idx : spec.prunable_layers()) {
        const std::size_t oc = static_cast<std::size_t>(spec.layers[idx].out_channels);
        mp.soft[idx] = Tensor::full({oc}, 1.0, soft_requires_grad);
        mp.hard[idx] = std::vector<double>(oc, 1.0);
    }
    return mp;
}

std::pair<Tensor, Tensor> apply_soft_mask(const Tensor& weights, const Tensor& bias,
                                          const Tensor& soft) {
    if (weights.rank() == 2)
        return {scale_axis(weights, soft, 1), mul(bias, soft)};
    if (weights.rank() == 4)
        return {scale_axis(weights, soft, 0), mul(bias, soft)};
    throw DimensionError("apply_soft_mask: weights must be rank 2 or 4");
}

int keep_count(int out_channels, double ratio) {
    return out_channels - static_cast<int>(std::floor(ratio * out_channels));
}

std::map<int, std::vector<double>> taylor_importance(const Network& net, const MaskPair& masks,
                                                     const Tensor& batch_s,
                                                     const std::vector<int>& labels_s,
                                                     const Tensor& batch_t,
                                                     const Network& teacher) {
    for (const auto& [idx, hard] : masks.hard)
        for (double v : hard)
            if (v != 1.0)
                throw StateError("taylor_importance requires an all-ones hard mask");

    // gates replace the hard mask as differentiable all-ones leaves
    MaskBindings bindings;
    for (const auto& [idx, soft] : masks.soft) bindings.soft[idx] = soft;
    std::map<int, Tensor> gates;
    for (const auto& [idx, hard] : masks.hard) {
        gates[idx] = Tensor::full({hard.size()}, 1.0, true);
        bindings.gate[idx] = gates[idx];
    }

    const Tensor probs_s = forward_full(net, batch_s, &bindings).probs;
    const Tensor probs_t = forward_full(net, batch_t, &bindings).probs;
    const Tensor teacher_t = forward(teacher, batch_t);
    const Tensor objective = sub(cross_entropy(probs_s, labels_s),
                                 l1_discrepancy(probs_t, teacher_t));
    backward(objective);

    std::map<int, std::vector<double>> importance;
    for (auto& [idx, gate] : gates) {
        std::vector<double> imp(gate.size(), 0.0);
        if (gate.has_grad()) {
            const auto& g = gate.grad();
            // removal flips the gate 1 -> 0, so the first-order change of the
            // objective is -dL/dh
            for (std::size_t c = 0; c < imp.size(); ++c) imp[c] = -g[c];
        }
        importance[idx] = std::move(imp);
        gate.zero_grad();
    }
    for (const auto& [idx, imp] : importance)
        for (double v : imp)
            if (!std::isfinite(v)) throw NumericError("non-finite channel importance");
    return importance;
}

std::map<int, std::vector<double>> generate_hard_mask(
    const std::map<int, std::vector<double>>& importance, double ratio) {
    if (ratio < 0.0 || ratio >= 1.0)
        throw ConfigError("pruning ratio must lie in [0, 1)");
    std::map<int, std::vector<double>> masks;
    for (const auto& [idx, imp] : importance) {
        const int oc = static_cast<int>(imp.size());
        const int prune = static_cast<int>(std::floor(ratio * oc));
        std::vector<int> order(imp.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&imp](int a, int b) {
            if (imp[a] != imp[b]) return imp[a] < imp[b];
            return a < b;
        });
        std::vector<double> mask(imp.size(), 1.0);
        for (int i = 0; i < prune; ++i) mask[static_cast<std::size_t>(order[i])] = 0.0;
        masks[idx] = std::move(mask);
    }
    return masks;
}

PrunePlan binarize_soft_mask(const MaskPair& masks, double ratio) {
    PrunePlan plan;
    for (const auto& [idx, soft] : masks.soft) {
        const auto& values = soft.data();
        const int oc = static_cast<int>(values.size());
        const int t = keep_count(oc, ratio);
        if (t <= 0)
            throw StructureError("pruning ratio leaves layer " + std::to_string(idx) +
                                 " with no channels");
        std::vector<int> order(values.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&values](int a, int b) {
            if (values[a] != values[b]) return values[a] > values[b];
            return a < b;
        });
        std::vector<int> keep(order.begin(), order.begin() + t);
        std::sort(keep.begin(), keep.end());
        plan.keep[idx] = std::move(keep);
    }
    return plan;
}

namespace {

// For each parametric layer, the prunable parametric layer feeding it (if
// any) together with the spatial block size when a flatten sits between.
struct ConsumerLink {
    int producer = -1;
    int block = 1;  // input slice rows per producer channel
};

std::map<int, ConsumerLink> consumer_links(const NetworkSpec& spec) {
    const auto shapes = spec.propagate_shapes();
    std::map<int, ConsumerLink> links;
    int producer = -1;
    int block = 1;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        switch (l.kind) {
            case LayerKind::Dense:
            case LayerKind::Conv2d:
                if (producer >= 0) links[static_cast<int>(i)] = {producer, block};
                producer = spec.layers[i].prunable ? static_cast<int>(i) : -1;
                block = 1;
                break;
            case LayerKind::Flatten:
                if (producer >= 0) {
                    const TensorExtent& e = shapes[i - 1];
                    block = e.height * e.width;
                }
                break;
            case LayerKind::Relu:
            case LayerKind::Softmax:
                break;
        }
    }
    return links;
}

void validate_plan(const NetworkSpec& spec, const PrunePlan& plan) {
    for (const auto& [idx, keep] : plan.keep) {
        if (idx < 0 || idx >= static_cast<int>(spec.layers.size()) || !spec.is_parametric(idx) ||
            !spec.layers[static_cast<std::size_t>(idx)].prunable)
            throw StructureError("prune plan names non-prunable layer " + std::to_string(idx));
        if (keep.empty()) throw StructureError("prune plan keeps no channels in layer " +
                                               std::to_string(idx));
        const int oc = spec.layers[static_cast<std::size_t>(idx)].out_channels;
        int prev = -1;
        for (int c : keep) {
            if (c <= prev || c < 0 || c >= oc)
                throw StructureError("prune plan for layer " + std::to_string(idx) +
                                     " has out-of-range or unsorted channels");
            prev = c;
        }
    }
}

std::vector<double> take_output_channels(const std::vector<double>& data,
                                         std::size_t per_channel_out, std::size_t channels,
                                         const std::vector<int>& keep, bool channel_major) {
    // channel_major: conv weights [out][rest]; otherwise dense weights [in][out]
    std::vector<double> out;
    if (channel_major) {
        out.reserve(keep.size() * per_channel_out);
        for (int c : keep) {
            const std::size_t base = static_cast<std::size_t>(c) * per_channel_out;
            out.insert(out.end(), data.begin() + base, data.begin() + base + per_channel_out);
        }
    } else {
        const std::size_t rows = data.size() / channels;
        out.reserve(rows * keep.size());
        for (std::size_t r = 0; r < rows; ++r)
            for (int c : keep) out.push_back(data[r * channels + static_cast<std::size_t>(c)]);
    }
    return out;
}

}  // namespace

NetworkSpec apply_plan_to_spec(const NetworkSpec& spec, const PrunePlan& plan) {
    validate_plan(spec, plan);
    const auto links = consumer_links(spec);
    NetworkSpec pruned = spec;
    for (const auto& [idx, keep] : plan.keep)
        pruned.layers[static_cast<std::size_t>(idx)].out_channels = static_cast<int>(keep.size());
    for (std::size_t i = 0; i < pruned.layers.size(); ++i) {
        auto it = links.find(static_cast<int>(i));
        if (it == links.end()) continue;
        auto kept = plan.keep.find(it->second.producer);
        if (kept == plan.keep.end()) continue;
        pruned.layers[i].in_channels =
            static_cast<int>(kept->second.size()) * it->second.block;
    }
    // relu/flatten bookkeeping channels follow their producer
    for (std::size_t i = 0; i < pruned.layers.size(); ++i) {
        if (pruned.layers[i].kind != LayerKind::Relu) continue;
        auto kept = plan.keep.find(static_cast<int>(i) - 1);
        if (kept != plan.keep.end()) {
            pruned.layers[i].in_channels = static_cast<int>(kept->second.size());
            pruned.layers[i].out_channels = static_cast<int>(kept->second.size());
        }
    }
    pruned.propagate_shapes();
    return pruned;
}

Network finalize_prune(const Network& net, const PrunePlan& plan) {
    validate_plan(net.spec, plan);
    const auto links = consumer_links(net.spec);
    Network pruned;
    pruned.spec = apply_plan_to_spec(net.spec, plan);

    for (std::size_t i = 0; i < net.spec.layers.size(); ++i) {
        const int idx = static_cast<int>(i);
        if (!net.spec.is_parametric(idx)) continue;
        const LayerSpec& l = net.spec.layers[i];
        const LayerParams& lp = net.params_for(idx);
        std::vector<double> w = lp.weights.data();
        std::vector<double> b = lp.bias.data();
        std::size_t in_ch = static_cast<std::size_t>(l.in_channels);

        // restrict input slices to the producer's kept channels
        auto link = links.find(idx);
        if (link != links.end()) {
            auto kept = plan.keep.find(link->second.producer);
            if (kept != plan.keep.end()) {
                std::vector<int> rows;
                rows.reserve(kept->second.size() * static_cast<std::size_t>(link->second.block));
                for (int c : kept->second)
                    for (int j = 0; j < link->second.block; ++j)
                        rows.push_back(c * link->second.block + j);
                if (l.kind == LayerKind::Dense) {
                    // weights [in, out]: keep rows
                    const std::size_t out_c = static_cast<std::size_t>(l.out_channels);
                    std::vector<double> nw;
                    nw.reserve(rows.size() * out_c);
                    for (int r : rows)
                        nw.insert(nw.end(), w.begin() + static_cast<std::size_t>(r) * out_c,
                                  w.begin() + static_cast<std::size_t>(r + 1) * out_c);
                    w = std::move(nw);
                    in_ch = rows.size();
                } else {
                    // weights [out, in, k, k]: keep input slices
                    const std::size_t k2 = static_cast<std::size_t>(l.kernel_size) *
                                           static_cast<std::size_t>(l.kernel_size);
                    const std::size_t out_c = static_cast<std::size_t>(l.out_channels);
                    std::vector<double> nw;
                    nw.reserve(out_c * rows.size() * k2);
                    for (std::size_t o = 0; o < out_c; ++o)
                        for (int r : rows) {
                            const std::size_t base =
                                (o * in_ch + static_cast<std::size_t>(r)) * k2;
                            nw.insert(nw.end(), w.begin() + base, w.begin() + base + k2);
                        }
                    w = std::move(nw);
                    in_ch = rows.size();
                }
            }
        }

        // restrict output channels to this layer's kept set
        std::vector<std::size_t> wshape;
        auto kept = plan.keep.find(idx);
        std::size_t out_c = static_cast<std::size_t>(l.out_channels);
        if (kept != plan.keep.end()) {
            if (l.kind == LayerKind::Dense) {
                w = take_output_channels(w, 0, out_c, kept->second, false);
            } else {
                const std::size_t per =
                    in_ch * static_cast<std::size_t>(l.kernel_size) *
                    static_cast<std::size_t>(l.kernel_size);
                w = take_output_channels(w, per, out_c, kept->second, true);
            }
            std::vector<double> nb;
            nb.reserve(kept->second.size());
            for (int c : kept->second) nb.push_back(b[static_cast<std::size_t>(c)]);
            b = std::move(nb);
            out_c = kept->second.size();
        }

        if (l.kind == LayerKind::Dense)
            wshape = {in_ch, out_c};
        else
            wshape = {out_c, in_ch, static_cast<std::size_t>(l.kernel_size),
                      static_cast<std::size_t>(l.kernel_size)};
        LayerParams np;
        const bool rg = lp.weights.requires_grad();
        np.weights = Tensor::from_data(wshape, std::move(w), rg);
        np.bias = Tensor::from_data({out_c}, std::move(b), rg);
        pruned.params[pruned.spec.layer_name(idx)] = std::move(np);
    }
    return pruned;
}

double param_reduction(const NetworkSpec& spec, const PrunePlan& plan) {
    const std::int64_t before = spec.param_count();
    const std::int64_t after = apply_plan_to_spec(spec, plan).param_count();
    return 1.0 - static_cast<double>(after) / static_cast<double>(before);
}

}  // namespace admp
