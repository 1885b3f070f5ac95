#include "admp/trainer.hpp"

#include <chrono>
#include <cmath>

#include "admp/errors.hpp"
#include "admp/rng.hpp"

namespace admp {

void TrainConfig::validate() const {
    if (pretrain_iters < 0 || admp_iters < 0 || finetune_iters < 0 || warmup_iters < 0)
        throw ConfigError("iteration counts must be non-negative");
    if (lr <= 0.0 || mask_lr <= 0.0) throw ConfigError("learning rates must be positive");
    if (ratio < 0.0 || ratio >= 1.0) throw ConfigError("pruning ratio must lie in [0, 1)");
    if (lambda_disc < 0.0 || lambda_clu < 0.0) throw ConfigError("loss weights must be non-negative");
    if (margin <= 0.0) throw ConfigError("clustering margin must be positive");
    if (mmd_weight < 0.0) throw ConfigError("mmd weight must be non-negative");
    if (rho_init <= 0.0 || rho_growth < 1.0 || rho_max < rho_init || rho_every <= 0)
        throw ConfigError("invalid rho schedule");
    if (batch_size <= 0) throw ConfigError("batch size must be positive");
    if (eval_interval <= 0) throw ConfigError("eval interval must be positive");
    if (patience <= 0) throw ConfigError("early-stop patience must be positive");
    if (!(decay1 > 0.0 && decay1 < decay2 && decay2 < 1.0))
        throw ConfigError("lr decay points must satisfy 0 < decay1 < decay2 < 1");
}

double lr_at(long iteration, long total, double base, double decay1, double decay2) {
    const double frac = total > 0 ? static_cast<double>(iteration) / static_cast<double>(total) : 0.0;
    if (frac >= decay2) return base * 0.01;
    if (frac >= decay1) return base * 0.1;
    return base;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double accuracy(const Tensor& probs, const std::vector<int>& labels) {
    const std::vector<int> pred = argmax_rows(probs);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == labels[i]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double mask_sparsity(const MaskPair& masks) {
    std::size_t zeroed = 0, total = 0;
    for (const auto& [idx, hard] : masks.hard) {
        total += hard.size();
        for (double v : hard)
            if (v == 0.0) ++zeroed;
    }
    return total ? static_cast<double>(zeroed) / static_cast<double>(total) : 0.0;
}

void zero_mask_grads(MaskPair& masks) {
    for (auto& [idx, soft] : masks.soft) soft.zero_grad();
}

}  // namespace

Network pretrain_uda(Network net, const TrainConfig& config, const DomainPair& data,
                     const MetricsSink& sink) {
    config.validate();
    const auto start = Clock::now();
    BatchIterator batches(data.train_view(), config.batch_size,
                          Rng::mix(config.seed, "pretrain"));
    Batch batch;
    const auto emit = [&](long iter) {
        if (!sink) return;
        const EvalResult ev = evaluate(net, data, nullptr, nullptr);
        MetricsRecord rec;
        rec.phase = "pretrain";
        rec.iteration = iter;
        rec.source_acc = ev.source_acc;
        rec.target_acc = ev.target_acc;
        rec.wall_seconds = seconds_since(start);
        sink(rec);
    };

    for (long iter = 1; iter <= config.pretrain_iters; ++iter) {
        if (!batches.next(batch)) break;
        Tensor loss;
        try {
            const ForwardResult fs = forward_full(net, batch.source_x);
            loss = cross_entropy(fs.probs, batch.source_y);
            if (config.mmd_weight > 0.0) {
                const ForwardResult ft = forward_full(net, batch.target_x);
                const auto bw = median_bandwidths(fs.penultimate, ft.penultimate);
                loss = add(loss, affine(mmd_rbf(fs.penultimate, ft.penultimate, bw),
                                        config.mmd_weight, 0.0));
            }
        } catch (const NumericError& e) {
            throw TrainingError("pretraining diverged at iteration " + std::to_string(iter) +
                                ": " + e.what());
        }
        if (!std::isfinite(loss.item()))
            throw TrainingError("pretraining diverged at iteration " + std::to_string(iter));
        backward(loss);
        sgd_step(net, lr_at(iter, config.pretrain_iters, config.lr, config.decay1, config.decay2));
        zero_grads(net);
        if (iter % config.eval_interval == 0 || iter == config.pretrain_iters) emit(iter);
    }
    net.set_requires_grad(false);
    return net;
}

void channel_search_step(PhaseState& state, const Batch& batch, double ratio) {
    for (auto& [idx, hard] : state.masks.hard) hard.assign(hard.size(), 1.0);
    const auto importance = taylor_importance(state.net, state.masks, batch.source_x,
                                              batch.source_y, batch.target_x, state.teacher);
    // the scoring pass leaves stray gradients on weights and soft masks
    zero_grads(state.net);
    zero_mask_grads(state.masks);
    state.masks.hard = generate_hard_mask(importance, ratio);
}

void adversarial_update_step(PhaseState& state, const Batch& batch, const TrainConfig& config,
                             const AdmpVariantFlags& flags, double lr, double mask_lr) {
    ObjectiveWeights weights{config.lambda_disc,
                             flags.use_clustering ? config.lambda_clu : 0.0, config.margin};
    LossReport report =
        adversarial_update_objective(state.net, state.masks, batch, state.teacher, weights);
    if (!std::isfinite(report.total.item()))
        throw TrainingError("adversarial update diverged at iteration " +
                            std::to_string(state.iteration));
    backward(report.total);

    std::map<int, std::vector<double>> mask_grads;
    if (flags.adversarial_soft_mask) {
        // the weights keep their gradients; the soft mask instead descends on
        // the channel-search objective (source CE minus weighted discrepancy)
        zero_mask_grads(state.masks);
        MaskBindings bindings = bindings_from_masks(state.masks, true);
        const Tensor probs_s = forward_full(state.net, batch.source_x, &bindings).probs;
        const Tensor probs_t = forward_full(state.net, batch.target_x, &bindings).probs;
        const Tensor teacher_t = forward(state.teacher, batch.target_x);
        Tensor adv = add(cross_entropy(probs_s, batch.source_y),
                         affine(l1_discrepancy(probs_t, teacher_t), -config.lambda_disc, 0.0));
        // weight gradients of this pass are discarded below by stepping the
        // weights first, before zeroing
        std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> saved;
        for (const auto& [name, lp] : state.net.params)
            saved[name] = {lp.weights.has_grad() ? lp.weights.grad() : std::vector<double>(),
                           lp.bias.has_grad() ? lp.bias.grad() : std::vector<double>()};
        zero_grads(state.net);
        backward(adv);
        for (auto& [name, lp] : state.net.params) {
            auto& [wg, bg] = saved[name];
            if (!wg.empty()) {
                auto& w = lp.weights.data();
                for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * wg[i];
            }
            if (!bg.empty()) {
                auto& b = lp.bias.data();
                for (std::size_t i = 0; i < b.size(); ++i) b[i] -= lr * bg[i];
            }
        }
        zero_grads(state.net);
    } else {
        sgd_step(state.net, lr);
        zero_grads(state.net);
    }

    // soft mask step: task gradient plus the augmented penalty pull
    for (auto& [idx, soft] : state.masks.soft) {
        const std::vector<double> penalty =
            admm_penalty_gradient(state.admm.at(idx), soft.data());
        auto& v = soft.data();
        if (soft.has_grad()) {
            const auto& g = soft.grad();
            for (std::size_t i = 0; i < v.size(); ++i) v[i] -= mask_lr * (g[i] + penalty[i]);
        } else {
            for (std::size_t i = 0; i < v.size(); ++i) v[i] -= mask_lr * penalty[i];
        }
        soft.zero_grad();
    }

    for (auto& [idx, admm] : state.admm)
        admm = admm_refresh(admm, state.masks.soft.at(idx).data());
    ++state.mask_updates;
    if (state.mask_updates % config.rho_every == 0)
        for (auto& [idx, admm] : state.admm)
            admm.rho = std::min(admm.rho * config.rho_growth, config.rho_max);
}

std::pair<Network, MaskPair> admp_prune(const Network& teacher, const TrainConfig& config,
                                        const DomainPair& data, const AdmpVariantFlags& flags,
                                        const MetricsSink& sink) {
    config.validate();
    const auto start = Clock::now();
    PhaseState state;
    state.phase = "admp";
    state.teacher = teacher;
    state.teacher.set_requires_grad(false);
    state.net = teacher;
    state.net.set_requires_grad(true);
    state.masks = identity_masks(state.net.spec, true);
    for (const auto& [idx, soft] : state.masks.soft) {
        const int oc = static_cast<int>(soft.size());
        state.admm.emplace(idx, init_admm_state(oc, keep_count(oc, config.ratio),
                                                config.rho_init, soft.data()));
    }

    BatchIterator batches(data.train_view(), config.batch_size, Rng::mix(config.seed, "admp"));
    Batch batch;
    for (long iter = 1; iter <= config.admp_iters; ++iter) {
        if (!batches.next(batch)) break;
        state.iteration = iter;
        if (flags.use_hard_mask && iter > config.warmup_iters)
            channel_search_step(state, batch, config.ratio);
        const double lr = lr_at(iter, config.admp_iters, config.lr, config.decay1, config.decay2);
        const double mask_lr =
            lr_at(iter, config.admp_iters, config.mask_lr, config.decay1, config.decay2);
        adversarial_update_step(state, batch, config, flags, lr, mask_lr);

        if (sink && (iter % config.eval_interval == 0 || iter == config.admp_iters)) {
            const EvalResult ev = evaluate(state.net, data, &state.teacher, &state.masks);
            MetricsRecord rec;
            rec.phase = "admp";
            rec.iteration = iter;
            rec.source_acc = ev.source_acc;
            rec.target_acc = ev.target_acc;
            rec.discrepancy = ev.discrepancy;
            const Tensor probs_t = forward(state.net, data.target_x(), state.masks);
            const Tensor teach_t = forward(state.teacher, data.target_x());
            rec.clustering =
                clustering_loss(probs_t, argmax_rows(teach_t), config.margin).item();
            rec.sparsity = mask_sparsity(state.masks);
            rec.wall_seconds = seconds_since(start);
            sink(rec);
        }
    }
    return {std::move(state.net), std::move(state.masks)};
}

FinetuneResult finetune(const Network& student, const MaskPair& masks, const TrainConfig& config,
                        const DomainPair& data, const Network& teacher,
                        const AdmpVariantFlags& flags, const MetricsSink& sink) {
    config.validate();
    const auto start = Clock::now();
    FinetuneResult result;
    result.plan = binarize_soft_mask(masks, config.ratio);
    result.net = finalize_prune(student, result.plan);
    result.net.set_requires_grad(true);
    Network frozen_teacher = teacher;
    frozen_teacher.set_requires_grad(false);
    const double reduction = param_reduction(student.spec, result.plan);

    std::size_t total_ch = 0, dropped_ch = 0;
    for (const auto& [idx, keep] : result.plan.keep) {
        const std::size_t oc =
            static_cast<std::size_t>(student.spec.layers[static_cast<std::size_t>(idx)].out_channels);
        total_ch += oc;
        dropped_ch += oc - keep.size();
    }
    const double sparsity =
        total_ch ? static_cast<double>(dropped_ch) / static_cast<double>(total_ch) : 0.0;

    const ObjectiveWeights weights{config.lambda_disc,
                                   flags.use_clustering ? config.lambda_clu : 0.0, config.margin};
    const MaskPair no_masks;
    BatchIterator batches(data.train_view(), config.batch_size,
                          Rng::mix(config.seed, "finetune"));
    Batch batch;
    double best_score = -1e300;
    int stalled = 0;
    long last_emitted = 0;

    const auto emit = [&](long iter) -> double {
        const EvalResult ev = evaluate(result.net, data, &frozen_teacher, nullptr);
        if (sink) {
            MetricsRecord rec;
            rec.phase = "finetune";
            rec.iteration = iter;
            rec.source_acc = ev.source_acc;
            rec.target_acc = ev.target_acc;
            rec.discrepancy = ev.discrepancy;
            const Tensor probs_t = forward(result.net, data.target_x());
            const Tensor teach_t = forward(frozen_teacher, data.target_x());
            rec.clustering =
                clustering_loss(probs_t, argmax_rows(teach_t), config.margin).item();
            rec.sparsity = sparsity;
            rec.param_reduction = reduction;
            rec.wall_seconds = seconds_since(start);
            sink(rec);
        }
        last_emitted = iter;
        return ev.source_acc - ev.discrepancy;
    };

    for (long iter = 1; iter <= config.finetune_iters; ++iter) {
        if (!batches.next(batch)) break;
        LossReport report =
            adversarial_update_objective(result.net, no_masks, batch, frozen_teacher, weights);
        if (!std::isfinite(report.total.item()))
            throw TrainingError("fine-tuning diverged at iteration " + std::to_string(iter));
        backward(report.total);
        sgd_step(result.net,
                 lr_at(iter, config.finetune_iters, config.lr, config.decay1, config.decay2));
        zero_grads(result.net);

        if (iter % config.eval_interval == 0 || iter == config.finetune_iters) {
            const double score = emit(iter);
            // plateau of source accuracy minus teacher discrepancy; target
            // labels stay out of the stopping rule
            if (score > best_score + 1e-9) {
                best_score = score;
                stalled = 0;
            } else if (++stalled >= config.patience) {
                break;
            }
        }
    }
    if (last_emitted == 0 && sink) emit(0);
    return result;
}

EvalResult evaluate(const Network& net, const DomainPair& pair, const Network* teacher,
                    const MaskPair* masks) {
    EvalResult ev;
    const Tensor probs_s =
        masks ? forward(net, pair.source_x(), *masks) : forward(net, pair.source_x());
    const Tensor probs_t =
        masks ? forward(net, pair.target_x(), *masks) : forward(net, pair.target_x());
    ev.source_acc = accuracy(probs_s, pair.source_y());
    ev.target_acc = accuracy(probs_t, pair.target_labels_for_eval());
    if (teacher) {
        const Tensor teach_t = forward(*teacher, pair.target_x());
        ev.discrepancy = l1_discrepancy(probs_t, teach_t).item();
    }
    return ev;
}

double mask_binariness_gap(const MaskPair& masks) {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& [idx, soft] : masks.soft) {
        for (double v : soft.data()) {
            acc += std::abs(v - std::round(v));
            ++n;
        }
    }
    return n ? acc / static_cast<double>(n) : 0.0;
}

}  // namespace admp
