#include "admp/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "admp/errors.hpp"
#include "admp/lpbox.hpp"
#include "admp/masking.hpp"
#include "admp/network.hpp"
#include "admp/objectives.hpp"
#include "admp/rng.hpp"
#include "admp/tensor.hpp"

namespace admp::oracles {

std::vector<double> enum_project_box_simplex(const std::vector<double>& v, int t) {
    const std::size_t n = v.size();
    if (n > 8) throw ConfigError("enumeration oracle supports n <= 8");
    if (t < 0 || t > static_cast<int>(n)) throw InfeasibleError("infeasible cardinality");

    std::size_t patterns = 1;
    for (std::size_t i = 0; i < n; ++i) patterns *= 3;

    std::vector<double> best;
    double best_dist = 1e300;
    std::vector<int> state(n);  // 0 = at 0, 1 = free, 2 = at 1
    for (std::size_t code = 0; code < patterns; ++code) {
        std::size_t c = code;
        int ones = 0, free_count = 0;
        double free_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            state[i] = static_cast<int>(c % 3);
            c /= 3;
            if (state[i] == 2) ++ones;
            if (state[i] == 1) {
                ++free_count;
                free_sum += v[i];
            }
        }
        std::vector<double> z(n);
        if (free_count == 0) {
            if (ones != t) continue;
            for (std::size_t i = 0; i < n; ++i) z[i] = state[i] == 2 ? 1.0 : 0.0;
        } else {
            const double lambda =
                (free_sum - (static_cast<double>(t) - ones)) / static_cast<double>(free_count);
            bool feasible = true;
            for (std::size_t i = 0; i < n; ++i) {
                if (state[i] == 0)
                    z[i] = 0.0;
                else if (state[i] == 2)
                    z[i] = 1.0;
                else {
                    z[i] = v[i] - lambda;
                    if (z[i] < -1e-12 || z[i] > 1.0 + 1e-12) {
                        feasible = false;
                        break;
                    }
                    z[i] = std::min(1.0, std::max(0.0, z[i]));
                }
            }
            if (!feasible) continue;
        }
        double dist = 0.0;
        for (std::size_t i = 0; i < n; ++i) dist += (z[i] - v[i]) * (z[i] - v[i]);
        if (dist < best_dist) {
            best_dist = dist;
            best = z;
        }
    }
    return best;
}

std::vector<double> exhaustive_binary_minimize(const std::vector<double>& v, int t) {
    const std::size_t n = v.size();
    if (n > 20) throw ConfigError("exhaustive oracle supports n <= 20");
    std::vector<double> best;
    double best_obj = 1e300;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<int>(__builtin_popcount(mask)) != t) continue;
        double obj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double m = (mask >> i) & 1u ? 1.0 : 0.0;
            obj += (m - v[i]) * (m - v[i]);
        }
        if (obj < best_obj) {
            best_obj = obj;
            best.assign(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                if ((mask >> i) & 1u) best[i] = 1.0;
        }
    }
    return best;
}

std::vector<double> finite_diff_gradient(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x, double h) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double up = f(x);
        x[i] = orig - h;
        const double down = f(x);
        x[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

double gradient_rel_error(const std::vector<double>& analytic, const std::vector<double>& fd) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double denom = std::max({std::abs(analytic[i]), std::abs(fd[i]), 1e-3});
        worst = std::max(worst, std::abs(analytic[i] - fd[i]) / denom);
    }
    return worst;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const std::vector<double> ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

SuiteResult run_projection_suite(int instances, std::uint64_t seed) {
    SuiteResult res{"projection oracles"};
    Rng rng(Rng::mix(seed, "projection-suite"));
    for (int i = 0; i < instances; ++i) {
        const int n = 2 + static_cast<int>(rng.uniform_int(7));  // 2..8
        std::vector<double> v(static_cast<std::size_t>(n));
        for (double& x : v) x = rng.uniform(-1.5, 2.5);
        const int t = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n) + 1));

        const auto got = project_box_simplex(v, t);
        const auto want = enum_project_box_simplex(v, t);
        double err = 0.0;
        for (std::size_t k = 0; k < v.size(); ++k) err = std::max(err, std::abs(got[k] - want[k]));
        res.worst = std::max(res.worst, err);
        bool ok = err < 1e-6;

        // sphere: radius invariant and idempotence
        const auto s = project_sphere(v);
        double norm2 = 0.0;
        for (double x : s) norm2 += (x - 0.5) * (x - 0.5);
        const double radius_err = std::abs(norm2 - 0.25 * static_cast<double>(n));
        const auto s2 = project_sphere(s);
        double idem_err = 0.0;
        for (std::size_t k = 0; k < s.size(); ++k) idem_err = std::max(idem_err, std::abs(s[k] - s2[k]));
        ok = ok && radius_err < 1e-9 && idem_err < 1e-9;
        res.worst = std::max({res.worst, radius_err, idem_err});

        ++res.checked;
        if (!ok) ++res.failed;
    }
    return res;
}

namespace {

// gradient check of a scalar loss with respect to every parameter of `net`
double check_net_gradients(Network& net, const std::function<Tensor()>& loss_fn) {
    zero_grads(net);
    backward(loss_fn());
    double worst = 0.0;
    for (auto& [name, lp] : net.params) {
        for (Tensor* param : {&lp.weights, &lp.bias}) {
            const std::vector<double> analytic =
                param->has_grad() ? param->grad() : std::vector<double>(param->size(), 0.0);
            auto f = [&](const std::vector<double>& x) {
                param->data() = x;
                return loss_fn().item();
            };
            const std::vector<double> base = param->data();
            const std::vector<double> fd = finite_diff_gradient(f, base);
            param->data() = base;
            worst = std::max(worst, gradient_rel_error(analytic, fd));
        }
    }
    zero_grads(net);
    return worst;
}

}  // namespace

SuiteResult run_gradient_suite(int trials, std::uint64_t seed) {
    SuiteResult res{"gradient oracles"};
    constexpr double kTol = 1e-4;
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(Rng::mix(seed, "gradient-suite:" + std::to_string(trial)));
        const std::uint64_t net_seed = rng.next_u64();

        // dense stack: exercises dense, relu, softmax through cross-entropy
        {
            Network net = init_network(make_mlp_spec(2, {4}, 3), net_seed);
            const std::size_t b = 3;
            std::vector<double> x(b * 2);
            for (double& v : x) v = rng.uniform(-1.0, 1.0);
            const Tensor batch = Tensor::from_data({b, 2}, x);
            std::vector<int> y;
            for (std::size_t i = 0; i < b; ++i) y.push_back(static_cast<int>(rng.uniform_int(3)));
            const double err = check_net_gradients(
                net, [&] { return cross_entropy(forward(net, batch), y); });
            res.worst = std::max(res.worst, err);
            ++res.checked;
            if (err >= kTol) ++res.failed;
        }

        // conv stack: conv2d, relu, flatten, dense, softmax
        {
            Network net = init_network(make_conv_spec(1, 6, 6, {3}, 3, 2), net_seed);
            const std::size_t b = 2;
            std::vector<double> x(b * 36);
            for (double& v : x) v = rng.uniform(0.0, 1.0);
            const Tensor batch = Tensor::from_data({b, 1, 6, 6}, x);
            std::vector<int> y;
            for (std::size_t i = 0; i < b; ++i) y.push_back(static_cast<int>(rng.uniform_int(2)));
            const double err = check_net_gradients(
                net, [&] { return cross_entropy(forward(net, batch), y); });
            res.worst = std::max(res.worst, err);
            ++res.checked;
            if (err >= kTol) ++res.failed;
        }

        // objectives through masks: discrepancy, clustering, mmd and the
        // combined update objective, differentiated in weights and soft mask
        {
            Network net = init_network(make_mlp_spec(2, {5}, 2), net_seed);
            Network teacher = init_network(make_mlp_spec(2, {5}, 2), net_seed + 1);
            teacher.set_requires_grad(false);
            const std::size_t b = 4;
            std::vector<double> xs(b * 2), xt(b * 2);
            for (double& v : xs) v = rng.uniform(-1.0, 1.0);
            for (double& v : xt) v = rng.uniform(-1.0, 1.0);
            Batch batch;
            batch.source_x = Tensor::from_data({b, 2}, xs);
            batch.target_x = Tensor::from_data({b, 2}, xt);
            for (std::size_t i = 0; i < b; ++i)
                batch.source_y.push_back(static_cast<int>(rng.uniform_int(2)));
            MaskPair masks = identity_masks(net.spec, true);
            for (auto& [idx, soft] : masks.soft)
                for (double& v : soft.data()) v = rng.uniform(0.3, 1.2);
            const ObjectiveWeights w{0.9, 0.3, 1.0};

            auto loss_fn = [&] {
                return adversarial_update_objective(net, masks, batch, teacher, w).total;
            };
            double err = check_net_gradients(net, loss_fn);

            // soft-mask gradient against finite differences
            for (auto& [idx, soft] : masks.soft) {
                zero_grads(net);
                soft.zero_grad();
                backward(loss_fn());
                const std::vector<double> analytic =
                    soft.has_grad() ? soft.grad() : std::vector<double>(soft.size(), 0.0);
                const std::vector<double> base = soft.data();
                auto f = [&](const std::vector<double>& x) {
                    soft.data() = x;
                    return loss_fn().item();
                };
                const std::vector<double> fd = finite_diff_gradient(f, base);
                soft.data() = base;
                soft.zero_grad();
                zero_grads(net);
                err = std::max(err, gradient_rel_error(analytic, fd));
            }

            // mmd on penultimate features
            auto mmd_fn = [&] {
                const ForwardResult fs = forward_full(net, batch.source_x);
                const ForwardResult ft = forward_full(net, batch.target_x);
                return mmd_rbf(fs.penultimate, ft.penultimate, {0.7, 1.3});
            };
            err = std::max(err, check_net_gradients(net, mmd_fn));

            res.worst = std::max(res.worst, err);
            ++res.checked;
            if (err >= kTol) ++res.failed;
        }
    }
    return res;
}

SuiteResult run_binary_program_suite(int instances, std::uint64_t seed,
                                     double min_match_fraction) {
    SuiteResult res{"binary program oracle"};
    Rng rng(Rng::mix(seed, "binary-suite"));
    int matched = 0;
    for (int i = 0; i < instances; ++i) {
        const int n = 3 + static_cast<int>(rng.uniform_int(8));  // 3..10
        std::vector<double> v(static_cast<std::size_t>(n));
        for (double& x : v) x = rng.uniform(-0.5, 1.5);
        const int t = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));

        const BinaryProgramResult got = solve_binary_program(v, t);
        const auto want = exhaustive_binary_minimize(v, t);

        int ones = 0;
        for (double m : got.solution) {
            if (m != 0.0 && m != 1.0) ++res.failed;  // must stay binary
            if (m == 1.0) ++ones;
        }
        if (ones != t) ++res.failed;  // must stay feasible
        if (got.solution == want) ++matched;
        ++res.checked;
    }
    const double frac = instances > 0 ? static_cast<double>(matched) / instances : 1.0;
    res.worst = 1.0 - frac;
    if (frac < min_match_fraction) ++res.failed;
    return res;
}

}  // namespace admp::oracles
