#include <cmath>
#include <doctest.h>

#include "admp/errors.hpp"
#include "admp/masking.hpp"
#include "admp/network.hpp"
#include "admp/objectives.hpp"
#include "admp/oracles.hpp"
#include "admp/rng.hpp"

using namespace admp;

TEST_CASE("cross-entropy on one-hot and uniform distributions") {
    const Tensor onehot = Tensor::from_data({2, 3}, {1.0, 0.0, 0.0, 0.0, 0.0, 1.0});
    CHECK(cross_entropy(onehot, {0, 2}).item() == 0.0);

    const Tensor uniform = Tensor::full({3, 4}, 0.25);
    CHECK(cross_entropy(uniform, {0, 1, 3}).item() ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));

    CHECK_THROWS_AS(cross_entropy(uniform, {0, 1, 4}), LabelError);
}

TEST_CASE("cross-entropy matches a direct summation oracle") {
    Rng rng(808);
    std::vector<double> logits(5 * 3);
    for (double& v : logits) v = rng.uniform(-2.0, 2.0);
    const Tensor probs = softmax_rows(Tensor::from_data({5, 3}, logits));
    std::vector<int> y;
    for (int i = 0; i < 5; ++i) y.push_back(static_cast<int>(rng.uniform_int(3)));

    double expected = 0.0;
    for (int i = 0; i < 5; ++i)
        expected -= std::log(probs.data()[static_cast<std::size_t>(i) * 3 +
                                          static_cast<std::size_t>(y[static_cast<std::size_t>(i)])]);
    expected /= 5.0;
    CHECK(cross_entropy(probs, y).item() == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("l1 discrepancy worked examples") {
    const Tensor a = Tensor::from_data({1, 2}, {1.0, 0.0});
    const Tensor b = Tensor::from_data({1, 2}, {0.0, 1.0});
    const Tensor c = Tensor::from_data({1, 2}, {0.5, 0.5});
    CHECK(l1_discrepancy(a, a).item() == 0.0);
    CHECK(l1_discrepancy(a, b).item() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(l1_discrepancy(a, c).item() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(l1_discrepancy(a, Tensor::from_data({1, 3}, {1.0, 0.0, 0.0})),
                    DimensionError);
}

TEST_CASE("l1 discrepancy is symmetric, bounded by 2/K and zero only at equality") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t b = 1 + rng.uniform_int(6), k = 2 + rng.uniform_int(5);
        std::vector<double> la(b * k), lb(b * k);
        for (double& v : la) v = rng.uniform(-3.0, 3.0);
        for (double& v : lb) v = rng.uniform(-3.0, 3.0);
        const Tensor pa = softmax_rows(Tensor::from_data({b, k}, la));
        const Tensor pb = softmax_rows(Tensor::from_data({b, k}, lb));
        const double ab = l1_discrepancy(pa, pb).item();
        CHECK(ab == l1_discrepancy(pb, pa).item());
        CHECK(ab >= 0.0);
        CHECK(ab <= 2.0 / static_cast<double>(k) + 1e-12);
        if (ab == 0.0) CHECK(pa.data() == pb.data());
    }
}

TEST_CASE("clustering loss worked examples") {
    // identical outputs under one shared pseudo-label collapse to zero
    const Tensor same = Tensor::from_data({3, 2}, {0.7, 0.3, 0.7, 0.3, 0.7, 0.3});
    CHECK(clustering_loss(same, {1, 1, 1}, 1.0).item() == 0.0);

    // two far-apart samples of different classes clear the margin
    const Tensor apart = Tensor::from_data({2, 2}, {1.0, 0.0, 0.0, 1.0});
    CHECK(clustering_loss(apart, {0, 1}, 1.0).item() == 0.0);

    // same label, distance sqrt(2): four ordered pairs, two contribute
    CHECK(clustering_loss(apart, {0, 0}, 1.0).item() ==
          doctest::Approx(2.0 * std::sqrt(2.0) / 4.0).epsilon(1e-12));

    CHECK_THROWS_AS(clustering_loss(apart, {0, 1}, 0.0), ConfigError);
    CHECK_THROWS_AS(clustering_loss(apart, {0}, 1.0), DimensionError);
}

TEST_CASE("clustering loss is non-negative and label-permutation invariant") {
    Rng rng(314);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t b = 2 + rng.uniform_int(6);
        std::vector<double> logits(b * 3);
        for (double& v : logits) v = rng.uniform(-2.0, 2.0);
        const Tensor probs = softmax_rows(Tensor::from_data({b, 3}, logits));
        std::vector<int> labels;
        for (std::size_t i = 0; i < b; ++i) labels.push_back(static_cast<int>(rng.uniform_int(3)));

        const double loss = clustering_loss(probs, labels, 1.0).item();
        CHECK(loss >= 0.0);

        std::vector<int> relabeled = labels;  // swap class names 0 <-> 2
        for (int& y : relabeled) y = y == 0 ? 2 : (y == 2 ? 0 : y);
        CHECK(clustering_loss(probs, relabeled, 1.0).item() == doctest::Approx(loss).epsilon(1e-15));
    }
}

TEST_CASE("mmd on identical sample sets is exactly zero") {
    Rng rng(12);
    std::vector<double> x(6 * 4);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const Tensor a = Tensor::from_data({6, 4}, x);
    const Tensor b = Tensor::from_data({6, 4}, x);
    CHECK(mmd_rbf(a, b, {0.5, 1.0, 2.0}).item() == 0.0);
}

TEST_CASE("mmd between single points follows the closed form") {
    const Tensor x = Tensor::from_data({1, 3}, {1.0, -2.0, 0.5});
    const Tensor y = Tensor::from_data({1, 3}, {0.0, 1.0, 2.0});
    const double sq = 1.0 + 9.0 + 2.25;
    for (double sigma : {0.5, 1.0, 3.0}) {
        const double expected = 2.0 - 2.0 * std::exp(-sq / (2.0 * sigma * sigma));
        CHECK(mmd_rbf(x, y, {sigma}).item() == doctest::Approx(expected).epsilon(1e-12));
    }
    CHECK_THROWS_AS(mmd_rbf(x, y, {}), ConfigError);
}

TEST_CASE("mmd is invariant to within-domain permutations and non-negative") {
    Rng rng(2024);
    std::vector<double> xs(5 * 3), xt(7 * 3);
    for (double& v : xs) v = rng.uniform(-2.0, 2.0);
    for (double& v : xt) v = rng.uniform(-1.0, 3.0);
    const Tensor a = Tensor::from_data({5, 3}, xs);
    const Tensor b = Tensor::from_data({7, 3}, xt);
    const double base = mmd_rbf(a, b, {1.0}).item();
    CHECK(base >= 0.0);

    std::vector<double> xs_perm(xs.end() - 3, xs.end());
    xs_perm.insert(xs_perm.end(), xs.begin(), xs.end() - 3);
    const Tensor a_perm = Tensor::from_data({5, 3}, xs_perm);
    CHECK(mmd_rbf(a_perm, b, {1.0}).item() == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("median bandwidths scale as half, one and two medians") {
    const Tensor a = Tensor::from_data({2, 1}, {0.0, 2.0});
    const Tensor b = Tensor::from_data({1, 1}, {1.0});
    const auto bw = median_bandwidths(a, b);
    REQUIRE(bw.size() == 3);
    CHECK(bw[1] == doctest::Approx(2.0 * bw[0]).epsilon(1e-12));
    CHECK(bw[2] == doctest::Approx(2.0 * bw[1]).epsilon(1e-12));
    CHECK(bw[1] > 0.0);
}

TEST_CASE("channel-search objective composes source CE minus discrepancy") {
    const Network teacher = init_network(make_mlp_spec(2, {5}, 3), 40);
    Network student = teacher;
    Rng rng(41);
    Batch batch;
    std::vector<double> xs(8 * 2), xt(8 * 2);
    for (double& v : xs) v = rng.uniform(-1.0, 1.0);
    for (double& v : xt) v = rng.uniform(-1.0, 1.0);
    batch.source_x = Tensor::from_data({8, 2}, xs);
    batch.target_x = Tensor::from_data({8, 2}, xt);
    for (int i = 0; i < 8; ++i) batch.source_y.push_back(static_cast<int>(rng.uniform_int(3)));

    // an exact copy under identity masks is indistinguishable from the teacher
    const MaskPair identity = identity_masks(student.spec, false);
    const LossReport same = channel_search_objective(student, identity, batch, teacher);
    CHECK(same.components.at("discrepancy") == 0.0);
    CHECK(same.total.item() == doctest::Approx(same.components.at("source_ce")).epsilon(1e-15));

    // perturbed student: total recomposes from independently computed parts
    Network other = init_network(student.spec, 999);
    const LossReport rep = channel_search_objective(other, identity, batch, teacher);
    const Tensor probs_s = forward(other, batch.source_x, identity);
    const Tensor probs_t = forward(other, batch.target_x, identity);
    const Tensor teach_t = forward(teacher, batch.target_x);
    const double expected = cross_entropy(probs_s, batch.source_y).item() -
                            l1_discrepancy(probs_t, teach_t).item();
    CHECK(rep.total.item() == doctest::Approx(expected).epsilon(1e-12));
    if (rep.components.at("discrepancy") > 0.0)
        CHECK(rep.total.item() < rep.components.at("source_ce"));
}

TEST_CASE("adversarial-update objective reduces to cross-entropy at zero weights") {
    const Network teacher = init_network(make_mlp_spec(2, {4}, 2), 60);
    Network student = init_network(make_mlp_spec(2, {4}, 2), 61);
    Rng rng(62);
    Batch batch;
    std::vector<double> xs(6 * 2), xt(6 * 2);
    for (double& v : xs) v = rng.uniform(-1.0, 1.0);
    for (double& v : xt) v = rng.uniform(-1.0, 1.0);
    batch.source_x = Tensor::from_data({6, 2}, xs);
    batch.target_x = Tensor::from_data({6, 2}, xt);
    for (int i = 0; i < 6; ++i) batch.source_y.push_back(static_cast<int>(rng.uniform_int(2)));
    const MaskPair masks = identity_masks(student.spec, true);

    const LossReport rep =
        adversarial_update_objective(student, masks, batch, teacher, {0.0, 0.0, 1.0});
    const double ce = cross_entropy(forward(student, batch.source_x, masks), batch.source_y).item();
    CHECK(rep.total.item() == doctest::Approx(ce).epsilon(1e-15));

    CHECK_THROWS_AS(adversarial_update_objective(student, masks, batch, teacher, {-1.0, 0.1, 1.0}),
                    ConfigError);
}

TEST_CASE("soft-mask gradients of the update objective match finite differences") {
    Network student = init_network(make_mlp_spec(2, {5}, 2), 70);
    Network teacher = init_network(make_mlp_spec(2, {5}, 2), 71);
    teacher.set_requires_grad(false);
    Rng rng(72);
    Batch batch;
    std::vector<double> xs(6 * 2), xt(6 * 2);
    for (double& v : xs) v = rng.uniform(-1.0, 1.0);
    for (double& v : xt) v = rng.uniform(-1.0, 1.0);
    batch.source_x = Tensor::from_data({6, 2}, xs);
    batch.target_x = Tensor::from_data({6, 2}, xt);
    for (int i = 0; i < 6; ++i) batch.source_y.push_back(static_cast<int>(rng.uniform_int(2)));

    MaskPair masks = identity_masks(student.spec, true);
    for (auto& [idx, soft] : masks.soft)
        for (double& v : soft.data()) v = rng.uniform(0.4, 1.1);
    const ObjectiveWeights w{1.0, 0.1, 1.0};

    auto loss_fn = [&] {
        return adversarial_update_objective(student, masks, batch, teacher, w).total;
    };
    Tensor& soft = masks.soft.at(0);
    zero_grads(student);
    soft.zero_grad();
    backward(loss_fn());
    const std::vector<double> analytic = soft.grad();
    const std::vector<double> base = soft.data();
    auto f = [&](const std::vector<double>& x) {
        soft.data() = x;
        return loss_fn().item();
    };
    const auto fd = oracles::finite_diff_gradient(f, base);
    soft.data() = base;
    CHECK(oracles::gradient_rel_error(analytic, fd) < 1e-4);
}

TEST_CASE("the full gradient oracle suite passes") {
    const auto suite = oracles::run_gradient_suite(3, 1001);
    CHECK(suite.failed == 0);
    CHECK(suite.worst < 1e-4);
}
