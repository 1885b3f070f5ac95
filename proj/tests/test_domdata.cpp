#include <cmath>
#include <set>
#include <doctest.h>

#include "admp/domdata.hpp"
#include "admp/errors.hpp"

using namespace admp;

namespace {

// per-dimension two-sample mean test: |mean_a - mean_b| within 3 sigma
bool means_match(const Tensor& a, const Tensor& b, double sigma_bound = 3.0) {
    const std::size_t na = a.shape()[0], nb = b.shape()[0], d = a.shape()[1];
    for (std::size_t c = 0; c < d; ++c) {
        double ma = 0.0, mb = 0.0, va = 0.0, vb = 0.0;
        for (std::size_t i = 0; i < na; ++i) ma += a.data()[i * d + c];
        for (std::size_t i = 0; i < nb; ++i) mb += b.data()[i * d + c];
        ma /= static_cast<double>(na);
        mb /= static_cast<double>(nb);
        for (std::size_t i = 0; i < na; ++i)
            va += (a.data()[i * d + c] - ma) * (a.data()[i * d + c] - ma);
        for (std::size_t i = 0; i < nb; ++i)
            vb += (b.data()[i * d + c] - mb) * (b.data()[i * d + c] - mb);
        va /= static_cast<double>(na - 1);
        vb /= static_cast<double>(nb - 1);
        const double sigma = std::sqrt(va / static_cast<double>(na) + vb / static_cast<double>(nb));
        if (std::abs(ma - mb) > sigma_bound * sigma) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("generators are pure functions of their spec") {
    DatasetSpec spec;
    spec.kind = DatasetKind::Moons;
    spec.n = 60;
    spec.shift = 40.0;
    spec.seed = 31;
    const DomainPair a = generate(spec);
    const DomainPair b = generate(spec);
    CHECK(a.source_x().data() == b.source_x().data());
    CHECK(a.target_x().data() == b.target_x().data());
    CHECK(a.source_y() == b.source_y());
    CHECK(a.target_labels_for_eval() == b.target_labels_for_eval());

    spec.kind = DatasetKind::Blobs;
    const DomainPair c = generate(spec);
    const DomainPair d = generate(spec);
    CHECK(c.source_x().data() == d.source_x().data());
}

TEST_CASE("paired zero-shift domains coincide elementwise") {
    DatasetSpec spec;
    spec.kind = DatasetKind::Moons;
    spec.n = 50;
    spec.shift = 0.0;
    spec.paired = true;
    const DomainPair pair = generate(spec);
    CHECK(pair.source_x().data() == pair.target_x().data());

    spec.kind = DatasetKind::Strokes;
    const DomainPair imgs = generate(spec);
    CHECK(imgs.source_x().data() == imgs.target_x().data());
}

TEST_CASE("moons classes stay balanced within one sample") {
    DatasetSpec spec;
    spec.kind = DatasetKind::Moons;
    spec.n = 75;
    const DomainPair pair = generate(spec);
    int c0 = 0, c1 = 0;
    for (int y : pair.source_y()) (y == 0 ? c0 : c1)++;
    CHECK(std::abs(c0 - c1) <= 1);
}

TEST_CASE("rotating the target back recovers the source law") {
    DatasetSpec spec;
    spec.kind = DatasetKind::Moons;
    spec.n = 4000;
    spec.shift = 90.0;
    spec.seed = 5;
    const DomainPair pair = generate(spec);

    const double angle = -90.0 * 3.14159265358979323846 / 180.0;
    std::vector<double> back(pair.target_x().data().size());
    for (std::size_t i = 0; i < back.size(); i += 2) {
        const double x = pair.target_x().data()[i], y = pair.target_x().data()[i + 1];
        back[i] = x * std::cos(angle) - y * std::sin(angle);
        back[i + 1] = x * std::sin(angle) + y * std::cos(angle);
    }
    const Tensor rotated = Tensor::from_data({static_cast<std::size_t>(spec.n), 2}, back);
    CHECK(means_match(pair.source_x(), rotated));

    // and the raw target clearly does not match the source law
    CHECK_FALSE(means_match(pair.source_x(), pair.target_x()));
}

TEST_CASE("moons spec validation") {
    DatasetSpec spec;
    spec.kind = DatasetKind::Moons;
    spec.shift = 95.0;
    CHECK_THROWS_AS(generate(spec), ConfigError);
    spec.shift = 10.0;
    spec.n = 5;
    CHECK_THROWS_AS(generate(spec), ConfigError);
}

TEST_CASE("zero-shift blobs agree in distribution across domains") {
    DatasetSpec spec;
    spec.kind = DatasetKind::Blobs;
    spec.n = 3000;
    spec.shift = 0.0;
    spec.seed = 12;
    const DomainPair pair = generate(spec);
    CHECK(means_match(pair.source_x(), pair.target_x()));
}

TEST_CASE("noise-free blob labels are the nearest generating center") {
    DatasetSpec spec;
    spec.kind = DatasetKind::Blobs;
    spec.n = 90;
    spec.noise = 0.0;
    spec.classes = 4;
    const DomainPair pair = generate(spec);

    // noise 0 degenerates every sample onto its center; distinct labels must
    // give distinct points and equal labels identical points
    const auto& x = pair.source_x().data();
    const auto& y = pair.source_y();
    for (std::size_t i = 0; i < y.size(); ++i)
        for (std::size_t j = i + 1; j < y.size(); ++j) {
            double dist = 0.0;
            for (std::size_t c = 0; c < 5; ++c)
                dist += std::abs(x[i * 5 + c] - x[j * 5 + c]);
            if (y[i] == y[j])
                CHECK(dist == 0.0);
            else
                CHECK(dist > 1e-9);
        }
}

TEST_CASE("stroke images stay in range and invert onto unit pixel sums") {
    DatasetSpec spec;
    spec.kind = DatasetKind::Strokes;
    spec.n = 40;
    spec.noise = 0.0;
    spec.shift = 1.0;  // inversion
    spec.paired = true;
    const DomainPair pair = generate(spec);
    const auto& s = pair.source_x().data();
    const auto& t = pair.target_x().data();
    REQUIRE(s.size() == t.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(s[i] >= 0.0);
        CHECK(s[i] <= 1.0);
        CHECK(s[i] + t[i] == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(pair.source_x().shape() == std::vector<std::size_t>{40, 1, 12, 12});
    int max_label = 0;
    for (int y : pair.source_y()) max_label = std::max(max_label, y);
    CHECK(max_label == 3);
}

TEST_CASE("batch iterator visits each source sample at most once per epoch") {
    // encode the row id in the feature so batches reveal their samples
    const int n = 24;
    std::vector<double> xs(n * 2), xt(n * 2);
    std::vector<int> ys(n, 0), yt(n, 0);
    for (int i = 0; i < n; ++i) {
        xs[static_cast<std::size_t>(i) * 2] = i;
        xt[static_cast<std::size_t>(i) * 2] = i + 1000;
    }
    const DomainPair pair(Tensor::from_data({24, 2}, xs), ys, Tensor::from_data({24, 2}, xt), yt);

    BatchIterator it(pair.train_view(), 5, 77);
    CHECK_FALSE(it.empty_stream());
    std::multiset<int> seen;
    Batch b;
    for (int k = 0; k < 4; ++k) {  // one epoch = floor(24/5) = 4 full batches
        REQUIRE(it.next(b));
        for (std::size_t r = 0; r < 5; ++r)
            seen.insert(static_cast<int>(b.source_x.data()[r * 2]));
    }
    CHECK(seen.size() == 20);
    for (int v : seen) CHECK(seen.count(v) == 1);
}

TEST_CASE("batch iterator is deterministic for a fixed seed") {
    DatasetSpec spec;
    spec.kind = DatasetKind::Moons;
    spec.n = 30;
    const DomainPair pair = generate(spec);
    BatchIterator a(pair.train_view(), 8, 5), b(pair.train_view(), 8, 5);
    Batch ba, bb;
    for (int i = 0; i < 10; ++i) {
        REQUIRE(a.next(ba));
        REQUIRE(b.next(bb));
        CHECK(ba.source_x.data() == bb.source_x.data());
        CHECK(ba.target_x.data() == bb.target_x.data());
        CHECK(ba.source_y == bb.source_y);
    }
}

TEST_CASE("oversized batches produce an empty flagged stream") {
    DatasetSpec spec;
    spec.kind = DatasetKind::Moons;
    spec.n = 20;
    const DomainPair pair = generate(spec);
    BatchIterator it(pair.train_view(), 21, 1);
    CHECK(it.empty_stream());
    Batch b;
    CHECK_FALSE(it.next(b));
}
