#include "admp/domdata.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "admp/errors.hpp"
#include "admp/rng.hpp"
#include "admp/textio.hpp"

namespace admp {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr int kStrokeSize = 12;
}

DatasetKind dataset_kind_from_string(const std::string& s) {
    if (s == "moons") return DatasetKind::Moons;
    if (s == "blobs") return DatasetKind::Blobs;
    if (s == "strokes") return DatasetKind::Strokes;
    throw ConfigError("unknown dataset kind '" + s + "'");
}

std::string to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::Moons: return "moons";
        case DatasetKind::Blobs: return "blobs";
        case DatasetKind::Strokes: return "strokes";
    }
    return "?";
}

double DatasetSpec::effective_noise() const {
    if (noise >= 0.0) return noise;
    switch (kind) {
        case DatasetKind::Moons: return 0.1;
        case DatasetKind::Blobs: return 1.0;
        case DatasetKind::Strokes: return 0.05;
    }
    return 0.0;
}

void DatasetSpec::validate() const {
    if (n < 20) throw ConfigError("dataset needs at least 20 samples per domain");
    if (kind == DatasetKind::Moons && (shift < 0.0 || shift > 90.0))
        throw ConfigError("moons rotation must lie in [0, 90] degrees");
    if (kind == DatasetKind::Blobs && classes < 2)
        throw ConfigError("blobs need at least 2 classes");
    if (kind == DatasetKind::Strokes) {
        const int s = static_cast<int>(shift);
        if (s < 0 || s > 2 || static_cast<double>(s) != shift)
            throw ConfigError("strokes shift must be 0 (none), 1 (invert) or 2 (gradient)");
    }
}

DomainPair::DomainPair(Tensor source_x, std::vector<int> source_y, Tensor target_x,
                       std::vector<int> target_y_hidden)
    : source_x_(std::move(source_x)),
      source_y_(std::move(source_y)),
      target_x_(std::move(target_x)),
      target_y_hidden_(std::move(target_y_hidden)) {}

int DomainPair::num_classes() const {
    int k = 0;
    for (int y : source_y_) k = std::max(k, y + 1);
    return k;
}

namespace {

std::vector<int> balanced_labels(int n, int classes) {
    std::vector<int> y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = i % classes;
    return y;
}

// One two-moons sample per label, pre-noise. The moons are crescent arcs of
// a common origin-centered annulus with a bulging radius profile. Classes
// occupy angular sectors of unequal extent, so a rotation of the figure
// admits exactly one marginal re-alignment and sliding along the annulus
// provides a smooth path to it; the class boundary itself stays angular,
// which is what a rotation shift breaks.
void moon_point(int label, double u, double& x, double& y) {
    const double deg = kPi / 180.0;
    const double phi = label == 0 ? (120.0 * u) * deg : (160.0 + 170.0 * u) * deg;
    const double radius = 1.0 + 0.3 * std::sin(2.0 * phi + 0.7);
    x = radius * std::cos(phi);
    y = radius * std::sin(phi);
}

}  // namespace

DomainPair gen_moons_shift(const DatasetSpec& spec) {
    spec.validate();
    const double noise = spec.effective_noise();
    const double angle = spec.shift * kPi / 180.0;
    const std::uint64_t source_seed = Rng::mix(spec.seed, "moons:source");
    const std::uint64_t target_seed =
        spec.paired ? source_seed : Rng::mix(spec.seed, "moons:target");

    auto draw = [&](std::uint64_t stream_seed, bool rotate) {
        Rng rng(stream_seed);
        std::vector<int> y = balanced_labels(spec.n, 2);
        std::vector<double> x(static_cast<std::size_t>(spec.n) * 2);
        for (int i = 0; i < spec.n; ++i) {
            double px, py;
            moon_point(y[static_cast<std::size_t>(i)], rng.uniform(0.0, 1.0), px, py);
            px += noise * rng.normal();
            py += noise * rng.normal();
            if (rotate) {
                const double rx = px * std::cos(angle) - py * std::sin(angle);
                const double ry = px * std::sin(angle) + py * std::cos(angle);
                px = rx;
                py = ry;
            }
            x[static_cast<std::size_t>(i) * 2] = px;
            x[static_cast<std::size_t>(i) * 2 + 1] = py;
        }
        return std::pair{Tensor::from_data({static_cast<std::size_t>(spec.n), 2}, std::move(x)),
                         std::move(y)};
    };

    auto [sx, sy] = draw(source_seed, false);
    auto [tx, ty] = draw(target_seed, spec.shift != 0.0);
    return DomainPair(std::move(sx), std::move(sy), std::move(tx), std::move(ty));
}

DomainPair gen_blobs_shift(const DatasetSpec& spec) {
    spec.validate();
    const int d = 5;
    const double noise = spec.effective_noise();
    const double scale = 3.0;  // center spread

    Rng center_rng(Rng::mix(spec.seed, "blobs:centers"));
    std::vector<double> centers(static_cast<std::size_t>(spec.classes) * d);
    for (double& c : centers) c = scale * center_rng.normal();

    const std::uint64_t source_seed = Rng::mix(spec.seed, "blobs:source");
    const std::uint64_t target_seed =
        spec.paired ? source_seed : Rng::mix(spec.seed, "blobs:target");
    const double offset = spec.shift / std::sqrt(static_cast<double>(d));

    auto draw = [&](std::uint64_t stream_seed, bool shifted) {
        Rng rng(stream_seed);
        std::vector<int> y = balanced_labels(spec.n, spec.classes);
        std::vector<double> x(static_cast<std::size_t>(spec.n) * d);
        for (int i = 0; i < spec.n; ++i)
            for (int c = 0; c < d; ++c)
                x[static_cast<std::size_t>(i) * d + c] =
                    centers[static_cast<std::size_t>(y[static_cast<std::size_t>(i)]) * d + c] +
                    noise * rng.normal() + (shifted ? offset : 0.0);
        return std::pair{
            Tensor::from_data({static_cast<std::size_t>(spec.n), static_cast<std::size_t>(d)},
                              std::move(x)),
            std::move(y)};
    };

    auto [sx, sy] = draw(source_seed, false);
    auto [tx, ty] = draw(target_seed, spec.shift != 0.0);
    return DomainPair(std::move(sx), std::move(sy), std::move(tx), std::move(ty));
}

namespace {

// glyph classes: 0 horizontal bar, 1 vertical bar, 2 cross, 3 diagonal
void draw_glyph(double* img, int label, int pos, double intensity) {
    auto at = [img](int r, int c) -> double& { return img[r * kStrokeSize + c]; };
    switch (label) {
        case 0:
            for (int c = 0; c < kStrokeSize; ++c) at(pos, c) = at(pos + 1, c) = intensity;
            break;
        case 1:
            for (int r = 0; r < kStrokeSize; ++r) at(r, pos) = at(r, pos + 1) = intensity;
            break;
        case 2:
            for (int c = 0; c < kStrokeSize; ++c) at(pos, c) = at(pos + 1, c) = intensity;
            for (int r = 0; r < kStrokeSize; ++r) at(r, pos) = at(r, pos + 1) = intensity;
            break;
        case 3:
            for (int r = 0; r < kStrokeSize; ++r)
                for (int dc = -1; dc <= 0; ++dc) {
                    const int c = r + dc;
                    if (c >= 0 && c < kStrokeSize) at(r, c) = intensity;
                }
            break;
    }
}

}  // namespace

DomainPair gen_strokes_images(const DatasetSpec& spec) {
    spec.validate();
    const double noise = spec.effective_noise();
    const auto shift = static_cast<StrokesShift>(static_cast<int>(spec.shift));
    const std::uint64_t source_seed = Rng::mix(spec.seed, "strokes:source");
    const std::uint64_t target_seed =
        spec.paired ? source_seed : Rng::mix(spec.seed, "strokes:target");
    const std::size_t pixels = kStrokeSize * kStrokeSize;

    auto draw = [&](std::uint64_t stream_seed, bool shifted) {
        Rng rng(stream_seed);
        std::vector<int> y = balanced_labels(spec.n, 4);
        std::vector<double> x(static_cast<std::size_t>(spec.n) * pixels, 0.0);
        for (int i = 0; i < spec.n; ++i) {
            double* img = x.data() + static_cast<std::size_t>(i) * pixels;
            const int pos = 4 + static_cast<int>(rng.uniform_int(4));
            const double intensity = rng.uniform(0.7, 1.0);
            draw_glyph(img, y[static_cast<std::size_t>(i)], pos, intensity);
            for (std::size_t p = 0; p < pixels; ++p) {
                img[p] += noise * rng.normal();
                img[p] = std::clamp(img[p], 0.0, 1.0);
            }
            if (shifted && shift == StrokesShift::Invert) {
                for (std::size_t p = 0; p < pixels; ++p) img[p] = 1.0 - img[p];
            } else if (shifted && shift == StrokesShift::Gradient) {
                for (int r = 0; r < kStrokeSize; ++r)
                    for (int c = 0; c < kStrokeSize; ++c) {
                        double& v = img[r * kStrokeSize + c];
                        v = std::clamp(v + 0.3 * c / (kStrokeSize - 1.0), 0.0, 1.0);
                    }
            }
        }
        return std::pair{
            Tensor::from_data({static_cast<std::size_t>(spec.n), 1, kStrokeSize, kStrokeSize},
                              std::move(x)),
            std::move(y)};
    };

    auto [sx, sy] = draw(source_seed, false);
    auto [tx, ty] = draw(target_seed, shift != StrokesShift::None);
    return DomainPair(std::move(sx), std::move(sy), std::move(tx), std::move(ty));
}

DomainPair generate(const DatasetSpec& spec) {
    switch (spec.kind) {
        case DatasetKind::Moons: return gen_moons_shift(spec);
        case DatasetKind::Blobs: return gen_blobs_shift(spec);
        case DatasetKind::Strokes: return gen_strokes_images(spec);
    }
    throw ConfigError("unknown dataset kind");
}

BatchIterator::BatchIterator(TrainView view, int batch_size, std::uint64_t seed)
    : view_(view),
      batch_size_(batch_size),
      source_rng_(Rng::mix(seed, "batches:source")),
      target_rng_(Rng::mix(seed, "batches:target")) {
    const std::size_t ns = view_.source_x.shape()[0];
    const std::size_t nt = view_.target_x.shape()[0];
    if (batch_size <= 0) throw ConfigError("batch size must be positive");
    if (static_cast<std::size_t>(batch_size) > ns || static_cast<std::size_t>(batch_size) > nt) {
        empty_ = true;
        return;
    }
    source_order_.resize(ns);
    target_order_.resize(nt);
    for (std::size_t i = 0; i < ns; ++i) source_order_[i] = i;
    for (std::size_t i = 0; i < nt; ++i) target_order_[i] = i;
    source_rng_.shuffle(source_order_);
    target_rng_.shuffle(target_order_);
}

void BatchIterator::reshuffle(std::vector<std::size_t>& order, Rng& rng) { rng.shuffle(order); }

bool BatchIterator::next(Batch& out) {
    if (empty_) return false;
    const std::size_t bs = static_cast<std::size_t>(batch_size_);
    if (source_pos_ + bs > source_order_.size()) {
        reshuffle(source_order_, source_rng_);
        source_pos_ = 0;
    }
    if (target_pos_ + bs > target_order_.size()) {
        reshuffle(target_order_, target_rng_);
        target_pos_ = 0;
    }

    auto slice_rows = [bs](const Tensor& x, const std::vector<std::size_t>& order,
                           std::size_t pos) {
        std::size_t row = 1;
        for (std::size_t d = 1; d < x.rank(); ++d) row *= x.shape()[d];
        std::vector<double> data(bs * row);
        for (std::size_t i = 0; i < bs; ++i) {
            const std::size_t src = order[pos + i] * row;
            std::copy(x.data().begin() + static_cast<std::ptrdiff_t>(src),
                      x.data().begin() + static_cast<std::ptrdiff_t>(src + row),
                      data.begin() + static_cast<std::ptrdiff_t>(i * row));
        }
        std::vector<std::size_t> shape = x.shape();
        shape[0] = bs;
        return Tensor::from_data(std::move(shape), std::move(data));
    };

    out.source_x = slice_rows(view_.source_x, source_order_, source_pos_);
    out.target_x = slice_rows(view_.target_x, target_order_, target_pos_);
    out.source_y.resize(bs);
    for (std::size_t i = 0; i < bs; ++i)
        out.source_y[i] = view_.source_y[source_order_[source_pos_ + i]];
    source_pos_ += bs;
    target_pos_ += bs;
    return true;
}

namespace {

void write_vector_csv(const Tensor& x, const std::vector<int>* labels, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    const std::size_t n = x.shape()[0], d = x.shape()[1];
    for (std::size_t c = 0; c < d; ++c) out << (c ? "," : "") << "x" << c;
    if (labels) out << ",label";
    out << "\n";
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c)
            out << (c ? "," : "") << format_double(x.data()[i * d + c]);
        if (labels) out << "," << (*labels)[i];
        out << "\n";
    }
}

void write_pgm_stack(const Tensor& x, const std::string& dir, const std::string& prefix) {
    std::filesystem::create_directories(dir);
    const std::size_t n = x.shape()[0];
    const std::size_t h = x.shape()[2], w = x.shape()[3];
    for (std::size_t i = 0; i < n; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "%s_%04zu.pgm", prefix.c_str(), i);
        std::ofstream out(dir + "/" + name);
        if (!out) throw IoError("cannot write PGM files under " + dir);
        out << "P2\n" << w << " " << h << "\n255\n";
        for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t c = 0; c < w; ++c) {
                const double v = x.data()[(i * h + r) * w + c];
                out << (c ? " " : "")
                    << static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
            }
            out << "\n";
        }
    }
}

void write_labels_csv(const std::vector<int>& labels, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "label\n";
    for (int y : labels) out << y << "\n";
}

}  // namespace

void export_dataset(const DomainPair& pair, const DatasetSpec& spec, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    if (spec.kind == DatasetKind::Strokes) {
        write_pgm_stack(pair.source_x(), out_dir + "/source", "source");
        write_pgm_stack(pair.target_x(), out_dir + "/target", "target");
        write_labels_csv(pair.source_y(), out_dir + "/source_labels.csv");
        write_labels_csv(pair.target_labels_for_eval(), out_dir + "/target_labels_eval.csv");
    } else {
        write_vector_csv(pair.source_x(), &pair.source_y(), out_dir + "/source.csv");
        write_vector_csv(pair.target_x(), nullptr, out_dir + "/target.csv");
        write_labels_csv(pair.target_labels_for_eval(), out_dir + "/target_labels_eval.csv");
    }
}

}  // namespace admp
