#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "admp/objectives.hpp"
#include "admp/rng.hpp"
#include "admp/tensor.hpp"

namespace admp {

enum class DatasetKind { Moons, Blobs, Strokes };

DatasetKind dataset_kind_from_string(const std::string& s);
std::string to_string(DatasetKind kind);

// Strokes shift families.
enum class StrokesShift { None = 0, Invert = 1, Gradient = 2 };

struct DatasetSpec {
    DatasetKind kind = DatasetKind::Moons;
    int n = 400;         // samples per domain
    double noise = -1.0; // negative = kind default (0.1 moons, 1.0 blobs, 0.05 strokes)
    double shift = 0.0;  // rotation degrees | mean offset | strokes shift index
    int classes = 3;     // blobs only
    std::uint64_t seed = 7;
    bool paired = false;  // same draw stream for both domains (exactness tests)

    double effective_noise() const;
    void validate() const;
};

// The training-facing view carries no target labels by construction.
struct TrainView {
    const Tensor& source_x;
    const std::vector<int>& source_y;
    const Tensor& target_x;
};

class DomainPair {
public:
    DomainPair(Tensor source_x, std::vector<int> source_y, Tensor target_x,
               std::vector<int> target_y_hidden);

    TrainView train_view() const { return {source_x_, source_y_, target_x_}; }
    const Tensor& source_x() const { return source_x_; }
    const std::vector<int>& source_y() const { return source_y_; }
    const Tensor& target_x() const { return target_x_; }

    // Held-out labels; only evaluation may call this.
    const std::vector<int>& target_labels_for_eval() const { return target_y_hidden_; }

    int num_classes() const;

private:
    Tensor source_x_;
    std::vector<int> source_y_;
    Tensor target_x_;
    std::vector<int> target_y_hidden_;
};

DomainPair gen_moons_shift(const DatasetSpec& spec);
DomainPair gen_blobs_shift(const DatasetSpec& spec);
DomainPair gen_strokes_images(const DatasetSpec& spec);
DomainPair generate(const DatasetSpec& spec);

// Endless epoch-shuffled batches; source and target are drawn independently
// and the final partial batch of each epoch is dropped.
class BatchIterator {
public:
    BatchIterator(TrainView view, int batch_size, std::uint64_t seed);

    bool next(Batch& out);
    bool empty_stream() const { return empty_; }  // batch_size exceeded a domain

private:
    void reshuffle(std::vector<std::size_t>& order, Rng& rng);

    TrainView view_;
    int batch_size_;
    bool empty_ = false;
    std::vector<std::size_t> source_order_, target_order_;
    std::size_t source_pos_ = 0, target_pos_ = 0;
    Rng source_rng_, target_rng_;
};

// CSV export for vector datasets, PGM stacks for image datasets.
void export_dataset(const DomainPair& pair, const DatasetSpec& spec, const std::string& out_dir);

}  // namespace admp
