#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "admp/tensor.hpp"

namespace admp {

enum class LayerKind { Dense, Conv2d, Relu, Flatten, Softmax };

std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& s);

struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    int in_channels = 0;
    int out_channels = 0;
    int kernel_size = 0;  // conv only
    bool prunable = false;
};

// Output extent of a layer during shape propagation: either a flat feature
// count or a channel grid.
struct TensorExtent {
    bool image = false;
    int features = 0;
    int channels = 0, height = 0, width = 0;
};

struct NetworkSpec {
    std::vector<int> input_shape;  // {features} or {channels, height, width}
    std::vector<LayerSpec> layers;

    void validate() const;
    std::vector<int> prunable_layers() const;          // indices of prunable parametric layers
    std::vector<TensorExtent> propagate_shapes() const;  // output extent per layer
    std::int64_t param_count() const;
    bool is_parametric(int idx) const;
    std::string layer_name(int idx) const;  // e.g. "dense0", "conv2"
};

// Convenience builders used by the harness and tests.
NetworkSpec make_mlp_spec(int inputs, const std::vector<int>& hidden, int classes);
NetworkSpec make_conv_spec(int in_channels, int height, int width,
                           const std::vector<int>& conv_channels, int kernel_size, int classes);

struct LayerParams {
    Tensor weights;  // dense: [in, out]; conv: [out, in, k, k]
    Tensor bias;     // [out]
};

struct Network {
    NetworkSpec spec;
    std::map<std::string, LayerParams> params;

    Network() = default;
    Network(const Network& other) { *this = other; }
    Network& operator=(const Network& other);  // deep copy, preserves requires_grad
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    LayerParams& params_for(int layer_idx);
    const LayerParams& params_for(int layer_idx) const;
    void set_requires_grad(bool value);
};

Network init_network(const NetworkSpec& spec, std::uint64_t seed);

struct MaskPair;  // masking.hpp

// Per-layer tensors bound into a forward pass: `soft` scales the weights and
// bias of a prunable layer along its output channels; `gate` multiplies the
// layer's post-activation feature map per channel.
struct MaskBindings {
    std::map<int, Tensor> soft;
    std::map<int, Tensor> gate;
};

struct ForwardResult {
    Tensor probs;        // [batch, classes]
    Tensor penultimate;  // input to the last parametric layer
};

ForwardResult forward_full(const Network& net, const Tensor& batch,
                           const MaskBindings* bindings = nullptr);
Tensor forward(const Network& net, const Tensor& batch);
Tensor forward(const Network& net, const Tensor& batch, const MaskPair& masks);
MaskBindings bindings_from_masks(const MaskPair& masks, bool include_hard);

void sgd_step(Network& net, double lr);
void zero_grads(Network& net);
std::uint64_t param_checksum(const Network& net);

}  // namespace admp
