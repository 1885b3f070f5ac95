#include "admp/network.hpp"

#include <cmath>

#include "admp/errors.hpp"
#include "admp/masking.hpp"
#include "admp/rng.hpp"

namespace admp {

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Dense: return "dense";
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::Relu: return "relu";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::Softmax: return "softmax";
    }
    return "?";
}

LayerKind layer_kind_from_string(const std::string& s) {
    if (s == "dense") return LayerKind::Dense;
    if (s == "conv2d") return LayerKind::Conv2d;
    if (s == "relu") return LayerKind::Relu;
    if (s == "flatten") return LayerKind::Flatten;
    if (s == "softmax") return LayerKind::Softmax;
    throw StructureError("unknown layer kind '" + s + "'");
}

bool NetworkSpec::is_parametric(int idx) const {
    const LayerKind k = layers.at(static_cast<std::size_t>(idx)).kind;
    return k == LayerKind::Dense || k == LayerKind::Conv2d;
}

std::string NetworkSpec::layer_name(int idx) const {
    return to_string(layers.at(static_cast<std::size_t>(idx)).kind) + std::to_string(idx);
}

std::vector<TensorExtent> NetworkSpec::propagate_shapes() const {
    if (input_shape.size() != 1 && input_shape.size() != 3)
        throw StructureError("input_shape must be {features} or {channels,height,width}");
    TensorExtent cur;
    if (input_shape.size() == 1) {
        cur.image = false;
        cur.features = input_shape[0];
    } else {
        cur.image = true;
        cur.channels = input_shape[0];
        cur.height = input_shape[1];
        cur.width = input_shape[2];
    }
    std::vector<TensorExtent> out;
    out.reserve(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        const std::string name = layer_name(static_cast<int>(i));
        switch (l.kind) {
            case LayerKind::Dense:
                if (cur.image) throw StructureError(name + ": dense layer on image input (flatten first)");
                if (cur.features != l.in_channels)
                    throw StructureError(name + ": expects " + std::to_string(l.in_channels) +
                                         " inputs, got " + std::to_string(cur.features));
                cur.features = l.out_channels;
                break;
            case LayerKind::Conv2d:
                if (!cur.image) throw StructureError(name + ": conv layer on flat input");
                if (cur.channels != l.in_channels)
                    throw StructureError(name + ": expects " + std::to_string(l.in_channels) +
                                         " channels, got " + std::to_string(cur.channels));
                if (cur.height < l.kernel_size || cur.width < l.kernel_size)
                    throw StructureError(name + ": kernel larger than feature map");
                cur.channels = l.out_channels;
                cur.height = cur.height - l.kernel_size + 1;
                cur.width = cur.width - l.kernel_size + 1;
                break;
            case LayerKind::Relu:
                break;
            case LayerKind::Flatten:
                if (!cur.image) throw StructureError(name + ": flatten on flat input");
                cur.image = false;
                cur.features = cur.channels * cur.height * cur.width;
                break;
            case LayerKind::Softmax:
                if (cur.image) throw StructureError(name + ": softmax on image input");
                break;
        }
        out.push_back(cur);
    }
    return out;
}

void NetworkSpec::validate() const {
    if (layers.empty()) throw StructureError("network has no layers");
    propagate_shapes();  // checks adjacency
    if (layers.back().kind != LayerKind::Softmax)
        throw StructureError("final layer must be softmax");
    int last_parametric = -1;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].kind == LayerKind::Dense || layers[i].kind == LayerKind::Conv2d)
            last_parametric = static_cast<int>(i);
    if (last_parametric < 0) throw StructureError("network has no parametric layers");
    if (layers[static_cast<std::size_t>(last_parametric)].prunable)
        throw StructureError("the final classifier layer must not be prunable");
    if (prunable_layers().empty())
        throw StructureError("network must have at least one prunable layer");
}

std::vector<int> NetworkSpec::prunable_layers() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if ((layers[i].kind == LayerKind::Dense || layers[i].kind == LayerKind::Conv2d) &&
            layers[i].prunable)
            out.push_back(static_cast<int>(i));
    return out;
}

std::int64_t NetworkSpec::param_count() const {
    std::int64_t n = 0;
    for (const LayerSpec& l : layers) {
        if (l.kind == LayerKind::Dense)
            n += static_cast<std::int64_t>(l.in_channels) * l.out_channels + l.out_channels;
        else if (l.kind == LayerKind::Conv2d)
            n += static_cast<std::int64_t>(l.out_channels) * l.in_channels * l.kernel_size *
                     l.kernel_size +
                 l.out_channels;
    }
    return n;
}

NetworkSpec make_mlp_spec(int inputs, const std::vector<int>& hidden, int classes) {
    NetworkSpec spec;
    spec.input_shape = {inputs};
    int cur = inputs;
    for (int h : hidden) {
        spec.layers.push_back({LayerKind::Dense, cur, h, 0, true});
        spec.layers.push_back({LayerKind::Relu, h, h, 0, false});
        cur = h;
    }
    spec.layers.push_back({LayerKind::Dense, cur, classes, 0, false});
    spec.layers.push_back({LayerKind::Softmax, classes, classes, 0, false});
    spec.validate();
    return spec;
}

NetworkSpec make_conv_spec(int in_channels, int height, int width,
                           const std::vector<int>& conv_channels, int kernel_size, int classes) {
    NetworkSpec spec;
    spec.input_shape = {in_channels, height, width};
    int cur = in_channels, h = height, w = width;
    for (int c : conv_channels) {
        spec.layers.push_back({LayerKind::Conv2d, cur, c, kernel_size, true});
        spec.layers.push_back({LayerKind::Relu, c, c, 0, false});
        cur = c;
        h = h - kernel_size + 1;
        w = w - kernel_size + 1;
    }
    spec.layers.push_back({LayerKind::Flatten, 0, 0, 0, false});
    spec.layers.push_back({LayerKind::Dense, cur * h * w, classes, 0, false});
    spec.layers.push_back({LayerKind::Softmax, classes, classes, 0, false});
    spec.validate();
    return spec;
}

Network& Network::operator=(const Network& other) {
    if (this == &other) return *this;
    spec = other.spec;
    params.clear();
    for (const auto& [name, lp] : other.params)
        params[name] = {lp.weights.clone(lp.weights.requires_grad()),
                        lp.bias.clone(lp.bias.requires_grad())};
    return *this;
}

LayerParams& Network::params_for(int layer_idx) {
    auto it = params.find(spec.layer_name(layer_idx));
    if (it == params.end())
        throw StructureError("no parameters for layer " + spec.layer_name(layer_idx));
    return it->second;
}

const LayerParams& Network::params_for(int layer_idx) const {
    auto it = params.find(spec.layer_name(layer_idx));
    if (it == params.end())
        throw StructureError("no parameters for layer " + spec.layer_name(layer_idx));
    return it->second;
}

void Network::set_requires_grad(bool value) {
    for (auto& [name, lp] : params) {
        lp.weights = lp.weights.clone(value);
        lp.bias = lp.bias.clone(value);
    }
}

Network init_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    Network net;
    net.spec = spec;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        if (l.kind != LayerKind::Dense && l.kind != LayerKind::Conv2d) continue;
        Rng rng(Rng::mix(seed, "init:" + spec.layer_name(static_cast<int>(i))));
        std::size_t fan_in, fan_out, n_weights;
        std::vector<std::size_t> wshape;
        if (l.kind == LayerKind::Dense) {
            fan_in = static_cast<std::size_t>(l.in_channels);
            fan_out = static_cast<std::size_t>(l.out_channels);
            wshape = {fan_in, fan_out};
            n_weights = fan_in * fan_out;
        } else {
            const std::size_t k = static_cast<std::size_t>(l.kernel_size);
            fan_in = static_cast<std::size_t>(l.in_channels) * k * k;
            fan_out = static_cast<std::size_t>(l.out_channels) * k * k;
            wshape = {static_cast<std::size_t>(l.out_channels),
                      static_cast<std::size_t>(l.in_channels), k, k};
            n_weights = static_cast<std::size_t>(l.out_channels) * l.in_channels * k * k;
        }
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::vector<double> w(n_weights);
        for (double& v : w) v = rng.uniform(-bound, bound);
        LayerParams lp;
        lp.weights = Tensor::from_data(wshape, std::move(w), true);
        lp.bias = Tensor::zeros({static_cast<std::size_t>(l.out_channels)}, true);
        net.params[spec.layer_name(static_cast<int>(i))] = std::move(lp);
    }
    return net;
}

namespace {

void check_finite(const Tensor& t, const std::string& layer_name) {
    for (double v : t.data())
        if (!std::isfinite(v))
            throw NumericError("non-finite value produced by layer " + layer_name);
}

void check_batch_shape(const NetworkSpec& spec, const Tensor& batch) {
    const auto& in = spec.input_shape;
    bool ok;
    if (in.size() == 1)
        ok = batch.rank() == 2 && batch.shape()[1] == static_cast<std::size_t>(in[0]);
    else
        ok = batch.rank() == 4 && batch.shape()[1] == static_cast<std::size_t>(in[0]) &&
             batch.shape()[2] == static_cast<std::size_t>(in[1]) &&
             batch.shape()[3] == static_cast<std::size_t>(in[2]);
    if (!ok) throw DimensionError("batch shape does not match network input");
}

}  // namespace

ForwardResult forward_full(const Network& net, const Tensor& batch, const MaskBindings* bindings) {
    check_batch_shape(net.spec, batch);
    const auto& layers = net.spec.layers;
    int last_parametric = -1;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (net.spec.is_parametric(static_cast<int>(i))) last_parametric = static_cast<int>(i);

    Tensor cur = batch;
    Tensor penultimate;
    // gate from a parametric layer waiting for its activation to pass
    int pending_gate_layer = -1;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const int idx = static_cast<int>(i);
        const LayerSpec& l = layers[i];
        const std::string name = net.spec.layer_name(idx);
        if (idx == last_parametric) penultimate = cur;
        switch (l.kind) {
            case LayerKind::Dense: {
                const LayerParams& lp = net.params_for(idx);
                Tensor w = lp.weights, b = lp.bias;
                if (bindings) {
                    auto it = bindings->soft.find(idx);
                    if (it != bindings->soft.end()) {
                        auto [sw, sb] = apply_soft_mask(w, b, it->second);
                        w = sw;
                        b = sb;
                    }
                }
                cur = add_rowvec(matmul(cur, w), b);
                break;
            }
            case LayerKind::Conv2d: {
                const LayerParams& lp = net.params_for(idx);
                Tensor w = lp.weights, b = lp.bias;
                if (bindings) {
                    auto it = bindings->soft.find(idx);
                    if (it != bindings->soft.end()) {
                        auto [sw, sb] = apply_soft_mask(w, b, it->second);
                        w = sw;
                        b = sb;
                    }
                }
                cur = conv2d(cur, w, b);
                break;
            }
            case LayerKind::Relu:
                cur = relu(cur);
                break;
            case LayerKind::Flatten: {
                std::size_t flat = 1;
                for (std::size_t d = 1; d < cur.rank(); ++d) flat *= cur.shape()[d];
                cur = reshape(cur, {cur.shape()[0], flat});
                break;
            }
            case LayerKind::Softmax:
                cur = softmax_rows(cur);
                break;
        }
        // post-activation gate: applies after the relu that follows a
        // parametric layer, or immediately when no relu follows
        if (bindings) {
            if (net.spec.is_parametric(idx)) {
                auto it = bindings->gate.find(idx);
                if (it != bindings->gate.end()) {
                    const bool relu_next =
                        i + 1 < layers.size() && layers[i + 1].kind == LayerKind::Relu;
                    if (relu_next)
                        pending_gate_layer = idx;
                    else
                        cur = scale_axis(cur, it->second, 1);
                }
            } else if (l.kind == LayerKind::Relu && pending_gate_layer >= 0) {
                cur = scale_axis(cur, bindings->gate.at(pending_gate_layer), 1);
                pending_gate_layer = -1;
            }
        }
        check_finite(cur, name);
    }
    return {cur, penultimate};
}

Tensor forward(const Network& net, const Tensor& batch) {
    return forward_full(net, batch, nullptr).probs;
}

MaskBindings bindings_from_masks(const MaskPair& masks, bool include_hard) {
    MaskBindings b;
    for (const auto& [idx, soft] : masks.soft) b.soft[idx] = soft;
    if (include_hard)
        for (const auto& [idx, hard] : masks.hard) b.gate[idx] = Tensor::from_vector(hard, false);
    return b;
}

Tensor forward(const Network& net, const Tensor& batch, const MaskPair& masks) {
    MaskBindings b = bindings_from_masks(masks, true);
    return forward_full(net, batch, &b).probs;
}

void sgd_step(Network& net, double lr) {
    for (auto& [name, lp] : net.params) {
        if (lp.weights.has_grad()) {
            auto& v = lp.weights.data();
            const auto& g = lp.weights.grad();
            for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
        }
        if (lp.bias.has_grad()) {
            auto& v = lp.bias.data();
            const auto& g = lp.bias.grad();
            for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
        }
    }
}

void zero_grads(Network& net) {
    for (auto& [name, lp] : net.params) {
        lp.weights.zero_grad();
        lp.bias.zero_grad();
    }
}

std::uint64_t param_checksum(const Network& net) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [name, lp] : net.params) {
        feed(name.data(), name.size());
        feed(lp.weights.data().data(), lp.weights.size() * sizeof(double));
        feed(lp.bias.data().data(), lp.bias.size() * sizeof(double));
    }
    return h;
}

}  // namespace admp
