#include "admp/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "admp/errors.hpp"

namespace admp {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

json spec_to_json(const NetworkSpec& spec) {
    json layers = json::array();
    for (const LayerSpec& l : spec.layers) {
        json jl = {{"kind", to_string(l.kind)},
                   {"in_channels", l.in_channels},
                   {"out_channels", l.out_channels},
                   {"prunable", l.prunable}};
        if (l.kind == LayerKind::Conv2d) jl["kernel_size"] = l.kernel_size;
        layers.push_back(jl);
    }
    return {{"input_shape", spec.input_shape}, {"layers", layers}};
}

NetworkSpec spec_from_json(const json& j) {
    NetworkSpec spec;
    spec.input_shape = j.at("input_shape").get<std::vector<int>>();
    for (const json& jl : j.at("layers")) {
        LayerSpec l;
        l.kind = layer_kind_from_string(jl.at("kind").get<std::string>());
        l.in_channels = jl.at("in_channels").get<int>();
        l.out_channels = jl.at("out_channels").get<int>();
        l.kernel_size = jl.value("kernel_size", 0);
        l.prunable = jl.at("prunable").get<bool>();
        spec.layers.push_back(l);
    }
    return spec;
}

// weights as nested lists: dense [in][out], conv [out][in][k][k]
json weights_to_json(const Tensor& w) {
    const auto& shape = w.shape();
    const auto& data = w.data();
    std::size_t pos = 0;
    std::function<json(std::size_t)> build = [&](std::size_t dim) -> json {
        json arr = json::array();
        if (dim + 1 == shape.size()) {
            for (std::size_t i = 0; i < shape[dim]; ++i) arr.push_back(data[pos++]);
        } else {
            for (std::size_t i = 0; i < shape[dim]; ++i) arr.push_back(build(dim + 1));
        }
        return arr;
    };
    return build(0);
}

void flatten_json(const json& j, std::vector<double>& out) {
    if (j.is_array()) {
        for (const json& c : j) flatten_json(c, out);
    } else if (j.is_number()) {
        out.push_back(j.get<double>());
    } else {
        throw IoError("checkpoint parameter arrays must contain only numbers");
    }
}

}  // namespace

void save_checkpoint(const Network& net, const std::string& path, const MaskPair* masks,
                     const PrunePlan* plan) {
    json doc;
    doc["format_version"] = kFormatVersion;
    doc["spec"] = spec_to_json(net.spec);
    json params;
    for (const auto& [name, lp] : net.params) {
        params[name] = {{"weights", weights_to_json(lp.weights)},
                        {"bias", lp.bias.data()}};
    }
    doc["params"] = params;
    if (masks) {
        json jm;
        for (const auto& [idx, soft] : masks->soft) jm[std::to_string(idx)] = soft.data();
        doc["soft_masks"] = jm;
    }
    if (plan) {
        json jp;
        for (const auto& [idx, keep] : plan->keep) jp[std::to_string(idx)] = keep;
        doc["plan"] = jp;
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open checkpoint file for writing: " + path);
    out << doc.dump(1) << '\n';
    if (!out) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw IoError("corrupt checkpoint " + path + ": " + e.what());
    }
    try {
        if (doc.at("format_version").get<int>() != kFormatVersion)
            throw IoError("unsupported checkpoint format version in " + path);
        Checkpoint ck;
        ck.net.spec = spec_from_json(doc.at("spec"));
        ck.net.spec.validate();
        for (std::size_t i = 0; i < ck.net.spec.layers.size(); ++i) {
            const int idx = static_cast<int>(i);
            if (!ck.net.spec.is_parametric(idx)) continue;
            const LayerSpec& l = ck.net.spec.layers[i];
            const std::string name = ck.net.spec.layer_name(idx);
            const json& jp = doc.at("params").at(name);
            std::vector<double> w, b;
            flatten_json(jp.at("weights"), w);
            flatten_json(jp.at("bias"), b);
            std::vector<std::size_t> wshape;
            if (l.kind == LayerKind::Dense)
                wshape = {static_cast<std::size_t>(l.in_channels),
                          static_cast<std::size_t>(l.out_channels)};
            else
                wshape = {static_cast<std::size_t>(l.out_channels),
                          static_cast<std::size_t>(l.in_channels),
                          static_cast<std::size_t>(l.kernel_size),
                          static_cast<std::size_t>(l.kernel_size)};
            LayerParams lp;
            lp.weights = Tensor::from_data(wshape, std::move(w), true);
            lp.bias = Tensor::from_data({static_cast<std::size_t>(l.out_channels)}, std::move(b),
                                        true);
            ck.net.params[name] = std::move(lp);
        }
        if (doc.contains("soft_masks")) {
            MaskPair mp;
            for (const auto& [key, val] : doc.at("soft_masks").items()) {
                const int idx = std::stoi(key);
                mp.soft[idx] = Tensor::from_vector(val.get<std::vector<double>>(), true);
                mp.hard[idx] = std::vector<double>(mp.soft[idx].size(), 1.0);
            }
            ck.masks = std::move(mp);
        }
        if (doc.contains("plan")) {
            PrunePlan plan;
            for (const auto& [key, val] : doc.at("plan").items())
                plan.keep[std::stoi(key)] = val.get<std::vector<int>>();
            ck.plan = std::move(plan);
        }
        return ck;
    } catch (const json::exception& e) {
        throw IoError("malformed checkpoint " + path + ": " + e.what());
    } catch (const DimensionError& e) {
        throw IoError("checkpoint " + path + " does not match its spec: " + e.what());
    }
}

}  // namespace admp
