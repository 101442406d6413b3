#include "sapr/restructure.hpp"

#include <string>

#include "sapr/rng.hpp"

namespace sapr {

const char* gate_mode_name(GateMode mode) {
    return mode == GateMode::uniform ? "uniform" : "gaussian";
}

GateMode gate_mode_from_name(const std::string& name) {
    if (name == "uniform") return GateMode::uniform;
    if (name == "gaussian") return GateMode::gaussian;
    throw ConfigError("unknown gate mode '" + name + "' (expected uniform or gaussian)");
}

RestructurePolicy::RestructurePolicy(double threshold, std::size_t num_layers, GateMode mode,
                                     std::uint64_t seed)
    : threshold_(threshold), num_layers_(num_layers), mode_(mode), seed_(seed), enabled_(true) {
    if (mode == GateMode::uniform && (threshold < 0.0 || threshold > 1.0))
        throw ConfigError("restructure threshold must lie in [0,1] in uniform mode, got " +
                          std::to_string(threshold));
}

RestructurePolicy RestructurePolicy::disabled(std::size_t num_layers) {
    RestructurePolicy p(0.0, num_layers, GateMode::uniform, 0);
    p.enabled_ = false;
    p.sampled_ = true;
    p.gates_.assign(num_layers, LayerGate{});
    return p;
}

void RestructurePolicy::sample_gates(std::size_t num_patches, std::uint64_t counter) {
    if (!enabled_) return;
    gates_.assign(num_layers_, LayerGate{});
    RngStream base(seed_, {counter});
    for (std::size_t l = 0; l < num_layers_; ++l) {
        RngStream layer_stream = base.derive(l);
        LayerGate& g = gates_[l];
        g.draw = mode_ == GateMode::uniform ? layer_stream.uniform01() : layer_stream.normal();
        g.open = g.draw <= threshold_;
        if (g.open) {
            g.permutation = layer_stream.permutation(num_patches);
            for (std::size_t& v : g.permutation) ++v; // patch slots -> token indices 1..N
        }
    }
    sampled_ = true;
}

const LayerGate& RestructurePolicy::gate(std::size_t layer) const {
    if (!sampled_) throw ContractError("restructure policy queried before sample_gates");
    if (layer >= gates_.size())
        throw ContractError("gate index " + std::to_string(layer) + " out of range, policy has " +
                            std::to_string(gates_.size()) + " layers");
    return gates_[layer];
}

Tensor restructure(const Tensor& tokens, std::span<const std::size_t> permutation) {
    if (tokens.rank() != 2 || tokens.extent(0) < 2)
        throw ShapeError("restructure: expected [(N+1)×d] token matrix with N >= 1, got " +
                         shape_to_string(tokens.shape()));
    const std::size_t num_patches = tokens.extent(0) - 1;
    if (permutation.size() != num_patches)
        throw ContractError("restructure: permutation length " + std::to_string(permutation.size()) +
                            " does not match patch count " + std::to_string(num_patches));
    std::vector<bool> seen(num_patches, false);
    for (std::size_t v : permutation) {
        if (v < 1 || v > num_patches)
            throw ContractError("restructure: permutation entry " + std::to_string(v) +
                                " outside token range 1.." + std::to_string(num_patches));
        if (seen[v - 1])
            throw ContractError("restructure: permutation repeats token " + std::to_string(v));
        seen[v - 1] = true;
    }
    std::vector<std::size_t> rows(num_patches + 1);
    rows[0] = 0;
    for (std::size_t i = 0; i < num_patches; ++i) rows[i + 1] = permutation[i];
    return gather_rows(tokens, rows);
}

} // namespace sapr
