#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sapr/tensor.hpp"

namespace sapr {

enum class GateMode { uniform, gaussian };

const char* gate_mode_name(GateMode mode);
GateMode gate_mode_from_name(const std::string& name);

/// One attention layer's restructuring decision for the current forward pass.
struct LayerGate {
    double draw = 0.0;
    bool open = false;
    /// Token indices 1..N, present only when open: output token i+1 reads
    /// input token permutation[i].
    std::vector<std::size_t> permutation;
};

/// Per-layer gate sampling state for patch restructuring.
///
/// Holds the threshold P, the gate mode, and the most recently sampled gate
/// set {p^1..p^n} with one patch permutation per open layer. Gates must be
/// resampled before every forward pass; sampling is keyed by an explicit
/// counter so that parallel attack workers reproduce identical draws from
/// (seed, counter) alone, regardless of scheduling.
class RestructurePolicy {
public:
    /// uniform mode: gate l opens iff u^l <= P with u^l ~ U(0,1), so P is the
    /// per-layer open probability. gaussian mode: p^l ~ N(0,1), opens iff
    /// p^l <= P.
    RestructurePolicy(double threshold, std::size_t num_layers, GateMode mode,
                      std::uint64_t seed);

    /// Policy that never opens a gate and needs no sampling.
    static RestructurePolicy disabled(std::size_t num_layers);

    /// Draws all n gates and one independent uniform permutation of 1..N per
    /// open layer. Distinct counters give independent draws; identical
    /// (seed, counter) pairs reproduce identical state.
    void sample_gates(std::size_t num_patches, std::uint64_t counter);

    bool enabled() const { return enabled_; }
    bool sampled() const { return sampled_; }
    double threshold() const { return threshold_; }
    GateMode mode() const { return mode_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t num_layers() const { return num_layers_; }
    const LayerGate& gate(std::size_t layer) const;

private:
    double threshold_ = 0.0;
    std::size_t num_layers_ = 0;
    GateMode mode_ = GateMode::uniform;
    std::uint64_t seed_ = 0;
    bool enabled_ = false;
    bool sampled_ = false;
    std::vector<LayerGate> gates_;
};

/// Reorders the patch rows of a token sequence [(N+1)×d]: row 0 (the class
/// token) stays fixed, output row i = input row permutation[i-1] for
/// i in 1..N. permutation must be a bijection on 1..N. Differentiable; the
/// backward pass scatters gradients through the inverse permutation.
Tensor restructure(const Tensor& tokens, std::span<const std::size_t> permutation);

} // namespace sapr
