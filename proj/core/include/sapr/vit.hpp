#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sapr/restructure.hpp"
#include "sapr/tensor.hpp"

namespace sapr {

struct ViTConfig {
    std::size_t image_size = 32;
    std::size_t patch_size = 4;
    std::size_t channels = 3;
    std::size_t embed_dim = 64;
    std::size_t num_heads = 4;
    std::size_t num_blocks = 4;
    std::size_t mlp_ratio = 4;
    std::size_t num_classes = 8;

    std::size_t num_patches() const { return (image_size / patch_size) * (image_size / patch_size); }
    std::size_t seq_len() const { return num_patches() + 1; }
    std::size_t head_dim() const { return embed_dim / num_heads; }
    std::size_t patch_dim() const { return channels * patch_size * patch_size; }
    void validate() const;

    bool operator==(const ViTConfig&) const = default;
};

struct AttentionWeights {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct BlockWeights {
    Tensor ln1_gain, ln1_bias;
    AttentionWeights attn;
    Tensor ln2_gain, ln2_bias;
    Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

/// Models consume raw pixels on the 0-255 scale and apply this fixed affine
/// map as their first op.
Tensor normalize_pixels(const Tensor& image);

/// Pre-norm ViT classifier with a restructuring hook in every attention
/// layer. Row 0 of the token sequence is the class token throughout.
class ViTModel {
public:
    static ViTModel random_init(const ViTConfig& config, std::uint64_t seed);

    /// Policy-parameterized forward pass. An enabled policy must have been
    /// sampled for this pass (gates stay frozen across the paired backward).
    Tensor forward(const Tensor& image, const RestructurePolicy& policy) const;

    /// Plain inference forward: no restructuring machinery on the path.
    Tensor forward(const Tensor& image) const;

    std::size_t predict(const Tensor& image) const;

    const ViTConfig& config() const { return config_; }
    std::vector<std::pair<std::string, Tensor>> named_parameters();
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    void set_requires_grad(bool value);
    static constexpr const char* kArchTag = "vit";

    // Weight access for the per-op entry points below.
    const Tensor& patch_weight() const { return patch_w_; }
    const Tensor& patch_bias() const { return patch_b_; }
    const Tensor& class_token() const { return cls_; }
    const Tensor& positional_embedding() const { return pos_; }
    const std::vector<BlockWeights>& blocks() const { return blocks_; }

private:
    ViTConfig config_;
    Tensor patch_w_, patch_b_; // [patch_dim×d], [d]
    Tensor cls_;               // [1×d]
    Tensor pos_;               // [(N+1)×d]
    std::vector<BlockWeights> blocks_;
    Tensor final_ln_gain_, final_ln_bias_;
    Tensor head_w_, head_b_; // [d×K], [K]

    friend ViTModel vit_from_parameters(const ViTConfig&,
                                        const std::vector<std::pair<std::string, Tensor>>&);
};

/// Normalizes, splits into patches, projects, prepends the class token and
/// adds positional embeddings: [C×S×S] → [(N+1)×d].
Tensor patch_embed(const Tensor& image, const ViTModel& model);

/// One multi-head self-attention layer. With the gate open, the token rows
/// feeding the Q/K/V projections are reordered by `permutation` first
/// (present iff the gate is open).
Tensor attention_forward(const Tensor& tokens, const AttentionWeights& weights,
                         std::size_t num_heads, bool gate_open,
                         const std::vector<std::size_t>* permutation);

/// -log softmax(logits)[label].
Tensor cross_entropy_loss(const Tensor& logits, std::size_t label);

std::size_t argmax_index(const Tensor& logits);

/// Rebuilds a model from checkpoint parameters (names must match
/// named_parameters exactly).
ViTModel vit_from_parameters(const ViTConfig& config,
                             const std::vector<std::pair<std::string, Tensor>>& params);

} // namespace sapr
