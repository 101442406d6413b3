#include "sapr/vit.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "node.hpp"
#include "sapr/rng.hpp"

namespace sapr {

void ViTConfig::validate() const {
    if (image_size == 0 || patch_size == 0 || channels == 0 || embed_dim == 0 || num_heads == 0 ||
        num_blocks == 0 || mlp_ratio == 0 || num_classes < 2)
        throw ConfigError("vit config: all extents must be positive and num_classes >= 2");
    if (image_size % patch_size != 0)
        throw ConfigError("vit config: patch_size " + std::to_string(patch_size) +
                          " does not divide image_size " + std::to_string(image_size));
    if (embed_dim % num_heads != 0)
        throw ConfigError("vit config: num_heads " + std::to_string(num_heads) +
                          " does not divide embed_dim " + std::to_string(embed_dim));
}

Tensor normalize_pixels(const Tensor& image) { return scale(image, 1.0 / 255.0); }

namespace {

Tensor trunc_normal(Shape shape, double sigma, RngStream rng) {
    std::vector<double> v(detail::shape_size(shape));
    for (double& x : v) x = rng.truncated_normal(sigma);
    return Tensor::from_vector(std::move(shape), std::move(v));
}

} // namespace

ViTModel ViTModel::random_init(const ViTConfig& config, std::uint64_t seed) {
    config.validate();
    ViTModel m;
    m.config_ = config;
    RngStream root(seed);
    std::uint64_t key = 0;
    auto next = [&]() { return root.derive(key++); };

    const std::size_t d = config.embed_dim;
    const double sigma = 0.02;
    m.patch_w_ = trunc_normal({config.patch_dim(), d}, sigma, next());
    m.patch_b_ = Tensor::zeros({d});
    m.cls_ = trunc_normal({1, d}, sigma, next());
    m.pos_ = trunc_normal({config.seq_len(), d}, sigma, next());
    for (std::size_t b = 0; b < config.num_blocks; ++b) {
        BlockWeights blk;
        blk.ln1_gain = Tensor::ones({d});
        blk.ln1_bias = Tensor::zeros({d});
        blk.attn.wq = trunc_normal({d, d}, sigma, next());
        blk.attn.bq = Tensor::zeros({d});
        blk.attn.wk = trunc_normal({d, d}, sigma, next());
        blk.attn.bk = Tensor::zeros({d});
        blk.attn.wv = trunc_normal({d, d}, sigma, next());
        blk.attn.bv = Tensor::zeros({d});
        blk.attn.wo = trunc_normal({d, d}, sigma, next());
        blk.attn.bo = Tensor::zeros({d});
        blk.ln2_gain = Tensor::ones({d});
        blk.ln2_bias = Tensor::zeros({d});
        blk.mlp_w1 = trunc_normal({d, d * config.mlp_ratio}, sigma, next());
        blk.mlp_b1 = Tensor::zeros({d * config.mlp_ratio});
        blk.mlp_w2 = trunc_normal({d * config.mlp_ratio, d}, sigma, next());
        blk.mlp_b2 = Tensor::zeros({d});
        m.blocks_.push_back(std::move(blk));
    }
    m.final_ln_gain_ = Tensor::ones({d});
    m.final_ln_bias_ = Tensor::zeros({d});
    m.head_w_ = trunc_normal({d, config.num_classes}, sigma, next());
    m.head_b_ = Tensor::zeros({config.num_classes});
    return m;
}

Tensor patch_embed(const Tensor& image, const ViTModel& model) {
    const ViTConfig& cfg = model.config();
    if (image.shape() != Shape{cfg.channels, cfg.image_size, cfg.image_size})
        throw ShapeError("patch_embed: image shape " + shape_to_string(image.shape()) +
                         " does not match config [" + std::to_string(cfg.channels) + "x" +
                         std::to_string(cfg.image_size) + "x" + std::to_string(cfg.image_size) + "]");
    Tensor patches = extract_patches(normalize_pixels(image), cfg.patch_size);
    Tensor embedded = add_row_broadcast(matmul(patches, model.patch_weight()), model.patch_bias());
    const Tensor parts[] = {model.class_token(), embedded};
    Tensor tokens = concat_rows(parts);
    return add(tokens, model.positional_embedding());
}

Tensor attention_forward(const Tensor& tokens, const AttentionWeights& weights,
                         std::size_t num_heads, bool gate_open,
                         const std::vector<std::size_t>* permutation) {
    if (gate_open != (permutation != nullptr))
        throw ContractError("attention_forward: permutation must be present iff the gate is open");
    Tensor x = gate_open ? restructure(tokens, *permutation) : tokens;
    const std::size_t d = x.extent(1);
    if (d % num_heads != 0)
        throw ShapeError("attention_forward: num_heads does not divide embed dim");
    const std::size_t dk = d / num_heads;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

    Tensor q = add_row_broadcast(matmul(x, weights.wq), weights.bq);
    Tensor k = add_row_broadcast(matmul(x, weights.wk), weights.bk);
    Tensor v = add_row_broadcast(matmul(x, weights.wv), weights.bv);

    std::vector<Tensor> heads;
    heads.reserve(num_heads);
    for (std::size_t h = 0; h < num_heads; ++h) {
        Tensor qh = slice_cols(q, h * dk, (h + 1) * dk);
        Tensor kh = slice_cols(k, h * dk, (h + 1) * dk);
        Tensor vh = slice_cols(v, h * dk, (h + 1) * dk);
        Tensor attn = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt_dk));
        heads.push_back(matmul(attn, vh));
    }
    Tensor merged = concat_cols(heads);
    return add_row_broadcast(matmul(merged, weights.wo), weights.bo);
}

namespace {

Tensor block_forward(const Tensor& tokens, const BlockWeights& blk, std::size_t num_heads,
                     bool gate_open, const std::vector<std::size_t>* permutation) {
    Tensor normed = layer_norm(tokens, blk.ln1_gain, blk.ln1_bias);
    Tensor attended = attention_forward(normed, blk.attn, num_heads, gate_open, permutation);
    Tensor mid = add(tokens, attended);
    Tensor normed2 = layer_norm(mid, blk.ln2_gain, blk.ln2_bias);
    Tensor hidden = gelu(add_row_broadcast(matmul(normed2, blk.mlp_w1), blk.mlp_b1));
    Tensor mlp_out = add_row_broadcast(matmul(hidden, blk.mlp_w2), blk.mlp_b2);
    return add(mid, mlp_out);
}

} // namespace

Tensor ViTModel::forward(const Tensor& image, const RestructurePolicy& policy) const {
    if (policy.enabled()) {
        if (policy.num_layers() != config_.num_blocks)
            throw ContractError("policy layer count " + std::to_string(policy.num_layers()) +
                                " does not match model blocks " + std::to_string(config_.num_blocks));
        if (!policy.sampled())
            throw ContractError("vit forward: policy gates were not sampled for this pass");
    }
    Tensor tokens = patch_embed(image, *this);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const LayerGate& gate = policy.gate(b);
        tokens = block_forward(tokens, blocks_[b], config_.num_heads, gate.open,
                               gate.open ? &gate.permutation : nullptr);
    }
    tokens = layer_norm(tokens, final_ln_gain_, final_ln_bias_);
    const std::size_t cls_row[] = {0};
    Tensor cls = gather_rows(tokens, cls_row);
    Tensor logits = add_row_broadcast(matmul(cls, head_w_), head_b_);
    return reshape(logits, {config_.num_classes});
}

Tensor ViTModel::forward(const Tensor& image) const {
    Tensor tokens = patch_embed(image, *this);
    for (const BlockWeights& blk : blocks_)
        tokens = block_forward(tokens, blk, config_.num_heads, false, nullptr);
    tokens = layer_norm(tokens, final_ln_gain_, final_ln_bias_);
    const std::size_t cls_row[] = {0};
    Tensor cls = gather_rows(tokens, cls_row);
    Tensor logits = add_row_broadcast(matmul(cls, head_w_), head_b_);
    return reshape(logits, {config_.num_classes});
}

std::size_t ViTModel::predict(const Tensor& image) const { return argmax_index(forward(image)); }

std::size_t argmax_index(const Tensor& logits) {
    const auto v = logits.values();
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

Tensor cross_entropy_loss(const Tensor& logits, std::size_t label) {
    if (logits.rank() != 1)
        throw ShapeError("cross_entropy_loss: logits must be rank 1, got " +
                         shape_to_string(logits.shape()));
    const std::size_t k = logits.size();
    if (label >= k)
        throw ContractError("cross_entropy_loss: label " + std::to_string(label) +
                            " out of range for " + std::to_string(k) + " classes");
    const auto lv = logits.values();
    double mx = lv[0];
    for (double v : lv) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : lv) sum += std::exp(v - mx);
    const double loss = mx + std::log(sum) - lv[label];

    detail::NodePtr parent = logits.node();
    return detail::make_node(
        {1}, {loss}, {parent},
        [parent, label, mx, sum, k](const detail::Node&, std::span<const double> g, GradSink& sink) {
            auto gl = sink.grad_of_node(parent.get());
            for (std::size_t i = 0; i < k; ++i) {
                const double soft = std::exp(parent->value[i] - mx) / sum;
                gl[i] += g[0] * (soft - (i == label ? 1.0 : 0.0));
            }
        });
}

std::vector<std::pair<std::string, Tensor>> ViTModel::named_parameters() {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("patch.w", patch_w_);
    out.emplace_back("patch.b", patch_b_);
    out.emplace_back("cls", cls_);
    out.emplace_back("pos", pos_);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const std::string p = "block" + std::to_string(b) + ".";
        BlockWeights& blk = blocks_[b];
        out.emplace_back(p + "ln1.g", blk.ln1_gain);
        out.emplace_back(p + "ln1.b", blk.ln1_bias);
        out.emplace_back(p + "attn.wq", blk.attn.wq);
        out.emplace_back(p + "attn.bq", blk.attn.bq);
        out.emplace_back(p + "attn.wk", blk.attn.wk);
        out.emplace_back(p + "attn.bk", blk.attn.bk);
        out.emplace_back(p + "attn.wv", blk.attn.wv);
        out.emplace_back(p + "attn.bv", blk.attn.bv);
        out.emplace_back(p + "attn.wo", blk.attn.wo);
        out.emplace_back(p + "attn.bo", blk.attn.bo);
        out.emplace_back(p + "ln2.g", blk.ln2_gain);
        out.emplace_back(p + "ln2.b", blk.ln2_bias);
        out.emplace_back(p + "mlp.w1", blk.mlp_w1);
        out.emplace_back(p + "mlp.b1", blk.mlp_b1);
        out.emplace_back(p + "mlp.w2", blk.mlp_w2);
        out.emplace_back(p + "mlp.b2", blk.mlp_b2);
    }
    out.emplace_back("final_ln.g", final_ln_gain_);
    out.emplace_back("final_ln.b", final_ln_bias_);
    out.emplace_back("head.w", head_w_);
    out.emplace_back("head.b", head_b_);
    return out;
}

std::vector<std::pair<std::string, Tensor>> ViTModel::named_parameters() const {
    return const_cast<ViTModel*>(this)->named_parameters();
}

void ViTModel::set_requires_grad(bool value) {
    for (auto& [name, t] : named_parameters()) t.node()->requires_grad = value;
}

ViTModel vit_from_parameters(const ViTConfig& config,
                             const std::vector<std::pair<std::string, Tensor>>& params) {
    ViTModel m = ViTModel::random_init(config, 0);
    std::map<std::string, Tensor> lookup(params.begin(), params.end());
    for (auto& [name, t] : m.named_parameters()) {
        auto it = lookup.find(name);
        if (it == lookup.end()) throw FormatError("checkpoint missing parameter '" + name + "'");
        if (it->second.shape() != t.shape())
            throw FormatError("checkpoint parameter '" + name + "' has shape " +
                              shape_to_string(it->second.shape()) + ", model wants " +
                              shape_to_string(t.shape()));
        auto dst = t.values_mut();
        auto src = it->second.values();
        std::copy(src.begin(), src.end(), dst.begin());
        lookup.erase(it);
    }
    if (!lookup.empty())
        throw FormatError("checkpoint has unknown parameter '" + lookup.begin()->first + "'");
    return m;
}

} // namespace sapr
