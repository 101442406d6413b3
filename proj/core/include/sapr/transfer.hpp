#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sapr/tensor.hpp"

namespace sapr {

struct CnnConfig {
    std::size_t image_size = 32;
    std::size_t channels = 3;
    std::size_t conv1_filters = 8;
    std::size_t conv2_filters = 16;
    std::size_t hidden = 64;
    std::size_t num_classes = 8;
    void validate() const;
    bool operator==(const CnnConfig&) const = default;
};

/// Two 3×3 conv + pool stages feeding two dense layers. Inference-only during
/// evaluation; trainable like any other model.
class CnnModel {
public:
    static CnnModel random_init(const CnnConfig& config, std::uint64_t seed);
    Tensor forward(const Tensor& image) const;
    std::size_t predict(const Tensor& image) const;
    const CnnConfig& config() const { return config_; }
    std::vector<std::pair<std::string, Tensor>> named_parameters();
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    void set_requires_grad(bool value);
    static constexpr const char* kArchTag = "cnn";

private:
    CnnConfig config_;
    Tensor k1_, kb1_, k2_, kb2_;
    Tensor w1_, b1_, w2_, b2_;
    friend CnnModel cnn_from_parameters(const CnnConfig&,
                                        const std::vector<std::pair<std::string, Tensor>>&);
};

struct MlpConfig {
    std::size_t image_size = 32;
    std::size_t channels = 3;
    std::size_t patch_size = 4;
    std::size_t channel_hidden = 32;
    std::size_t num_classes = 8;
    void validate() const;
    std::size_t num_patches() const { return (image_size / patch_size) * (image_size / patch_size); }
    std::size_t patch_dim() const { return channels * patch_size * patch_size; }
    bool operator==(const MlpConfig&) const = default;
};

/// Patch-flattening mixer: a channel-mixing dense layer, a token-mixing dense
/// layer over the transposed sequence, and a dense classification layer.
class MlpModel {
public:
    static MlpModel random_init(const MlpConfig& config, std::uint64_t seed);
    Tensor forward(const Tensor& image) const;
    std::size_t predict(const Tensor& image) const;
    const MlpConfig& config() const { return config_; }
    std::vector<std::pair<std::string, Tensor>> named_parameters();
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    void set_requires_grad(bool value);
    static constexpr const char* kArchTag = "mlp";

private:
    MlpConfig config_;
    Tensor channel_w_, channel_b_; // [patch_dim×ch], [ch]
    Tensor token_w_, token_b_;     // [N×N], [N]
    Tensor out_w_, out_b_;         // [(ch·N)×K], [K]
    friend MlpModel mlp_from_parameters(const MlpConfig&,
                                        const std::vector<std::pair<std::string, Tensor>>&);
};

/// Black-box stand-ins with structures unlike the white-box ViT.
using TransferModel = std::variant<CnnModel, MlpModel>;

Tensor transfer_forward(const Tensor& image, const TransferModel& model);
std::size_t transfer_predict(const Tensor& image, const TransferModel& model);
std::string transfer_architecture(const TransferModel& model);

CnnModel cnn_from_parameters(const CnnConfig& config,
                             const std::vector<std::pair<std::string, Tensor>>& params);
MlpModel mlp_from_parameters(const MlpConfig& config,
                             const std::vector<std::pair<std::string, Tensor>>& params);

} // namespace sapr
