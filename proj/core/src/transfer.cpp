#include "sapr/transfer.hpp"

#include <cmath>
#include <map>

#include "node.hpp"
#include "sapr/rng.hpp"
#include "sapr/vit.hpp"

namespace sapr {

namespace {

Tensor he_normal(Shape shape, std::size_t fan_in, RngStream rng) {
    const double sigma = std::sqrt(2.0 / static_cast<double>(fan_in));
    std::vector<double> v(detail::shape_size(shape));
    for (double& x : v) x = rng.truncated_normal(sigma);
    return Tensor::from_vector(std::move(shape), std::move(v));
}

template <typename Model>
void restore_parameters(Model& m, const std::vector<std::pair<std::string, Tensor>>& params) {
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
}

} // namespace

// --- CNN ---------------------------------------------------------------

void CnnConfig::validate() const {
    if (image_size == 0 || channels == 0 || conv1_filters == 0 || conv2_filters == 0 ||
        hidden == 0 || num_classes < 2)
        throw ConfigError("cnn config: all extents must be positive and num_classes >= 2");
    if (image_size % 4 != 0)
        throw ConfigError("cnn config: image_size must be divisible by 4 for two pooling stages");
}

CnnModel CnnModel::random_init(const CnnConfig& config, std::uint64_t seed) {
    config.validate();
    CnnModel m;
    m.config_ = config;
    RngStream root(seed);
    const std::size_t flat = config.conv2_filters * (config.image_size / 4) * (config.image_size / 4);
    m.k1_ = he_normal({config.conv1_filters, config.channels, 3, 3}, config.channels * 9, root.derive(0));
    m.kb1_ = Tensor::zeros({config.conv1_filters});
    m.k2_ = he_normal({config.conv2_filters, config.conv1_filters, 3, 3}, config.conv1_filters * 9,
                      root.derive(1));
    m.kb2_ = Tensor::zeros({config.conv2_filters});
    m.w1_ = he_normal({flat, config.hidden}, flat, root.derive(2));
    m.b1_ = Tensor::zeros({config.hidden});
    m.w2_ = he_normal({config.hidden, config.num_classes}, config.hidden, root.derive(3));
    m.b2_ = Tensor::zeros({config.num_classes});
    return m;
}

Tensor CnnModel::forward(const Tensor& image) const {
    if (image.shape() != Shape{config_.channels, config_.image_size, config_.image_size})
        throw ShapeError("cnn forward: image shape " + shape_to_string(image.shape()) +
                         " does not match config");
    Tensor x = normalize_pixels(image);
    x = maxpool2(relu(conv2d(x, k1_, kb1_, 1)));
    x = maxpool2(relu(conv2d(x, k2_, kb2_, 1)));
    Tensor flat = reshape(x, {1, x.size()});
    Tensor hidden = relu(add_row_broadcast(matmul(flat, w1_), b1_));
    Tensor logits = add_row_broadcast(matmul(hidden, w2_), b2_);
    return reshape(logits, {config_.num_classes});
}

std::size_t CnnModel::predict(const Tensor& image) const { return argmax_index(forward(image)); }

std::vector<std::pair<std::string, Tensor>> CnnModel::named_parameters() {
    return {{"conv1.k", k1_}, {"conv1.b", kb1_}, {"conv2.k", k2_}, {"conv2.b", kb2_},
            {"dense1.w", w1_}, {"dense1.b", b1_}, {"dense2.w", w2_}, {"dense2.b", b2_}};
}

std::vector<std::pair<std::string, Tensor>> CnnModel::named_parameters() const {
    return const_cast<CnnModel*>(this)->named_parameters();
}

void CnnModel::set_requires_grad(bool value) {
    for (auto& [name, t] : named_parameters()) t.node()->requires_grad = value;
}

CnnModel cnn_from_parameters(const CnnConfig& config,
                             const std::vector<std::pair<std::string, Tensor>>& params) {
    CnnModel m = CnnModel::random_init(config, 0);
    restore_parameters(m, params);
    return m;
}

// --- MLP ---------------------------------------------------------------

void MlpConfig::validate() const {
    if (image_size == 0 || channels == 0 || patch_size == 0 || channel_hidden == 0 ||
        num_classes < 2)
        throw ConfigError("mlp config: all extents must be positive and num_classes >= 2");
    if (image_size % patch_size != 0)
        throw ConfigError("mlp config: patch_size does not divide image_size");
}

MlpModel MlpModel::random_init(const MlpConfig& config, std::uint64_t seed) {
    config.validate();
    MlpModel m;
    m.config_ = config;
    RngStream root(seed);
    const std::size_t n = config.num_patches();
    m.channel_w_ = he_normal({config.patch_dim(), config.channel_hidden}, config.patch_dim(),
                             root.derive(0));
    m.channel_b_ = Tensor::zeros({config.channel_hidden});
    m.token_w_ = he_normal({n, n}, n, root.derive(1));
    m.token_b_ = Tensor::zeros({n});
    m.out_w_ = he_normal({config.channel_hidden * n, config.num_classes}, config.channel_hidden * n,
                         root.derive(2));
    m.out_b_ = Tensor::zeros({config.num_classes});
    return m;
}

Tensor MlpModel::forward(const Tensor& image) const {
    if (image.shape() != Shape{config_.channels, config_.image_size, config_.image_size})
        throw ShapeError("mlp forward: image shape " + shape_to_string(image.shape()) +
                         " does not match config");
    Tensor tokens = extract_patches(normalize_pixels(image), config_.patch_size); // [N×pd]
    Tensor mixed = relu(add_row_broadcast(matmul(tokens, channel_w_), channel_b_)); // [N×ch]
    Tensor across = transpose(mixed);                                              // [ch×N]
    Tensor token_mixed = relu(add_row_broadcast(matmul(across, token_w_), token_b_)); // [ch×N]
    Tensor flat = reshape(token_mixed, {1, token_mixed.size()});
    Tensor logits = add_row_broadcast(matmul(flat, out_w_), out_b_);
    return reshape(logits, {config_.num_classes});
}

std::size_t MlpModel::predict(const Tensor& image) const { return argmax_index(forward(image)); }

std::vector<std::pair<std::string, Tensor>> MlpModel::named_parameters() {
    return {{"channel.w", channel_w_}, {"channel.b", channel_b_}, {"token.w", token_w_},
            {"token.b", token_b_},     {"out.w", out_w_},         {"out.b", out_b_}};
}

std::vector<std::pair<std::string, Tensor>> MlpModel::named_parameters() const {
    return const_cast<MlpModel*>(this)->named_parameters();
}

void MlpModel::set_requires_grad(bool value) {
    for (auto& [name, t] : named_parameters()) t.node()->requires_grad = value;
}

MlpModel mlp_from_parameters(const MlpConfig& config,
                             const std::vector<std::pair<std::string, Tensor>>& params) {
    MlpModel m = MlpModel::random_init(config, 0);
    restore_parameters(m, params);
    return m;
}

// --- variant helpers ------------------------------------------------------

Tensor transfer_forward(const Tensor& image, const TransferModel& model) {
    return std::visit([&](const auto& m) { return m.forward(image); }, model);
}

std::size_t transfer_predict(const Tensor& image, const TransferModel& model) {
    return std::visit([&](const auto& m) { return m.predict(image); }, model);
}

std::string transfer_architecture(const TransferModel& model) {
    return std::visit([](const auto& m) { return std::string(m.kArchTag); }, model);
}

} // namespace sapr
