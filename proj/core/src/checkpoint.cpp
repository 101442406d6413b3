#include "sapr/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace sapr {

namespace {

// All multi-byte fields are serialized little-endian through value-based
// shifts, independent of host byte order.
void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(out, bits);
}

void put_string(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

class Reader {
public:
    Reader(std::string data, std::string what) : data_(std::move(data)), what_(std::move(what)) {}

    std::size_t offset() const { return offset_; }

    void require(std::size_t n) const {
        if (offset_ + n > data_.size())
            throw FormatError(what_ + ": truncated at byte offset " + std::to_string(data_.size()) +
                              " (need " + std::to_string(offset_ + n) + " bytes)");
    }

    std::uint32_t u32() {
        require(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[offset_ + i])) << (8 * i);
        offset_ += 4;
        return v;
    }

    std::uint64_t u64() {
        require(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[offset_ + i])) << (8 * i);
        offset_ += 8;
        return v;
    }

    double f64() {
        std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    std::string str() {
        const std::uint32_t n = u32();
        require(n);
        std::string s = data_.substr(offset_, n);
        offset_ += n;
        return s;
    }

    void raw(char* dst, std::size_t n) {
        require(n);
        std::memcpy(dst, data_.data() + offset_, n);
        offset_ += n;
    }

    bool done() const { return offset_ == data_.size(); }

private:
    std::string data_;
    std::string what_;
    std::size_t offset_ = 0;
};

Reader open_reader(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return Reader(std::move(data), "checkpoint " + path.filename().string());
}

nlohmann::json parse_config(const std::string& json, const char* arch) {
    auto parsed = nlohmann::json::parse(json, nullptr, false);
    if (parsed.is_discarded())
        throw FormatError(std::string("checkpoint: unparsable ") + arch + " config record");
    return parsed;
}

} // namespace

void write_checkpoint(const CheckpointPayload& payload, const std::filesystem::path& path) {
    std::string out;
    out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    put_u32(out, kCheckpointVersion);
    put_string(out, payload.architecture);
    put_string(out, payload.config_json);
    put_u32(out, static_cast<std::uint32_t>(payload.params.size()));
    for (const auto& [name, tensor] : payload.params) {
        put_string(out, name);
        put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
        for (std::size_t e : tensor.shape()) put_u64(out, e);
        for (double v : tensor.values()) put_f64(out, v);
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write checkpoint " + path.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("short write to checkpoint " + path.string());
}

CheckpointPayload read_checkpoint(const std::filesystem::path& path) {
    Reader r = open_reader(path);
    char magic[8];
    r.raw(magic, sizeof(magic));
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw FormatError("checkpoint " + path.filename().string() +
                          ": bad magic at byte offset 0 (expected SAPRCKPT)");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint " + path.filename().string() + ": unsupported format version " +
                          std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
    CheckpointPayload payload;
    payload.architecture = r.str();
    payload.config_json = r.str();
    const std::uint32_t count = r.u32();
    payload.params.reserve(count);
    for (std::uint32_t p = 0; p < count; ++p) {
        std::string name = r.str();
        const std::uint32_t rank = r.u32();
        Shape shape(rank);
        std::size_t total = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            shape[d] = static_cast<std::size_t>(r.u64());
            total *= shape[d];
        }
        std::vector<double> data(total);
        for (std::size_t i = 0; i < total; ++i) data[i] = r.f64();
        payload.params.emplace_back(std::move(name), Tensor::from_vector(std::move(shape), std::move(data)));
    }
    if (!r.done())
        throw FormatError("checkpoint " + path.filename().string() + ": trailing bytes at offset " +
                          std::to_string(r.offset()));
    return payload;
}

std::string checkpoint_architecture(const std::filesystem::path& path) {
    Reader r = open_reader(path);
    char magic[8];
    r.raw(magic, sizeof(magic));
    if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw FormatError("checkpoint " + path.filename().string() +
                          ": bad magic at byte offset 0 (expected SAPRCKPT)");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw FormatError("checkpoint " + path.filename().string() + ": unsupported format version " +
                          std::to_string(version));
    return r.str();
}

namespace {

void check_architecture(const CheckpointPayload& payload, const char* expected) {
    if (payload.architecture != expected)
        throw FormatError("checkpoint architecture tag mismatch: expected '" + std::string(expected) +
                          "', got '" + payload.architecture + "'");
}

} // namespace

void save_checkpoint(const ViTModel& model, const std::filesystem::path& path) {
    const ViTConfig& c = model.config();
    nlohmann::json cfg{{"image_size", c.image_size}, {"patch_size", c.patch_size},
                       {"channels", c.channels},     {"embed_dim", c.embed_dim},
                       {"num_heads", c.num_heads},   {"num_blocks", c.num_blocks},
                       {"mlp_ratio", c.mlp_ratio},   {"num_classes", c.num_classes}};
    write_checkpoint({ViTModel::kArchTag, cfg.dump(), model.named_parameters()}, path);
}

void save_checkpoint(const CnnModel& model, const std::filesystem::path& path) {
    const CnnConfig& c = model.config();
    nlohmann::json cfg{{"image_size", c.image_size},       {"channels", c.channels},
                       {"conv1_filters", c.conv1_filters}, {"conv2_filters", c.conv2_filters},
                       {"hidden", c.hidden},               {"num_classes", c.num_classes}};
    write_checkpoint({CnnModel::kArchTag, cfg.dump(), model.named_parameters()}, path);
}

void save_checkpoint(const MlpModel& model, const std::filesystem::path& path) {
    const MlpConfig& c = model.config();
    nlohmann::json cfg{{"image_size", c.image_size}, {"channels", c.channels},
                       {"patch_size", c.patch_size}, {"channel_hidden", c.channel_hidden},
                       {"num_classes", c.num_classes}};
    write_checkpoint({MlpModel::kArchTag, cfg.dump(), model.named_parameters()}, path);
}

ViTModel load_vit_checkpoint(const std::filesystem::path& path) {
    CheckpointPayload payload = read_checkpoint(path);
    check_architecture(payload, ViTModel::kArchTag);
    auto cfg = parse_config(payload.config_json, "vit");
    ViTConfig c;
    c.image_size = cfg.at("image_size").get<std::size_t>();
    c.patch_size = cfg.at("patch_size").get<std::size_t>();
    c.channels = cfg.at("channels").get<std::size_t>();
    c.embed_dim = cfg.at("embed_dim").get<std::size_t>();
    c.num_heads = cfg.at("num_heads").get<std::size_t>();
    c.num_blocks = cfg.at("num_blocks").get<std::size_t>();
    c.mlp_ratio = cfg.at("mlp_ratio").get<std::size_t>();
    c.num_classes = cfg.at("num_classes").get<std::size_t>();
    return vit_from_parameters(c, payload.params);
}

CnnModel load_cnn_checkpoint(const std::filesystem::path& path) {
    CheckpointPayload payload = read_checkpoint(path);
    check_architecture(payload, CnnModel::kArchTag);
    auto cfg = parse_config(payload.config_json, "cnn");
    CnnConfig c;
    c.image_size = cfg.at("image_size").get<std::size_t>();
    c.channels = cfg.at("channels").get<std::size_t>();
    c.conv1_filters = cfg.at("conv1_filters").get<std::size_t>();
    c.conv2_filters = cfg.at("conv2_filters").get<std::size_t>();
    c.hidden = cfg.at("hidden").get<std::size_t>();
    c.num_classes = cfg.at("num_classes").get<std::size_t>();
    return cnn_from_parameters(c, payload.params);
}

MlpModel load_mlp_checkpoint(const std::filesystem::path& path) {
    CheckpointPayload payload = read_checkpoint(path);
    check_architecture(payload, MlpModel::kArchTag);
    auto cfg = parse_config(payload.config_json, "mlp");
    MlpConfig c;
    c.image_size = cfg.at("image_size").get<std::size_t>();
    c.channels = cfg.at("channels").get<std::size_t>();
    c.patch_size = cfg.at("patch_size").get<std::size_t>();
    c.channel_hidden = cfg.at("channel_hidden").get<std::size_t>();
    c.num_classes = cfg.at("num_classes").get<std::size_t>();
    return mlp_from_parameters(c, payload.params);
}

TransferModel load_transfer_checkpoint(const std::filesystem::path& path) {
    const std::string arch = checkpoint_architecture(path);
    if (arch == CnnModel::kArchTag) return load_cnn_checkpoint(path);
    if (arch == MlpModel::kArchTag) return load_mlp_checkpoint(path);
    throw FormatError("checkpoint " + path.filename().string() + ": architecture '" + arch +
                      "' is not a transfer model");
}

} // namespace sapr
