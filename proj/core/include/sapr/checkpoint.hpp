#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sapr/tensor.hpp"
#include "sapr/transfer.hpp"
#include "sapr/vit.hpp"

namespace sapr {

/// Versioned binary checkpoint: magic "SAPRCKPT", u32 LE format version,
/// architecture tag, config record (JSON), then named little-endian f64
/// tensors. Round trips are bit-exact.
struct CheckpointPayload {
    std::string architecture;
    std::string config_json;
    std::vector<std::pair<std::string, Tensor>> params;
};

inline constexpr char kCheckpointMagic[8] = {'S', 'A', 'P', 'R', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const CheckpointPayload& payload, const std::filesystem::path& path);
CheckpointPayload read_checkpoint(const std::filesystem::path& path);

/// Architecture tag of a checkpoint without loading the tensors.
std::string checkpoint_architecture(const std::filesystem::path& path);

void save_checkpoint(const ViTModel& model, const std::filesystem::path& path);
void save_checkpoint(const CnnModel& model, const std::filesystem::path& path);
void save_checkpoint(const MlpModel& model, const std::filesystem::path& path);

ViTModel load_vit_checkpoint(const std::filesystem::path& path);
CnnModel load_cnn_checkpoint(const std::filesystem::path& path);
MlpModel load_mlp_checkpoint(const std::filesystem::path& path);
TransferModel load_transfer_checkpoint(const std::filesystem::path& path);

} // namespace sapr
