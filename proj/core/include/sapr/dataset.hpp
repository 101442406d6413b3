#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sapr/tensor.hpp"

namespace sapr {

struct Dataset {
    std::size_t channels = 3;
    std::size_t image_size = 32;
    std::size_t num_classes = 0;
    std::string split;
    std::vector<double> pixels; // count × channels × S × S, values on the 0-255 grid
    std::vector<std::size_t> labels;

    std::size_t count() const { return labels.size(); }
    Tensor image(std::size_t index) const;
    std::size_t label(std::size_t index) const { return labels.at(index); }
};

/// Renders parametric shape classes (bars, checkers, disk, ring, cross,
/// gradient, diagonal stripes) with per-image colour, position/scale jitter
/// and pixel noise, quantized to the integer 0-255 grid. Supports up to 8
/// classes; deterministic given the seed.
Dataset generate_synthetic_dataset(std::size_t num_classes, std::size_t per_class,
                                   std::size_t image_size, std::uint64_t seed,
                                   std::size_t channels = 3, std::string split = "train");

/// Loads an IDX image/label pair (big-endian magic 0x00000803 / 0x00000801),
/// rescaling to image_size by nearest neighbour and replicating the single
/// channel.
Dataset load_idx_dataset(const std::filesystem::path& images_path,
                         const std::filesystem::path& labels_path, std::size_t image_size = 32,
                         std::size_t channels = 3, std::string split = "train");

} // namespace sapr
