#pragma once

#include <filesystem>

#include "sapr/tensor.hpp"

namespace sapr {

/// Writes [3×H×W] as binary PPM (P6, maxval 255) or [1×H×W] as binary PGM
/// (P5). Header is byte-exact "P6\n<w> <h>\n255\n". Values must lie in
/// [0,255]; they are rounded to the nearest byte.
void export_image(const Tensor& image, const std::filesystem::path& path);

/// Parses a binary P5/P6 file back into a [C×H×W] tensor on the 0-255 scale.
Tensor import_image(const std::filesystem::path& path);

/// Exports a signed perturbation amplitude-normalized around mid-gray:
/// v = 127.5 + δ·127.5/max|δ|.
void export_delta_image(const Tensor& delta, const std::filesystem::path& path);

} // namespace sapr
