#pragma once

#include "sapr/tensor.hpp"

namespace sapr {

/// Multi-scale structural similarity on [C×H×W] (or [H×W]) images with a
/// 0-255 dynamic range. 11×11 Gaussian window (σ=1.5), canonical level
/// weights renormalized to the level count the image size supports (coarsest
/// scale must still fit the window), luminance applied at the coarsest level.
/// Symmetric in its arguments; 1.0 exactly for identical inputs.
double ms_ssim(const Tensor& a, const Tensor& b);

} // namespace sapr
