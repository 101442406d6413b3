#include "sapr/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <numbers>

#include "sapr/rng.hpp"

namespace sapr {

Tensor Dataset::image(std::size_t index) const {
    if (index >= count()) throw ContractError("dataset image index out of range");
    const std::size_t stride = channels * image_size * image_size;
    return Tensor::from_span({channels, image_size, image_size},
                             std::span<const double>(pixels.data() + index * stride, stride));
}

namespace {

struct ShapeParams {
    double fg[3];
    double bg[3];
    double noise_sigma;
};

// One rendered image; geometry value in [0,1] blends bg->fg per pixel.
void render_image(std::size_t cls, std::size_t s, std::size_t channels, RngStream& rng,
                  double* out) {
    ShapeParams p{};
    for (int c = 0; c < 3; ++c) {
        p.fg[c] = rng.uniform(150.0, 255.0);
        p.bg[c] = rng.uniform(0.0, 80.0);
    }
    p.noise_sigma = rng.uniform(2.0, 6.0);
    const double sd = static_cast<double>(s);

    // Per-class geometry parameters, drawn in a fixed order.
    const double period = rng.uniform(0.15, 0.25) * sd;  // stripes/checker cell
    const double phase = rng.uniform(0.0, period);
    const double cx = 0.5 * sd + rng.uniform(-0.15, 0.15) * sd;
    const double cy = 0.5 * sd + rng.uniform(-0.15, 0.15) * sd;
    const double radius = rng.uniform(0.22, 0.34) * sd;
    const double thickness = rng.uniform(0.08, 0.14) * sd;
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);

    auto stripe = [](double t, double period) {
        const double m = std::fmod(t, period);
        return (m < 0 ? m + period : m) < 0.5 * period ? 1.0 : 0.0;
    };

    std::vector<double> mask(s * s, 0.0);
    for (std::size_t y = 0; y < s; ++y) {
        for (std::size_t x = 0; x < s; ++x) {
            const double fx = static_cast<double>(x) + 0.5;
            const double fy = static_cast<double>(y) + 0.5;
            double v = 0.0;
            switch (cls) {
                case 0: v = stripe(fy + phase, period); break;                       // horizontal bars
                case 1: v = stripe(fx + phase, period); break;                       // vertical bars
                case 2: {                                                            // checkerboard
                    const auto gx = static_cast<long>((fx + phase) / (0.5 * period));
                    const auto gy = static_cast<long>((fy + phase) / (0.5 * period));
                    v = ((gx + gy) % 2 + 2) % 2 == 0 ? 1.0 : 0.0;
                    break;
                }
                case 3: {                                                            // filled disk
                    const double d = std::hypot(fx - cx, fy - cy);
                    v = d <= radius ? 1.0 : 0.0;
                    break;
                }
                case 4: {                                                            // ring
                    const double d = std::hypot(fx - cx, fy - cy);
                    v = std::abs(d - radius) <= thickness ? 1.0 : 0.0;
                    break;
                }
                case 5: {                                                            // cross
                    v = (std::abs(fx - cx) <= thickness || std::abs(fy - cy) <= thickness) ? 1.0
                                                                                           : 0.0;
                    break;
                }
                case 6: {                                                            // linear gradient
                    const double t = ((fx - 0.5 * sd) * std::cos(angle) +
                                      (fy - 0.5 * sd) * std::sin(angle)) / sd + 0.5;
                    v = std::clamp(t, 0.0, 1.0);
                    break;
                }
                case 7: v = stripe(fx + fy + phase, period * 1.4142); break;         // diagonal stripes
                default: break;
            }
            mask[y * s + x] = v;
        }
    }

    for (std::size_t c = 0; c < channels; ++c) {
        const double fg = p.fg[c % 3];
        const double bg = p.bg[c % 3];
        for (std::size_t i = 0; i < s * s; ++i) {
            double v = bg + (fg - bg) * mask[i] + rng.normal() * p.noise_sigma;
            out[c * s * s + i] = std::nearbyint(std::clamp(v, 0.0, 255.0));
        }
    }
}

} // namespace

Dataset generate_synthetic_dataset(std::size_t num_classes, std::size_t per_class,
                                   std::size_t image_size, std::uint64_t seed,
                                   std::size_t channels, std::string split) {
    if (num_classes < 2) throw ConfigError("synthetic dataset needs at least 2 classes");
    if (num_classes > 8) throw ConfigError("synthetic dataset supports at most 8 classes");
    if (per_class == 0 || image_size == 0 || channels == 0)
        throw ConfigError("synthetic dataset: per_class, image_size and channels must be positive");

    Dataset d;
    d.channels = channels;
    d.image_size = image_size;
    d.num_classes = num_classes;
    d.split = std::move(split);
    const std::size_t stride = channels * image_size * image_size;
    d.pixels.resize(num_classes * per_class * stride);
    d.labels.resize(num_classes * per_class);

    std::size_t index = 0;
    for (std::size_t cls = 0; cls < num_classes; ++cls) {
        for (std::size_t i = 0; i < per_class; ++i, ++index) {
            RngStream rng(seed, {cls, i});
            render_image(cls, image_size, channels, rng, d.pixels.data() + index * stride);
            d.labels[index] = cls;
        }
    }
    return d;
}

namespace {

std::uint32_t read_u32_be(const std::vector<unsigned char>& buf, std::size_t offset,
                          const std::string& what) {
    if (offset + 4 > buf.size())
        throw FormatError("IDX " + what + ": truncated at byte offset " + std::to_string(offset));
    return (static_cast<std::uint32_t>(buf[offset]) << 24) |
           (static_cast<std::uint32_t>(buf[offset + 1]) << 16) |
           (static_cast<std::uint32_t>(buf[offset + 2]) << 8) |
           static_cast<std::uint32_t>(buf[offset + 3]);
}

std::string hex_u32(std::uint32_t v) {
    char buf[11];
    std::snprintf(buf, sizeof(buf), "0x%08x", v);
    return buf;
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

Dataset load_idx_dataset(const std::filesystem::path& images_path,
                         const std::filesystem::path& labels_path, std::size_t image_size,
                         std::size_t channels, std::string split) {
    const auto img_buf = read_file(images_path);
    const auto lbl_buf = read_file(labels_path);
    if (img_buf.empty()) throw FormatError("IDX images: empty file at byte offset 0");
    if (lbl_buf.empty()) throw FormatError("IDX labels: empty file at byte offset 0");

    const std::uint32_t img_magic = read_u32_be(img_buf, 0, "images");
    if (img_magic != 0x00000803u)
        throw FormatError("IDX images: bad magic " + hex_u32(img_magic) +
                          " at byte offset 0 (expected 0x00000803)");
    const std::uint32_t lbl_magic = read_u32_be(lbl_buf, 0, "labels");
    if (lbl_magic != 0x00000801u)
        throw FormatError("IDX labels: bad magic " + hex_u32(lbl_magic) +
                          " at byte offset 0 (expected 0x00000801)");

    const std::uint32_t count = read_u32_be(img_buf, 4, "images");
    const std::uint32_t rows = read_u32_be(img_buf, 8, "images");
    const std::uint32_t cols = read_u32_be(img_buf, 12, "images");
    const std::uint32_t lbl_count = read_u32_be(lbl_buf, 4, "labels");
    if (count != lbl_count)
        throw FormatError("IDX: image count " + std::to_string(count) + " != label count " +
                          std::to_string(lbl_count));
    const std::size_t need = 16 + static_cast<std::size_t>(count) * rows * cols;
    if (img_buf.size() < need)
        throw FormatError("IDX images: truncated at byte offset " + std::to_string(img_buf.size()) +
                          " (need " + std::to_string(need) + ")");
    if (lbl_buf.size() < 8 + static_cast<std::size_t>(count))
        throw FormatError("IDX labels: truncated at byte offset " + std::to_string(lbl_buf.size()));

    Dataset d;
    d.channels = channels;
    d.image_size = image_size;
    d.split = std::move(split);
    d.labels.resize(count);
    const std::size_t stride = channels * image_size * image_size;
    d.pixels.resize(static_cast<std::size_t>(count) * stride);

    std::size_t max_label = 0;
    for (std::uint32_t n = 0; n < count; ++n) {
        d.labels[n] = lbl_buf[8 + n];
        max_label = std::max(max_label, d.labels[n]);
        const unsigned char* src = img_buf.data() + 16 + static_cast<std::size_t>(n) * rows * cols;
        double* dst = d.pixels.data() + static_cast<std::size_t>(n) * stride;
        for (std::size_t y = 0; y < image_size; ++y) {
            const std::size_t sy = y * rows / image_size;
            for (std::size_t x = 0; x < image_size; ++x) {
                const std::size_t sx = x * cols / image_size;
                const double v = static_cast<double>(src[sy * cols + sx]);
                for (std::size_t c = 0; c < channels; ++c)
                    dst[c * image_size * image_size + y * image_size + x] = v;
            }
        }
    }
    d.num_classes = max_label + 1;
    return d;
}

} // namespace sapr
