#include "sapr/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace sapr {

namespace {

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;
constexpr double kRange = 255.0;
constexpr std::array<double, 5> kLevelWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

std::array<double, kWindow> gaussian_kernel() {
    std::array<double, kWindow> k{};
    const double c = (kWindow - 1) / 2.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < kWindow; ++i) {
        const double d = static_cast<double>(i) - c;
        k[i] = std::exp(-(d * d) / (2.0 * kSigma * kSigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

struct Plane {
    std::size_t h = 0, w = 0;
    std::vector<double> v;
};

// Separable Gaussian filter, valid region only: output is (h-10)×(w-10).
Plane gauss_valid(const Plane& p) {
    const auto k = gaussian_kernel();
    Plane tmp{p.h, p.w - kWindow + 1, std::vector<double>(p.h * (p.w - kWindow + 1))};
    for (std::size_t y = 0; y < p.h; ++y)
        for (std::size_t x = 0; x < tmp.w; ++x) {
            double s = 0.0;
            for (std::size_t i = 0; i < kWindow; ++i) s += k[i] * p.v[y * p.w + x + i];
            tmp.v[y * tmp.w + x] = s;
        }
    Plane out{p.h - kWindow + 1, tmp.w, std::vector<double>((p.h - kWindow + 1) * tmp.w)};
    for (std::size_t y = 0; y < out.h; ++y)
        for (std::size_t x = 0; x < out.w; ++x) {
            double s = 0.0;
            for (std::size_t i = 0; i < kWindow; ++i) s += k[i] * tmp.v[(y + i) * tmp.w + x];
            out.v[y * out.w + x] = s;
        }
    return out;
}

Plane downsample2(const Plane& p) {
    Plane out{p.h / 2, p.w / 2, {}};
    out.v.resize(out.h * out.w);
    for (std::size_t y = 0; y < out.h; ++y)
        for (std::size_t x = 0; x < out.w; ++x)
            out.v[y * out.w + x] = 0.25 * (p.v[2 * y * p.w + 2 * x] + p.v[2 * y * p.w + 2 * x + 1] +
                                           p.v[(2 * y + 1) * p.w + 2 * x] +
                                           p.v[(2 * y + 1) * p.w + 2 * x + 1]);
    return out;
}

Plane elementwise_product(const Plane& a, const Plane& b) {
    Plane out{a.h, a.w, std::vector<double>(a.v.size())};
    for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
    return out;
}

struct LevelScore {
    double contrast_structure = 0.0;
    double luminance = 0.0;
};

LevelScore ssim_level(const Plane& a, const Plane& b) {
    const double c1 = (kK1 * kRange) * (kK1 * kRange);
    const double c2 = (kK2 * kRange) * (kK2 * kRange);
    const Plane mu_a = gauss_valid(a);
    const Plane mu_b = gauss_valid(b);
    const Plane raw_aa = gauss_valid(elementwise_product(a, a));
    const Plane raw_bb = gauss_valid(elementwise_product(b, b));
    const Plane raw_ab = gauss_valid(elementwise_product(a, b));

    double cs_sum = 0.0, lum_sum = 0.0;
    for (std::size_t i = 0; i < mu_a.v.size(); ++i) {
        const double ma = mu_a.v[i], mb = mu_b.v[i];
        const double va = raw_aa.v[i] - ma * ma;
        const double vb = raw_bb.v[i] - mb * mb;
        const double cov = raw_ab.v[i] - ma * mb;
        cs_sum += (2.0 * cov + c2) / (va + vb + c2);
        lum_sum += (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    }
    // Plain division keeps the identity case exact: N ones sum to N and N/N
    // is exactly 1.0.
    const double count = static_cast<double>(mu_a.v.size());
    return {cs_sum / count, lum_sum / count};
}

double ms_ssim_plane(Plane a, Plane b) {
    // Levels limited so the coarsest scale still fits the window.
    std::size_t levels = 1;
    {
        std::size_t h = a.h, w = a.w;
        while (levels < kLevelWeights.size() && h / 2 >= kWindow && w / 2 >= kWindow) {
            ++levels;
            h /= 2;
            w /= 2;
        }
    }
    double weight_sum = 0.0;
    for (std::size_t l = 0; l < levels; ++l) weight_sum += kLevelWeights[l];

    double score = 1.0;
    for (std::size_t l = 0; l < levels; ++l) {
        const LevelScore s = ssim_level(a, b);
        const double w = kLevelWeights[l] / weight_sum;
        if (l + 1 < levels) {
            score *= std::pow(std::max(s.contrast_structure, 0.0), w);
            a = downsample2(a);
            b = downsample2(b);
        } else {
            score *= std::pow(std::max(s.contrast_structure * s.luminance, 0.0), w);
        }
    }
    return std::min(score, 1.0);
}

} // namespace

double ms_ssim(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError("ms_ssim: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
    std::size_t channels, h, w;
    if (a.rank() == 2) {
        channels = 1;
        h = a.extent(0);
        w = a.extent(1);
    } else if (a.rank() == 3) {
        channels = a.extent(0);
        h = a.extent(1);
        w = a.extent(2);
    } else {
        throw ShapeError("ms_ssim: expected [H×W] or [C×H×W], got " + shape_to_string(a.shape()));
    }
    if (h < kWindow || w < kWindow)
        throw ShapeError("ms_ssim: image " + shape_to_string(a.shape()) +
                         " smaller than the 11×11 window");

    const auto av = a.values();
    const auto bv = b.values();
    double sum = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
        Plane pa{h, w, std::vector<double>(av.begin() + c * h * w, av.begin() + (c + 1) * h * w)};
        Plane pb{h, w, std::vector<double>(bv.begin() + c * h * w, bv.begin() + (c + 1) * h * w)};
        sum += ms_ssim_plane(std::move(pa), std::move(pb));
    }
    return sum / static_cast<double>(channels);
}

} // namespace sapr
