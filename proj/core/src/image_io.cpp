#include "sapr/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

namespace sapr {

void export_image(const Tensor& image, const std::filesystem::path& path) {
    if (image.rank() != 3 || (image.extent(0) != 1 && image.extent(0) != 3))
        throw ShapeError("export_image: expected [1×H×W] or [3×H×W], got " +
                         shape_to_string(image.shape()));
    const std::size_t c = image.extent(0), h = image.extent(1), w = image.extent(2);
    const auto v = image.values();
    for (double x : v)
        if (!(x >= 0.0 && x <= 255.0))
            throw ContractError("export_image: pixel value " + std::to_string(x) +
                                " outside [0,255]");

    std::string out;
    out += (c == 3 ? "P6\n" : "P5\n");
    out += std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    out.reserve(out.size() + c * h * w);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t ch = 0; ch < c; ++ch)
                out.push_back(static_cast<char>(
                    static_cast<unsigned char>(std::lround(v[(ch * h + y) * w + x]))));

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write image " + path.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw IoError("short write to image " + path.string());
}

namespace {

// Skips PNM whitespace and '#' comments, then reads one unsigned decimal.
std::size_t read_pnm_int(const std::string& data, std::size_t& pos, const std::string& what) {
    for (;;) {
        while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
        if (pos < data.size() && data[pos] == '#') {
            while (pos < data.size() && data[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    if (pos >= data.size() || !std::isdigit(static_cast<unsigned char>(data[pos])))
        throw FormatError(what + ": expected integer at byte offset " + std::to_string(pos));
    std::size_t value = 0;
    while (pos < data.size() && std::isdigit(static_cast<unsigned char>(data[pos]))) {
        value = value * 10 + static_cast<std::size_t>(data[pos] - '0');
        ++pos;
    }
    return value;
}

} // namespace

Tensor import_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image " + path.string());
    std::string data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    const std::string what = "image " + path.filename().string();
    if (data.size() < 2 || data[0] != 'P' || (data[1] != '5' && data[1] != '6'))
        throw FormatError(what + ": bad magic at byte offset 0 (expected P5 or P6)");
    const std::size_t channels = data[1] == '6' ? 3 : 1;
    std::size_t pos = 2;
    const std::size_t w = read_pnm_int(data, pos, what);
    const std::size_t h = read_pnm_int(data, pos, what);
    const std::size_t maxval = read_pnm_int(data, pos, what);
    if (maxval != 255) throw FormatError(what + ": unsupported maxval " + std::to_string(maxval));
    if (pos >= data.size() || !std::isspace(static_cast<unsigned char>(data[pos])))
        throw FormatError(what + ": missing header terminator at byte offset " + std::to_string(pos));
    ++pos; // single whitespace byte separates header from pixels
    const std::size_t need = channels * h * w;
    if (data.size() - pos < need)
        throw FormatError(what + ": truncated pixel data at byte offset " + std::to_string(data.size()));

    std::vector<double> pixels(need);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t ch = 0; ch < channels; ++ch)
                pixels[(ch * h + y) * w + x] =
                    static_cast<double>(static_cast<unsigned char>(data[pos + (y * w + x) * channels + ch]));
    return Tensor::from_vector({channels, h, w}, std::move(pixels));
}

void export_delta_image(const Tensor& delta, const std::filesystem::path& path) {
    const auto v = delta.values();
    double amp = 0.0;
    for (double x : v) amp = std::max(amp, std::abs(x));
    if (amp == 0.0) amp = 1.0;
    std::vector<double> mapped(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double m = 127.5 + v[i] * (127.5 / amp);
        mapped[i] = std::clamp(m, 0.0, 255.0);
    }
    export_image(Tensor::from_vector(delta.shape(), std::move(mapped)), path);
}

} // namespace sapr
