#include "vsal/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

namespace vsal {

namespace {

int read_pnm_token(std::istream& in) {
    // Skips whitespace and '#' comments between header fields.
    int c = in.peek();
    while (c != EOF) {
        if (std::isspace(c)) {
            in.get();
        } else if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else {
            break;
        }
        c = in.peek();
    }
    int v = -1;
    in >> v;
    if (!in) throw std::runtime_error("malformed PNM header");
    return v;
}

std::uint8_t quantize(double v) {
    double s = std::clamp(v, 0.0, 1.0) * 255.0;
    return static_cast<std::uint8_t>(std::lround(s));
}

}  // namespace

void write_pgm(const Tensor& gray, std::ostream& out) {
    if (gray.rank() != 2) throw std::invalid_argument("PGM image must be rank 2");
    const int h = gray.shape()[0], w = gray.shape()[1];
    out << "P5\n" << w << " " << h << "\n255\n";
    for (std::size_t i = 0; i < gray.size(); ++i) {
        std::uint8_t b = quantize(gray[i]);
        out.write(reinterpret_cast<const char*>(&b), 1);
    }
}

Tensor read_pgm(std::istream& in) {
    char m0 = 0, m1 = 0;
    in.get(m0).get(m1);
    if (m0 != 'P' || m1 != '5') throw std::runtime_error("not a binary PGM (P5) stream");
    const int w = read_pnm_token(in);
    const int h = read_pnm_token(in);
    const int maxval = read_pnm_token(in);
    if (w < 1 || h < 1 || maxval != 255) throw std::runtime_error("unsupported PGM header");
    in.get();  // single whitespace after maxval
    Tensor t = Tensor::zeros({h, w});
    for (std::size_t i = 0; i < t.size(); ++i) {
        char b;
        if (!in.get(b)) throw std::runtime_error("truncated PGM payload");
        t[i] = static_cast<double>(static_cast<std::uint8_t>(b)) / 255.0;
    }
    return t;
}

void write_pgm_file(const Tensor& gray, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    write_pgm(gray, out);
}

Tensor read_pgm_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    return read_pgm(in);
}

void write_ppm(const Tensor& rgb, std::ostream& out) {
    if (rgb.rank() != 3 || rgb.shape()[0] != 3)
        throw std::invalid_argument("PPM image must be rank 3 with 3 channels");
    const int h = rgb.shape()[1], w = rgb.shape()[2];
    out << "P6\n" << w << " " << h << "\n255\n";
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t i = 0; i < plane; ++i)
        for (int ch = 0; ch < 3; ++ch) {
            std::uint8_t b = quantize(rgb[ch * plane + i]);
            out.write(reinterpret_cast<const char*>(&b), 1);
        }
}

Tensor read_ppm(std::istream& in) {
    char m0 = 0, m1 = 0;
    in.get(m0).get(m1);
    if (m0 != 'P' || m1 != '6') throw std::runtime_error("not a binary PPM (P6) stream");
    const int w = read_pnm_token(in);
    const int h = read_pnm_token(in);
    const int maxval = read_pnm_token(in);
    if (w < 1 || h < 1 || maxval != 255) throw std::runtime_error("unsupported PPM header");
    in.get();
    Tensor t = Tensor::zeros({3, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (std::size_t i = 0; i < plane; ++i)
        for (int ch = 0; ch < 3; ++ch) {
            char b;
            if (!in.get(b)) throw std::runtime_error("truncated PPM payload");
            t[ch * plane + i] = static_cast<double>(static_cast<std::uint8_t>(b)) / 255.0;
        }
    return t;
}

Tensor to_grayscale(const Tensor& rgb) {
    if (rgb.rank() == 2) return rgb;
    if (rgb.rank() != 3 || rgb.shape()[0] != 3)
        throw std::invalid_argument("expected rank-3 RGB tensor");
    const int h = rgb.shape()[1], w = rgb.shape()[2];
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensor g = Tensor::zeros({h, w});
    for (std::size_t i = 0; i < plane; ++i)
        g[i] = 0.299 * rgb[i] + 0.587 * rgb[plane + i] + 0.114 * rgb[2 * plane + i];
    return g;
}

Tensor resize_bilinear(const Tensor& gray, int out_h, int out_w) {
    if (gray.rank() != 2) throw std::invalid_argument("resize expects rank-2 image");
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize extents must be positive");
    const int h = gray.shape()[0], w = gray.shape()[1];
    Tensor out = Tensor::zeros({out_h, out_w});
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y0c = std::clamp(y0, 0, h - 1), y1c = std::clamp(y0 + 1, 0, h - 1);
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x0c = std::clamp(x0, 0, w - 1), x1c = std::clamp(x0 + 1, 0, w - 1);
            double top = gray.at({y0c, x0c}) * (1 - wx) + gray.at({y0c, x1c}) * wx;
            double bot = gray.at({y1c, x0c}) * (1 - wx) + gray.at({y1c, x1c}) * wx;
            out.at({y, x}) = top * (1 - wy) + bot * wy;
        }
    }
    return out;
}

}  // namespace vsal
