#include "pixelnet/io.hpp"

#include <algorithm>
#include <cmath>

namespace pixelnet {

namespace {

// Skips whitespace and '#' comment lines between PNM header tokens.
int next_pnm_int(std::istream& is) {
    int c = is.get();
    while (is && (std::isspace(c) || c == '#')) {
        if (c == '#') {
            while (is && c != '\n') c = is.get();
        }
        c = is.get();
    }
    int v = 0;
    bool any = false;
    while (is && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        any = true;
        c = is.get();
    }
    if (!any) throw DataError("malformed PNM header");
    return v;
}

}  // namespace

void write_ppm(const std::string& path, const Tensor<float>& image) {
    if (image.ndim() != 3 || image.dim(0) != 3) throw ConfigError("write_ppm expects image[3,H,W]");
    const int h = image.dim(1), w = image.dim(2);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for write: " + path);
    f << "P6\n" << w << " " << h << "\n255\n";
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                float v = image.at(c, y, x);
                v = std::clamp(v, 0.0f, 1.0f);
                row[static_cast<std::size_t>(x) * 3 + c] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0f));
            }
        }
        f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!f) throw DataError("failed writing " + path);
}

Tensor<float> read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    char p = static_cast<char>(f.get()), six = static_cast<char>(f.get());
    if (p != 'P' || six != '6') throw DataError("not a binary PPM: " + path);
    const int w = next_pnm_int(f);
    const int h = next_pnm_int(f);
    const int maxval = next_pnm_int(f);
    if (maxval != 255) throw DataError("unsupported PPM maxval in " + path);
    Tensor<float> image({3, h, w});
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!f) throw DataError("truncated PPM: " + path);
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                image.at(c, y, x) = row[static_cast<std::size_t>(x) * 3 + c] / 255.0f;
            }
        }
    }
    return image;
}

void write_pgm(const std::string& path, const std::vector<std::uint8_t>& bytes, int h, int w) {
    if (static_cast<std::int64_t>(bytes.size()) != static_cast<std::int64_t>(h) * w) {
        throw ConfigError("write_pgm size mismatch");
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for write: " + path);
    f << "P5\n" << w << " " << h << "\n255\n";
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("failed writing " + path);
}

std::vector<std::uint8_t> read_pgm(const std::string& path, int& h, int& w) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    char p = static_cast<char>(f.get()), five = static_cast<char>(f.get());
    if (p != 'P' || five != '5') throw DataError("not a binary PGM: " + path);
    w = next_pnm_int(f);
    h = next_pnm_int(f);
    const int maxval = next_pnm_int(f);
    if (maxval != 255) throw DataError("unsupported PGM maxval in " + path);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(h) * w);
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("truncated PGM: " + path);
    return bytes;
}

}  // namespace pixelnet
