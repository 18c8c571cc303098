#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "pixelnet/errors.hpp"
#include "pixelnet/tensor.hpp"

namespace pixelnet {

// PXT1 tensor container: magic "PXT1", u8 dtype code (0=f32, 1=f64), u8 ndim,
// ndim x u32 little-endian extents, then the row-major little-endian payload.

template <typename T>
constexpr std::uint8_t pxt_dtype_code() {
    if constexpr (std::is_same_v<T, float>) {
        return 0;
    } else {
        return 1;
    }
}

template <typename T>
void write_pxt(std::ostream& os, const Tensor<T>& t) {
    os.write("PXT1", 4);
    const std::uint8_t dtype = pxt_dtype_code<T>();
    const std::uint8_t ndim = static_cast<std::uint8_t>(t.ndim());
    os.put(static_cast<char>(dtype));
    os.put(static_cast<char>(ndim));
    for (int i = 0; i < t.ndim(); ++i) {
        const std::uint32_t e = static_cast<std::uint32_t>(t.dim(i));
        os.write(reinterpret_cast<const char*>(&e), 4);
    }
    os.write(reinterpret_cast<const char*>(t.data()), t.bytes());
    if (!os) throw DataError("failed writing PXT1 stream");
}

template <typename T>
void write_pxt(const std::string& path, const Tensor<T>& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for write: " + path);
    write_pxt(f, t);
}

// Reads a PXT1 tensor, converting the stored dtype to T when they differ.
template <typename T>
Tensor<T> read_pxt(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "PXT1", 4) != 0) throw DataError("bad PXT1 magic");
    const int dtype = is.get();
    const int ndim = is.get();
    if (dtype < 0 || dtype > 1 || ndim < 0 || ndim > 8) throw DataError("corrupt PXT1 header");
    std::vector<int> shape(static_cast<std::size_t>(ndim));
    std::int64_t n = 1;
    for (int i = 0; i < ndim; ++i) {
        std::uint32_t e = 0;
        is.read(reinterpret_cast<char*>(&e), 4);
        shape[static_cast<std::size_t>(i)] = static_cast<int>(e);
        n *= e;
    }
    if (!is) throw DataError("truncated PXT1 header");
    Tensor<T> out(shape);
    if (dtype == pxt_dtype_code<T>()) {
        is.read(reinterpret_cast<char*>(out.data()), out.bytes());
    } else if (dtype == 0) {
        std::vector<float> buf(static_cast<std::size_t>(n));
        is.read(reinterpret_cast<char*>(buf.data()), n * 4);
        for (std::int64_t i = 0; i < n; ++i) out[i] = static_cast<T>(buf[static_cast<std::size_t>(i)]);
    } else {
        std::vector<double> buf(static_cast<std::size_t>(n));
        is.read(reinterpret_cast<char*>(buf.data()), n * 8);
        for (std::int64_t i = 0; i < n; ++i) out[i] = static_cast<T>(buf[static_cast<std::size_t>(i)]);
    }
    if (!is) throw DataError("truncated PXT1 payload");
    return out;
}

template <typename T>
Tensor<T> read_pxt(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open: " + path);
    return read_pxt<T>(f);
}

// Binary PPM (P6, maxval 255) for images in [0,1] and binary PGM (P5) for
// label maps.
void write_ppm(const std::string& path, const Tensor<float>& image);
Tensor<float> read_ppm(const std::string& path);

void write_pgm(const std::string& path, const std::vector<std::uint8_t>& bytes, int h, int w);
std::vector<std::uint8_t> read_pgm(const std::string& path, int& h, int& w);

}  // namespace pixelnet
