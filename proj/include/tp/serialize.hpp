#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>

#include "tp/errors.hpp"
#include "tp/tensor.hpp"

namespace tp {

/// Byte-level primitives shared by the checkpoint and container formats.
/// Everything on disk is little-endian regardless of host order; offsets are
/// tracked so format errors can name the exact byte.

struct ByteWriter {
    std::ofstream os;
    std::size_t offset = 0;

    explicit ByteWriter(const std::string& path) : os(path, std::ios::binary) {
        if (!os) throw FormatError("cannot open for writing: " + path, 0);
    }
    void bytes(const void* p, std::size_t n) {
        os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!os) throw FormatError("write failed", offset);
        offset += n;
    }
    void u32(std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
        bytes(b, 4);
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void magic(const char* m, std::size_t n) { bytes(m, n); }
};

struct ByteReader {
    std::ifstream is;
    std::size_t offset = 0;
    std::string path;

    explicit ByteReader(const std::string& p) : is(p, std::ios::binary), path(p) {
        if (!is) throw FormatError("cannot open for reading: " + p, 0);
    }
    void bytes(void* p, std::size_t n, const char* what) {
        const std::size_t at = offset;
        is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is.gcount()) != n)
            throw FormatError(std::string("truncated while reading ") + what, at);
        offset += n;
    }
    std::uint32_t u32(const char* what) {
        unsigned char b[4];
        bytes(b, 4, what);
        return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
               (std::uint32_t(b[3]) << 24);
    }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    void expect_magic(const char* m, std::size_t n, const char* format_name) {
        char buf[16];
        const std::size_t at = offset;
        bytes(buf, n, "magic");
        if (std::string(buf, n) != std::string(m, n))
            throw FormatError(std::string("bad magic, not a ") + format_name + " file", at);
    }
    bool at_eof() {
        is.peek();
        return is.eof();
    }
};

template <typename S>
void write_tensor(ByteWriter& w, const Mat<S>& m) {
    w.u32(2);
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) w.f32(static_cast<float>(m(i, j)));
}

template <typename S>
Mat<S> read_tensor(ByteReader& r, const char* what) {
    const std::size_t at = r.offset;
    const std::uint32_t rank = r.u32("tensor rank");
    if (rank != 2) throw FormatError(std::string("unsupported rank for ") + what, at);
    const std::uint32_t rows = r.u32("tensor rows");
    const std::uint32_t cols = r.u32("tensor cols");
    if (std::uint64_t(rows) * cols > (std::uint64_t(1) << 32))
        throw FormatError(std::string("tensor dimensions overflow for ") + what, at);
    Mat<S> m(rows, cols);
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<S>(r.f32(what));
    return m;
}

}  // namespace tp
