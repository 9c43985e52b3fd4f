#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "csg/errors.hpp"
#include "csg/tensor.hpp"

namespace csg {

enum class Dtype : std::uint8_t { f32 = 1, f64 = 2 };

// Container layout: magic "CSGT", u16 version = 1, u8 dtype, u8 rank (4 or 5),
// rank x u32 dims, then the payload. All integers and scalars little-endian,
// payload row-major with the last index fastest. Rank-5 files are slice
// corpora with dim0 = slice count.
namespace io_detail {

constexpr char kMagic[4] = {'C', 'S', 'G', 'T'};
constexpr std::uint16_t kVersion = 1;
constexpr std::int64_t kMaxElements = std::int64_t{1} << 33;

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw io_error(path + ": cannot open for reading");
    }

    std::uint8_t u8() {
        char c;
        if (!in_.get(c)) fail("truncated header");
        return static_cast<std::uint8_t>(c);
    }

    std::uint16_t u16() {
        std::uint16_t lo = u8(), hi = u8();
        return static_cast<std::uint16_t>(lo | (hi << 8));
    }

    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }

    void bytes(char* dst, std::size_t n) {
        if (!in_.read(dst, static_cast<std::streamsize>(n))) fail("truncated payload");
    }

    bool at_eof() {
        in_.peek();
        return in_.eof();
    }

    [[noreturn]] void fail(const std::string& what) const { throw io_error(path_ + ": " + what); }

private:
    std::string path_;
    std::ifstream in_;
};

struct Header {
    Dtype dtype;
    std::uint8_t rank;
    std::vector<std::int64_t> dims;
    std::int64_t elements;
};

inline Header read_header(Reader& r) {
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) r.fail("bad magic");
    const std::uint16_t version = r.u16();
    if (version != kVersion) r.fail("unsupported version " + std::to_string(version));
    const std::uint8_t dtype = r.u8();
    if (dtype != 1 && dtype != 2) r.fail("unknown dtype " + std::to_string(dtype));
    const std::uint8_t rank = r.u8();
    if (rank != 4 && rank != 5) r.fail("unsupported rank " + std::to_string(rank));

    Header h;
    h.dtype = static_cast<Dtype>(dtype);
    h.rank = rank;
    h.elements = 1;
    for (int i = 0; i < rank; ++i) {
        const std::uint32_t d = r.u32();
        if (d == 0) r.fail("zero dimension");
        h.dims.push_back(static_cast<std::int64_t>(d));
        h.elements *= static_cast<std::int64_t>(d);
        if (h.elements > kMaxElements) r.fail("dimension overflow");
    }
    return h;
}

inline std::vector<double> read_payload(Reader& r, const Header& h) {
    std::vector<double> values(static_cast<std::size_t>(h.elements));
    const std::size_t width = (h.dtype == Dtype::f32) ? 4 : 8;
    std::vector<char> buf(static_cast<std::size_t>(h.elements) * width);
    r.bytes(buf.data(), buf.size());
    for (std::int64_t i = 0; i < h.elements; ++i) {
        double v;
        if (h.dtype == Dtype::f32) {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b) {
                bits |= static_cast<std::uint32_t>(
                            static_cast<std::uint8_t>(buf[static_cast<std::size_t>(i) * 4 + b]))
                        << (8 * b);
            }
            v = static_cast<double>(std::bit_cast<float>(bits));
        } else {
            std::uint64_t bits = 0;
            for (int b = 0; b < 8; ++b) {
                bits |= static_cast<std::uint64_t>(
                            static_cast<std::uint8_t>(buf[static_cast<std::size_t>(i) * 8 + b]))
                        << (8 * b);
            }
            v = std::bit_cast<double>(bits);
        }
        if (!std::isfinite(v)) r.fail("non-finite value in payload");
        values[static_cast<std::size_t>(i)] = v;
    }
    return values;
}

inline void append_payload(std::string& out, const std::vector<double>& values, Dtype dtype) {
    for (double v : values) {
        if (dtype == Dtype::f32) {
            put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        } else {
            put_u64(out, std::bit_cast<std::uint64_t>(v));
        }
    }
}

inline std::string header_bytes(Dtype dtype, const std::vector<std::int64_t>& dims) {
    std::string out;
    out.append(kMagic, 4);
    put_u16(out, kVersion);
    out.push_back(static_cast<char>(dtype));
    out.push_back(static_cast<char>(dims.size()));
    for (std::int64_t d : dims) put_u32(out, static_cast<std::uint32_t>(d));
    return out;
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error(path + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error(path + ": write failed");
}

}  // namespace io_detail

/// Write a single rank-4 tensor. f64 payloads round-trip bit-exactly.
inline void write_tensor_file(const std::string& path, const Tensor4& t,
                              Dtype dtype = Dtype::f64) {
    std::string bytes = io_detail::header_bytes(
        dtype, {t.shape()[0], t.shape()[1], t.shape()[2], t.shape()[3]});
    io_detail::append_payload(bytes, t.data(), dtype);
    io_detail::write_file(path, bytes);
}

inline Tensor4 read_tensor_file(const std::string& path) {
    io_detail::Reader r(path);
    const io_detail::Header h = io_detail::read_header(r);
    if (h.rank != 4) r.fail("expected a rank-4 tensor, found rank-" + std::to_string(h.rank));
    std::vector<double> values = io_detail::read_payload(r, h);
    return Tensor4({h.dims[0], h.dims[1], h.dims[2], h.dims[3]}, std::move(values));
}

/// Write a slice corpus as a rank-5 stack; all slices must share one shape.
inline void write_corpus_file(const std::string& path, const std::vector<Tensor4>& slices,
                              Dtype dtype = Dtype::f64) {
    if (slices.empty()) throw value_error(path + ": refusing to write an empty corpus");
    const Shape4 s = slices.front().shape();
    for (const Tensor4& t : slices) {
        if (t.shape() != s) {
            throw shape_error(path + ": corpus slices disagree on shape, " + shape_to_string(s) +
                              " vs " + shape_to_string(t.shape()));
        }
    }
    std::string bytes = io_detail::header_bytes(
        dtype, {static_cast<std::int64_t>(slices.size()), s[0], s[1], s[2], s[3]});
    for (const Tensor4& t : slices) io_detail::append_payload(bytes, t.data(), dtype);
    io_detail::write_file(path, bytes);
}

inline std::vector<Tensor4> read_corpus_file(const std::string& path) {
    io_detail::Reader r(path);
    const io_detail::Header h = io_detail::read_header(r);
    if (h.rank != 5) r.fail("expected a rank-5 corpus, found rank-" + std::to_string(h.rank));
    const Shape4 shape = {h.dims[1], h.dims[2], h.dims[3], h.dims[4]};
    const std::int64_t per_slice = shape_volume(shape);
    std::vector<double> values = io_detail::read_payload(r, h);
    std::vector<Tensor4> slices;
    slices.reserve(static_cast<std::size_t>(h.dims[0]));
    for (std::int64_t i = 0; i < h.dims[0]; ++i) {
        std::vector<double> chunk(values.begin() + i * per_slice,
                                  values.begin() + (i + 1) * per_slice);
        slices.emplace_back(shape, std::move(chunk));
    }
    return slices;
}

}  // namespace csg
