#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "critns/error.hpp"
#include "critns/spectral_field.hpp"

namespace critns {

/// Snapshot layout: "CRNS1", n_modes (u32), L (f64), field count (u32), then per field and component the
/// coefficients as little-endian float32 (re, im) pairs with modes in lexicographic order, each axis running
/// -n/2 .. n/2 - 1.
inline constexpr std::string_view snapshot_magic = "CRNS1";

namespace detail {

inline void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) b.push_back(static_cast<unsigned char>(v >> s));
}
inline void put_u64(std::vector<unsigned char>& b, std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) b.push_back(static_cast<unsigned char>(v >> s));
}
inline std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int s = 0, i = 0; s < 32; s += 8, ++i) v |= std::uint32_t(p[i]) << s;
    return v;
}
inline std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int s = 0, i = 0; s < 64; s += 8, ++i) v |= std::uint64_t(p[i]) << s;
    return v;
}

inline constexpr std::size_t snapshot_header_bytes = 5 + 4 + 8 + 4;

} // namespace detail

/// Serializes fields sharing one grid. Coefficients are rounded to float32.
inline std::vector<unsigned char> encode_snapshot(const std::vector<SpectralField>& fields) {
    if (fields.empty()) throw FormatError("encode_snapshot: no fields");
    const GridSpec& g = fields.front().grid();
    for (const auto& f : fields) f.require_same(fields.front());
    std::vector<unsigned char> b(snapshot_magic.begin(), snapshot_magic.end());
    const int n = g.n_modes();
    detail::put_u32(b, static_cast<std::uint32_t>(n));
    detail::put_u64(b, std::bit_cast<std::uint64_t>(g.box_length()));
    detail::put_u32(b, static_cast<std::uint32_t>(fields.size()));
    b.reserve(b.size() + fields.size() * 3 * g.points() * 8);
    for (const auto& f : fields)
        for (int c = 0; c < 3; ++c)
            for (int a = -n / 2; a < n / 2; ++a)
                for (int e = -n / 2; e < n / 2; ++e)
                    for (int d = -n / 2; d < n / 2; ++d) {
                        const Complex z = f.coeff(c, a, e, d);
                        detail::put_u32(b, std::bit_cast<std::uint32_t>(static_cast<float>(z.real())));
                        detail::put_u32(b, std::bit_cast<std::uint32_t>(static_cast<float>(z.imag())));
                    }
    return b;
}

/// Parses a snapshot; the grid's dealias fraction is not stored and is taken from the argument.
inline std::vector<SpectralField> decode_snapshot(const std::vector<unsigned char>& b,
                                                  double dealias_fraction = 2.0 / 3.0) {
    if (b.size() < detail::snapshot_header_bytes) throw FormatError("snapshot truncated: header incomplete");
    if (std::memcmp(b.data(), "CRNS", 4) != 0) throw FormatError("snapshot: bad magic");
    if (b[4] != '1') throw FormatError(std::string("snapshot: unsupported version '") + char(b[4]) + "'");
    const std::uint32_t n = detail::get_u32(b.data() + 5);
    const double L = std::bit_cast<double>(detail::get_u64(b.data() + 9));
    const std::uint32_t count = detail::get_u32(b.data() + 17);
    if (n < 8 || n % 2 != 0 || n > 4096) throw FormatError("snapshot: invalid n_modes " + std::to_string(n));
    if (!(L > 0.0) || !std::isfinite(L)) throw FormatError("snapshot: invalid box length");
    if (count == 0) throw FormatError("snapshot: zero field count");
    const GridSpec g(static_cast<int>(n), L, dealias_fraction);
    const std::size_t need = detail::snapshot_header_bytes + std::size_t(count) * 3 * g.points() * 8;
    if (b.size() < need) throw FormatError("snapshot truncated: expected " + std::to_string(need) + " bytes, got " +
                                           std::to_string(b.size()));
    if (b.size() > need) throw FormatError("snapshot: trailing bytes after coefficient block");
    std::vector<SpectralField> out;
    const unsigned char* p = b.data() + detail::snapshot_header_bytes;
    const int m = static_cast<int>(n);
    for (std::uint32_t f = 0; f < count; ++f) {
        SpectralField u(g);
        for (int c = 0; c < 3; ++c)
            for (int a = -m / 2; a < m / 2; ++a)
                for (int e = -m / 2; e < m / 2; ++e)
                    for (int d = -m / 2; d < m / 2; ++d) {
                        const float re = std::bit_cast<float>(detail::get_u32(p));
                        const float im = std::bit_cast<float>(detail::get_u32(p + 4));
                        p += 8;
                        u.coeff(c, a, e, d) = Complex(re, im);
                    }
        if (!u.all_finite()) throw FormatError("snapshot: non-finite coefficient");
        out.push_back(std::move(u));
    }
    return out;
}

/// Writes bytes to path through a temporary sibling and a rename.
inline void write_file_atomic(const std::filesystem::path& path, const void* data, std::size_t size) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
        os.flush();
        if (!os) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

inline void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
    write_file_atomic(path, text.data(), text.size());
}

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline void export_fields(const std::vector<SpectralField>& fields, const std::filesystem::path& path) {
    const auto b = encode_snapshot(fields);
    write_file_atomic(path, b.data(), b.size());
}

inline void export_field(const SpectralField& f, const std::filesystem::path& path) { export_fields({f}, path); }

inline std::vector<SpectralField> ingest_fields(const std::filesystem::path& path, double dealias_fraction = 2.0 / 3.0) {
    return decode_snapshot(read_file(path), dealias_fraction);
}

/// First field of a snapshot file.
inline SpectralField ingest_field(const std::filesystem::path& path, double dealias_fraction = 2.0 / 3.0) {
    return ingest_fields(path, dealias_fraction).front();
}

} // namespace critns
