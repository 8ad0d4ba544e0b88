#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lpdssl/matrix.hpp"

namespace lpdssl {

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// File does not start with the expected magic bytes.
struct bad_magic_error : io_error {
    using io_error::io_error;
};

/// File ends before the payload announced by its header.
struct truncated_file_error : io_error {
    using io_error::io_error;
};

/// Dimensions do not fit the on-disk u32 header fields.
struct dimension_error : io_error {
    using io_error::io_error;
};

namespace detail {

inline void write_u32_le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32_le(std::istream& in, const std::string& what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw truncated_file_error("truncated header while reading " + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void write_f32_le(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32_le(out, bits);
}

inline float read_f32_le(std::istream& in, const std::string& what) {
    std::uint32_t bits = read_u32_le(in, what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace detail

inline constexpr char kEmbeddingMagic[8] = {'L', 'P', 'E', 'M', 'B', '1', '\0', '\0'};
inline constexpr char kModelMagic[8] = {'L', 'P', 'M', 'D', 'L', '1', '\0', '\0'};

/// Binary embedding file: magic, u32 n, u32 d, then n*d float32 row-major.
inline void write_embeddings(const Matrix& m, const std::filesystem::path& path) {
    if (m.rows() > std::numeric_limits<std::uint32_t>::max() ||
        m.cols() > std::numeric_limits<std::uint32_t>::max())
        throw dimension_error("matrix dimensions exceed u32 header range");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    out.write(kEmbeddingMagic, 8);
    detail::write_u32_le(out, static_cast<std::uint32_t>(m.rows()));
    detail::write_u32_le(out, static_cast<std::uint32_t>(m.cols()));
    for (double x : m.data()) detail::write_f32_le(out, static_cast<float>(x));
    if (!out) throw io_error("write failed: " + path.string());
}

inline Matrix read_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open for reading: " + path.string());
    char magic[8];
    if (!in.read(magic, 8)) throw truncated_file_error("file shorter than magic: " + path.string());
    if (std::memcmp(magic, kEmbeddingMagic, 8) != 0)
        throw bad_magic_error("bad magic in embedding file: " + path.string());
    std::uint32_t n = detail::read_u32_le(in, "row count");
    std::uint32_t d = detail::read_u32_le(in, "column count");
    std::uint64_t count = static_cast<std::uint64_t>(n) * d;
    if (count > (std::uint64_t{1} << 32))
        throw dimension_error("embedding payload too large: " + path.string());
    Matrix m(n, d);
    for (std::uint64_t i = 0; i < count; ++i)
        m.data()[i] = detail::read_f32_le(in, "embedding payload of " + path.string());
    return m;
}

/// Label CSV: lines `index,class`, 0-based, LF endings, no header.
inline void write_labels_csv(const std::vector<std::pair<std::size_t, int>>& labels,
                             const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open for writing: " + path.string());
    for (const auto& [index, cls] : labels) out << index << ',' << cls << '\n';
    if (!out) throw io_error("write failed: " + path.string());
}

inline std::vector<std::pair<std::size_t, int>> read_labels_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open for reading: " + path.string());
    std::vector<std::pair<std::size_t, int>> labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::size_t index;
        int cls;
        char comma;
        if (!(ss >> index >> comma >> cls) || comma != ',')
            throw io_error("malformed label line " + std::to_string(lineno) + " in " + path.string());
        if (cls < 0)
            throw io_error("negative class id on line " + std::to_string(lineno) + " in " + path.string());
        labels.emplace_back(index, cls);
    }
    return labels;
}

}  // namespace lpdssl
