#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "relume/core/errors.hpp"
#include "relume/core/tensor.hpp"

namespace relume {

// Little-endian binary primitives. Tensor payloads are raw IEEE-754 bit
// patterns, so a write/read round trip is bit-identical.

inline void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw FormatError("unexpected end of stream reading u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void write_i64(std::ostream& os, std::int64_t v) {
    write_u64(os, static_cast<std::uint64_t>(v));
}

inline std::int64_t read_i64(std::istream& is) {
    return static_cast<std::int64_t>(read_u64(is));
}

inline void write_string(std::ostream& os, const std::string& s) {
    write_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
    const std::uint64_t n = read_u64(is);
    if (n > (1u << 30)) throw FormatError("string length implausibly large");
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw FormatError("unexpected end of stream reading string");
    return s;
}

template <class T>
void write_tensor(std::ostream& os, const Tensor<T>& t) {
    write_u64(os, static_cast<std::uint64_t>(t.shape().rank()));
    for (int d = 0; d < t.shape().rank(); ++d) write_u64(os, static_cast<std::uint64_t>(t.shape()[d]));
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    if constexpr (sizeof(T) == 4) {
        for (std::int64_t i = 0; i < t.numel(); ++i) {
            std::uint32_t bits;
            std::memcpy(&bits, &t[i], 4);
            unsigned char b[4];
            for (int k = 0; k < 4; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
            os.write(reinterpret_cast<const char*>(b), 4);
        }
    } else {
        for (std::int64_t i = 0; i < t.numel(); ++i) {
            std::uint64_t bits;
            std::memcpy(&bits, &t[i], 8);
            write_u64(os, bits);
        }
    }
}

template <class T>
Tensor<T> read_tensor(std::istream& is) {
    const int rank = static_cast<int>(read_u64(is));
    if (rank < 0 || rank > 4) throw FormatError("tensor rank out of range");
    std::vector<int> dims(rank);
    for (int d = 0; d < rank; ++d) dims[d] = static_cast<int>(read_u64(is));
    Tensor<T> t{Shape(dims)};
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    if constexpr (sizeof(T) == 4) {
        for (std::int64_t i = 0; i < t.numel(); ++i) {
            unsigned char b[4];
            is.read(reinterpret_cast<char*>(b), 4);
            if (!is) throw FormatError("unexpected end of stream reading tensor");
            std::uint32_t bits = 0;
            for (int k = 0; k < 4; ++k) bits |= static_cast<std::uint32_t>(b[k]) << (8 * k);
            std::memcpy(&t[i], &bits, 4);
        }
    } else {
        for (std::int64_t i = 0; i < t.numel(); ++i) {
            const std::uint64_t bits = read_u64(is);
            std::memcpy(&t[i], &bits, 8);
        }
    }
    return t;
}

} // namespace relume
