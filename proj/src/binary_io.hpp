#pragma once

// Little helpers for the versioned binary formats (catchment, checkpoints).
// Values are written in native byte order; the header magic doubles as an
// endianness check.

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "floodda/errors.hpp"

namespace floodda::binio {

template <typename T>
void put(std::ostream& os, const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    static_assert(std::is_trivially_copyable_v<T>);
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("binary stream truncated");
    return v;
}

template <typename T>
void put_vec(std::ostream& os, const std::vector<T>& v) {
    put<std::uint64_t>(os, v.size());
    if (!v.empty()) os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
std::vector<T> get_vec(std::istream& is, std::uint64_t max_len = (1ull << 32)) {
    const auto n = get<std::uint64_t>(is);
    if (n > max_len) throw IoError("binary stream: implausible array length");
    std::vector<T> v(n);
    if (n && !is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T))))
        throw IoError("binary stream truncated");
    return v;
}

inline void put_str(std::ostream& os, const std::string& s) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_str(std::istream& is) {
    const auto n = get<std::uint32_t>(is);
    if (n > (1u << 20)) throw IoError("binary stream: implausible string length");
    std::string s(n, '\0');
    if (n && !is.read(s.data(), n)) throw IoError("binary stream truncated");
    return s;
}

inline void put_magic(std::ostream& os, const char (&magic)[8], std::uint32_t version) {
    os.write(magic, 8);
    put<std::uint32_t>(os, 0x01020304u);
    put<std::uint32_t>(os, version);
}

inline std::uint32_t expect_magic(std::istream& is, const char (&magic)[8], std::uint32_t max_version) {
    char buf[8];
    if (!is.read(buf, 8) || std::string(buf, 8) != std::string(magic, 8)) throw IoError("bad file magic");
    if (get<std::uint32_t>(is) != 0x01020304u) throw IoError("byte order mismatch");
    const auto version = get<std::uint32_t>(is);
    if (version == 0 || version > max_version) throw IoError("unsupported format version " + std::to_string(version));
    return version;
}

}  // namespace floodda::binio
