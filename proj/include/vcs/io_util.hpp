#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace vcs {

// Little-endian encode/decode, independent of host byte order.
inline void put_u32le(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline void put_u64le(std::string& out, uint64_t v) {
    put_u32le(out, static_cast<uint32_t>(v & 0xffffffffu));
    put_u32le(out, static_cast<uint32_t>(v >> 32));
}

inline uint32_t get_u32le(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

inline uint64_t get_u64le(const unsigned char* p) {
    return static_cast<uint64_t>(get_u32le(p)) | (static_cast<uint64_t>(get_u32le(p + 4)) << 32);
}

inline void put_f32le(std::string& out, float f) {
    uint32_t bits;
    static_assert(sizeof(bits) == sizeof(f));
    __builtin_memcpy(&bits, &f, sizeof(bits));
    put_u32le(out, bits);
}

inline float get_f32le(const unsigned char* p) {
    const uint32_t bits = get_u32le(p);
    float f;
    __builtin_memcpy(&f, &bits, sizeof(f));
    return f;
}

// Reads a whole file; throws vcs::Error(validation) if it cannot be opened.
std::string read_file_bytes(const std::filesystem::path& path);

// Writes atomically: the content goes to a sibling temp file which is then
// renamed over the target, so readers never observe a partial file.
void atomic_write_file(const std::filesystem::path& path, const std::string& bytes);

// Fixed-format float printing for output files (printf %.*g semantics).
std::string format_double(double v, int precision = 17);
std::string format_fixed(double v, int decimals);

}  // namespace vcs
