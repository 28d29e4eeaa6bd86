#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace vpb {

std::array<std::uint8_t, 32> sha256_bytes(const void* data, std::size_t len);
std::string hex_digest(const std::array<std::uint8_t, 32>& digest);

// Shortest fixed-precision form used for all numeric text output (17
// significant digits round-trips every double).
std::string format_g17(double x);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

// Little-endian serialization into a growable buffer.
struct ByteSink {
    std::vector<std::uint8_t> bytes;

    void put_raw(const void* p, std::size_t n);
    void put_u32(std::uint32_t v);
    void put_u64(std::uint64_t v);
    void put_f64(double v);
};

// Bounds-checked little-endian reader over a byte span.
struct ByteSource {
    const std::uint8_t* data = nullptr;
    std::size_t size = 0;
    std::size_t pos = 0;

    ByteSource(const std::uint8_t* d, std::size_t n) : data(d), size(n) {}
    explicit ByteSource(const std::vector<std::uint8_t>& v) : data(v.data()), size(v.size()) {}

    std::size_t remaining() const { return size - pos; }
    void take_raw(void* out, std::size_t n);
    std::uint32_t take_u32();
    std::uint64_t take_u64();
    double take_f64();
};

}  // namespace vpb
