#include "vpb/io_util.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vpb {

std::array<std::uint8_t, 32> sha256_bytes(const void* data, std::size_t len) {
    std::array<std::uint8_t, 32> out{};
    unsigned int out_len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr) throw std::runtime_error("sha256: context allocation failed");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, data, len) == 1 &&
                    EVP_DigestFinal_ex(ctx, out.data(), &out_len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok || out_len != out.size()) throw std::runtime_error("sha256: digest failed");
    return out;
}

std::string hex_digest(const std::array<std::uint8_t, 32>& digest) {
    static const char* hexchars = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (std::uint8_t b : digest) {
        s.push_back(hexchars[b >> 4]);
        s.push_back(hexchars[b & 0xf]);
    }
    return s;
}

std::string format_g17(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file for reading: " + path);
    in.seekg(0, std::ios::end);
    const std::streamoff len = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(len));
    if (len > 0) in.read(reinterpret_cast<char*>(bytes.data()), len);
    if (!in) throw std::runtime_error("short read on file: " + path);
    return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write on file: " + path);
}

void ByteSink::put_raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    bytes.insert(bytes.end(), b, b + n);
}

void ByteSink::put_u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteSink::put_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteSink::put_f64(double v) {
    put_u64(std::bit_cast<std::uint64_t>(v));
}

void ByteSource::take_raw(void* out, std::size_t n) {
    if (remaining() < n) throw std::runtime_error("unexpected end of data");
    std::memcpy(out, data + pos, n);
    pos += n;
}

std::uint32_t ByteSource::take_u32() {
    if (remaining() < 4) throw std::runtime_error("unexpected end of data");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
    pos += 4;
    return v;
}

std::uint64_t ByteSource::take_u64() {
    if (remaining() < 8) throw std::runtime_error("unexpected end of data");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[pos + i]) << (8 * i);
    pos += 8;
    return v;
}

double ByteSource::take_f64() {
    return std::bit_cast<double>(take_u64());
}

}  // namespace vpb
