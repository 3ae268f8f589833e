#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "fvrank/error.hpp"

namespace fvr {

// Little-endian fixed-width binary io. All artifact files go through these
// helpers so serialization is byte-deterministic across runs.

class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    void u8(std::uint8_t v) { raw(&v, 1); }

    void u32(std::uint32_t v) {
        std::uint8_t b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
        raw(b, 4);
    }

    void u64(std::uint64_t v) {
        std::uint8_t b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
        raw(b, 8);
    }

    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }

    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        u64(bits);
    }

    void str(std::string_view s) {
        u64(s.size());
        raw(s.data(), s.size());
    }

    void magic(const char tag[4]) { raw(tag, 4); }

private:
    void raw(const void* data, std::size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    }

    std::ostream& out_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::istream& in) : in_(in) {}

    std::uint8_t u8() {
        std::uint8_t v;
        raw(&v, 1);
        return v;
    }

    std::uint32_t u32() {
        std::uint8_t b[4];
        raw(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }

    std::uint64_t u64() {
        std::uint8_t b[8];
        raw(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }

    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }

    double f64() {
        std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }

    std::string str() {
        std::uint64_t n = u64();
        if (n > (1ull << 32))
            throw LoadError("implausible string length, file corrupt");
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }

    void expect_magic(const char tag[4], const std::string& what) {
        char got[4];
        raw(got, 4);
        if (std::memcmp(got, tag, 4) != 0)
            throw LoadError(what + ": bad magic bytes");
    }

    /// Throws unless the stream is fully consumed.
    void expect_eof(const std::string& what) {
        in_.peek();
        if (!in_.eof())
            throw LoadError(what + ": trailing bytes");
    }

private:
    void raw(void* data, std::size_t n) {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw LoadError("unexpected end of file");
    }

    std::istream& in_;
};

/// Incremental FNV-1a 64-bit hash; used to content-address pipeline artifacts.
class Fnv1a64 {
public:
    Fnv1a64& update(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ull;
        }
        return *this;
    }

    Fnv1a64& update(std::string_view s) { return update(s.data(), s.size()); }

    Fnv1a64& update_u64(std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        return update(b, 8);
    }

    Fnv1a64& update_f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        return update_u64(bits);
    }

    /// Hashes a file's full contents; throws LoadError if unreadable.
    Fnv1a64& update_file(const std::filesystem::path& path);

    std::uint64_t digest() const noexcept { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ull;
};

} // namespace fvr
