#pragma once

// Little-endian fixed-width encoding for checkpoint files, independent of
// host byte order.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qer::io {

class LeWriter {
public:
    explicit LeWriter(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }

    void magic(std::string_view tag) { out_.write(tag.data(), static_cast<std::streamsize>(tag.size())); }
    void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
    void u32(std::uint32_t v) { put_le(v); }
    void u64(std::uint64_t v) { put_le(v); }
    void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }

    void finish() {
        out_.flush();
        if (!out_) throw std::runtime_error("write failed");
    }

private:
    template <class U>
    void put_le(U v) {
        std::array<char, sizeof(U)> bytes{};
        for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
        out_.write(bytes.data(), bytes.size());
    }

    std::ofstream out_;
};

class LeReader {
public:
    explicit LeReader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path.string()) {
        if (!in_) throw std::runtime_error("cannot open '" + path_ + "' for reading");
    }

    void expect_magic(std::string_view tag) {
        std::string got(tag.size(), '\0');
        in_.read(got.data(), static_cast<std::streamsize>(got.size()));
        if (!in_ || got != tag) throw std::runtime_error("'" + path_ + "' is not a " + std::string(tag) + " file");
    }
    std::uint8_t u8() { return get_le<std::uint8_t>(); }
    std::uint32_t u32() { return get_le<std::uint32_t>(); }
    std::uint64_t u64() { return get_le<std::uint64_t>(); }
    double f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }

    void expect_end() {
        if (in_.peek() != std::char_traits<char>::eof()) throw std::runtime_error("'" + path_ + "': trailing bytes");
    }

private:
    template <class U>
    U get_le() {
        std::array<unsigned char, sizeof(U)> bytes{};
        in_.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
        if (!in_) throw std::runtime_error("'" + path_ + "': unexpected end of file");
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(bytes[i]) << (8 * i));
        return v;
    }

    std::ifstream in_;
    std::string path_;
};

}  // namespace qer::io
