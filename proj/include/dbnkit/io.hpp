#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dbnkit::io {

// Writes to "<path>.tmp" then renames over `path`.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::string& path, const std::string& text);

std::vector<std::uint8_t> read_file(const std::string& path);
std::string read_text(const std::string& path);

// Little-endian encoder for the binary file formats.
class ByteWriter {
public:
    void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
    void put_u32(std::uint32_t x);
    void put_f64(double x);
    std::vector<std::uint8_t>& bytes() noexcept { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

// Little-endian decoder; every read failure is a FormatError carrying the offset.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
    void expect_magic(std::string_view magic);
    std::uint32_t get_u32();
    double get_f64();
    std::size_t position() const noexcept { return pos_; }
    bool at_end() const noexcept { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n, const char* what);
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

// Formats with 17 significant digits; parsing the result gives the same double.
std::string format_double(double x);

}  // namespace dbnkit::io
