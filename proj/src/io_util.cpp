#include "proxsafe/io_util.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>

#include "proxsafe/error.hpp"

namespace proxsafe {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::format: return "format error";
        case ErrorKind::io: return "I/O error";
        case ErrorKind::degenerate: return "degenerate embedding";
        case ErrorKind::shape: return "shape error";
        case ErrorKind::alignment: return "alignment error";
        case ErrorKind::parameter: return "parameter error";
        case ErrorKind::input: return "input error";
        case ErrorKind::split: return "split error";
    }
    return "error";
}

namespace {

std::ifstream open_for_read(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        fail(ErrorKind::io, "no such file: " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open for reading: " + path.string());
    return in;
}

void write_atomically(const std::filesystem::path& path, const char* data, std::size_t size) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::io, "cannot open for writing: " + path.string());
        out.write(data, static_cast<std::streamsize>(size));
        if (!out) fail(ErrorKind::io, "write failed: " + path.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(ErrorKind::io, "cannot rename into place: " + path.string() + ": " + ec.message());
}

}  // namespace

std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path) {
    auto in = open_for_read(path);
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> bytes(size);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
    if (!in) fail(ErrorKind::io, "read failed: " + path.string());
    return bytes;
}

std::string read_text_file(const std::filesystem::path& path) {
    auto in = open_for_read(path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    write_atomically(path, content.data(), content.size());
}

void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    write_atomically(path, reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
    auto in = open_for_read(path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            fail(ErrorKind::format,
                 path.string() + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
        }
        if (!obj.is_object()) {
            fail(ErrorKind::format,
                 path.string() + ":" + std::to_string(line_no) + ": expected a JSON object");
        }
        try {
            fn(obj, line_no);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::format, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
        fail(ErrorKind::io, "SHA-256 computation failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) {
    return sha256_hex(read_binary_file(path));
}

std::string format_float(float v) {
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), end};
}

std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return {buf.data(), end};
}

std::string format_fixed(double v, int decimals) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                   std::chars_format::fixed, decimals);
    std::string s(buf.data(), end);
    if (!s.empty() && s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) {
        s.erase(0, 1);
    }
    return s;
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace proxsafe
