#include "hiercore/blob.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

#include "hiercore/error.hpp"

namespace hiercore {

namespace {

constexpr std::uint8_t kMagic[4] = {'H', 'C', 'F', 'S'};
constexpr std::size_t kFixedHeader = 8;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
           (std::uint32_t{p[3]} << 24);
}

}  // namespace

std::size_t Blob::element_count() const noexcept {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                           [](std::size_t a, std::uint32_t d) { return a * d; });
}

std::vector<std::uint8_t> encode_blob(std::span<const std::uint32_t> dims,
                                      std::span<const float> values) {
    if (dims.size() > 255) fail(ErrorKind::data, "blob rank exceeds 255");
    const std::size_t expected = std::accumulate(
        dims.begin(), dims.end(), std::size_t{1}, [](std::size_t a, std::uint32_t d) { return a * d; });
    if (expected != values.size()) {
        fail(ErrorKind::data, "blob payload has " + std::to_string(values.size()) +
                                  " values but dims imply " + std::to_string(expected));
    }
    std::vector<std::uint8_t> out;
    out.reserve(kFixedHeader + 4 * dims.size() + 4 * values.size());
    for (char c : kMagic) out.push_back(static_cast<std::uint8_t>(c));
    out.push_back(kBlobVersion);
    out.push_back(static_cast<std::uint8_t>(dims.size()));
    out.push_back(0);
    out.push_back(0);
    for (auto d : dims) put_u32(out, d);
    for (float v : values) put_u32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

Blob decode_blob(std::span<const std::uint8_t> bytes, const std::string& context) {
    if (bytes.size() < kFixedHeader || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        fail(ErrorKind::version, context + ": corrupt header magic (expected HCFS)");
    }
    if (bytes[4] != kBlobVersion) {
        fail(ErrorKind::version, context + ": unsupported blob version " + std::to_string(bytes[4]));
    }
    const std::size_t rank = bytes[5];
    const std::size_t header = kFixedHeader + 4 * rank;
    if (bytes.size() < header) fail(ErrorKind::data, context + ": truncated blob header");

    Blob blob;
    blob.dims.resize(rank);
    for (std::size_t i = 0; i < rank; ++i) blob.dims[i] = get_u32(bytes.data() + kFixedHeader + 4 * i);
    const std::size_t n = blob.element_count();
    if (bytes.size() - header != 4 * n) {
        fail(ErrorKind::data, context + ": dimension mismatch, header implies " + std::to_string(4 * n) +
                                  " payload bytes but blob holds " + std::to_string(bytes.size() - header));
    }
    blob.values.resize(n);
    const std::uint8_t* p = bytes.data() + header;
    for (std::size_t i = 0; i < n; ++i) blob.values[i] = std::bit_cast<float>(get_u32(p + 4 * i));
    return blob;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open " + path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::uint8_t> bytes(size);
    if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
        fail(ErrorKind::io, "cannot read " + path.string());
    }
    return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

void write_blob(const std::filesystem::path& path, std::span<const std::uint32_t> dims,
                std::span<const float> values) {
    write_file_bytes(path, encode_blob(dims, values));
}

Blob read_blob(const std::filesystem::path& path, const std::string& context) {
    return decode_blob(read_file_bytes(path), context);
}

}  // namespace hiercore
