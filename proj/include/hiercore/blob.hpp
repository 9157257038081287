#pragma once

// HCFS tensor blobs: a little-endian f32 payload behind a small header.
//
//   offset 0   "HCFS"            magic
//   offset 4   u8  version       (1)
//   offset 5   u8  rank
//   offset 6   u16 reserved      (0)
//   offset 8   u32 dims[rank]
//   then       f32 payload, C order
//
// All multi-byte fields are little-endian regardless of host order.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace hiercore {

inline constexpr std::uint8_t kBlobVersion = 1;

struct Blob {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;

    std::size_t element_count() const noexcept;
    friend bool operator==(const Blob&, const Blob&) = default;
};

std::vector<std::uint8_t> encode_blob(std::span<const std::uint32_t> dims,
                                      std::span<const float> values);

// `context` names the owning record in error messages.
Blob decode_blob(std::span<const std::uint8_t> bytes, const std::string& context);

void write_blob(const std::filesystem::path& path, std::span<const std::uint32_t> dims,
                std::span<const float> values);
Blob read_blob(const std::filesystem::path& path, const std::string& context);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace hiercore
