#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hiercore/matrix.hpp"

namespace hiercore {

enum class Split { train, test };
enum class GtLabel { normal, abnormal };

// Binary pixel mask, row-major, width × height.
struct Mask {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> pixels;

    std::size_t positives() const noexcept;
    friend bool operator==(const Mask&, const Mask&) = default;
};

// Row-major run lengths starting with a run of zeros (possibly empty).
std::vector<std::uint32_t> mask_to_rle(const Mask& mask);
Mask mask_from_rle(std::uint32_t width, std::uint32_t height,
                   const std::vector<std::uint32_t>& counts);

// Geometry of the patch grid and the window that produced it.
struct PatchGrid {
    std::uint32_t grid_w = 0;
    std::uint32_t grid_h = 0;
    std::uint32_t window_w = 3;
    std::uint32_t window_h = 3;
    std::uint32_t padding = 1;
    std::uint32_t stride = 1;

    std::size_t cells() const noexcept { return std::size_t{grid_w} * grid_h; }
    friend bool operator==(const PatchGrid&, const PatchGrid&) = default;
};

struct ImageSize {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

struct ImageRecord {
    std::string id;
    Split split = Split::train;
    std::optional<std::string> class_label;
    GtLabel gt_label = GtLabel::normal;
    std::optional<Mask> gt_mask;
    std::vector<float> semantic;
    // grid_h × grid_w × patch_dim, C order: one row per cell.
    Matrix patches;
    ImageSize image_size;

    friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct FeatureArchive {
    std::vector<ImageRecord> records;
    std::uint32_t semantic_dim = 0;
    std::uint32_t patch_dim = 0;
    PatchGrid grid;

    std::vector<const ImageRecord*> split(Split s) const;
    std::size_t count(Split s) const;

    friend bool operator==(const FeatureArchive&, const FeatureArchive&) = default;
};

// Checks every archive invariant; throws ErrorKind::data naming the record.
void validate_archive(const FeatureArchive& archive);

// Directory layout: manifest.json, blobs/<id>.sem, blobs/<id>.pat
FeatureArchive read_archive(const std::filesystem::path& dir);
void write_archive(const FeatureArchive& archive, const std::filesystem::path& dir);

const char* to_string(Split s) noexcept;
const char* to_string(GtLabel g) noexcept;

}  // namespace hiercore
