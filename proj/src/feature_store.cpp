#include "hiercore/feature_store.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "hiercore/blob.hpp"
#include "hiercore/error.hpp"
#include "json.hpp"

namespace hiercore {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestName = "manifest.json";
constexpr const char* kFormatName = "hiercore-feature-archive";
constexpr int kManifestVersion = 1;

[[noreturn]] void record_error(const std::string& id, const std::string& what) {
    fail(ErrorKind::data, "record '" + id + "': " + what);
}

bool filename_safe(const std::string& id) {
    if (id.empty() || id == "." || id == "..") return false;
    return std::none_of(id.begin(), id.end(),
                        [](char c) { return c == '/' || c == '\\' || c == '\0'; });
}

Split parse_split(const std::string& s, const std::string& id) {
    if (s == "train") return Split::train;
    if (s == "test") return Split::test;
    record_error(id, "unknown split '" + s + "'");
}

GtLabel parse_gt(const std::string& s, const std::string& id) {
    if (s == "normal") return GtLabel::normal;
    if (s == "abnormal") return GtLabel::abnormal;
    record_error(id, "unknown gt_label '" + s + "'");
}

}  // namespace

const char* to_string(Split s) noexcept { return s == Split::train ? "train" : "test"; }
const char* to_string(GtLabel g) noexcept { return g == GtLabel::normal ? "normal" : "abnormal"; }

std::size_t Mask::positives() const noexcept {
    return static_cast<std::size_t>(std::count_if(pixels.begin(), pixels.end(),
                                                  [](std::uint8_t p) { return p != 0; }));
}

std::vector<std::uint32_t> mask_to_rle(const Mask& mask) {
    std::vector<std::uint32_t> counts;
    std::uint8_t current = 0;
    std::uint32_t run = 0;
    for (std::uint8_t p : mask.pixels) {
        const std::uint8_t bit = p ? 1 : 0;
        if (bit != current) {
            counts.push_back(run);
            run = 0;
            current = bit;
        }
        ++run;
    }
    counts.push_back(run);
    return counts;
}

Mask mask_from_rle(std::uint32_t width, std::uint32_t height, const std::vector<std::uint32_t>& counts) {
    Mask mask{width, height, {}};
    const std::size_t total = std::size_t{width} * height;
    mask.pixels.reserve(total);
    std::uint8_t value = 0;
    for (std::uint32_t c : counts) {
        if (mask.pixels.size() + c > total) fail(ErrorKind::data, "mask RLE overruns image size");
        mask.pixels.insert(mask.pixels.end(), c, value);
        value ^= 1;
    }
    if (mask.pixels.size() != total) fail(ErrorKind::data, "mask RLE does not cover image size");
    return mask;
}

std::vector<const ImageRecord*> FeatureArchive::split(Split s) const {
    std::vector<const ImageRecord*> out;
    for (const auto& r : records)
        if (r.split == s) out.push_back(&r);
    return out;
}

std::size_t FeatureArchive::count(Split s) const {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [s](const ImageRecord& r) { return r.split == s; }));
}

void validate_archive(const FeatureArchive& archive) {
    if (archive.semantic_dim == 0) fail(ErrorKind::data, "semantic_dim must be positive");
    if (archive.patch_dim == 0) fail(ErrorKind::data, "patch_dim must be positive");
    if (archive.grid.cells() == 0) fail(ErrorKind::data, "patch grid must have positive dimensions");

    std::unordered_set<std::string> ids;
    for (const auto& r : archive.records) {
        if (!filename_safe(r.id)) record_error(r.id, "id is empty or not filename-safe");
        if (!ids.insert(r.id).second) record_error(r.id, "duplicate id");
        if (r.semantic.size() != archive.semantic_dim) {
            record_error(r.id, "dimension mismatch: semantic vector has " + std::to_string(r.semantic.size()) +
                                   " entries, archive semantic_dim is " + std::to_string(archive.semantic_dim));
        }
        if (r.patches.rows != archive.grid.cells() || r.patches.cols != archive.patch_dim ||
            r.patches.data.size() != r.patches.rows * r.patches.cols) {
            record_error(r.id, "dimension mismatch: patch map does not match grid " +
                                   std::to_string(archive.grid.grid_h) + "x" + std::to_string(archive.grid.grid_w) +
                                   "x" + std::to_string(archive.patch_dim));
        }
        auto finite = [](float v) { return std::isfinite(v); };
        if (!std::all_of(r.semantic.begin(), r.semantic.end(), finite) ||
            !std::all_of(r.patches.data.begin(), r.patches.data.end(), finite)) {
            record_error(r.id, "non-finite feature value");
        }
        if (r.image_size.width == 0 || r.image_size.height == 0) record_error(r.id, "image size must be positive");
        if (r.split == Split::train && r.gt_label == GtLabel::abnormal) {
            record_error(r.id, "train record labelled abnormal");
        }
        if (r.gt_label == GtLabel::abnormal && !r.gt_mask) record_error(r.id, "abnormal record without gt_mask");
        if (r.gt_mask) {
            if (r.gt_mask->width != r.image_size.width || r.gt_mask->height != r.image_size.height ||
                r.gt_mask->pixels.size() != std::size_t{r.gt_mask->width} * r.gt_mask->height) {
                record_error(r.id, "gt_mask dimensions differ from image size");
            }
            if (r.gt_label == GtLabel::normal && r.gt_mask->positives() != 0) {
                record_error(r.id, "normal record with non-empty gt_mask");
            }
        }
    }
}

void write_archive(const FeatureArchive& archive, const fs::path& dir) {
    validate_archive(archive);

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
    if (!archive.records.empty()) {
        fs::create_directories(dir / "blobs", ec);
        if (ec) fail(ErrorKind::io, "cannot create " + (dir / "blobs").string() + ": " + ec.message());
    }

    json records = json::array();
    for (const auto& r : archive.records) {
        const std::string sem = "blobs/" + r.id + ".sem";
        const std::string pat = "blobs/" + r.id + ".pat";
        const std::uint32_t sem_dims[] = {archive.semantic_dim};
        const std::uint32_t pat_dims[] = {archive.grid.grid_h, archive.grid.grid_w, archive.patch_dim};
        write_blob(dir / sem, sem_dims, r.semantic);
        write_blob(dir / pat, pat_dims, r.patches.data);

        json j;
        j["id"] = r.id;
        j["split"] = to_string(r.split);
        j["class_label"] = r.class_label ? json(*r.class_label) : json(nullptr);
        j["gt_label"] = to_string(r.gt_label);
        j["mask_rle"] = r.gt_mask ? json(mask_to_rle(*r.gt_mask)) : json(nullptr);
        j["image_size"] = {r.image_size.width, r.image_size.height};
        j["semantic_blob"] = sem;
        j["patch_blob"] = pat;
        records.push_back(std::move(j));
    }

    json manifest;
    manifest["format"] = kFormatName;
    manifest["version"] = kManifestVersion;
    manifest["semantic_dim"] = archive.semantic_dim;
    manifest["patch_dim"] = archive.patch_dim;
    manifest["patch_grid"] = {{"grid_w", archive.grid.grid_w},     {"grid_h", archive.grid.grid_h},
                              {"window_w", archive.grid.window_w}, {"window_h", archive.grid.window_h},
                              {"padding", archive.grid.padding},   {"stride", archive.grid.stride}};
    manifest["records"] = std::move(records);

    std::ofstream out(dir / kManifestName, std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + (dir / kManifestName).string());
    out << manifest.dump(2) << '\n';
    if (!out) fail(ErrorKind::io, "write failed for " + (dir / kManifestName).string());
}

FeatureArchive read_archive(const fs::path& dir) {
    const fs::path manifest_path = dir / kManifestName;
    if (!fs::exists(manifest_path)) fail(ErrorKind::io, "missing manifest: " + manifest_path.string());

    json manifest;
    {
        std::ifstream in(manifest_path);
        if (!in) fail(ErrorKind::io, "cannot open " + manifest_path.string());
        try {
            manifest = json::parse(in);
        } catch (const json::exception& e) {
            fail(ErrorKind::data, "malformed manifest " + manifest_path.string() + ": " + e.what());
        }
    }

    FeatureArchive archive;
    std::string current_id = "<manifest>";
    try {
        if (manifest.value("format", std::string{}) != kFormatName) {
            fail(ErrorKind::version, "manifest is not a feature archive (format field)");
        }
        if (manifest.at("version").get<int>() != kManifestVersion) {
            fail(ErrorKind::version, "unsupported manifest version");
        }
        archive.semantic_dim = manifest.at("semantic_dim").get<std::uint32_t>();
        archive.patch_dim = manifest.at("patch_dim").get<std::uint32_t>();
        const auto& g = manifest.at("patch_grid");
        archive.grid = PatchGrid{g.at("grid_w").get<std::uint32_t>(),   g.at("grid_h").get<std::uint32_t>(),
                                 g.at("window_w").get<std::uint32_t>(), g.at("window_h").get<std::uint32_t>(),
                                 g.at("padding").get<std::uint32_t>(),  g.at("stride").get<std::uint32_t>()};

        for (const auto& j : manifest.at("records")) {
            ImageRecord r;
            r.id = j.at("id").get<std::string>();
            current_id = r.id;
            if (!filename_safe(r.id)) record_error(r.id, "id is empty or not filename-safe");
            r.split = parse_split(j.at("split").get<std::string>(), r.id);
            if (!j.at("class_label").is_null()) r.class_label = j.at("class_label").get<std::string>();
            r.gt_label = parse_gt(j.at("gt_label").get<std::string>(), r.id);
            const auto& size = j.at("image_size");
            r.image_size = {size.at(0).get<std::uint32_t>(), size.at(1).get<std::uint32_t>()};
            if (!j.at("mask_rle").is_null()) {
                r.gt_mask = mask_from_rle(r.image_size.width, r.image_size.height,
                                          j.at("mask_rle").get<std::vector<std::uint32_t>>());
            }

            const std::string context = "record '" + r.id + "'";
            Blob sem = read_blob(dir / j.at("semantic_blob").get<std::string>(), context);
            if (sem.dims.size() != 1 || sem.dims[0] != archive.semantic_dim) {
                record_error(r.id, "dimension mismatch between manifest and semantic blob");
            }
            r.semantic = std::move(sem.values);

            Blob pat = read_blob(dir / j.at("patch_blob").get<std::string>(), context);
            if (pat.dims.size() != 3 || pat.dims[0] != archive.grid.grid_h || pat.dims[1] != archive.grid.grid_w ||
                pat.dims[2] != archive.patch_dim) {
                record_error(r.id, "dimension mismatch between manifest and patch blob");
            }
            r.patches = Matrix(archive.grid.cells(), archive.patch_dim, std::move(pat.values));
            archive.records.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::data, "record '" + current_id + "': malformed manifest entry: " + e.what());
    }

    validate_archive(archive);
    return archive;
}

}  // namespace hiercore
