#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hiercore/feature_store.hpp"
#include "hiercore/memory_bank.hpp"

namespace hiercore {

struct AnomalyResult {
    std::string record_id;
    std::uint32_t routed_cluster = 0;
    std::uint32_t grid_h = 0;
    std::uint32_t grid_w = 0;
    std::vector<float> patch_scores;  // nearest-neighbour L2 distance per cell
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<float> score_map;     // height × width
    float image_score = 0.0f;         // max of patch_scores

    friend bool operator==(const AnomalyResult&, const AnomalyResult&) = default;
};

struct ScoringOptions {
    // Off by default; when on, the score map is Gaussian-blurred.
    bool smoothing = false;
    double smoothing_sigma = 4.0;
};

struct QueryCounters {
    std::uint64_t query_distance_evals = 0;  // patch-to-bank-row distances
    std::uint64_t route_distance_evals = 0;  // semantic-to-key distances

    QueryCounters& operator+=(const QueryCounters& o) {
        query_distance_evals += o.query_distance_evals;
        route_distance_evals += o.route_distance_evals;
        return *this;
    }
};

// Corner-aligned bilinear resampling of an h × w grid to H × W. Grid node
// (i, j) sits at image position (i * (H-1)/(h-1), j * (W-1)/(w-1)); a 1 × 1
// grid broadcasts.
std::vector<float> upsample_bilinear(std::span<const float> grid, std::uint32_t h, std::uint32_t w,
                                     std::uint32_t out_h, std::uint32_t out_w);

// Separable Gaussian blur, kernel truncated at 4 sigma, reflected borders.
std::vector<float> gaussian_blur(std::span<const float> map, std::uint32_t h, std::uint32_t w, double sigma);

// Exact nearest-row L2 distance for every query row.
std::vector<float> nearest_distances(const Matrix& queries, const Matrix& bank);

AnomalyResult score_record(const ImageRecord& record, const MemoryBank& bank, const ScoringOptions& options = {},
                           QueryCounters* counters = nullptr);

struct BatchScores {
    std::vector<AnomalyResult> results;  // archive test-split order
    QueryCounters counters;
};

BatchScores score_batch(const FeatureArchive& archive, const MemoryBank& bank, const ScoringOptions& options = {});

// One JSON object per line: id, routed_cluster, image_score.
void write_scores_jsonl(std::span<const AnomalyResult> results, const std::filesystem::path& path);
// Score maps as rank-2 HCFS blobs: <dir>/<id>.map
void write_score_maps(std::span<const AnomalyResult> results, const std::filesystem::path& dir);

}  // namespace hiercore
