#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hiercore/feature_store.hpp"

namespace hiercore {

// Per-class overrides of the patch model; unset fields use the SynthSpec value.
struct SynthClassParams {
    std::optional<double> patch_sigma;
    std::optional<double> anomaly_offset;
};

// Gaussian surrogate for encoder features.
//
// Semantic vectors of class c are drawn around margin * semantic_sigma / sqrt(2) * e_c,
// so every pair of class means is exactly `margin` semantic sigmas apart.
// Patch cells of class c are drawn around a class-specific mean with
// isotropic noise. Abnormal test records get an additive offset of norm
// `anomaly_offset` inside a random axis-aligned cell rectangle.
struct SynthSpec {
    std::uint32_t classes = 2;
    std::uint32_t train_per_class = 30;
    std::uint32_t test_per_class = 20;
    std::uint32_t semantic_dim = 8;
    std::uint32_t patch_dim = 8;
    std::uint32_t grid_w = 16;
    std::uint32_t grid_h = 16;
    // 75 = 5 * 15, so every grid node lands on an image pixel.
    std::uint32_t image_w = 76;
    std::uint32_t image_h = 76;
    double semantic_sigma = 1.0;
    double margin = 10.0;
    double patch_sigma = 0.5;
    double patch_class_spread = 3.0;
    double anomaly_rate = 0.5;
    double anomaly_offset = 5.0;
    std::uint32_t min_defect_cells = 3;
    std::uint32_t max_defect_cells = 6;
    std::vector<SynthClassParams> class_overrides;
};

// Deterministic for a fixed (spec, seed). Records are ordered class by
// class, train before test; ids are "c<k>_train_<i>" / "c<k>_test_<i>" and
// class labels are "class<k>".
FeatureArchive synth_generate(const SynthSpec& spec, std::uint64_t seed);

// Copy of the archive with every class_label cleared.
FeatureArchive strip_class_labels(FeatureArchive archive);

}  // namespace hiercore
