#pragma once

// Threshold-free and threshold-optimal detection metrics. A sample is
// predicted abnormal when score >= T. Labels: 1 = abnormal.

#include <cstdint>
#include <span>
#include <vector>

#include "hiercore/feature_store.hpp"

namespace hiercore {

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

// Probability that a random abnormal outscores a random normal, ties 1/2.
double auroc(std::span<const float> scores, std::span<const std::uint8_t> labels);

// ROC points at every distinct threshold (descending), starting at (0, 0).
std::vector<RocPoint> roc_curve(std::span<const float> scores, std::span<const std::uint8_t> labels);
double auroc_trapezoid(std::span<const float> scores, std::span<const std::uint8_t> labels);

// sum_n (R_n - R_{n-1}) * P_n over distinct descending thresholds.
double average_precision(std::span<const float> scores, std::span<const std::uint8_t> labels);

struct ThresholdScore {
    double value = 0.0;
    float threshold = 0.0f;  // smallest threshold attaining `value`
};

ThresholdScore f1_max(std::span<const float> scores, std::span<const std::uint8_t> labels);
ThresholdScore iou_max(std::span<const float> scores, std::span<const std::uint8_t> labels);

// F1 of the prediction score >= threshold; 0 when nothing is predicted or
// nothing is positive.
double f1_at(std::span<const float> scores, std::span<const std::uint8_t> labels, float threshold);

// 8-connected foreground components. Background pixels get -1; regions are
// numbered 0.. in raster order of their first pixel.
struct RegionLabels {
    std::vector<std::int32_t> labels;
    std::int32_t count = 0;
};
RegionLabels label_regions(std::span<const std::uint8_t> mask, std::uint32_t height, std::uint32_t width);

struct PixelMap {
    std::span<const float> scores;
    std::span<const std::uint8_t> mask;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
};

// Area under PRO(FPR) on [0, fpr_cap], trapezoidal, divided by fpr_cap.
double aupro(std::span<const PixelMap> maps, double fpr_cap = 0.3);

}  // namespace hiercore
