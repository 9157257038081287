#include "hiercore/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "hiercore/error.hpp"

namespace hiercore {

namespace {

struct Counts {
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

Counts count_labels(std::span<const float> scores, std::span<const std::uint8_t> labels) {
    if (scores.size() != labels.size()) fail(ErrorKind::data, "scores and labels differ in length");
    if (!std::all_of(scores.begin(), scores.end(), [](float s) { return std::isfinite(s); })) {
        fail(ErrorKind::data, "non-finite score");
    }
    Counts c;
    for (auto l : labels) (l ? c.positives : c.negatives)++;
    return c;
}

// Cumulative (tp, fp) after each distinct threshold, descending.
struct SweepPoint {
    float threshold;
    std::size_t tp;
    std::size_t fp;
};

std::vector<SweepPoint> sweep(std::span<const float> scores, std::span<const std::uint8_t> labels) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<SweepPoint> points;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const float t = scores[order[i]];
        for (; i < order.size() && scores[order[i]] == t; ++i) (labels[order[i]] ? tp : fp)++;
        points.push_back({t, tp, fp});
    }
    return points;
}

}  // namespace

double auroc(std::span<const float> scores, std::span<const std::uint8_t> labels) {
    const Counts c = count_labels(scores, labels);
    if (c.positives == 0 || c.negatives == 0) fail(ErrorKind::data, "auroc: both labels must be present");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Mann-Whitney U from mid-ranks.
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]]) rank_sum += mid_rank;
        i = j;
    }
    const double p = static_cast<double>(c.positives);
    const double u = rank_sum - p * (p + 1.0) / 2.0;
    return u / (p * static_cast<double>(c.negatives));
}

std::vector<RocPoint> roc_curve(std::span<const float> scores, std::span<const std::uint8_t> labels) {
    const Counts c = count_labels(scores, labels);
    if (c.positives == 0 || c.negatives == 0) fail(ErrorKind::data, "roc_curve: both labels must be present");
    std::vector<RocPoint> curve{{0.0, 0.0}};
    for (const auto& s : sweep(scores, labels)) {
        curve.push_back({static_cast<double>(s.fp) / static_cast<double>(c.negatives),
                         static_cast<double>(s.tp) / static_cast<double>(c.positives)});
    }
    return curve;
}

double auroc_trapezoid(std::span<const float> scores, std::span<const std::uint8_t> labels) {
    const auto curve = roc_curve(scores, labels);
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i)
        area += (curve[i].fpr - curve[i - 1].fpr) * 0.5 * (curve[i].tpr + curve[i - 1].tpr);
    return area;
}

double average_precision(std::span<const float> scores, std::span<const std::uint8_t> labels) {
    const Counts c = count_labels(scores, labels);
    if (c.positives == 0) fail(ErrorKind::data, "average_precision: no positives");
    double ap = 0.0;
    double prev_recall = 0.0;
    for (const auto& s : sweep(scores, labels)) {
        const double recall = static_cast<double>(s.tp) / static_cast<double>(c.positives);
        const double precision = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

ThresholdScore f1_max(std::span<const float> scores, std::span<const std::uint8_t> labels) {
    const Counts c = count_labels(scores, labels);
    if (c.positives == 0) fail(ErrorKind::data, "f1_max: no positives");
    ThresholdScore best{-1.0, 0.0f};
    for (const auto& s : sweep(scores, labels)) {
        const std::size_t fn = c.positives - s.tp;
        const double f1 = 2.0 * static_cast<double>(s.tp) / static_cast<double>(2 * s.tp + s.fp + fn);
        if (f1 >= best.value) best = {f1, s.threshold};
    }
    return best;
}

ThresholdScore iou_max(std::span<const float> scores, std::span<const std::uint8_t> labels) {
    const Counts c = count_labels(scores, labels);
    if (c.positives == 0) fail(ErrorKind::data, "iou_max: empty ground truth");
    ThresholdScore best{-1.0, 0.0f};
    for (const auto& s : sweep(scores, labels)) {
        const std::size_t fn = c.positives - s.tp;
        const double iou = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp + fn);
        if (iou >= best.value) best = {iou, s.threshold};
    }
    return best;
}

double f1_at(std::span<const float> scores, std::span<const std::uint8_t> labels, float threshold) {
    if (scores.size() != labels.size()) fail(ErrorKind::data, "scores and labels differ in length");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        if (predicted && labels[i]) ++tp;
        else if (predicted) ++fp;
        else if (labels[i]) ++fn;
    }
    const std::size_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

RegionLabels label_regions(std::span<const std::uint8_t> mask, std::uint32_t height, std::uint32_t width) {
    if (mask.size() != std::size_t{height} * width) fail(ErrorKind::data, "label_regions: mask size mismatch");
    RegionLabels out;
    out.labels.assign(mask.size(), -1);
    std::deque<std::size_t> queue;
    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (!mask[start] || out.labels[start] >= 0) continue;
        const std::int32_t id = out.count++;
        out.labels[start] = id;
        queue.push_back(start);
        while (!queue.empty()) {
            const std::size_t p = queue.front();
            queue.pop_front();
            const auto y = static_cast<std::int64_t>(p / width);
            const auto x = static_cast<std::int64_t>(p % width);
            for (std::int64_t dy = -1; dy <= 1; ++dy)
                for (std::int64_t dx = -1; dx <= 1; ++dx) {
                    const std::int64_t ny = y + dy, nx = x + dx;
                    if (ny < 0 || nx < 0 || ny >= height || nx >= width) continue;
                    const auto q = static_cast<std::size_t>(ny * width + nx);
                    if (mask[q] && out.labels[q] < 0) {
                        out.labels[q] = id;
                        queue.push_back(q);
                    }
                }
        }
    }
    return out;
}

double aupro(std::span<const PixelMap> maps, double fpr_cap) {
    if (!(fpr_cap > 0.0 && fpr_cap <= 1.0)) fail(ErrorKind::usage, "aupro: fpr cap must be in (0, 1]");

    std::vector<float> scores;
    std::vector<std::int32_t> region;  // global region id or -1
    std::vector<std::size_t> region_size;
    std::size_t negatives = 0;
    for (const auto& m : maps) {
        if (m.scores.size() != m.mask.size() || m.scores.size() != std::size_t{m.height} * m.width) {
            fail(ErrorKind::data, "aupro: score map and mask differ in size");
        }
        if (!std::all_of(m.scores.begin(), m.scores.end(), [](float v) { return std::isfinite(v); })) {
            fail(ErrorKind::data, "aupro: non-finite score");
        }
        const RegionLabels rl = label_regions(m.mask, m.height, m.width);
        const auto base = static_cast<std::int32_t>(region_size.size());
        region_size.resize(region_size.size() + static_cast<std::size_t>(rl.count), 0);
        for (std::size_t i = 0; i < m.scores.size(); ++i) {
            scores.push_back(m.scores[i]);
            if (rl.labels[i] >= 0) {
                region.push_back(base + rl.labels[i]);
                ++region_size[static_cast<std::size_t>(base + rl.labels[i])];
            } else {
                region.push_back(-1);
                ++negatives;
            }
        }
    }
    if (region_size.empty()) fail(ErrorKind::data, "aupro: no ground-truth regions");
    if (negatives == 0) fail(ErrorKind::data, "aupro: no negative pixels");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    const double regions = static_cast<double>(region_size.size());
    double pro_sum = 0.0;  // sum over regions of detected fraction
    std::size_t fp = 0;
    double area = 0.0;
    double prev_fpr = 0.0, prev_pro = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        const float t = scores[order[i]];
        for (; i < order.size() && scores[order[i]] == t; ++i) {
            const std::int32_t r = region[order[i]];
            if (r < 0) ++fp;
            else pro_sum += 1.0 / static_cast<double>(region_size[static_cast<std::size_t>(r)]);
        }
        const double fpr = static_cast<double>(fp) / static_cast<double>(negatives);
        const double pro = pro_sum / regions;
        if (fpr >= fpr_cap) {
            const double pro_at_cap =
                fpr > prev_fpr ? prev_pro + (pro - prev_pro) * (fpr_cap - prev_fpr) / (fpr - prev_fpr) : pro;
            area += (fpr_cap - prev_fpr) * 0.5 * (prev_pro + pro_at_cap);
            return area / fpr_cap;
        }
        area += (fpr - prev_fpr) * 0.5 * (prev_pro + pro);
        prev_fpr = fpr;
        prev_pro = pro;
    }
    return area / fpr_cap;  // unreachable: the last point has fpr = 1
}

}  // namespace hiercore
