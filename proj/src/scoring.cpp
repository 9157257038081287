#include "hiercore/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "hiercore/blob.hpp"
#include "hiercore/error.hpp"
#include "hiercore/parallel.hpp"
#include "json.hpp"

namespace hiercore {

std::vector<float> upsample_bilinear(std::span<const float> grid, std::uint32_t h, std::uint32_t w,
                                     std::uint32_t out_h, std::uint32_t out_w) {
    if (h == 0 || w == 0) fail(ErrorKind::data, "upsample_bilinear: empty grid");
    if (out_h == 0 || out_w == 0) fail(ErrorKind::data, "upsample_bilinear: zero target size");
    if (grid.size() != std::size_t{h} * w) fail(ErrorKind::data, "upsample_bilinear: grid size mismatch");

    struct Tap {
        std::uint32_t lo, hi;
        double frac;
    };
    auto taps = [](std::uint32_t in, std::uint32_t out) {
        std::vector<Tap> t(out);
        for (std::uint32_t o = 0; o < out; ++o) {
            if (in == 1 || out == 1) {
                t[o] = {0, 0, 0.0};
                continue;
            }
            const double pos = static_cast<double>(o) * (in - 1) / static_cast<double>(out - 1);
            const auto lo = std::min(static_cast<std::uint32_t>(pos), in - 1);
            const std::uint32_t hi = std::min(lo + 1, in - 1);
            t[o] = {lo, hi, pos - lo};
        }
        return t;
    };
    const auto ty = taps(h, out_h);
    const auto tx = taps(w, out_w);

    std::vector<float> out(std::size_t{out_h} * out_w);
    for (std::uint32_t y = 0; y < out_h; ++y) {
        const Tap& a = ty[y];
        for (std::uint32_t x = 0; x < out_w; ++x) {
            const Tap& b = tx[x];
            const double v00 = grid[std::size_t{a.lo} * w + b.lo];
            const double v01 = grid[std::size_t{a.lo} * w + b.hi];
            const double v10 = grid[std::size_t{a.hi} * w + b.lo];
            const double v11 = grid[std::size_t{a.hi} * w + b.hi];
            const double top = v00 + (v01 - v00) * b.frac;
            const double bottom = v10 + (v11 - v10) * b.frac;
            out[std::size_t{y} * out_w + x] = static_cast<float>(top + (bottom - top) * a.frac);
        }
    }
    return out;
}

std::vector<float> gaussian_blur(std::span<const float> map, std::uint32_t h, std::uint32_t w, double sigma) {
    if (!(sigma > 0.0)) fail(ErrorKind::usage, "smoothing sigma must be positive");
    const int radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) total += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (auto& k : kernel) k /= total;

    auto reflect = [](int i, int n) {
        if (n == 1) return 0;
        const int period = 2 * n;
        i %= period;
        if (i < 0) i += period;
        return i < n ? i : period - 1 - i;
    };

    std::vector<double> tmp(map.size());
    for (std::uint32_t y = 0; y < h; ++y)
        for (std::uint32_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * map[std::size_t{y} * w + reflect(static_cast<int>(x) + k, static_cast<int>(w))];
            tmp[std::size_t{y} * w + x] = acc;
        }
    std::vector<float> out(map.size());
    for (std::uint32_t y = 0; y < h; ++y)
        for (std::uint32_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * tmp[std::size_t(reflect(static_cast<int>(y) + k, static_cast<int>(h))) * w + x];
            out[std::size_t{y} * w + x] = static_cast<float>(acc);
        }
    return out;
}

std::vector<float> nearest_distances(const Matrix& queries, const Matrix& bank) {
    if (bank.rows == 0) fail(ErrorKind::data, "nearest_distances: empty bank");
    if (queries.cols != bank.cols) {
        fail(ErrorKind::data, "dimension mismatch: query patches have " + std::to_string(queries.cols) +
                                  " channels, bank has " + std::to_string(bank.cols));
    }
    std::vector<float> out(queries.rows);
    const std::size_t dim = bank.cols;
    for (std::size_t q = 0; q < queries.rows; ++q) {
        const float* a = queries.row(q).data();
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < bank.rows; ++r) {
            const float* b = bank.row(r).data();
            // Partial sums only grow, so abandoning early keeps the minimum exact.
            double acc = 0.0;
            for (std::size_t d = 0; d < dim && acc < best; ++d) {
                const double diff = static_cast<double>(a[d]) - static_cast<double>(b[d]);
                acc += diff * diff;
            }
            if (acc < best) best = acc;
        }
        out[q] = static_cast<float>(std::sqrt(best));
    }
    return out;
}

AnomalyResult score_record(const ImageRecord& record, const MemoryBank& bank, const ScoringOptions& options,
                           QueryCounters* counters) {
    if (record.patches.cols != bank.patch_dim) {
        fail(ErrorKind::data, "record '" + record.id + "': dimension mismatch, patch_dim " +
                                  std::to_string(record.patches.cols) + " vs bank " + std::to_string(bank.patch_dim));
    }
    if (record.patches.rows != bank.grid.cells()) {
        fail(ErrorKind::data, "record '" + record.id + "': patch grid does not match the bank grid");
    }
    AnomalyResult r;
    r.record_id = record.id;
    r.routed_cluster = route(record.semantic, bank);
    const Matrix& rows = bank.banks[r.routed_cluster].vectors;
    r.grid_h = bank.grid.grid_h;
    r.grid_w = bank.grid.grid_w;
    r.patch_scores = nearest_distances(record.patches, rows);
    r.height = record.image_size.height;
    r.width = record.image_size.width;
    r.score_map = upsample_bilinear(r.patch_scores, r.grid_h, r.grid_w, r.height, r.width);
    if (options.smoothing) r.score_map = gaussian_blur(r.score_map, r.height, r.width, options.smoothing_sigma);
    r.image_score = *std::max_element(r.patch_scores.begin(), r.patch_scores.end());
    if (counters) {
        counters->query_distance_evals += static_cast<std::uint64_t>(record.patches.rows) * rows.rows;
        counters->route_distance_evals += bank.cluster_model.keys.rows;
    }
    return r;
}

BatchScores score_batch(const FeatureArchive& archive, const MemoryBank& bank, const ScoringOptions& options) {
    const auto test = archive.split(Split::test);
    BatchScores out;
    out.results.resize(test.size());
    std::vector<QueryCounters> counters(test.size());
    parallel_for(test.size(), [&](std::size_t i) { out.results[i] = score_record(*test[i], bank, options, &counters[i]); });
    for (const auto& c : counters) out.counters += c;
    return out;
}

void write_scores_jsonl(std::span<const AnomalyResult> results, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    for (const auto& r : results) {
        nlohmann::json j{{"id", r.record_id}, {"routed_cluster", r.routed_cluster}, {"image_score", r.image_score}};
        out << j.dump() << '\n';
    }
    if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

void write_score_maps(std::span<const AnomalyResult> results, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
    for (const auto& r : results) {
        const std::uint32_t dims[] = {r.height, r.width};
        write_blob(dir / (r.record_id + ".map"), dims, r.score_map);
    }
}

}  // namespace hiercore
