#include "hiercore/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "hiercore/error.hpp"

namespace hiercore {

namespace {

// Index of the grid node nearest to pixel `x` under corner alignment.
std::uint32_t nearest_node(std::uint32_t x, std::uint32_t pixels, std::uint32_t nodes) {
    if (pixels <= 1 || nodes <= 1) return 0;
    const std::uint64_t num = 2ull * x * (nodes - 1) + (pixels - 1);
    return static_cast<std::uint32_t>(num / (2ull * (pixels - 1)));
}

void check_spec(const SynthSpec& s) {
    if (s.classes == 0 || s.semantic_dim == 0 || s.patch_dim == 0 || s.grid_w == 0 || s.grid_h == 0 ||
        s.image_w == 0 || s.image_h == 0) {
        fail(ErrorKind::usage, "synthetic dimensions must be positive");
    }
    if (s.semantic_dim < s.classes) fail(ErrorKind::usage, "semantic_dim must be at least the class count");
    if (!(s.anomaly_rate >= 0.0 && s.anomaly_rate <= 1.0)) fail(ErrorKind::usage, "anomaly rate outside [0,1]");
    if (!(s.semantic_sigma > 0.0) || !(s.patch_sigma >= 0.0) || !(s.margin >= 0.0)) {
        fail(ErrorKind::usage, "synthetic sigmas and margin must be non-negative");
    }
    if (s.min_defect_cells == 0 || s.min_defect_cells > s.max_defect_cells) {
        fail(ErrorKind::usage, "invalid defect size range");
    }
    if (!s.class_overrides.empty() && s.class_overrides.size() != s.classes) {
        fail(ErrorKind::usage, "class_overrides must be empty or have one entry per class");
    }
}

}  // namespace

FeatureArchive synth_generate(const SynthSpec& spec, std::uint64_t seed) {
    check_spec(spec);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    FeatureArchive archive;
    archive.semantic_dim = spec.semantic_dim;
    archive.patch_dim = spec.patch_dim;
    archive.grid = PatchGrid{spec.grid_w, spec.grid_h, 3, 3, 1, 1};

    const double mean_scale = spec.margin * spec.semantic_sigma / std::sqrt(2.0);
    std::vector<std::vector<double>> patch_means(spec.classes, std::vector<double>(spec.patch_dim));
    for (auto& m : patch_means)
        for (auto& v : m) v = spec.patch_class_spread * gauss(rng);

    // Abnormal quota per class: round(r * n) in total, spread as evenly as possible.
    const std::size_t n_test = std::size_t{spec.classes} * spec.test_per_class;
    const auto n_abnormal = static_cast<std::size_t>(std::llround(spec.anomaly_rate * static_cast<double>(n_test)));
    std::vector<std::size_t> quota(spec.classes, n_abnormal / spec.classes);
    for (std::size_t k = 0; k < n_abnormal % spec.classes; ++k) ++quota[k];

    const std::size_t cells = archive.grid.cells();
    for (std::uint32_t c = 0; c < spec.classes; ++c) {
        const std::string label = "class" + std::to_string(c);
        const SynthClassParams over = spec.class_overrides.empty() ? SynthClassParams{} : spec.class_overrides[c];
        const double sigma = over.patch_sigma.value_or(spec.patch_sigma);
        const double offset = over.anomaly_offset.value_or(spec.anomaly_offset);

        auto make_record = [&](Split split, std::uint32_t i) {
            ImageRecord r;
            r.id = "c" + std::to_string(c) + "_" + to_string(split) + "_" + std::to_string(i);
            r.split = split;
            r.class_label = label;
            r.image_size = {spec.image_w, spec.image_h};
            r.semantic.resize(spec.semantic_dim);
            for (std::uint32_t d = 0; d < spec.semantic_dim; ++d) {
                const double mean = d == c ? mean_scale : 0.0;
                r.semantic[d] = static_cast<float>(mean + spec.semantic_sigma * gauss(rng));
            }
            r.patches = Matrix(cells, spec.patch_dim);
            for (std::size_t cell = 0; cell < cells; ++cell)
                for (std::uint32_t d = 0; d < spec.patch_dim; ++d)
                    r.patches(cell, d) = static_cast<float>(patch_means[c][d] + sigma * gauss(rng));
            return r;
        };

        for (std::uint32_t i = 0; i < spec.train_per_class; ++i) archive.records.push_back(make_record(Split::train, i));

        std::vector<std::uint32_t> order(spec.test_per_class);
        std::iota(order.begin(), order.end(), 0u);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<bool> abnormal(spec.test_per_class, false);
        for (std::size_t q = 0; q < std::min<std::size_t>(quota[c], order.size()); ++q) abnormal[order[q]] = true;

        for (std::uint32_t i = 0; i < spec.test_per_class; ++i) {
            ImageRecord r = make_record(Split::test, i);
            Mask mask{spec.image_w, spec.image_h, std::vector<std::uint8_t>(std::size_t{spec.image_w} * spec.image_h, 0)};
            if (abnormal[i]) {
                r.gt_label = GtLabel::abnormal;
                std::uniform_int_distribution<std::uint32_t> size_w(spec.min_defect_cells,
                                                                    std::min(spec.max_defect_cells, spec.grid_w));
                std::uniform_int_distribution<std::uint32_t> size_h(spec.min_defect_cells,
                                                                    std::min(spec.max_defect_cells, spec.grid_h));
                const std::uint32_t rw = std::min(size_w(rng), spec.grid_w);
                const std::uint32_t rh = std::min(size_h(rng), spec.grid_h);
                const std::uint32_t x0 = std::uniform_int_distribution<std::uint32_t>(0, spec.grid_w - rw)(rng);
                const std::uint32_t y0 = std::uniform_int_distribution<std::uint32_t>(0, spec.grid_h - rh)(rng);

                std::vector<double> dir(spec.patch_dim);
                double norm = 0.0;
                while (norm == 0.0) {
                    norm = 0.0;
                    for (auto& v : dir) {
                        v = gauss(rng);
                        norm += v * v;
                    }
                    norm = std::sqrt(norm);
                }
                for (std::uint32_t gy = y0; gy < y0 + rh; ++gy)
                    for (std::uint32_t gx = x0; gx < x0 + rw; ++gx)
                        for (std::uint32_t d = 0; d < spec.patch_dim; ++d)
                            r.patches(std::size_t{gy} * spec.grid_w + gx, d) +=
                                static_cast<float>(offset * dir[d] / norm);

                for (std::uint32_t y = 0; y < spec.image_h; ++y) {
                    const std::uint32_t gy = nearest_node(y, spec.image_h, spec.grid_h);
                    if (gy < y0 || gy >= y0 + rh) continue;
                    for (std::uint32_t x = 0; x < spec.image_w; ++x) {
                        const std::uint32_t gx = nearest_node(x, spec.image_w, spec.grid_w);
                        if (gx >= x0 && gx < x0 + rw) mask.pixels[std::size_t{y} * spec.image_w + x] = 1;
                    }
                }
            }
            r.gt_mask = std::move(mask);
            archive.records.push_back(std::move(r));
        }
    }
    return archive;
}

FeatureArchive strip_class_labels(FeatureArchive archive) {
    for (auto& r : archive.records) r.class_label.reset();
    return archive;
}

}  // namespace hiercore
