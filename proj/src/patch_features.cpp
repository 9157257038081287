#include "hiercore/patch_features.hpp"

#include <algorithm>

#include "hiercore/error.hpp"
#include "hiercore/scoring.hpp"

namespace hiercore {

std::uint32_t pooled_extent(std::uint32_t in, std::uint32_t window, std::uint32_t padding, std::uint32_t stride) {
    if (stride == 0) fail(ErrorKind::usage, "stride must be positive");
    const std::int64_t span = std::int64_t{in} + 2 * std::int64_t{padding} - window;
    if (span < 0) fail(ErrorKind::data, "window larger than padded input");
    return static_cast<std::uint32_t>(span / stride + 1);
}

std::uint64_t patch_count(std::uint64_t images, std::uint32_t width, std::uint32_t height, const WindowSpec& window) {
    return images * pooled_extent(width, window.w, window.padding, 1) *
           pooled_extent(height, window.h, window.padding, 1);
}

LayerMap aggregate_window(const LayerMap& map, const WindowSpec& window) {
    if (window.w % 2 == 0 || window.h % 2 == 0) fail(ErrorKind::usage, "aggregation window must be odd");
    if (map.height == 0 || map.width == 0 || map.channels == 0) fail(ErrorKind::data, "empty layer map");

    LayerMap out;
    out.layer_id = map.layer_id;
    out.channels = map.channels;
    out.height = pooled_extent(map.height, window.h, window.padding, window.stride);
    out.width = pooled_extent(map.width, window.w, window.padding, window.stride);
    out.values.assign(std::size_t{out.height} * out.width * out.channels, 0.0f);

    std::vector<double> acc(map.channels);
    for (std::uint32_t oy = 0; oy < out.height; ++oy) {
        for (std::uint32_t ox = 0; ox < out.width; ++ox) {
            const std::int64_t y0 = std::int64_t{oy} * window.stride - window.padding;
            const std::int64_t x0 = std::int64_t{ox} * window.stride - window.padding;
            std::fill(acc.begin(), acc.end(), 0.0);
            std::size_t count = 0;
            for (std::int64_t y = std::max<std::int64_t>(y0, 0); y < std::min<std::int64_t>(y0 + window.h, map.height);
                 ++y) {
                for (std::int64_t x = std::max<std::int64_t>(x0, 0);
                     x < std::min<std::int64_t>(x0 + window.w, map.width); ++x) {
                    ++count;
                    for (std::uint32_t c = 0; c < map.channels; ++c)
                        acc[c] += map.at(static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(x), c);
                }
            }
            for (std::uint32_t c = 0; c < map.channels; ++c)
                out.at(oy, ox, c) = count ? static_cast<float>(acc[c] / static_cast<double>(count)) : 0.0f;
        }
    }
    return out;
}

LayerMap resize_bilinear(const LayerMap& map, std::uint32_t height, std::uint32_t width) {
    if (map.height == height && map.width == width) return map;
    LayerMap out;
    out.layer_id = map.layer_id;
    out.height = height;
    out.width = width;
    out.channels = map.channels;
    out.values.resize(std::size_t{height} * width * map.channels);
    std::vector<float> plane(std::size_t{map.height} * map.width);
    for (std::uint32_t c = 0; c < map.channels; ++c) {
        for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = map.values[i * map.channels + c];
        const std::vector<float> up = upsample_bilinear(plane, map.height, map.width, height, width);
        for (std::size_t i = 0; i < up.size(); ++i) out.values[i * map.channels + c] = up[i];
    }
    return out;
}

PatchTensor merge_layers(std::span<const LayerMap> maps) {
    if (maps.empty()) fail(ErrorKind::data, "merge_layers: no layers");
    std::size_t ref = 0;
    for (std::size_t i = 1; i < maps.size(); ++i) {
        if (std::size_t{maps[i].height} * maps[i].width > std::size_t{maps[ref].height} * maps[ref].width) ref = i;
    }
    PatchTensor t;
    t.grid_h = maps[ref].height;
    t.grid_w = maps[ref].width;
    for (const auto& m : maps) t.patch_dim += m.channels;
    t.patches = Matrix(std::size_t{t.grid_h} * t.grid_w, t.patch_dim);

    std::uint32_t offset = 0;
    for (const auto& m : maps) {
        const LayerMap resized = resize_bilinear(m, t.grid_h, t.grid_w);
        for (std::size_t cell = 0; cell < t.patches.rows; ++cell)
            for (std::uint32_t c = 0; c < m.channels; ++c)
                t.patches(cell, offset + c) = resized.values[cell * m.channels + c];
        offset += m.channels;
    }
    return t;
}

PatchTensor local_patch_features(std::span<const LayerMap> maps, const WindowSpec& window) {
    std::vector<LayerMap> pooled;
    pooled.reserve(maps.size());
    for (const auto& m : maps) pooled.push_back(aggregate_window(m, window));
    PatchTensor t = merge_layers(pooled);
    t.window = window;
    return t;
}

}  // namespace hiercore
