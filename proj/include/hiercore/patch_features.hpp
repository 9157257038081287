#pragma once

// Locally aware patch features: window mean pooling over a feature map and
// merging of several backbone layers onto one grid.

#include <cstdint>
#include <span>
#include <vector>

#include "hiercore/feature_store.hpp"

namespace hiercore {

// H × W × C feature map, C order.
struct LayerMap {
    int layer_id = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t channels = 0;
    std::vector<float> values;

    float at(std::uint32_t y, std::uint32_t x, std::uint32_t c) const {
        return values[(std::size_t{y} * width + x) * channels + c];
    }
    float& at(std::uint32_t y, std::uint32_t x, std::uint32_t c) {
        return values[(std::size_t{y} * width + x) * channels + c];
    }
};

struct WindowSpec {
    std::uint32_t w = 3;
    std::uint32_t h = 3;
    std::uint32_t stride = 1;
    std::uint32_t padding = 1;
};

// Output extent along one axis: (in + 2p - window) / stride + 1.
std::uint32_t pooled_extent(std::uint32_t in, std::uint32_t window, std::uint32_t padding, std::uint32_t stride);

// Patch count over n images of size W × H at stride 1.
std::uint64_t patch_count(std::uint64_t images, std::uint32_t width, std::uint32_t height, const WindowSpec& window);

// Each output cell is the mean of the in-bounds cells of its window.
LayerMap aggregate_window(const LayerMap& map, const WindowSpec& window = {});

// Corner-aligned bilinear resize of every channel.
LayerMap resize_bilinear(const LayerMap& map, std::uint32_t height, std::uint32_t width);

struct PatchTensor {
    std::uint32_t grid_h = 0;
    std::uint32_t grid_w = 0;
    std::uint32_t patch_dim = 0;
    Matrix patches;  // one row per cell, row-major over the grid
    WindowSpec window;
};

// Resizes every map to the highest-resolution grid (first one on ties) and
// concatenates channels in the given layer order.
PatchTensor merge_layers(std::span<const LayerMap> maps);

// aggregate_window on each layer, then merge_layers.
PatchTensor local_patch_features(std::span<const LayerMap> maps, const WindowSpec& window = {});

}  // namespace hiercore
