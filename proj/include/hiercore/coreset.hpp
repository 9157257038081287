#pragma once

#include <cstdint>
#include <vector>

#include "hiercore/matrix.hpp"

namespace hiercore {

struct CoresetConfig {
    double ratio = 0.10;
    std::uint64_t seed = 0;
    // Greedy selection on a Gaussian random projection to this many
    // dimensions. 0 disables projection.
    std::uint32_t projection_dim = 0;
};

struct Coreset {
    std::vector<std::size_t> indices;  // selection order
    Matrix vectors;                    // pool rows at `indices`, verbatim
    double covering_radius = 0.0;
    // radii[i] = covering radius after i + 1 selections.
    std::vector<double> radii;
    std::uint64_t distance_evals = 0;
};

void validate(const CoresetConfig& config);

// max(1, round(ratio * pool_size)).
std::size_t coreset_budget(std::size_t pool_size, double ratio);

// Greedy farthest-point k-center selection. The first point is drawn from
// the seed; later ties go to the smallest index. Exactly budget * m
// distances are evaluated.
Coreset kcenter_greedy(const Matrix& pool, const CoresetConfig& config);

}  // namespace hiercore
