#include "hiercore/coreset.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "hiercore/error.hpp"
#include "hiercore/parallel.hpp"

namespace hiercore {

namespace {

constexpr std::size_t kParallelRows = 4096;

Matrix random_projection(const Matrix& pool, std::uint32_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
    std::vector<double> proj(std::size_t{dim} * pool.cols);
    for (auto& v : proj) v = gauss(rng);
    Matrix out(pool.rows, dim);
    for (std::size_t i = 0; i < pool.rows; ++i) {
        const auto row = pool.row(i);
        for (std::uint32_t k = 0; k < dim; ++k) {
            double acc = 0.0;
            for (std::size_t d = 0; d < pool.cols; ++d) acc += proj[k * pool.cols + d] * row[d];
            out(i, k) = static_cast<float>(acc);
        }
    }
    return out;
}

}  // namespace

void validate(const CoresetConfig& config) {
    if (!(config.ratio > 0.0 && config.ratio <= 1.0)) {
        fail(ErrorKind::usage, "coreset ratio must be in (0, 1], got " + std::to_string(config.ratio));
    }
}

std::size_t coreset_budget(std::size_t pool_size, double ratio) {
    const auto b = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(pool_size)));
    return std::max<std::size_t>(1, std::min(b, pool_size));
}

Coreset kcenter_greedy(const Matrix& pool, const CoresetConfig& config) {
    validate(config);
    if (pool.rows == 0) fail(ErrorKind::data, "kcenter_greedy: empty pool");

    const std::size_t m = pool.rows;
    const std::size_t budget = coreset_budget(m, config.ratio);
    const bool projected = config.projection_dim > 0;
    const Matrix projected_pool = projected ? random_projection(pool, config.projection_dim, config.seed) : Matrix{};
    const Matrix& space = projected ? projected_pool : pool;

    Coreset cs;
    cs.indices.reserve(budget);
    cs.radii.reserve(budget);
    std::vector<double> min_d2(m, std::numeric_limits<double>::infinity());

    std::mt19937_64 rng(config.seed);
    std::size_t next = static_cast<std::size_t>(rng() % m);

    for (std::size_t step = 0; step < budget; ++step) {
        cs.indices.push_back(next);
        const auto center = space.row(next);
        auto update = [&](std::size_t i) {
            const double d = squared_l2(space.row(i), center);
            if (d < min_d2[i]) min_d2[i] = d;
        };
        if (m >= kParallelRows) {
            parallel_for(m, update);
        } else {
            for (std::size_t i = 0; i < m; ++i) update(i);
        }
        cs.distance_evals += m;

        std::size_t arg = 0;
        for (std::size_t i = 1; i < m; ++i)
            if (min_d2[i] > min_d2[arg]) arg = i;
        cs.radii.push_back(std::sqrt(min_d2[arg]));
        next = arg;
    }

    cs.vectors = Matrix(budget, pool.cols);
    for (std::size_t k = 0; k < budget; ++k) {
        const auto src = pool.row(cs.indices[k]);
        std::copy(src.begin(), src.end(), cs.vectors.row(k).begin());
    }

    if (projected) {
        double radius = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < budget; ++k) best = std::min(best, squared_l2(pool.row(i), cs.vectors.row(k)));
            radius = std::max(radius, best);
        }
        cs.distance_evals += m * budget;
        cs.covering_radius = std::sqrt(radius);
    } else {
        cs.covering_radius = cs.radii.back();
    }
    return cs;
}

}  // namespace hiercore
