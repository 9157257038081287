#pragma once

// Parameter-free semantic clustering: first-neighbour (FINCH) hierarchy,
// silhouette-based level selection, and nearest-key assignment.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "hiercore/matrix.hpp"
#include "json.hpp"

namespace hiercore {

struct Partition {
    std::vector<std::uint32_t> assignment;  // point index -> cluster id
    std::uint32_t cluster_count = 0;

    friend bool operator==(const Partition&, const Partition&) = default;
};

// first_neighbor[i] is the nearest other point (ties -> smallest index).
// For a single point it is the point itself.
struct FirstNeighborGraph {
    std::vector<std::size_t> first_neighbor;
    std::uint64_t distance_evals = 0;

    // i ~ j iff j = nn(i), i = nn(j), or nn(i) = nn(j).
    bool linked(std::size_t i, std::size_t j) const;
};

FirstNeighborGraph first_neighbor_graph(const Matrix& points);

// Components of the first-neighbour graph, numbered by first occurrence.
Partition connected_components(const FirstNeighborGraph& graph);

// Same, keeping only links between points at most `max_link` apart.
Partition connected_components(const FirstNeighborGraph& graph, const Matrix& points, double max_link,
                               std::uint64_t* distance_evals = nullptr);

// Length of the longest link in the graph.
double longest_link(const FirstNeighborGraph& graph, const Matrix& points, std::uint64_t* distance_evals = nullptr);

// Levels are ordered fine -> coarse: levels[0] has the most clusters and
// every later level is a union of clusters of the level before it.
// Above level 0, links between cluster means longer than the longest
// level-0 link are dropped, so well-separated groups are never merged
// just because one of them has become a single node.
struct FinchHierarchy {
    std::vector<Partition> levels;
    double max_link = 0.0;
    std::uint64_t distance_evals = 0;
};

FinchHierarchy finch(const Matrix& points);

// Mean silhouette with Euclidean distance. A point in a singleton cluster
// has a = 0. Requires at least two clusters.
double silhouette(const Matrix& points, std::span<const std::uint32_t> assignment,
                  std::uint64_t* distance_evals = nullptr);

struct ClusterModel {
    std::optional<std::size_t> chosen_level;  // unset for label-derived models
    std::uint32_t k = 0;
    Matrix keys;                               // k × semantic_dim
    std::vector<std::size_t> sizes;            // N_k
    std::vector<std::uint32_t> assignment;     // training record -> cluster
    std::vector<std::uint32_t> level_cluster_counts;
    std::vector<std::optional<double>> silhouette_by_level;
    std::uint64_t distance_evals = 0;

    friend bool operator==(const ClusterModel&, const ClusterModel&) = default;
};

// Per-cluster arithmetic means of the member points.
Matrix cluster_means(const Matrix& points, std::span<const std::uint32_t> assignment, std::uint32_t k);

// Picks the level with the highest silhouette (ties -> fewer clusters).
// Falls back to K = 1 with the global mean when no level has >= 2 clusters.
ClusterModel select_level(const FinchHierarchy& hierarchy, const Matrix& points);

// finch + select_level.
ClusterModel cluster_semantic(const Matrix& points);

// Builds a model directly from a known partition (label-derived clustering).
ClusterModel model_from_partition(const Matrix& points, std::span<const std::uint32_t> assignment,
                                  std::uint32_t k);

// argmin_k ||e - keys[k]||, ties -> smallest index.
std::uint32_t assign(std::span<const float> e, const Matrix& keys);
inline std::uint32_t assign(std::span<const float> e, const ClusterModel& model) { return assign(e, model.keys); }

double adjusted_rand_index(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

nlohmann::json to_json(const ClusterModel& model);
ClusterModel cluster_model_from_json(const nlohmann::json& j);
void save_cluster_model(const ClusterModel& model, const std::filesystem::path& path);
ClusterModel load_cluster_model(const std::filesystem::path& path);

}  // namespace hiercore
