#include "hiercore/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include "hiercore/error.hpp"
#include "hiercore/parallel.hpp"

namespace hiercore {

using nlohmann::json;

bool FirstNeighborGraph::linked(std::size_t i, std::size_t j) const {
    if (i == j) return false;
    return first_neighbor[i] == j || first_neighbor[j] == i || first_neighbor[i] == first_neighbor[j];
}

FirstNeighborGraph first_neighbor_graph(const Matrix& points) {
    if (points.rows == 0) fail(ErrorKind::data, "first_neighbor_graph: no points");
    require_finite(points, "first_neighbor_graph");

    const std::size_t n = points.rows;
    FirstNeighborGraph g;
    g.first_neighbor.assign(n, 0);
    if (n == 1) return g;

    parallel_for(n, [&](std::size_t i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_j = i == 0 ? 1 : 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = squared_l2(points.row(i), points.row(j));
            if (d < best) {
                best = d;
                best_j = j;
            }
        }
        g.first_neighbor[i] = best_j;
    });
    g.distance_evals = static_cast<std::uint64_t>(n) * (n - 1);
    return g;
}

namespace {

class UnionFind {
  public:
    explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

    Partition partition() {
        const std::size_t n = parent_.size();
        Partition p;
        p.assignment.resize(n);
        std::vector<std::uint32_t> label(n, std::numeric_limits<std::uint32_t>::max());
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t root = find(i);
            if (label[root] == std::numeric_limits<std::uint32_t>::max()) label[root] = p.cluster_count++;
            p.assignment[i] = label[root];
        }
        return p;
    }

  private:
    std::vector<std::size_t> parent_;
};

// Points grouped by their first neighbour, for the shared-neighbour clause.
std::vector<std::vector<std::size_t>> shared_neighbor_groups(const FirstNeighborGraph& graph) {
    std::vector<std::vector<std::size_t>> groups(graph.first_neighbor.size());
    for (std::size_t i = 0; i < graph.first_neighbor.size(); ++i) groups[graph.first_neighbor[i]].push_back(i);
    return groups;
}

}  // namespace

Partition connected_components(const FirstNeighborGraph& graph) {
    const std::size_t n = graph.first_neighbor.size();
    UnionFind uf(n);
    // Edges i -- nn(i) already connect every pair sharing a first neighbour.
    for (std::size_t i = 0; i < n; ++i) uf.unite(i, graph.first_neighbor[i]);
    return uf.partition();
}

Partition connected_components(const FirstNeighborGraph& graph, const Matrix& points, double max_link,
                               std::uint64_t* distance_evals) {
    const std::size_t n = graph.first_neighbor.size();
    UnionFind uf(n);
    std::uint64_t evals = 0;
    auto close = [&](std::size_t i, std::size_t j) {
        ++evals;
        return l2(points.row(i), points.row(j)) <= max_link;
    };
    for (std::size_t i = 0; i < n; ++i)
        if (graph.first_neighbor[i] != i && close(i, graph.first_neighbor[i])) uf.unite(i, graph.first_neighbor[i]);
    for (const auto& group : shared_neighbor_groups(graph))
        for (std::size_t a = 0; a < group.size(); ++a)
            for (std::size_t b = a + 1; b < group.size(); ++b)
                if (close(group[a], group[b])) uf.unite(group[a], group[b]);
    if (distance_evals) *distance_evals += evals;
    return uf.partition();
}

double longest_link(const FirstNeighborGraph& graph, const Matrix& points, std::uint64_t* distance_evals) {
    double longest = 0.0;
    std::uint64_t evals = 0;
    auto visit = [&](std::size_t i, std::size_t j) {
        ++evals;
        longest = std::max(longest, l2(points.row(i), points.row(j)));
    };
    for (std::size_t i = 0; i < graph.first_neighbor.size(); ++i)
        if (graph.first_neighbor[i] != i) visit(i, graph.first_neighbor[i]);
    for (const auto& group : shared_neighbor_groups(graph))
        for (std::size_t a = 0; a < group.size(); ++a)
            for (std::size_t b = a + 1; b < group.size(); ++b) visit(group[a], group[b]);
    if (distance_evals) *distance_evals += evals;
    return longest;
}

Matrix cluster_means(const Matrix& points, std::span<const std::uint32_t> assignment, std::uint32_t k) {
    std::vector<double> sums(std::size_t{k} * points.cols, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.rows; ++i) {
        const auto c = assignment[i];
        ++counts[c];
        const auto row = points.row(i);
        for (std::size_t d = 0; d < points.cols; ++d) sums[c * points.cols + d] += row[d];
    }
    Matrix means(k, points.cols);
    for (std::uint32_t c = 0; c < k; ++c) {
        if (counts[c] == 0) fail(ErrorKind::data, "cluster " + std::to_string(c) + " has no members");
        for (std::size_t d = 0; d < points.cols; ++d)
            means(c, d) = static_cast<float>(sums[c * points.cols + d] / static_cast<double>(counts[c]));
    }
    return means;
}

FinchHierarchy finch(const Matrix& points) {
    FinchHierarchy h;
    FirstNeighborGraph g = first_neighbor_graph(points);
    h.distance_evals += g.distance_evals;
    h.levels.push_back(connected_components(g));
    h.max_link = longest_link(g, points, &h.distance_evals);

    while (h.levels.back().cluster_count > 1) {
        const Partition& prev = h.levels.back();
        const Matrix means = cluster_means(points, prev.assignment, prev.cluster_count);
        FirstNeighborGraph mg = first_neighbor_graph(means);
        h.distance_evals += mg.distance_evals;
        const Partition merged = connected_components(mg, means, h.max_link, &h.distance_evals);
        if (merged.cluster_count == prev.cluster_count) break;

        Partition next;
        next.cluster_count = merged.cluster_count;
        next.assignment.resize(prev.assignment.size());
        for (std::size_t i = 0; i < prev.assignment.size(); ++i)
            next.assignment[i] = merged.assignment[prev.assignment[i]];
        h.levels.push_back(std::move(next));
    }
    return h;
}

double silhouette(const Matrix& points, std::span<const std::uint32_t> assignment, std::uint64_t* distance_evals) {
    const std::size_t n = points.rows;
    if (assignment.size() != n) fail(ErrorKind::data, "silhouette: assignment length differs from point count");
    if (n < 2) fail(ErrorKind::data, "silhouette: need at least two points");
    const std::uint32_t k = assignment.empty() ? 0 : *std::max_element(assignment.begin(), assignment.end()) + 1;
    std::vector<std::size_t> sizes(k, 0);
    for (auto c : assignment) ++sizes[c];
    const auto populated = std::count_if(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 0; });
    if (populated < 2) fail(ErrorKind::data, "silhouette: undefined for a single cluster");

    std::vector<double> s(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        std::vector<double> sum(k, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            sum[assignment[j]] += l2(points.row(i), points.row(j));
        }
        const std::uint32_t own = assignment[i];
        const double a = sizes[own] > 1 ? sum[own] / static_cast<double>(sizes[own] - 1) : 0.0;
        double b = std::numeric_limits<double>::infinity();
        for (std::uint32_t c = 0; c < k; ++c) {
            if (c == own || sizes[c] == 0) continue;
            b = std::min(b, sum[c] / static_cast<double>(sizes[c]));
        }
        const double denom = std::max(a, b);
        s[i] = denom > 0.0 ? (b - a) / denom : 0.0;
    });
    if (distance_evals) *distance_evals += static_cast<std::uint64_t>(n) * (n - 1);
    return std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(n);
}

ClusterModel model_from_partition(const Matrix& points, std::span<const std::uint32_t> assignment, std::uint32_t k) {
    ClusterModel m;
    m.k = k;
    m.assignment.assign(assignment.begin(), assignment.end());
    m.keys = cluster_means(points, assignment, k);
    m.sizes.assign(k, 0);
    for (auto c : assignment) ++m.sizes[c];
    return m;
}

ClusterModel select_level(const FinchHierarchy& hierarchy, const Matrix& points) {
    if (hierarchy.levels.empty()) fail(ErrorKind::data, "select_level: empty hierarchy");

    std::vector<std::optional<double>> scores;
    std::vector<std::uint32_t> counts;
    std::optional<std::size_t> best;
    std::uint64_t evals = hierarchy.distance_evals;
    for (std::size_t l = 0; l < hierarchy.levels.size(); ++l) {
        const Partition& p = hierarchy.levels[l];
        counts.push_back(p.cluster_count);
        if (p.cluster_count < 2) {
            scores.emplace_back();
            continue;
        }
        scores.emplace_back(silhouette(points, p.assignment, &evals));
        // Levels are fine -> coarse, so >= prefers fewer clusters on ties.
        if (!best || *scores.back() >= *scores[*best]) best = l;
    }

    ClusterModel m;
    if (best) {
        const Partition& p = hierarchy.levels[*best];
        m = model_from_partition(points, p.assignment, p.cluster_count);
        m.chosen_level = best;
    } else {
        m = model_from_partition(points, std::vector<std::uint32_t>(points.rows, 0), 1);
        m.chosen_level = hierarchy.levels.size() - 1;
    }
    m.level_cluster_counts = std::move(counts);
    m.silhouette_by_level = std::move(scores);
    m.distance_evals = evals;
    return m;
}

ClusterModel cluster_semantic(const Matrix& points) { return select_level(finch(points), points); }

std::uint32_t assign(std::span<const float> e, const Matrix& keys) {
    if (keys.rows == 0) fail(ErrorKind::data, "assign: model has no keys");
    if (e.size() != keys.cols) {
        fail(ErrorKind::data, "assign: semantic vector has " + std::to_string(e.size()) + " entries, keys have " +
                                  std::to_string(keys.cols));
    }
    std::uint32_t best = 0;
    double best_d = squared_l2(e, keys.row(0));
    for (std::size_t k = 1; k < keys.rows; ++k) {
        const double d = squared_l2(e, keys.row(k));
        if (d < best_d) {
            best_d = d;
            best = static_cast<std::uint32_t>(k);
        }
    }
    return best;
}

double adjusted_rand_index(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
    if (a.size() != b.size()) fail(ErrorKind::data, "adjusted_rand_index: length mismatch");
    const std::size_t n = a.size();
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> table;
    std::map<std::uint32_t, std::size_t> rows, cols;
    for (std::size_t i = 0; i < n; ++i) {
        ++table[{a[i], b[i]}];
        ++rows[a[i]];
        ++cols[b[i]];
    }
    auto c2 = [](std::size_t x) { return static_cast<double>(x) * (static_cast<double>(x) - 1.0) / 2.0; };
    double index = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& [_, v] : table) index += c2(v);
    for (const auto& [_, v] : rows) sum_a += c2(v);
    for (const auto& [_, v] : cols) sum_b += c2(v);
    const double expected = n > 1 ? sum_a * sum_b / c2(n) : 0.0;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return table.size() == rows.size() && table.size() == cols.size() ? 1.0 : 0.0;
    return (index - expected) / (max_index - expected);
}

json to_json(const ClusterModel& m) {
    json j;
    j["chosen_level"] = m.chosen_level ? json(*m.chosen_level) : json(nullptr);
    j["k"] = m.k;
    j["semantic_dim"] = m.keys.cols;
    json keys = json::array();
    for (std::size_t k = 0; k < m.keys.rows; ++k) {
        const auto row = m.keys.row(k);
        keys.push_back(std::vector<float>(row.begin(), row.end()));
    }
    j["keys"] = std::move(keys);
    j["sizes"] = m.sizes;
    j["assignment"] = m.assignment;
    json levels = json::array();
    for (std::size_t l = 0; l < m.level_cluster_counts.size(); ++l) {
        levels.push_back({{"level", l},
                          {"clusters", m.level_cluster_counts[l]},
                          {"silhouette", m.silhouette_by_level[l] ? json(*m.silhouette_by_level[l]) : json(nullptr)}});
    }
    j["silhouette_by_level"] = std::move(levels);
    j["distance_evals"] = m.distance_evals;
    return j;
}

ClusterModel cluster_model_from_json(const json& j) {
    ClusterModel m;
    try {
        if (!j.at("chosen_level").is_null()) m.chosen_level = j.at("chosen_level").get<std::size_t>();
        m.k = j.at("k").get<std::uint32_t>();
        const auto dim = j.at("semantic_dim").get<std::size_t>();
        m.keys = Matrix(m.k, dim);
        const auto& keys = j.at("keys");
        if (keys.size() != m.k) fail(ErrorKind::data, "cluster model: key count differs from k");
        for (std::size_t k = 0; k < m.k; ++k) {
            const auto row = keys.at(k).get<std::vector<float>>();
            if (row.size() != dim) fail(ErrorKind::data, "cluster model: key length differs from semantic_dim");
            std::copy(row.begin(), row.end(), m.keys.row(k).begin());
        }
        m.sizes = j.at("sizes").get<std::vector<std::size_t>>();
        m.assignment = j.at("assignment").get<std::vector<std::uint32_t>>();
        for (const auto& level : j.at("silhouette_by_level")) {
            m.level_cluster_counts.push_back(level.at("clusters").get<std::uint32_t>());
            const auto& s = level.at("silhouette");
            m.silhouette_by_level.push_back(s.is_null() ? std::nullopt : std::optional<double>(s.get<double>()));
        }
        m.distance_evals = j.value("distance_evals", std::uint64_t{0});
    } catch (const json::exception& e) {
        fail(ErrorKind::data, std::string("malformed cluster model: ") + e.what());
    }
    if (m.k == 0 || m.sizes.size() != m.k) fail(ErrorKind::data, "cluster model: inconsistent cluster count");
    return m;
}

void save_cluster_model(const ClusterModel& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    out << to_json(model).dump(2) << '\n';
    if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

ClusterModel load_cluster_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::data, "malformed " + path.string() + ": " + e.what());
    }
    return cluster_model_from_json(j);
}

}  // namespace hiercore
