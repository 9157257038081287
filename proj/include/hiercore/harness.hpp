#pragma once

// Label-availability scenarios, Diff-Ratio analysis and distance-count cost
// accounting for hierarchical versus single-bank memory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hiercore/evaluation.hpp"
#include "hiercore/memory_bank.hpp"
#include "hiercore/scoring.hpp"
#include "json.hpp"

namespace hiercore {

enum class Availability { known, unknown };

struct Scenario {
    Availability training = Availability::unknown;
    Availability evaluation = Availability::known;

    // "kk", "ku", "uk", "uu": training letter first.
    std::string code() const;
    friend bool operator==(const Scenario&, const Scenario&) = default;
};

Scenario parse_scenario(const std::string& code);
std::vector<Scenario> all_scenarios();

struct HarnessConfig {
    CoresetConfig coreset;
    ScoringOptions scoring;
    double fpr_cap = 0.3;
};

// Distance evaluations, counted as pairwise L2 computations.
struct CostCounters {
    std::uint64_t build_distance_evals = 0;       // coreset selection, summed over banks
    std::uint64_t clustering_distance_evals = 0;  // FINCH + silhouette
    std::uint64_t query_distance_evals = 0;
    std::uint64_t route_distance_evals = 0;
    std::vector<std::size_t> cluster_patch_counts;  // P_k
    std::vector<std::size_t> cluster_bank_sizes;
    std::uint64_t sum_pk_squared = 0;

    std::uint64_t mono_build_distance_evals = 0;
    std::uint64_t mono_query_distance_evals = 0;
    std::size_t mono_patches = 0;                 // P
    std::size_t mono_bank_size = 0;

    std::size_t total_patches() const noexcept;
};

CostCounters bank_counters(const MemoryBank& bank, const QueryCounters& queries);

struct EvalReport {
    Scenario scenario;
    BankMode bank_mode = BankMode::pseudo;
    std::size_t k = 0;
    MetricReport metrics;
    CostCounters counters;
    nlohmann::json provenance;
};

Grouping evaluation_grouping(Availability evaluation);

// Checks the label requirements of `scenario`; throws ErrorKind::data
// naming the scenario when they are not met.
void check_scenario_labels(const FeatureArchive& archive, const Scenario& scenario);

// Scores and evaluates an already built bank under the scenario's grouping.
EvalReport evaluate_bank(const FeatureArchive& archive, const MemoryBank& bank, const Scenario& scenario,
                         const HarnessConfig& config);

// Builds the scenario's bank (labeled for known training, pseudo otherwise)
// and evaluates it.
EvalReport run_scenario(const FeatureArchive& archive, const Scenario& scenario, const HarnessConfig& config);

struct MonolithicComparison {
    CostCounters counters;
    EvalReport hierarchical;  // pseudo bank, per-cluster thresholds
    EvalReport monolithic;    // single bank, one global threshold
};

MonolithicComparison compare_monolithic(const FeatureArchive& archive, const HarnessConfig& config);

struct DiffRatioReport {
    double image_known = 0.0;
    double image_unknown = 0.0;
    double image_ratio = 0.0;
    std::optional<double> pixel_known;
    std::optional<double> pixel_unknown;
    std::optional<double> pixel_ratio;
};

// unknown / known of the headline F1 at each level.
DiffRatioReport diff_ratio(const EvalReport& known, const EvalReport& unknown);

struct BenchRow {
    std::string scenario;
    std::size_t k = 0;
    std::size_t patches = 0;
    std::uint64_t sum_pk_squared = 0;
    std::uint64_t build_evals = 0;
    std::uint64_t query_evals = 0;
    std::optional<double> image_mf1_known;
    std::optional<double> image_mf1_unknown;
    std::optional<double> diff_ratio;
};

// Rows: hierarchical pseudo bank (U->K vs U->U), labeled bank when train
// labels exist (K->K vs K->U), and the single-bank baseline.
std::vector<BenchRow> run_bench(const FeatureArchive& archive, const HarnessConfig& config);
void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path);

// CSV: id,cluster,class,e0..e{d-1} for every record; cluster is the routed bank.
void export_embeddings(const FeatureArchive& archive, const MemoryBank& bank, const std::filesystem::path& path);

nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const CostCounters& counters);

}  // namespace hiercore
