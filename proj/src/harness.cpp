#include "hiercore/harness.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "hiercore/error.hpp"

namespace hiercore {

using nlohmann::json;

std::string Scenario::code() const {
    std::string s;
    s += training == Availability::known ? 'k' : 'u';
    s += evaluation == Availability::known ? 'k' : 'u';
    return s;
}

Scenario parse_scenario(const std::string& code) {
    auto letter = [&](char c) {
        if (c == 'k' || c == 'K') return Availability::known;
        if (c == 'u' || c == 'U') return Availability::unknown;
        fail(ErrorKind::usage, "unknown scenario '" + code + "' (expected kk, ku, uk or uu)");
    };
    if (code.size() != 2) fail(ErrorKind::usage, "unknown scenario '" + code + "' (expected kk, ku, uk or uu)");
    return {letter(code[0]), letter(code[1])};
}

std::vector<Scenario> all_scenarios() {
    return {{Availability::known, Availability::known},
            {Availability::unknown, Availability::known},
            {Availability::known, Availability::unknown},
            {Availability::unknown, Availability::unknown}};
}

std::size_t CostCounters::total_patches() const noexcept {
    return std::accumulate(cluster_patch_counts.begin(), cluster_patch_counts.end(), std::size_t{0});
}

CostCounters bank_counters(const MemoryBank& bank, const QueryCounters& queries) {
    CostCounters c;
    c.build_distance_evals = bank.build_distance_evals();
    c.clustering_distance_evals = bank.clustering_distance_evals();
    c.query_distance_evals = queries.query_distance_evals;
    c.route_distance_evals = queries.route_distance_evals;
    c.cluster_patch_counts = bank.pool_sizes;
    for (const auto& b : bank.banks) c.cluster_bank_sizes.push_back(b.vectors.rows);
    for (auto p : bank.pool_sizes) c.sum_pk_squared += static_cast<std::uint64_t>(p) * p;
    return c;
}

Grouping evaluation_grouping(Availability evaluation) {
    return evaluation == Availability::known ? Grouping::per_class : Grouping::per_cluster;
}

void check_scenario_labels(const FeatureArchive& archive, const Scenario& scenario) {
    auto all_labelled = [&](Split s) {
        const auto recs = archive.split(s);
        return std::all_of(recs.begin(), recs.end(), [](const ImageRecord* r) { return r->class_label.has_value(); });
    };
    if (scenario.training == Availability::known && !all_labelled(Split::train)) {
        fail(ErrorKind::data, "scenario " + scenario.code() + " requires class labels on every train record");
    }
    if (scenario.evaluation == Availability::known && !all_labelled(Split::test)) {
        fail(ErrorKind::data, "scenario " + scenario.code() + " requires class labels on every test record");
    }
}

namespace {

json config_json(const HarnessConfig& config) {
    return {{"coreset_ratio", config.coreset.ratio},
            {"coreset_seed", config.coreset.seed},
            {"projection_dim", config.coreset.projection_dim},
            {"smoothing", config.scoring.smoothing},
            {"smoothing_sigma", config.scoring.smoothing_sigma},
            {"fpr_cap", config.fpr_cap}};
}

EvalReport make_report(const FeatureArchive& archive, const MemoryBank& bank, const BatchScores& scores,
                       const Scenario& scenario, Grouping grouping, const HarnessConfig& config) {
    EvalReport r;
    r.scenario = scenario;
    r.bank_mode = bank.mode;
    r.k = bank.k();
    r.metrics = evaluate(scores.results, archive, grouping, config.fpr_cap);
    r.counters = bank_counters(bank, scores.counters);
    r.provenance = config_json(config);
    r.provenance["scenario"] = scenario.code();
    r.provenance["bank_mode"] = to_string(bank.mode);
    r.provenance["grouping"] = to_string(grouping);
    return r;
}

}  // namespace

EvalReport evaluate_bank(const FeatureArchive& archive, const MemoryBank& bank, const Scenario& scenario,
                         const HarnessConfig& config) {
    check_scenario_labels(archive, scenario);
    const BatchScores scores = score_batch(archive, bank, config.scoring);
    return make_report(archive, bank, scores, scenario, evaluation_grouping(scenario.evaluation), config);
}

EvalReport run_scenario(const FeatureArchive& archive, const Scenario& scenario, const HarnessConfig& config) {
    check_scenario_labels(archive, scenario);
    const BankMode mode = scenario.training == Availability::known ? BankMode::labeled : BankMode::pseudo;
    const MemoryBank bank = build_bank(archive, config.coreset, mode);
    return evaluate_bank(archive, bank, scenario, config);
}

MonolithicComparison compare_monolithic(const FeatureArchive& archive, const HarnessConfig& config) {
    const Scenario unknown_eval{Availability::unknown, Availability::unknown};
    const MemoryBank hier = build_bank(archive, config.coreset, BankMode::pseudo);
    const MemoryBank mono = build_bank(archive, config.coreset, BankMode::single);

    const BatchScores hier_scores = score_batch(archive, hier, config.scoring);
    const BatchScores mono_scores = score_batch(archive, mono, config.scoring);

    MonolithicComparison out;
    out.hierarchical = make_report(archive, hier, hier_scores, unknown_eval, Grouping::per_cluster, config);
    out.monolithic = make_report(archive, mono, mono_scores, unknown_eval, Grouping::global, config);
    out.counters = out.hierarchical.counters;
    out.counters.mono_build_distance_evals = mono.build_distance_evals();
    out.counters.mono_query_distance_evals = mono_scores.counters.query_distance_evals;
    out.counters.mono_patches = mono.total_patches();
    out.counters.mono_bank_size = mono.banks.front().vectors.rows;
    return out;
}

DiffRatioReport diff_ratio(const EvalReport& known, const EvalReport& unknown) {
    DiffRatioReport d;
    const auto ik = known.metrics.image.headline_f1();
    const auto iu = unknown.metrics.image.headline_f1();
    if (!ik || !iu) fail(ErrorKind::data, "diff_ratio: image-level F1 undefined");
    if (*ik == 0.0) fail(ErrorKind::data, "diff_ratio: known F1 is zero");
    d.image_known = *ik;
    d.image_unknown = *iu;
    d.image_ratio = *iu / *ik;
    const auto pk = known.metrics.pixel.headline_f1();
    const auto pu = unknown.metrics.pixel.headline_f1();
    if (pk && pu && *pk > 0.0) {
        d.pixel_known = pk;
        d.pixel_unknown = pu;
        d.pixel_ratio = *pu / *pk;
    }
    return d;
}

std::vector<BenchRow> run_bench(const FeatureArchive& archive, const HarnessConfig& config) {
    const auto test = archive.split(Split::test);
    const auto train = archive.split(Split::train);
    auto labelled = [](const std::vector<const ImageRecord*>& recs) {
        return !recs.empty() &&
               std::all_of(recs.begin(), recs.end(), [](const ImageRecord* r) { return r->class_label.has_value(); });
    };
    const bool test_labels = labelled(test);

    auto row_for = [&](const std::string& name, const MemoryBank& bank, Grouping unknown_grouping) {
        const BatchScores scores = score_batch(archive, bank, config.scoring);
        const CostCounters c = bank_counters(bank, scores.counters);
        BenchRow row;
        row.scenario = name;
        row.k = bank.k();
        row.patches = c.total_patches();
        row.sum_pk_squared = c.sum_pk_squared;
        row.build_evals = c.build_distance_evals;
        row.query_evals = c.query_distance_evals;
        const MetricReport unknown = evaluate(scores.results, archive, unknown_grouping, config.fpr_cap);
        row.image_mf1_unknown = unknown.image.headline_f1();
        if (test_labels) {
            const MetricReport known = evaluate(scores.results, archive, Grouping::per_class, config.fpr_cap);
            row.image_mf1_known = known.image.headline_f1();
            if (row.image_mf1_known && row.image_mf1_unknown && *row.image_mf1_known > 0.0)
                row.diff_ratio = *row.image_mf1_unknown / *row.image_mf1_known;
        }
        return row;
    };

    std::vector<BenchRow> rows;
    rows.push_back(row_for("hiercore_u", build_bank(archive, config.coreset, BankMode::pseudo), Grouping::per_cluster));
    if (labelled(train)) {
        rows.push_back(
            row_for("hiercore_k", build_bank(archive, config.coreset, BankMode::labeled), Grouping::per_cluster));
    }
    rows.push_back(row_for("monolithic", build_bank(archive, config.coreset, BankMode::single), Grouping::global));
    return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    out.precision(10);
    out << "scenario,K,P,sum_Pk2,build_evals,query_evals,image_mF1_known,image_mF1_unknown,diff_ratio\n";
    auto opt = [&](const std::optional<double>& v) {
        if (v) out << *v;
    };
    for (const auto& r : rows) {
        out << r.scenario << ',' << r.k << ',' << r.patches << ',' << r.sum_pk_squared << ',' << r.build_evals << ','
            << r.query_evals << ',';
        opt(r.image_mf1_known);
        out << ',';
        opt(r.image_mf1_unknown);
        out << ',';
        opt(r.diff_ratio);
        out << '\n';
    }
    if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

void export_embeddings(const FeatureArchive& archive, const MemoryBank& bank, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    out.precision(9);
    out << "id,cluster,class";
    for (std::uint32_t d = 0; d < archive.semantic_dim; ++d) out << ",e" << d;
    out << '\n';
    for (const auto& r : archive.records) {
        out << r.id << ',' << route(r.semantic, bank) << ',' << r.class_label.value_or("");
        for (float v : r.semantic) out << ',' << v;
        out << '\n';
    }
    if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

json to_json(const CostCounters& c) {
    return {{"build_distance_evals", c.build_distance_evals},
            {"clustering_distance_evals", c.clustering_distance_evals},
            {"query_distance_evals", c.query_distance_evals},
            {"route_distance_evals", c.route_distance_evals},
            {"cluster_patch_counts", c.cluster_patch_counts},
            {"cluster_bank_sizes", c.cluster_bank_sizes},
            {"sum_pk_squared", c.sum_pk_squared},
            {"mono_build_distance_evals", c.mono_build_distance_evals},
            {"mono_query_distance_evals", c.mono_query_distance_evals},
            {"mono_patches", c.mono_patches},
            {"mono_bank_size", c.mono_bank_size}};
}

json to_json(const EvalReport& r) {
    json j = to_json(r.metrics);
    j["scenario"] = r.scenario.code();
    j["bank_mode"] = to_string(r.bank_mode);
    j["K"] = r.k;
    j["counters"] = to_json(r.counters);
    j["provenance"] = r.provenance;
    return j;
}

}  // namespace hiercore
