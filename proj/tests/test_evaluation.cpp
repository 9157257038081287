#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "hiercore/error.hpp"
#include "hiercore/evaluation.hpp"
#include "hiercore/harness.hpp"
#include "hiercore/synth.hpp"

using namespace hiercore;

namespace {

SynthSpec spec() {
    SynthSpec s;
    s.train_per_class = 10;
    s.test_per_class = 10;
    s.grid_w = 8;
    s.grid_h = 8;
    s.image_w = 36;
    s.image_h = 36;
    return s;
}

// Two classes whose score ranges differ: class0 is tight with subtle
// defects, class1 is noisy with large ones.
SynthSpec shifted_spec() {
    SynthSpec s = spec();
    s.test_per_class = 20;
    s.class_overrides = {{0.2, 1.5}, {1.0, 5.0}};
    return s;
}

AnomalyResult fake_result(const ImageRecord& r, float score, std::uint32_t cluster) {
    AnomalyResult a;
    a.record_id = r.id;
    a.routed_cluster = cluster;
    a.grid_h = a.grid_w = 1;
    a.patch_scores = {score};
    a.height = r.image_size.height;
    a.width = r.image_size.width;
    a.image_score = score;
    a.score_map.resize(std::size_t{a.height} * a.width);
    for (std::size_t p = 0; p < a.score_map.size(); ++p)
        a.score_map[p] = r.gt_mask && r.gt_mask->pixels[p] ? score : 0.0f;
    return a;
}

}  // namespace

TEST(Evaluate, GroupsFollowTheGrouping) {
    const FeatureArchive a = synth_generate(spec(), 1);
    const MemoryBank bank = build_bank(a, {}, BankMode::pseudo);
    const auto scores = score_batch(a, bank);
    const MetricReport per_class = evaluate(scores.results, a, Grouping::per_class);
    const MetricReport global = evaluate(scores.results, a, Grouping::global);
    const MetricReport per_cluster = evaluate(scores.results, a, Grouping::per_cluster);
    ASSERT_EQ(per_class.image.groups.size(), 2u);
    EXPECT_EQ(per_class.image.groups[0].name, "class0");
    ASSERT_EQ(global.image.groups.size(), 1u);
    EXPECT_EQ(global.image.groups[0].records, 20u);
    ASSERT_EQ(per_cluster.image.groups.size(), 2u);
    EXPECT_EQ(per_cluster.image.groups[1].name, "cluster1");
}

TEST(Evaluate, MacroMeansAndMad) {
    const FeatureArchive a = synth_generate(spec(), 2);
    const auto scores = score_batch(a, build_bank(a, {}, BankMode::pseudo));
    const MetricReport r = evaluate(scores.results, a, Grouping::per_class);
    double sum = 0;
    for (const auto& g : r.pixel.groups) sum += *g.aupro;
    EXPECT_NEAR(*r.pixel.maupro, sum / 2, 1e-12);
    EXPECT_NEAR(*r.image.mad, (*r.image.mauroc + *r.image.map + *r.image.mf1_max) / 3, 1e-12);
    EXPECT_NEAR(*r.pixel.mad,
                (*r.pixel.mauroc + *r.pixel.map + *r.pixel.mf1_max + *r.pixel.maupro + *r.pixel.miou_max) / 5, 1e-12);
}

TEST(Evaluate, GroupWithoutPositivesFlagsNothing) {
    const FeatureArchive a = synth_generate(spec(), 3);
    std::vector<AnomalyResult> results;
    for (const auto* r : a.split(Split::test)) {
        const bool abnormal = r->gt_label == GtLabel::abnormal;
        // cluster 1 only ever sees normal records
        results.push_back(fake_result(*r, abnormal ? 2.0f : 1.0f, abnormal ? 0 : (r->id.back() % 2)));
    }
    const MetricReport rep = evaluate(results, a, Grouping::per_cluster);
    ASSERT_EQ(rep.image.groups.size(), 2u);
    EXPECT_FALSE(rep.image.groups[1].auroc.has_value());
    EXPECT_FALSE(rep.image.groups[1].threshold.has_value());
    EXPECT_DOUBLE_EQ(*rep.image.class_mf1, 1.0);
}

TEST(Evaluate, PerClassNeedsLabels) {
    const FeatureArchive a = strip_class_labels(synth_generate(spec(), 4));
    const auto scores = score_batch(a, build_bank(a, {}, BankMode::pseudo));
    EXPECT_THROW(evaluate(scores.results, a, Grouping::per_class), Error);
    const MetricReport r = evaluate(scores.results, a, Grouping::per_cluster);
    EXPECT_FALSE(r.image.class_mf1.has_value());
    EXPECT_EQ(r.image.headline_f1(), r.image.mf1_max);
}

TEST(Evaluate, CsvHasLongFormat) {
    const FeatureArchive a = synth_generate(spec(), 5);
    const auto scores = score_batch(a, build_bank(a, {}, BankMode::pseudo));
    const auto path = std::filesystem::temp_directory_path() / "hiercore_report.csv";
    write_report_csv(evaluate(scores.results, a, Grouping::global), path);
    std::ifstream in(path);
    std::string header, line;
    std::getline(in, header);
    EXPECT_EQ(header, "level,group,metric,value");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 3) << line;
        ++rows;
    }
    EXPECT_GT(rows, 10u);
}

TEST(Harness, ScenarioCodesAndGroupings) {
    EXPECT_EQ(all_scenarios().size(), 4u);
    for (const auto& s : all_scenarios()) EXPECT_EQ(parse_scenario(s.code()), s);
    EXPECT_THROW(parse_scenario("kx"), Error);
    EXPECT_EQ(evaluation_grouping(Availability::known), Grouping::per_class);
    EXPECT_EQ(evaluation_grouping(Availability::unknown), Grouping::per_cluster);
}

TEST(Harness, KnownScenarioOnUnlabeledArchiveNamesTheScenario) {
    const FeatureArchive a = strip_class_labels(synth_generate(spec(), 6));
    try {
        check_scenario_labels(a, parse_scenario("kk"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::data);
        EXPECT_NE(std::string(e.what()).find("kk"), std::string::npos) << e.what();
    }
    EXPECT_NO_THROW(run_scenario(a, parse_scenario("uu"), {}));
}

TEST(Harness, DiffRatioIsOneWhenClustersAreClasses) {
    const FeatureArchive a = synth_generate(spec(), 7);
    const EvalReport known = run_scenario(a, parse_scenario("uk"), {});
    const EvalReport unknown = run_scenario(a, parse_scenario("uu"), {});
    const DiffRatioReport d = diff_ratio(known, unknown);
    EXPECT_DOUBLE_EQ(d.image_ratio, 1.0);
    ASSERT_TRUE(d.pixel_ratio.has_value());
    EXPECT_DOUBLE_EQ(*d.pixel_ratio, 1.0);
}

TEST(Harness, GlobalThresholdHurtsShiftedClasses) {
    const FeatureArchive a = synth_generate(shifted_spec(), 8);
    const MonolithicComparison cmp = compare_monolithic(a, {});
    const MetricReport known = evaluate(score_batch(a, build_bank(a, {}, BankMode::single)).results, a,
                                        Grouping::per_class);
    const double ratio = *cmp.monolithic.metrics.image.headline_f1() / *known.image.headline_f1();
    EXPECT_LT(ratio, 0.95);
    EXPECT_GT(*cmp.hierarchical.metrics.image.headline_f1(), *cmp.monolithic.metrics.image.headline_f1());
}

TEST(Harness, CountersSplitCostsByCluster) {
    const FeatureArchive a = synth_generate(spec(), 9);
    HarnessConfig cfg;
    cfg.coreset.ratio = 1.0;
    const MonolithicComparison cmp = compare_monolithic(a, cfg);
    const CostCounters& c = cmp.counters;
    std::uint64_t sum = 0;
    for (auto p : c.cluster_patch_counts) sum += std::uint64_t{p} * p;
    EXPECT_EQ(c.sum_pk_squared, sum);
    EXPECT_EQ(c.build_distance_evals, sum);
    EXPECT_EQ(c.mono_build_distance_evals, std::uint64_t{c.mono_patches} * c.mono_patches);
    EXPECT_EQ(c.total_patches(), c.mono_patches);
}

TEST(Harness, BenchAndExportFiles) {
    const FeatureArchive a = synth_generate(spec(), 10);
    const auto rows = run_bench(a, {});
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].scenario, "hiercore_u");
    EXPECT_EQ(rows[2].k, 1u);
    const auto dir = std::filesystem::temp_directory_path();
    write_bench_csv(rows, dir / "hiercore_bench.csv");
    std::ifstream in(dir / "hiercore_bench.csv");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "scenario,K,P,sum_Pk2,build_evals,query_evals,image_mF1_known,image_mF1_unknown,diff_ratio");

    export_embeddings(a, build_bank(a, {}, BankMode::pseudo), dir / "hiercore_emb.csv");
    std::ifstream emb(dir / "hiercore_emb.csv");
    std::getline(emb, header);
    EXPECT_EQ(header, "id,cluster,class,e0,e1,e2,e3,e4,e5,e6,e7");
    std::size_t lines = 0;
    for (std::string l; std::getline(emb, l);) ++lines;
    EXPECT_EQ(lines, a.records.size());
}
