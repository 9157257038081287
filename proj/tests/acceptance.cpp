// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "hiercore/blob.hpp"
#include "hiercore/clustering.hpp"
#include "hiercore/coreset.hpp"
#include "hiercore/feature_store.hpp"
#include "hiercore/harness.hpp"
#include "hiercore/memory_bank.hpp"
#include "hiercore/metrics.hpp"
#include "hiercore/parallel.hpp"
#include "hiercore/scoring.hpp"
#include "hiercore/synth.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace hiercore;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            if (pass) detail << "first failure: " << what << "; ";
            pass = false;
        }
    }
};

oracle::Points to_points(const Matrix& m) {
    oracle::Points p(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) p[i].assign(m.row(i).begin(), m.row(i).end());
    return p;
}

Matrix train_semantic(const FeatureArchive& a, std::vector<std::uint32_t>* labels) {
    const auto train = a.split(Split::train);
    Matrix m(train.size(), a.semantic_dim);
    for (std::size_t i = 0; i < train.size(); ++i) {
        std::copy(train[i]->semantic.begin(), train[i]->semantic.end(), m.row(i).begin());
        labels->push_back(static_cast<std::uint32_t>(std::stoul(train[i]->class_label->substr(5))));
    }
    return m;
}

// 1. FINCH recovers well-separated classes.
void finch_recovery(Outcome& o) {
    const auto start = std::chrono::steady_clock::now();
    int runs = 0;
    for (std::uint32_t classes : {2u, 3u, 4u, 6u}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            SynthSpec s;
            s.classes = classes;
            s.train_per_class = 50;
            s.test_per_class = 1;
            s.margin = 10.0;
            s.grid_w = s.grid_h = 2;
            s.image_w = s.image_h = 4;
            const FeatureArchive a = synth_generate(s, seed);
            std::vector<std::uint32_t> truth;
            const Matrix pts = train_semantic(a, &truth);
            const ClusterModel m = select_level(finch(pts), pts);
            const double ari = adjusted_rand_index(m.assignment, truth);
            const std::string tag = "C=" + std::to_string(classes) + " seed=" + std::to_string(seed);
            o.require(m.k == classes, tag + " K=" + std::to_string(m.k));
            o.require(ari == 1.0, tag + " ARI=" + std::to_string(ari));
            ++runs;
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.require(secs < 10.0, "runtime " + std::to_string(secs) + " s");
    o.detail << runs << " runs, K = C and ARI = 1 required, " << secs << " s";
}

// 2. Greedy k-center is within 2x of the optimal covering radius.
void coreset_two_approx(Outcome& o) {
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 2 + rng() % 11;
        const std::size_t d = 1 + rng() % 3;
        const std::size_t budget = 1 + rng() % std::min<std::size_t>(4, m);
        Matrix pool(m, d);
        std::uniform_real_distribution<float> u(-10.0f, 10.0f);
        for (auto& v : pool.data) v = u(rng);
        // ratio chosen so that round(ratio * m) == budget
        const Coreset cs = kcenter_greedy(pool, {static_cast<double>(budget) / static_cast<double>(m), rng(), 0});
        const auto pts = to_points(pool);
        const double greedy = oracle::covering_radius(pts, cs.indices);
        const double opt = oracle::optimal_kcenter_radius(pts, budget);
        o.require(cs.indices.size() == budget, "budget mismatch at trial " + std::to_string(trial));
        o.require(greedy <= 2.0 * opt, "trial " + std::to_string(trial) + " greedy " + std::to_string(greedy) +
                                           " > 2 * " + std::to_string(opt));
        if (opt > 0) worst = std::max(worst, greedy / opt);
    }
    o.detail << "200 pools, worst greedy/optimal = " << worst;
}

// 3. Patch scores equal an exhaustive nearest-neighbour oracle.
void scoring_oracle(Outcome& o) {
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SynthSpec s;
        s.train_per_class = 7;  // 7 * 64 = 448 rows per bank at ratio 1
        s.test_per_class = 4;   // 8 test images * 64 = 512 > 500, so score 7 of them
        s.grid_w = s.grid_h = 8;
        s.image_w = s.image_h = 36;
        const FeatureArchive a = synth_generate(s, 100 + seed);
        const MemoryBank bank = build_bank(a, {1.0, seed, 0}, BankMode::pseudo);
        const auto test = a.split(Split::test);
        for (std::size_t i = 0; i < 7; ++i) {
            const AnomalyResult r = score_record(*test[i], bank);
            const auto& rows = bank.banks[r.routed_cluster].vectors;
            o.require(rows.rows <= 1000, "bank too large");
            // routing oracle
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < bank.k(); ++k) {
                std::vector<double> e(test[i]->semantic.begin(), test[i]->semantic.end());
                std::vector<double> key(bank.cluster_model.keys.row(k).begin(), bank.cluster_model.keys.row(k).end());
                if (oracle::dist(e, key) < best_d) {
                    best_d = oracle::dist(e, key);
                    best = k;
                }
            }
            o.require(r.routed_cluster == best, "routing differs for " + test[i]->id);
            const auto want = oracle::nearest_distances(to_points(test[i]->patches), to_points(rows));
            for (std::size_t c = 0; c < want.size(); ++c) {
                const double rel = std::abs(r.patch_scores[c] - want[c]) / std::max(want[c], 1e-12);
                worst = std::max(worst, rel);
                o.require(rel <= 1e-6, test[i]->id + " cell " + std::to_string(c));
                ++checked;
            }
        }
    }
    o.detail << checked << " patch scores, worst relative error " << worst;
}

// 4. Metrics match brute-force definitions.
void metric_oracles(Outcome& o) {
    std::mt19937_64 rng(77);
    double worst = 0.0;
    auto check = [&](double got, double want, const std::string& what) {
        worst = std::max(worst, std::abs(got - want));
        o.require(std::abs(got - want) <= 1e-9, what + " got " + std::to_string(got) + " want " + std::to_string(want));
    };
    std::normal_distribution<float> g(0.0f, 1.0f);
    for (int t = 0; t < 100; ++t) {
        const std::string tag = "instance " + std::to_string(t);
        // Continuous scores up to n = 2000, quantised ones (heavy ties) up to 10^4.
        const bool quantised = t % 2 == 1;
        const std::size_t n = quantised ? 10 + rng() % 9991 : 10 + rng() % 1991;
        const double pos_rate = 0.05 + 0.5 * std::uniform_real_distribution<double>(0, 1)(rng);
        std::vector<float> s(n);
        std::vector<std::uint8_t> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = std::bernoulli_distribution(pos_rate)(rng);
            s[i] = g(rng) + (y[i] ? 1.2f : 0.0f);
            if (quantised) s[i] = std::round(s[i] * 40.0f) / 40.0f;
        }
        y[0] = 1;
        y[1] = 0;
        const double mw = auroc(s, y);
        check(mw, oracle::auroc(s, y), tag + " auroc");
        check(auroc_trapezoid(s, y), mw, tag + " mann-whitney vs trapezoid");
        check(average_precision(s, y), oracle::average_precision(s, y), tag + " ap");
        const auto f1 = f1_max(s, y);
        const auto f1_want = oracle::f1_max(s, y);
        check(f1.value, f1_want.value, tag + " f1");
        o.require(f1.threshold == f1_want.threshold, tag + " f1 threshold");
        const auto iou = iou_max(s, y);
        const auto iou_want = oracle::iou_max(s, y);
        check(iou.value, iou_want.value, tag + " iou");
        o.require(iou.threshold == iou_want.threshold, tag + " iou threshold");

        // AUPRO on 1-3 masks of at most 64 x 64.
        std::vector<oracle::Map> maps;
        const int images = 1 + static_cast<int>(rng() % 3);
        for (int k = 0; k < images; ++k) {
            oracle::Map m;
            m.h = 8 + static_cast<int>(rng() % 57);
            m.w = 8 + static_cast<int>(rng() % 57);
            m.mask.assign(static_cast<std::size_t>(m.h * m.w), 0);
            const int blobs = 1 + static_cast<int>(rng() % 4);
            for (int b = 0; b < blobs; ++b) {
                const int bh = 1 + static_cast<int>(rng() % 6), bw = 1 + static_cast<int>(rng() % 6);
                const int y0 = static_cast<int>(rng() % static_cast<unsigned>(m.h - bh));
                const int x0 = static_cast<int>(rng() % static_cast<unsigned>(m.w - bw));
                for (int yy = y0; yy < y0 + bh; ++yy)
                    for (int xx = x0; xx < x0 + bw; ++xx) m.mask[static_cast<std::size_t>(yy * m.w + xx)] = 1;
            }
            for (auto v : m.mask) m.scores.push_back(std::round((g(rng) + (v ? 1.0f : 0.0f)) * 20.0f) / 20.0f);
            maps.push_back(std::move(m));
        }
        std::vector<PixelMap> views;
        for (const auto& m : maps)
            views.push_back({m.scores, m.mask, static_cast<std::uint32_t>(m.h), static_cast<std::uint32_t>(m.w)});
        check(aupro(views, 0.3), oracle::aupro(maps, 0.3), tag + " aupro");
    }
    o.detail << "100 instances x 5 metrics, worst absolute difference " << worst;
}

// 5. Diff Ratio: 100% when clusters equal classes; a single bank with a
// global threshold loses on classes with shifted score ranges.
void diff_ratio_robustness(Outcome& o) {
    double lo = 2.0, hi = 0.0;
    for (std::uint32_t classes : {2u, 3u}) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            SynthSpec s;
            s.classes = classes;
            s.train_per_class = 30;
            s.test_per_class = 20;
            const FeatureArchive a = synth_generate(s, 500 + seed);
            const HarnessConfig cfg;
            const MemoryBank bank = build_bank(a, cfg.coreset, BankMode::pseudo);
            std::vector<std::uint32_t> truth;
            train_semantic(a, &truth);
            const std::string tag = "C=" + std::to_string(classes) + " seed=" + std::to_string(seed);
            o.require(adjusted_rand_index(bank.cluster_model.assignment, truth) == 1.0, tag + " clusters != classes");
            const EvalReport uk = evaluate_bank(a, bank, parse_scenario("uk"), cfg);
            const EvalReport uu = evaluate_bank(a, bank, parse_scenario("uu"), cfg);
            const DiffRatioReport d = diff_ratio(uk, uu);
            o.require(std::abs(d.image_ratio - 1.0) <= 1e-3, tag + " image ratio " + std::to_string(d.image_ratio));
            o.require(d.pixel_ratio && std::abs(*d.pixel_ratio - 1.0) <= 1e-3, tag + " pixel ratio");
            lo = std::min({lo, d.image_ratio, d.pixel_ratio.value_or(0.0)});
            hi = std::max({hi, d.image_ratio, d.pixel_ratio.value_or(0.0)});
        }
    }

    // class0: tight normals, subtle defects; class1: noisy normals, large defects.
    SynthSpec shifted;
    shifted.classes = 2;
    shifted.train_per_class = 30;
    shifted.test_per_class = 40;
    shifted.class_overrides = {{0.2, 1.5}, {1.0, 5.0}};
    const FeatureArchive a = synth_generate(shifted, 9);
    const HarnessConfig cfg;
    const MemoryBank mono = build_bank(a, cfg.coreset, BankMode::single);
    const BatchScores scores = score_batch(a, mono, cfg.scoring);
    const MetricReport known = evaluate(scores.results, a, Grouping::per_class, cfg.fpr_cap);
    const MetricReport unknown = evaluate(scores.results, a, Grouping::global, cfg.fpr_cap);
    const double mono_ratio = *unknown.image.headline_f1() / *known.image.headline_f1();
    o.require(mono_ratio < 0.95, "monolithic image ratio " + std::to_string(mono_ratio));
    o.detail << "hierarchical ratios in [" << lo * 100 << "%, " << hi * 100 << "%] over 6 archives; monolithic "
             << mono_ratio * 100 << "%";
}

// 6. Detection quality on the default synthetic benchmark.
void detection_quality(Outcome& o) {
    double min_img = 1.0, min_pix = 1.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const FeatureArchive a = synth_generate(SynthSpec{}, 1000 + seed);
        HarnessConfig cfg;
        cfg.coreset.ratio = 0.10;
        const EvalReport r = run_scenario(a, parse_scenario("uk"), cfg);
        const double img = r.metrics.image.mauroc.value_or(0.0);
        const double pix = r.metrics.pixel.mauroc.value_or(0.0);
        o.require(img >= 0.99, "seed " + std::to_string(seed) + " image AUROC " + std::to_string(img));
        o.require(pix >= 0.95, "seed " + std::to_string(seed) + " pixel AUROC " + std::to_string(pix));
        min_img = std::min(min_img, img);
        min_pix = std::min(min_pix, pix);
    }
    o.detail << "10 seeds, min image AUROC " << min_img << ", min pixel AUROC " << min_pix;
}

// 7. Distance counts: sum P_k^2 for the hierarchical bank, 1/K of P^2.
void cost_accounting(Outcome& o) {
    std::ostringstream per_k;
    for (std::uint32_t classes : {2u, 4u, 8u}) {
        SynthSpec s;
        s.classes = classes;
        s.semantic_dim = std::max<std::uint32_t>(8, classes);
        s.train_per_class = 12;
        s.test_per_class = 4;
        s.grid_w = s.grid_h = 12;
        s.image_w = s.image_h = 56;
        const FeatureArchive a = synth_generate(s, 70 + classes);
        const std::string tag = "K=" + std::to_string(classes);

        HarnessConfig full;
        full.coreset.ratio = 1.0;
        const MonolithicComparison exact = compare_monolithic(a, full);
        const CostCounters& c = exact.counters;
        o.require(c.cluster_patch_counts.size() == classes, tag + " found " + std::to_string(c.cluster_patch_counts.size()) + " clusters");
        std::uint64_t sum_sq = 0;
        for (auto p : c.cluster_patch_counts) sum_sq += std::uint64_t{p} * p;
        o.require(c.build_distance_evals == sum_sq, tag + " build evals " + std::to_string(c.build_distance_evals) +
                                                        " != sum P_k^2 " + std::to_string(sum_sq));
        const double p2 = static_cast<double>(c.mono_patches) * static_cast<double>(c.mono_patches);
        const double full_ratio = static_cast<double>(c.build_distance_evals) / p2;
        o.require(std::abs(full_ratio * classes - 1.0) <= 0.01, tag + " ratio " + std::to_string(full_ratio));

        HarnessConfig sampled;
        sampled.coreset.ratio = 0.10;
        const CostCounters sc = compare_monolithic(a, sampled).counters;
        const double build_ratio =
            static_cast<double>(sc.build_distance_evals) / static_cast<double>(sc.mono_build_distance_evals);
        o.require(std::abs(build_ratio * classes - 1.0) <= 0.01, tag + " sampled build ratio " + std::to_string(build_ratio));
        const double query_factor =
            static_cast<double>(sc.mono_query_distance_evals) / static_cast<double>(sc.query_distance_evals);
        // Each bank holds round(r * P / K) rows against round(r * P): off by at most one row per bank.
        std::size_t mono_rows = sc.mono_bank_size, min_rows = sc.cluster_bank_sizes.front(), max_rows = min_rows;
        for (auto b : sc.cluster_bank_sizes) {
            min_rows = std::min(min_rows, b);
            max_rows = std::max(max_rows, b);
        }
        const double lo = static_cast<double>(mono_rows) / static_cast<double>(max_rows);
        const double hi = static_cast<double>(mono_rows) / static_cast<double>(min_rows);
        o.require(query_factor >= lo - 1e-12 && query_factor <= hi + 1e-12 &&
                      std::abs(query_factor - classes) <= 0.01 * classes,
                  tag + " query factor " + std::to_string(query_factor));
        per_k << " K=" << classes << ": build " << full_ratio << " of P^2, query factor " << query_factor << ";";
    }
    o.detail << "exact sum P_k^2 at ratio 1;" << per_k.str();
}

// 8. Round-trips and thread-count independence.
void determinism(Outcome& o) {
    const fs::path root = fs::temp_directory_path() / "hiercore_acceptance";
    fs::remove_all(root);
    const FeatureArchive a = synth_generate(SynthSpec{}, 31);

    write_archive(a, root / "a1");
    const FeatureArchive back = read_archive(root / "a1");
    o.require(back == a, "archive read-back differs");
    write_archive(back, root / "a2");
    for (const auto& entry : fs::recursive_directory_iterator(root / "a1")) {
        if (!entry.is_regular_file()) continue;
        const fs::path rel = fs::relative(entry.path(), root / "a1");
        o.require(read_file_bytes(entry.path()) == read_file_bytes(root / "a2" / rel), "bytes differ: " + rel.string());
    }

    HarnessConfig cfg;
    const MemoryBank bank = build_bank(a, cfg.coreset, BankMode::pseudo);
    save_bank(bank, root / "bank");
    const MemoryBank loaded = load_bank(root / "bank");
    const BatchScores s1 = score_batch(a, bank);
    const BatchScores s2 = score_batch(a, loaded);
    o.require(s1.results == s2.results, "loaded bank scores differently");

    set_thread_count(1);
    const EvalReport single = run_scenario(a, parse_scenario("uu"), cfg);
    const BatchScores single_scores = score_batch(a, build_bank(a, cfg.coreset, BankMode::pseudo));
    set_thread_count(8);
    const EvalReport multi = run_scenario(a, parse_scenario("uu"), cfg);
    const BatchScores multi_scores = score_batch(a, build_bank(a, cfg.coreset, BankMode::pseudo));
    set_thread_count(0);
    o.require(single_scores.results == multi_scores.results, "scores depend on thread count");
    o.require(to_json(single).dump() == to_json(multi).dump(), "report depends on thread count");
    fs::remove_all(root);
    o.detail << "archive bytes, bank behaviour, 1 vs 8 threads: identical";
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<void(Outcome&)> run;
    };
    const std::vector<Criterion> criteria{
        {1, "FINCH recovery", finch_recovery},
        {2, "coreset 2-approximation", coreset_two_approx},
        {3, "scoring oracle", scoring_oracle},
        {4, "metric oracles", metric_oracles},
        {5, "diff ratio robustness", diff_ratio_robustness},
        {6, "detection quality", detection_quality},
        {7, "cost accounting", cost_accounting},
        {8, "determinism and round-trips", determinism},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            c.run(o);
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail << "exception: " << e.what();
        }
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " " << c.name << ": " << o.detail.str()
                  << std::endl;
    }
    std::cout << "SKIP criterion 9 extractor agreement: feature extractor is not part of this build" << std::endl;
    return failures == 0 ? 0 : 1;
}
