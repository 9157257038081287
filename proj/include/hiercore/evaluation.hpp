#pragma once

// Grouped evaluation of scored test records: image- and pixel-level
// metric sets, optimal thresholds per group, and macro averages.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hiercore/feature_store.hpp"
#include "hiercore/scoring.hpp"
#include "json.hpp"

namespace hiercore {

// Scope of the decision threshold.
enum class Grouping {
    per_class,    // one threshold per ground-truth class
    global,       // one threshold for every record
    per_cluster,  // one threshold per routed memory-bank cluster
};

const char* to_string(Grouping g) noexcept;
Grouping parse_grouping(const std::string& s);

enum class Level { image, pixel };

struct GroupMetrics {
    std::string name;
    std::size_t records = 0;
    std::size_t positives = 0;  // abnormal images or abnormal pixels
    std::optional<double> auroc;
    std::optional<double> ap;
    std::optional<double> f1_max;
    std::optional<float> threshold;
    std::optional<double> aupro;    // pixel level only
    std::optional<double> iou_max;  // pixel level only
};

struct ClassF1 {
    std::string class_label;
    double f1 = 0.0;
};

struct LevelReport {
    Level level = Level::image;
    std::vector<GroupMetrics> groups;
    // Macro means over groups where the metric is defined.
    std::optional<double> mauroc, map, mf1_max, maupro, miou_max;
    std::optional<double> mad;
    // F1 of every class at the threshold its records were judged with
    // (the group threshold). Present when every test record has a label.
    std::vector<ClassF1> class_f1;
    std::optional<double> class_mf1;

    // F1 used for Diff Ratios: the per-class macro when labels exist,
    // otherwise the group macro.
    std::optional<double> headline_f1() const { return class_mf1 ? class_mf1 : mf1_max; }
};

struct MetricReport {
    Grouping grouping = Grouping::per_class;
    double fpr_cap = 0.3;
    LevelReport image;
    LevelReport pixel;
};

// Groups without a positive sample get an infinite threshold (nothing is
// flagged) and undefined threshold metrics.
MetricReport evaluate(std::span<const AnomalyResult> results, const FeatureArchive& archive, Grouping grouping,
                      double fpr_cap = 0.3);

nlohmann::json to_json(const MetricReport& report);
// Rows: level,group,metric,value. Macro rows use group "mean".
void write_report_csv(const MetricReport& report, const std::filesystem::path& path);

}  // namespace hiercore
