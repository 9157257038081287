#include "hiercore/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

#include "hiercore/error.hpp"
#include "hiercore/metrics.hpp"

namespace hiercore {

using nlohmann::json;

namespace {

struct Item {
    const ImageRecord* record;
    const AnomalyResult* result;
    std::size_t group;
};

std::optional<double> mean_of(const std::vector<GroupMetrics>& groups, std::optional<double> GroupMetrics::*field) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& g : groups)
        if (g.*field) {
            sum += *(g.*field);
            ++n;
        }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::optional<double> mean_of(std::initializer_list<std::optional<double>> values) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : values)
        if (v) {
            sum += *v;
            ++n;
        }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

std::vector<std::uint8_t> mask_pixels(const Item& it) {
    const std::size_t n = it.result->score_map.size();
    if (it.record->gt_mask) {
        if (it.record->gt_mask->pixels.size() != n) {
            fail(ErrorKind::data, "record '" + it.record->id + "': score map and gt_mask differ in size");
        }
        return it.record->gt_mask->pixels;
    }
    return std::vector<std::uint8_t>(n, 0);
}

GroupMetrics image_metrics(const std::string& name, const std::vector<const Item*>& items) {
    GroupMetrics g;
    g.name = name;
    g.records = items.size();
    std::vector<float> scores;
    std::vector<std::uint8_t> labels;
    for (const auto* it : items) {
        scores.push_back(it->result->image_score);
        labels.push_back(it->record->gt_label == GtLabel::abnormal ? 1 : 0);
    }
    g.positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    if (g.positives == 0) return g;
    if (g.positives < labels.size()) g.auroc = auroc(scores, labels);
    g.ap = average_precision(scores, labels);
    const ThresholdScore f1 = f1_max(scores, labels);
    g.f1_max = f1.value;
    g.threshold = f1.threshold;
    return g;
}

GroupMetrics pixel_metrics(const std::string& name, const std::vector<const Item*>& items, double fpr_cap) {
    GroupMetrics g;
    g.name = name;
    g.records = items.size();
    std::vector<float> scores;
    std::vector<std::uint8_t> labels;
    std::vector<std::vector<std::uint8_t>> masks;
    for (const auto* it : items) {
        masks.push_back(mask_pixels(*it));
        scores.insert(scores.end(), it->result->score_map.begin(), it->result->score_map.end());
        labels.insert(labels.end(), masks.back().begin(), masks.back().end());
    }
    g.positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    if (g.positives == 0) return g;
    if (g.positives < labels.size()) {
        g.auroc = auroc(scores, labels);
        std::vector<PixelMap> maps;
        for (std::size_t i = 0; i < items.size(); ++i) {
            const AnomalyResult& r = *items[i]->result;
            maps.push_back({r.score_map, masks[i], r.height, r.width});
        }
        g.aupro = aupro(maps, fpr_cap);
    }
    g.ap = average_precision(scores, labels);
    const ThresholdScore f1 = f1_max(scores, labels);
    g.f1_max = f1.value;
    g.threshold = f1.threshold;
    g.iou_max = iou_max(scores, labels).value;
    return g;
}

float applied_threshold(const GroupMetrics& g) {
    return g.threshold.value_or(std::numeric_limits<float>::infinity());
}

}  // namespace

const char* to_string(Grouping g) noexcept {
    switch (g) {
        case Grouping::per_class: return "per_class";
        case Grouping::global: return "global";
        case Grouping::per_cluster: return "per_cluster";
    }
    return "unknown";
}

Grouping parse_grouping(const std::string& s) {
    if (s == "per_class") return Grouping::per_class;
    if (s == "global") return Grouping::global;
    if (s == "per_cluster") return Grouping::per_cluster;
    fail(ErrorKind::usage, "unknown grouping '" + s + "' (expected per_class, global or per_cluster)");
}

MetricReport evaluate(std::span<const AnomalyResult> results, const FeatureArchive& archive, Grouping grouping,
                      double fpr_cap) {
    std::unordered_map<std::string, const AnomalyResult*> by_id;
    for (const auto& r : results) by_id.emplace(r.record_id, &r);

    const auto test = archive.split(Split::test);
    const bool labelled = !test.empty() && std::all_of(test.begin(), test.end(), [](const ImageRecord* r) {
        return r->class_label.has_value();
    });
    if (grouping == Grouping::per_class && !labelled) {
        fail(ErrorKind::data, "grouping per_class requires a class label on every test record");
    }

    // Group names in order of first appearance (clusters sorted by index).
    std::vector<std::string> group_names;
    std::map<std::string, std::size_t> group_index;
    std::vector<Item> items;
    std::vector<std::uint32_t> clusters;
    for (const auto* rec : test) {
        const auto it = by_id.find(rec->id);
        if (it == by_id.end()) fail(ErrorKind::data, "record '" + rec->id + "': no score result");
        clusters.push_back(it->second->routed_cluster);
    }
    std::vector<std::uint32_t> sorted_clusters = clusters;
    std::sort(sorted_clusters.begin(), sorted_clusters.end());
    sorted_clusters.erase(std::unique(sorted_clusters.begin(), sorted_clusters.end()), sorted_clusters.end());

    if (grouping == Grouping::per_cluster) {
        for (auto c : sorted_clusters) {
            group_index.emplace("cluster" + std::to_string(c), group_names.size());
            group_names.push_back("cluster" + std::to_string(c));
        }
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
        const ImageRecord* rec = test[i];
        std::string name;
        switch (grouping) {
            case Grouping::per_class: name = *rec->class_label; break;
            case Grouping::global: name = "all"; break;
            case Grouping::per_cluster: name = "cluster" + std::to_string(clusters[i]); break;
        }
        auto [pos, inserted] = group_index.emplace(name, group_names.size());
        if (inserted) group_names.push_back(name);
        items.push_back({rec, by_id.at(rec->id), pos->second});
    }

    std::vector<std::vector<const Item*>> members(group_names.size());
    for (const auto& it : items) members[it.group].push_back(&it);

    MetricReport report;
    report.grouping = grouping;
    report.fpr_cap = fpr_cap;
    report.image.level = Level::image;
    report.pixel.level = Level::pixel;
    for (std::size_t g = 0; g < group_names.size(); ++g) {
        report.image.groups.push_back(image_metrics(group_names[g], members[g]));
        report.pixel.groups.push_back(pixel_metrics(group_names[g], members[g], fpr_cap));
    }

    for (LevelReport* level : {&report.image, &report.pixel}) {
        level->mauroc = mean_of(level->groups, &GroupMetrics::auroc);
        level->map = mean_of(level->groups, &GroupMetrics::ap);
        level->mf1_max = mean_of(level->groups, &GroupMetrics::f1_max);
        if (level->level == Level::pixel) {
            level->maupro = mean_of(level->groups, &GroupMetrics::aupro);
            level->miou_max = mean_of(level->groups, &GroupMetrics::iou_max);
            level->mad = mean_of({level->mauroc, level->map, level->mf1_max, level->maupro, level->miou_max});
        } else {
            level->mad = mean_of({level->mauroc, level->map, level->mf1_max});
        }
    }

    if (labelled) {
        std::vector<std::string> classes;
        std::map<std::string, std::vector<const Item*>> by_class;
        for (const auto& it : items) {
            auto& v = by_class[*it.record->class_label];
            if (v.empty()) classes.push_back(*it.record->class_label);
            v.push_back(&it);
        }
        for (const auto& cls : classes) {
            const auto& members_c = by_class[cls];
            // Image level: each record judged at its group's threshold.
            std::vector<std::uint8_t> img_labels, img_pred;
            std::vector<float> pix_pred;
            std::vector<std::uint8_t> pix_labels;
            std::size_t img_pos = 0, pix_pos = 0;
            for (const auto* it : members_c) {
                const bool abnormal = it->record->gt_label == GtLabel::abnormal;
                img_labels.push_back(abnormal ? 1 : 0);
                img_pos += abnormal;
                img_pred.push_back(it->result->image_score >= applied_threshold(report.image.groups[it->group]) ? 1 : 0);
                const float t = applied_threshold(report.pixel.groups[it->group]);
                const auto mask = mask_pixels(*it);
                for (std::size_t p = 0; p < mask.size(); ++p) {
                    pix_labels.push_back(mask[p]);
                    pix_pos += mask[p];
                    pix_pred.push_back(it->result->score_map[p] >= t ? 1.0f : 0.0f);
                }
            }
            if (img_pos > 0) {
                std::vector<float> pred(img_pred.begin(), img_pred.end());
                report.image.class_f1.push_back({cls, f1_at(pred, img_labels, 1.0f)});
            }
            if (pix_pos > 0) report.pixel.class_f1.push_back({cls, f1_at(pix_pred, pix_labels, 1.0f)});
        }
        for (LevelReport* level : {&report.image, &report.pixel}) {
            if (level->class_f1.empty()) continue;
            double sum = 0.0;
            for (const auto& c : level->class_f1) sum += c.f1;
            level->class_mf1 = sum / static_cast<double>(level->class_f1.size());
        }
    }
    return report;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json level_json(const LevelReport& level) {
    json groups = json::array();
    for (const auto& g : level.groups) {
        groups.push_back({{"name", g.name},
                          {"records", g.records},
                          {"positives", g.positives},
                          {"auroc", opt(g.auroc)},
                          {"ap", opt(g.ap)},
                          {"f1_max", opt(g.f1_max)},
                          {"threshold", g.threshold ? json(*g.threshold) : json(nullptr)},
                          {"aupro", opt(g.aupro)},
                          {"iou_max", opt(g.iou_max)}});
    }
    json classes = json::array();
    for (const auto& c : level.class_f1) classes.push_back({{"class", c.class_label}, {"f1", c.f1}});
    json j{{"groups", std::move(groups)},
           {"mAUROC", opt(level.mauroc)},
           {"mAP", opt(level.map)},
           {"mF1_max", opt(level.mf1_max)},
           {"mAD", opt(level.mad)},
           {"class_f1", std::move(classes)},
           {"class_mF1", opt(level.class_mf1)}};
    if (level.level == Level::pixel) {
        j["mAUPRO"] = opt(level.maupro);
        j["mIoU_max"] = opt(level.miou_max);
    }
    return j;
}

}  // namespace

json to_json(const MetricReport& report) {
    return {{"grouping", to_string(report.grouping)},
            {"fpr_cap", report.fpr_cap},
            {"pixel_pooling", "pixels pooled across images within each group"},
            {"image", level_json(report.image)},
            {"pixel", level_json(report.pixel)}};
}

void write_report_csv(const MetricReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    out.precision(10);
    out << "level,group,metric,value\n";
    auto row = [&](const char* level, const std::string& group, const char* metric, const auto& value) {
        out << level << ',' << group << ',' << metric << ',';
        if (value) out << *value;
        out << '\n';
    };
    for (const LevelReport* level : {&report.image, &report.pixel}) {
        const char* name = level->level == Level::image ? "image" : "pixel";
        const bool pixel = level->level == Level::pixel;
        for (const auto& g : level->groups) {
            row(name, g.name, "auroc", g.auroc);
            row(name, g.name, "ap", g.ap);
            row(name, g.name, "f1_max", g.f1_max);
            row(name, g.name, "threshold", g.threshold);
            if (pixel) {
                row(name, g.name, "aupro", g.aupro);
                row(name, g.name, "iou_max", g.iou_max);
            }
        }
        row(name, "mean", "auroc", level->mauroc);
        row(name, "mean", "ap", level->map);
        row(name, "mean", "f1_max", level->mf1_max);
        if (pixel) {
            row(name, "mean", "aupro", level->maupro);
            row(name, "mean", "iou_max", level->miou_max);
        }
        row(name, "mean", "mad", level->mad);
        row(name, "mean", "class_f1", level->class_mf1);
    }
    if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

}  // namespace hiercore
