#include "hiercore/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "CLI11.hpp"
#include "hiercore/error.hpp"
#include "hiercore/evaluation.hpp"
#include "hiercore/feature_store.hpp"
#include "hiercore/harness.hpp"
#include "hiercore/memory_bank.hpp"
#include "hiercore/parallel.hpp"
#include "hiercore/scoring.hpp"

namespace hiercore::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::usage: return kUsage;
        case ErrorKind::data:
        case ErrorKind::version: return kData;
        case ErrorKind::io: return kIo;
    }
    return kData;
}

void report_error(std::ostream& err, int code, const char* kind, const std::string& message) {
    err << "hiercore: error kind=" << kind << " code=" << code << ": " << message << '\n';
}

template <typename T>
void take(const json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

fs::path output_dir(const RunConfig& c) {
    if (!c.output.empty()) return c.output;
    if (const char* env = std::getenv(kOutputEnv); env && *env) return env;
    return ".";
}

fs::path resolve_bank(const std::string& path) {
    if (path.empty()) fail(ErrorKind::usage, "--bank is required");
    const fs::path p(path);
    if (fs::exists(p / "bank.json")) return p;
    return p / "bank.hcmb";
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());
}

FeatureArchive load_archive(const RunConfig& c) {
    if (c.archive.empty()) fail(ErrorKind::usage, "--archive is required");
    return read_archive(c.archive);
}

HarnessConfig harness_config(const RunConfig& c) {
    HarnessConfig h;
    h.coreset = {c.ratio, c.seed, c.projection_dim};
    h.scoring = {c.smoothing, c.smoothing_sigma};
    h.fpr_cap = c.fpr_cap;
    validate(h.coreset);
    if (!(h.fpr_cap > 0.0 && h.fpr_cap <= 1.0)) fail(ErrorKind::usage, "--fpr-cap must be in (0, 1]");
    return h;
}

std::string timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

void cmd_synth(const RunConfig& c, std::ostream& err) {
    FeatureArchive a = synth_generate(c.synth, c.seed);
    if (c.unlabeled) a = strip_class_labels(std::move(a));
    const fs::path out = output_dir(c);
    write_archive(a, out);
    err << "[hiercore] wrote " << a.records.size() << " records to " << out.string() << '\n';
}

void cmd_cluster(const RunConfig& c, std::ostream& err) {
    const FeatureArchive a = load_archive(c);
    const auto train = a.split(Split::train);
    if (train.empty()) fail(ErrorKind::data, "archive has no train records");
    Matrix points(train.size(), a.semantic_dim);
    for (std::size_t i = 0; i < train.size(); ++i)
        std::copy(train[i]->semantic.begin(), train[i]->semantic.end(), points.row(i).begin());
    const ClusterModel model = cluster_semantic(points);
    const fs::path out = output_dir(c);
    ensure_dir(out);
    save_cluster_model(model, out / "cluster_model.json");
    err << "[hiercore] K=" << model.k << " over " << model.level_cluster_counts.size() << " levels\n";
}

void cmd_build(const RunConfig& c, std::ostream& err) {
    const HarnessConfig h = harness_config(c);
    const FeatureArchive a = load_archive(c);
    const MemoryBank bank = build_bank(a, h.coreset, parse_bank_mode(c.mode));
    const fs::path out = output_dir(c) / "bank.hcmb";
    save_bank(bank, out);
    err << "[hiercore] built " << bank.k() << " bank(s) from " << bank.total_patches() << " patches -> "
        << out.string() << '\n';
}

void cmd_score(const RunConfig& c, std::ostream& err) {
    const HarnessConfig h = harness_config(c);
    const FeatureArchive a = load_archive(c);
    const MemoryBank bank = load_bank(resolve_bank(c.bank));
    const BatchScores scores = score_batch(a, bank, h.scoring);
    const fs::path out = output_dir(c);
    ensure_dir(out);
    write_scores_jsonl(scores.results, out / "scores.jsonl");
    if (c.write_maps) write_score_maps(scores.results, out / "maps");
    err << "[hiercore] scored " << scores.results.size() << " records\n";
}

void cmd_eval(const RunConfig& c, std::ostream& err) {
    const HarnessConfig h = harness_config(c);
    const Scenario scenario = parse_scenario(c.scenario);
    const FeatureArchive a = load_archive(c);
    check_scenario_labels(a, scenario);

    EvalReport report;
    if (!c.bank.empty()) {
        const MemoryBank bank = load_bank(resolve_bank(c.bank));
        const bool label_bank = bank.mode == BankMode::labeled;
        if (label_bank != (scenario.training == Availability::known)) {
            fail(ErrorKind::usage, "scenario " + scenario.code() + " does not match a " + to_string(bank.mode) + " bank");
        }
        report = evaluate_bank(a, bank, scenario, h);
    } else {
        report = run_scenario(a, scenario, h);
    }
    if (!c.grouping.empty()) {
        const Grouping g = parse_grouping(c.grouping);
        if (g != report.metrics.grouping) {
            const MemoryBank bank = c.bank.empty()
                                        ? build_bank(a, h.coreset,
                                                     scenario.training == Availability::known ? BankMode::labeled
                                                                                              : BankMode::pseudo)
                                        : load_bank(resolve_bank(c.bank));
            const BatchScores scores = score_batch(a, bank, h.scoring);
            report.metrics = evaluate(scores.results, a, g, h.fpr_cap);
            report.provenance["grouping"] = to_string(g);
        }
    }

    const fs::path out = output_dir(c);
    ensure_dir(out);
    json doc;
    doc["generated_at"] = timestamp();
    doc["report"] = to_json(report);
    doc["run_config"] = to_json(c);
    write_json(out / "report.json", doc);
    write_report_csv(report.metrics, out / "report.csv");
    err << "[hiercore] scenario " << scenario.code() << " image mAD "
        << report.metrics.image.mad.value_or(0.0) << " pixel mAD " << report.metrics.pixel.mad.value_or(0.0) << '\n';
}

void cmd_bench(const RunConfig& c, std::ostream& err) {
    const HarnessConfig h = harness_config(c);
    const FeatureArchive a = load_archive(c);
    const auto rows = run_bench(a, h);
    const fs::path out = output_dir(c);
    ensure_dir(out);
    write_bench_csv(rows, out / "bench.csv");
    err << "[hiercore] wrote " << rows.size() << " bench rows\n";
}

void cmd_export(const RunConfig& c, std::ostream& err) {
    const FeatureArchive a = load_archive(c);
    const MemoryBank bank = load_bank(resolve_bank(c.bank));
    fs::path out = output_dir(c);
    if (fs::is_directory(out) || c.output.empty()) {
        ensure_dir(out);
        out /= "embeddings.csv";
    }
    export_embeddings(a, bank, out);
    err << "[hiercore] wrote embeddings to " << out.string() << '\n';
}

}  // namespace

void apply_config_json(RunConfig& c, const json& j) {
    if (!j.is_object()) fail(ErrorKind::usage, "config file must hold a JSON object");
    // "command" is accepted so the run_config block of a report can be reused.
    static const char* known[] = {"command", "archive", "bank",     "output",    "ratio",       "seed",   "projection_dim",
                                  "mode",    "scenario", "grouping",  "smoothing",   "smoothing_sigma",
                                  "fpr_cap", "threads",  "maps",      "unlabeled",   "synth"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
            fail(ErrorKind::usage, "unknown config key '" + key + "'");
        }
    }
    try {
        take(j, "archive", c.archive);
        take(j, "bank", c.bank);
        take(j, "output", c.output);
        take(j, "ratio", c.ratio);
        take(j, "seed", c.seed);
        take(j, "projection_dim", c.projection_dim);
        take(j, "mode", c.mode);
        take(j, "scenario", c.scenario);
        take(j, "grouping", c.grouping);
        take(j, "smoothing", c.smoothing);
        take(j, "smoothing_sigma", c.smoothing_sigma);
        take(j, "fpr_cap", c.fpr_cap);
        take(j, "threads", c.threads);
        take(j, "maps", c.write_maps);
        take(j, "unlabeled", c.unlabeled);
        if (j.contains("synth")) {
            const json& s = j.at("synth");
            take(s, "classes", c.synth.classes);
            take(s, "train_per_class", c.synth.train_per_class);
            take(s, "test_per_class", c.synth.test_per_class);
            take(s, "semantic_dim", c.synth.semantic_dim);
            take(s, "patch_dim", c.synth.patch_dim);
            take(s, "grid_w", c.synth.grid_w);
            take(s, "grid_h", c.synth.grid_h);
            take(s, "image_w", c.synth.image_w);
            take(s, "image_h", c.synth.image_h);
            take(s, "margin", c.synth.margin);
            take(s, "semantic_sigma", c.synth.semantic_sigma);
            take(s, "patch_sigma", c.synth.patch_sigma);
            take(s, "anomaly_rate", c.synth.anomaly_rate);
            take(s, "anomaly_offset", c.synth.anomaly_offset);
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::usage, std::string("invalid config value: ") + e.what());
    }
}

json to_json(const RunConfig& c) {
    return {{"command", c.command},
            {"archive", c.archive},
            {"bank", c.bank},
            {"output", c.output},
            {"ratio", c.ratio},
            {"seed", c.seed},
            {"projection_dim", c.projection_dim},
            {"mode", c.mode},
            {"scenario", c.scenario},
            {"grouping", c.grouping},
            {"smoothing", c.smoothing},
            {"smoothing_sigma", c.smoothing_sigma},
            {"fpr_cap", c.fpr_cap},
            {"threads", c.threads},
            {"maps", c.write_maps},
            {"unlabeled", c.unlabeled},
            {"synth",
             {{"classes", c.synth.classes},
              {"train_per_class", c.synth.train_per_class},
              {"test_per_class", c.synth.test_per_class},
              {"semantic_dim", c.synth.semantic_dim},
              {"patch_dim", c.synth.patch_dim},
              {"grid_w", c.synth.grid_w},
              {"grid_h", c.synth.grid_h},
              {"image_w", c.synth.image_w},
              {"image_h", c.synth.image_h},
              {"margin", c.synth.margin},
              {"semantic_sigma", c.synth.semantic_sigma},
              {"patch_sigma", c.synth.patch_sigma},
              {"anomaly_rate", c.synth.anomaly_rate},
              {"anomaly_offset", c.synth.anomaly_offset}}}};
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig c;

    // Config file values become the defaults that flags override.
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
        if (path.empty()) continue;
        try {
            std::ifstream in(path);
            if (!in) fail(ErrorKind::io, "cannot open config " + path);
            json j;
            try {
                j = json::parse(in);
            } catch (const json::exception& e) {
                fail(ErrorKind::usage, "malformed config " + path + ": " + e.what());
            }
            apply_config_json(c, j);
        } catch (const Error& e) {
            report_error(err, exit_code(e.kind()), to_string(e.kind()), e.what());
            return exit_code(e.kind());
        }
    }

    CLI::App app{"Hierarchical coreset anomaly detection on feature archives", "hiercore"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags take precedence)");
    app.add_option("--threads", c.threads, "worker threads (0 = hardware concurrency)");

    auto add_archive = [&](CLI::App* sub) { sub->add_option("-a,--archive", c.archive, "feature archive directory"); };
    auto add_bank = [&](CLI::App* sub) { sub->add_option("-b,--bank", c.bank, "memory bank directory"); };
    auto add_output = [&](CLI::App* sub) {
        sub->add_option("-o,--output", c.output, std::string("output path (default $") + kOutputEnv + " or .)");
    };
    auto add_coreset = [&](CLI::App* sub) {
        sub->add_option("--ratio", c.ratio, "coreset sampling ratio in (0, 1]");
        sub->add_option("--seed", c.seed, "seed for the first coreset pick");
        sub->add_option("--projection-dim", c.projection_dim, "random projection before selection (0 = off)");
    };
    auto add_scoring = [&](CLI::App* sub) {
        sub->add_flag("--smooth", c.smoothing, "Gaussian-smooth score maps");
        sub->add_option("--smooth-sigma", c.smoothing_sigma, "smoothing sigma in pixels");
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic feature archive");
    add_output(synth);
    synth->add_option("--seed", c.seed, "generator seed");
    synth->add_option("--classes", c.synth.classes, "number of classes");
    synth->add_option("--train-per-class", c.synth.train_per_class, "train images per class");
    synth->add_option("--test-per-class", c.synth.test_per_class, "test images per class");
    synth->add_option("--semantic-dim", c.synth.semantic_dim, "semantic vector length");
    synth->add_option("--patch-dim", c.synth.patch_dim, "patch feature length");
    synth->add_option("--grid-w", c.synth.grid_w, "patch grid width");
    synth->add_option("--grid-h", c.synth.grid_h, "patch grid height");
    synth->add_option("--image-w", c.synth.image_w, "image width");
    synth->add_option("--image-h", c.synth.image_h, "image height");
    synth->add_option("--margin", c.synth.margin, "class mean separation in semantic sigmas");
    synth->add_option("--patch-sigma", c.synth.patch_sigma, "patch noise sigma");
    synth->add_option("--anomaly-rate", c.synth.anomaly_rate, "fraction of abnormal test images");
    synth->add_option("--anomaly-offset", c.synth.anomaly_offset, "norm of the defect offset");
    synth->add_flag("--unlabeled", c.unlabeled, "drop class labels");

    CLI::App* cluster = app.add_subcommand("cluster", "cluster train semantic vectors, write cluster_model.json");
    add_archive(cluster);
    add_output(cluster);

    CLI::App* build = app.add_subcommand("build", "build a memory bank");
    add_archive(build);
    add_output(build);
    add_coreset(build);
    build->add_option("--mode", c.mode, "pseudo | labeled | single");

    CLI::App* score = app.add_subcommand("score", "score the test split, write scores.jsonl");
    add_archive(score);
    add_bank(score);
    add_output(score);
    add_scoring(score);
    score->add_flag("--maps", c.write_maps, "also write score maps as blobs");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a scenario, write report.json and report.csv");
    add_archive(eval);
    add_bank(eval);
    add_output(eval);
    add_coreset(eval);
    add_scoring(eval);
    eval->add_option("--scenario", c.scenario, "kk | ku | uk | uu");
    eval->add_option("--grouping", c.grouping, "override threshold grouping: per_class | global | per_cluster");
    eval->add_option("--fpr-cap", c.fpr_cap, "AUPRO false-positive-rate cap");

    CLI::App* bench = app.add_subcommand("bench", "hierarchical vs single-bank comparison, write bench.csv");
    add_archive(bench);
    add_output(bench);
    add_coreset(bench);
    add_scoring(bench);

    CLI::App* exp = app.add_subcommand("export", "export semantic embeddings with cluster assignments");
    add_archive(exp);
    add_bank(exp);
    add_output(exp);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        report_error(err, kUsage, "usage", e.what());
        return kUsage;
    }

    try {
        set_thread_count(c.threads);
        CLI::App* sub = app.get_subcommands().front();
        c.command = sub->get_name();
        if (sub == synth) cmd_synth(c, err);
        else if (sub == cluster) cmd_cluster(c, err);
        else if (sub == build) cmd_build(c, err);
        else if (sub == score) cmd_score(c, err);
        else if (sub == eval) cmd_eval(c, err);
        else if (sub == bench) cmd_bench(c, err);
        else if (sub == exp) cmd_export(c, err);
    } catch (const Error& e) {
        report_error(err, exit_code(e.kind()), to_string(e.kind()), e.what());
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        report_error(err, kIo, "io", e.what());
        return kIo;
    } catch (const std::exception& e) {
        report_error(err, kData, "data", e.what());
        return kData;
    }
    return kOk;
}

}  // namespace hiercore::cli
