#include "hiercore/memory_bank.hpp"

#include <fstream>
#include <map>
#include <numeric>

#include "hiercore/blob.hpp"
#include "hiercore/error.hpp"

namespace hiercore {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kBankMagic = "HCMB";
constexpr int kBankVersion = 1;

Matrix semantic_matrix(const std::vector<const ImageRecord*>& records, std::uint32_t dim) {
    Matrix m(records.size(), dim);
    for (std::size_t i = 0; i < records.size(); ++i)
        std::copy(records[i]->semantic.begin(), records[i]->semantic.end(), m.row(i).begin());
    return m;
}

}  // namespace

const char* to_string(BankMode mode) noexcept {
    switch (mode) {
        case BankMode::pseudo: return "pseudo";
        case BankMode::labeled: return "labeled";
        case BankMode::single: return "single";
    }
    return "unknown";
}

BankMode parse_bank_mode(const std::string& s) {
    if (s == "pseudo") return BankMode::pseudo;
    if (s == "labeled") return BankMode::labeled;
    if (s == "single") return BankMode::single;
    fail(ErrorKind::usage, "unknown bank mode '" + s + "' (expected pseudo, labeled or single)");
}

std::size_t MemoryBank::total_patches() const noexcept {
    return std::accumulate(pool_sizes.begin(), pool_sizes.end(), std::size_t{0});
}

std::uint64_t MemoryBank::build_distance_evals() const noexcept {
    std::uint64_t total = 0;
    for (const auto& b : banks) total += b.distance_evals;
    return total;
}

MemoryBank build_bank(const FeatureArchive& archive, const CoresetConfig& config, BankMode mode) {
    validate(config);
    const auto train = archive.split(Split::train);
    if (train.empty()) fail(ErrorKind::data, "build: archive has no train records");

    MemoryBank bank;
    bank.mode = mode;
    bank.coreset = config;
    bank.grid = archive.grid;
    bank.semantic_dim = archive.semantic_dim;
    bank.patch_dim = archive.patch_dim;

    const Matrix semantic = semantic_matrix(train, archive.semantic_dim);
    switch (mode) {
        case BankMode::pseudo: {
            bank.cluster_model = cluster_semantic(semantic);
            for (std::uint32_t k = 0; k < bank.cluster_model.k; ++k)
                bank.cluster_names.push_back("cluster" + std::to_string(k));
            break;
        }
        case BankMode::labeled: {
            std::map<std::string, std::uint32_t> index;
            std::vector<std::uint32_t> assignment;
            for (const auto* r : train) {
                if (!r->class_label) {
                    fail(ErrorKind::data, "record '" + r->id + "': labeled mode requires a class label on every train record");
                }
                auto [it, inserted] = index.emplace(*r->class_label, static_cast<std::uint32_t>(bank.cluster_names.size()));
                if (inserted) bank.cluster_names.push_back(*r->class_label);
                assignment.push_back(it->second);
            }
            bank.cluster_model =
                model_from_partition(semantic, assignment, static_cast<std::uint32_t>(bank.cluster_names.size()));
            break;
        }
        case BankMode::single: {
            bank.cluster_model = model_from_partition(semantic, std::vector<std::uint32_t>(train.size(), 0), 1);
            bank.cluster_names.push_back("all");
            break;
        }
    }

    const std::uint32_t k_count = bank.cluster_model.k;
    std::vector<std::vector<const ImageRecord*>> members(k_count);
    for (std::size_t i = 0; i < train.size(); ++i) members[bank.cluster_model.assignment[i]].push_back(train[i]);

    const std::size_t cells = archive.grid.cells();
    for (std::uint32_t k = 0; k < k_count; ++k) {
        if (members[k].empty()) fail(ErrorKind::data, "cluster " + bank.cluster_names[k] + " has no train images");
        Matrix pool(members[k].size() * cells, archive.patch_dim);
        for (std::size_t i = 0; i < members[k].size(); ++i) {
            const auto& src = members[k][i]->patches.data;
            std::copy(src.begin(), src.end(), pool.data.begin() + static_cast<std::ptrdiff_t>(i * cells * archive.patch_dim));
        }
        bank.pool_sizes.push_back(pool.rows);
        bank.banks.push_back(kcenter_greedy(pool, config));
    }
    return bank;
}

std::uint32_t route(std::span<const float> semantic, const MemoryBank& bank) {
    return assign(semantic, bank.cluster_model.keys);
}

void save_bank(const MemoryBank& bank, const fs::path& dir) {
    if (dir.empty()) fail(ErrorKind::io, "save_bank: empty output path");
    std::error_code ec;
    fs::create_directories(dir / "banks", ec);
    if (ec) fail(ErrorKind::io, "cannot create " + dir.string() + ": " + ec.message());

    json banks = json::array();
    for (std::size_t k = 0; k < bank.banks.size(); ++k) {
        const Coreset& cs = bank.banks[k];
        const std::string file = "banks/" + std::to_string(k) + ".core";
        const std::uint32_t dims[] = {static_cast<std::uint32_t>(cs.vectors.rows), static_cast<std::uint32_t>(cs.vectors.cols)};
        write_blob(dir / file, dims, cs.vectors.data);
        banks.push_back({{"file", file},
                         {"indices", cs.indices},
                         {"covering_radius", cs.covering_radius},
                         {"distance_evals", cs.distance_evals}});
    }

    json header;
    header["magic"] = kBankMagic;
    header["version"] = kBankVersion;
    header["mode"] = to_string(bank.mode);
    header["coreset"] = {{"ratio", bank.coreset.ratio},
                         {"seed", bank.coreset.seed},
                         {"projection_dim", bank.coreset.projection_dim}};
    header["patch_grid"] = {{"grid_w", bank.grid.grid_w},     {"grid_h", bank.grid.grid_h},
                            {"window_w", bank.grid.window_w}, {"window_h", bank.grid.window_h},
                            {"padding", bank.grid.padding},   {"stride", bank.grid.stride}};
    header["semantic_dim"] = bank.semantic_dim;
    header["patch_dim"] = bank.patch_dim;
    header["pool_sizes"] = bank.pool_sizes;
    header["cluster_names"] = bank.cluster_names;
    header["cluster_model"] = to_json(bank.cluster_model);
    header["banks"] = std::move(banks);

    std::ofstream out(dir / "bank.json", std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + (dir / "bank.json").string());
    out << header.dump(2) << '\n';
    if (!out) fail(ErrorKind::io, "write failed for " + (dir / "bank.json").string());
    save_cluster_model(bank.cluster_model, dir / "cluster_model.json");
}

MemoryBank load_bank(const fs::path& dir) {
    const fs::path header_path = dir / "bank.json";
    std::ifstream in(header_path);
    if (!in) fail(ErrorKind::io, "cannot open " + header_path.string());
    json header;
    try {
        header = json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::data, "malformed " + header_path.string() + ": " + e.what());
    }
    if (!header.is_object() || header.value("magic", std::string{}) != kBankMagic) {
        fail(ErrorKind::version, header_path.string() + ": wrong magic, not a memory bank");
    }
    if (header.value("version", -1) != kBankVersion) {
        fail(ErrorKind::version, header_path.string() + ": unsupported bank version");
    }

    MemoryBank bank;
    try {
        bank.mode = parse_bank_mode(header.at("mode").get<std::string>());
        const auto& c = header.at("coreset");
        bank.coreset = {c.at("ratio").get<double>(), c.at("seed").get<std::uint64_t>(),
                        c.at("projection_dim").get<std::uint32_t>()};
        const auto& g = header.at("patch_grid");
        bank.grid = PatchGrid{g.at("grid_w").get<std::uint32_t>(),   g.at("grid_h").get<std::uint32_t>(),
                              g.at("window_w").get<std::uint32_t>(), g.at("window_h").get<std::uint32_t>(),
                              g.at("padding").get<std::uint32_t>(),  g.at("stride").get<std::uint32_t>()};
        bank.semantic_dim = header.at("semantic_dim").get<std::uint32_t>();
        bank.patch_dim = header.at("patch_dim").get<std::uint32_t>();
        bank.pool_sizes = header.at("pool_sizes").get<std::vector<std::size_t>>();
        bank.cluster_names = header.at("cluster_names").get<std::vector<std::string>>();
        bank.cluster_model = cluster_model_from_json(header.at("cluster_model"));
        for (const auto& b : header.at("banks")) {
            Coreset cs;
            const std::string file = b.at("file").get<std::string>();
            Blob blob = read_blob(dir / file, "bank file " + file);
            if (blob.dims.size() != 2 || blob.dims[1] != bank.patch_dim) {
                fail(ErrorKind::data, "bank file " + file + ": shape does not match patch_dim");
            }
            cs.vectors = Matrix(blob.dims[0], blob.dims[1], std::move(blob.values));
            cs.indices = b.at("indices").get<std::vector<std::size_t>>();
            cs.covering_radius = b.at("covering_radius").get<double>();
            cs.distance_evals = b.at("distance_evals").get<std::uint64_t>();
            if (cs.indices.size() != cs.vectors.rows) fail(ErrorKind::data, "bank file " + file + ": truncated");
            bank.banks.push_back(std::move(cs));
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::data, "malformed bank header: " + std::string(e.what()));
    }
    const std::size_t k = bank.cluster_model.k;
    if (bank.banks.size() != k || bank.pool_sizes.size() != k || bank.cluster_names.size() != k ||
        bank.cluster_model.keys.cols != bank.semantic_dim) {
        fail(ErrorKind::data, header_path.string() + ": inconsistent cluster count");
    }
    for (const auto& b : bank.banks)
        if (b.vectors.rows == 0) fail(ErrorKind::data, header_path.string() + ": empty bank");
    return bank;
}

}  // namespace hiercore
