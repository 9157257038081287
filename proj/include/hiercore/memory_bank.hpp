#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hiercore/clustering.hpp"
#include "hiercore/coreset.hpp"
#include "hiercore/feature_store.hpp"

namespace hiercore {

enum class BankMode {
    pseudo,   // FINCH pseudo-classes on semantic vectors
    labeled,  // ground-truth class labels of the train split
    single,   // one pooled bank over every train image (PatchCore baseline)
};

const char* to_string(BankMode mode) noexcept;
BankMode parse_bank_mode(const std::string& s);

// One coreset bank per semantic cluster plus the keys that route queries.
struct MemoryBank {
    BankMode mode = BankMode::pseudo;
    ClusterModel cluster_model;
    std::vector<std::string> cluster_names;
    std::vector<Coreset> banks;
    std::vector<std::size_t> pool_sizes;  // P_k
    CoresetConfig coreset;
    PatchGrid grid;
    std::uint32_t semantic_dim = 0;
    std::uint32_t patch_dim = 0;

    std::size_t k() const noexcept { return banks.size(); }
    std::size_t total_patches() const noexcept;
    std::uint64_t build_distance_evals() const noexcept;
    std::uint64_t clustering_distance_evals() const noexcept { return cluster_model.distance_evals; }
};

MemoryBank build_bank(const FeatureArchive& archive, const CoresetConfig& config, BankMode mode);

// Nearest semantic key; ties go to the smaller cluster index.
std::uint32_t route(std::span<const float> semantic, const MemoryBank& bank);

// Directory layout: bank.json (header + embedded cluster model),
// cluster_model.json, banks/<k>.core (HCFS blobs).
void save_bank(const MemoryBank& bank, const std::filesystem::path& dir);
MemoryBank load_bank(const std::filesystem::path& dir);

}  // namespace hiercore
