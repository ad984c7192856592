#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "isac/config.hpp"
#include "isac/geometry.hpp"

namespace isac {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

/// Half-open index range [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
};

struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  std::string tool_version = kToolVersion;
  std::string config_hash;
  SystemConfig config;
  std::size_t n_samples = 0;
  std::uint64_t master_seed = 0;
  IndexRange train;
  IndexRange test;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<Scene> scenes;

  ChannelSet channels(std::size_t idx) const { return build_channels(manifest.config, scenes.at(idx)); }
};

/// Sample idx uses seed derive_seed(master_seed, idx). The first
/// floor(train_fraction * n) samples form the training split.
Dataset generate_dataset(const SystemConfig& config, std::size_t n_samples, std::uint64_t master_seed,
                         double train_fraction = 0.8, std::size_t threads = 1);

/// Writes manifest.json and samples.jsonl under `dir` (created if missing),
/// each file atomically. Throws IoError with the failing path.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// generate_dataset + save_dataset.
Dataset dataset_generate(const SystemConfig& config, std::size_t n_samples, std::uint64_t master_seed,
                         const std::filesystem::path& dir, double train_fraction = 0.8,
                         std::size_t threads = 1);

/// One samples.jsonl record: {"idx","seed","users","target","beta"}, beta as
/// n_tx x users x [re, im].
nlohmann::ordered_json scene_to_json(const Scene& scene, std::size_t idx, std::size_t n_tx);
/// Parses a record; "idx" and "seed" are optional. A missing "beta" is filled
/// with the deterministic real gains sqrt(zeta2[i,k]).
Scene scene_from_json(const nlohmann::json& j, const SystemConfig& config);

}  // namespace isac
