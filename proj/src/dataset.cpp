#include "isac/dataset.hpp"

#include <cmath>
#include <sstream>
#include <system_error>

#include "isac/errors.hpp"
#include "isac/fileio.hpp"
#include "isac/parallel.hpp"
#include "isac/rng.hpp"

namespace isac {

namespace fs = std::filesystem;

nlohmann::ordered_json scene_to_json(const Scene& scene, std::size_t idx, std::size_t n_tx) {
  nlohmann::ordered_json j;
  j["idx"] = idx;
  j["seed"] = scene.seed;
  auto users = nlohmann::ordered_json::array();
  for (const Vec3& p : scene.users) users.push_back({p[0], p[1], p[2]});
  j["users"] = std::move(users);
  j["target"] = {scene.target[0], scene.target[1], scene.target[2]};
  auto beta = nlohmann::ordered_json::array();
  const std::size_t k_users = scene.users.size();
  for (std::size_t i = 0; i < n_tx; ++i) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < k_users; ++k) {
      const cplx b = scene.beta[i * k_users + k];
      row.push_back({b.real(), b.imag()});
    }
    beta.push_back(std::move(row));
  }
  j["beta"] = std::move(beta);
  return j;
}

Scene scene_from_json(const nlohmann::json& j, const SystemConfig& config) {
  Scene s;
  try {
    s.seed = j.value("seed", std::uint64_t{0});
    const auto& users = j.at("users");
    if (users.size() != config.users) {
      throw ConfigError("scene has " + std::to_string(users.size()) + " users, config expects " +
                        std::to_string(config.users));
    }
    for (const auto& p : users) s.users.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()});
    const auto& t = j.at("target");
    s.target = {t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()};
    if (j.contains("beta")) {
      const auto& beta = j["beta"];
      if (beta.size() != config.n_tx) throw ConfigError("scene beta must have n_tx rows");
      for (const auto& row : beta) {
        if (row.size() != config.users) throw ConfigError("scene beta rows must have one entry per user");
        for (const auto& b : row) s.beta.emplace_back(b.at(0).get<double>(), b.at(1).get<double>());
      }
    } else {
      for (std::size_t i = 0; i < config.n_tx; ++i) {
        for (std::size_t k = 0; k < config.users; ++k) s.beta.emplace_back(std::sqrt(config.zeta2_at(i, k)), 0.0);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene record: ") + e.what());
  }
  return s;
}

Dataset generate_dataset(const SystemConfig& config, std::size_t n_samples, std::uint64_t master_seed,
                         double train_fraction, std::size_t threads) {
  config.validate();
  if (n_samples == 0) throw ConfigError("dataset must contain at least one sample");
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw ConfigError("train_fraction must be in [0, 1]");
  Dataset ds;
  ds.manifest.config = config;
  ds.manifest.config_hash = scenario_hash(config);
  ds.manifest.n_samples = n_samples;
  ds.manifest.master_seed = master_seed;
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n_samples)));
  ds.manifest.train = {0, n_train};
  ds.manifest.test = {n_train, n_samples};
  ds.scenes.resize(n_samples);
  parallel_for(n_samples, threads, [&](std::size_t idx) {
    ds.scenes[idx] = sample_scene(config, derive_seed(master_seed, idx));
  });
  return ds;
}

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory " + dir.string() + ": " + ec.message());

  std::string lines;
  for (std::size_t idx = 0; idx < dataset.scenes.size(); ++idx) {
    lines += scene_to_json(dataset.scenes[idx], idx, dataset.manifest.config.n_tx).dump();
    lines += '\n';
  }
  write_file_atomic(dir / "samples.jsonl", lines);

  const DatasetManifest& m = dataset.manifest;
  nlohmann::ordered_json j;
  j["format_version"] = m.format_version;
  j["tool_version"] = m.tool_version;
  j["config_hash"] = m.config_hash;
  j["n_samples"] = m.n_samples;
  j["master_seed"] = m.master_seed;
  j["split"] = {{"train", {m.train.begin, m.train.end}}, {"test", {m.test.begin, m.test.end}}};
  j["config"] = to_json(m.config);
  write_file_atomic(dir / "manifest.json", j.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir) {
  Dataset ds;
  DatasetManifest& m = ds.manifest;
  try {
    const auto j = nlohmann::json::parse(read_file(dir / "manifest.json"));
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kDatasetFormatVersion) {
      throw IoError("unsupported dataset format_version " + std::to_string(m.format_version) + " in " +
                    (dir / "manifest.json").string());
    }
    m.tool_version = j.value("tool_version", std::string{});
    m.config = system_config_from_json(j.at("config"), desk_profile());
    m.config_hash = j.at("config_hash").get<std::string>();
    m.n_samples = j.at("n_samples").get<std::size_t>();
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    const auto& split = j.at("split");
    m.train = {split.at("train").at(0).get<std::size_t>(), split.at("train").at(1).get<std::size_t>()};
    m.test = {split.at("test").at(0).get<std::size_t>(), split.at("test").at(1).get<std::size_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest " + (dir / "manifest.json").string() + ": " + e.what());
  }
  if (scenario_hash(m.config) != m.config_hash) {
    throw IoError("manifest config_hash does not match its config in " + (dir / "manifest.json").string());
  }

  std::istringstream lines(read_file(dir / "samples.jsonl"));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    ++lineno;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.at("idx").get<std::size_t>() != ds.scenes.size()) {
        throw IoError("samples out of order at line " + std::to_string(lineno));
      }
      ds.scenes.push_back(scene_from_json(j, m.config));
    } catch (const nlohmann::json::exception& e) {
      throw IoError("malformed record at " + (dir / "samples.jsonl").string() + ":" + std::to_string(lineno) +
                    ": " + e.what());
    } catch (const ConfigError& e) {
      throw IoError("bad record at " + (dir / "samples.jsonl").string() + ":" + std::to_string(lineno) + ": " +
                    e.what());
    }
  }
  if (ds.scenes.size() != m.n_samples) {
    throw IoError("expected " + std::to_string(m.n_samples) + " samples in " + (dir / "samples.jsonl").string() +
                  ", found " + std::to_string(ds.scenes.size()));
  }
  return ds;
}

Dataset dataset_generate(const SystemConfig& config, std::size_t n_samples, std::uint64_t master_seed,
                         const fs::path& dir, double train_fraction, std::size_t threads) {
  Dataset ds = generate_dataset(config, n_samples, master_seed, train_fraction, threads);
  save_dataset(ds, dir);
  return ds;
}

}  // namespace isac
