#include "isac/config.hpp"

#include <cmath>
#include <cstdio>

#include "isac/errors.hpp"

namespace isac {
namespace {

/// A scalar broadcasts; otherwise a flat list (vectors) or a list of rows.
std::vector<double> table(const nlohmann::json& j, std::size_t rows, std::size_t cols, const char* name,
                          bool vector = false) {
  std::vector<double> out;
  if (j.is_number()) return std::vector<double>(rows * cols, j.get<double>());
  if (!j.is_array()) throw ConfigError(std::string(name) + ": expected number or array");
  if (vector) {
    if (j.size() != rows) throw ConfigError(std::string(name) + ": expected " + std::to_string(rows) + " entries");
    for (const auto& v : j) out.push_back(v.get<double>());
    return out;
  }
  if (j.size() != rows) throw ConfigError(std::string(name) + ": expected " + std::to_string(rows) + " rows");
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != cols) {
      throw ConfigError(std::string(name) + ": expected rows of " + std::to_string(cols) + " entries");
    }
    for (const auto& v : row) out.push_back(v.get<double>());
  }
  return out;
}

nlohmann::ordered_json table_json(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  auto out = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < cols; ++c) row.push_back(v[r * cols + c]);
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<Vec3> positions(const nlohmann::json& j, const char* name) {
  std::vector<Vec3> out;
  if (!j.is_array()) throw ConfigError(std::string(name) + ": expected array of [x,y,z]");
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 3) throw ConfigError(std::string(name) + ": expected [x,y,z]");
    out.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
  }
  return out;
}

void resize_tables(SystemConfig& c) {
  c.zeta2.assign(c.n_tx * c.users, 0.5);
  c.chi2.assign(c.n_tx * c.n_rx, 0.1);
  c.sigma2.assign(c.users, 1.0);
  c.xi2.assign(c.n_rx, 1.0);
}

}  // namespace

void SystemConfig::validate() const {
  if (n_tx < 1 || n_rx < 1 || m_v < 1 || m_h < 1 || users < 1) {
    throw ConfigError("counts n_tx, n_rx, m_v, m_h, users must all be >= 1");
  }
  if (tx_positions.size() != n_tx) throw ConfigError("tx_positions must have n_tx entries");
  if (rx_positions.size() != n_rx) throw ConfigError("rx_positions must have n_rx entries");
  if (!(area.x_min <= area.x_max && area.y_min <= area.y_max && area.z_min <= area.z_max)) {
    throw ConfigError("area bounds must satisfy min <= max");
  }
  auto positive = [](const std::vector<double>& v, std::size_t n, const char* name) {
    if (v.size() != n) throw ConfigError(std::string(name) + " has wrong size");
    for (double x : v) {
      if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(std::string(name) + " entries must be > 0");
    }
  };
  positive(zeta2, n_tx * users, "zeta2");
  positive(chi2, n_tx * n_rx, "chi2");
  positive(sigma2, users, "sigma2");
  positive(xi2, n_rx, "xi2");
  if (!(p_max > 0.0) || !std::isfinite(p_max)) throw ConfigError("p_max must be > 0");
  if (!(gamma_min >= 0.0) || !std::isfinite(gamma_min)) throw ConfigError("gamma_min must be >= 0");
}

double dbm_to_linear(double dbm) noexcept { return std::pow(10.0, dbm / 10.0); }
double linear_to_dbm(double linear) noexcept { return 10.0 * std::log10(linear); }

SystemConfig paper_profile() {
  SystemConfig c;
  c.n_tx = 2;
  c.n_rx = 2;
  c.m_v = 4;
  c.m_h = 16;
  c.users = 4;
  c.tx_positions = {{0.0, 100.0, 20.0}, {200.0, 100.0, 20.0}};
  c.rx_positions = {{100.0, 0.0, 20.0}, {100.0, 200.0, 20.0}};
  resize_tables(c);
  c.p_max = dbm_to_linear(30.0);
  c.gamma_min = 30.0;
  return c;
}

SystemConfig desk_profile() {
  SystemConfig c = paper_profile();
  c.m_v = 2;
  c.m_h = 4;
  c.users = 2;
  resize_tables(c);
  c.gamma_min = 15.0;
  return c;
}

SystemConfig profile_by_name(std::string_view name) {
  if (name == "paper") return paper_profile();
  if (name == "desk") return desk_profile();
  throw ConfigError("unknown profile '" + std::string(name) + "' (expected paper or desk)");
}

nlohmann::ordered_json to_json(const SystemConfig& c) {
  nlohmann::ordered_json j;
  j["n_tx"] = c.n_tx;
  j["n_rx"] = c.n_rx;
  j["m_v"] = c.m_v;
  j["m_h"] = c.m_h;
  j["users"] = c.users;
  auto pos = [](const std::vector<Vec3>& ps) {
    auto a = nlohmann::ordered_json::array();
    for (const Vec3& p : ps) a.push_back({p[0], p[1], p[2]});
    return a;
  };
  j["tx_positions"] = pos(c.tx_positions);
  j["rx_positions"] = pos(c.rx_positions);
  j["area"] = {{"x", {c.area.x_min, c.area.x_max}},
               {"y", {c.area.y_min, c.area.y_max}},
               {"z", {c.area.z_min, c.area.z_max}}};
  j["zeta2"] = table_json(c.zeta2, c.n_tx, c.users);
  j["chi2"] = table_json(c.chi2, c.n_tx, c.n_rx);
  j["sigma2"] = c.sigma2;
  j["xi2"] = c.xi2;
  j["p_max"] = c.p_max;
  j["gamma_min"] = c.gamma_min;
  return j;
}

SystemConfig system_config_from_json(const nlohmann::json& j, const SystemConfig& defaults) {
  if (!j.is_object()) throw ConfigError("system config must be a JSON object");
  SystemConfig c = defaults;
  try {
    const bool shape_changed = j.contains("n_tx") || j.contains("n_rx") || j.contains("users");
    c.n_tx = j.value("n_tx", c.n_tx);
    c.n_rx = j.value("n_rx", c.n_rx);
    c.m_v = j.value("m_v", c.m_v);
    c.m_h = j.value("m_h", c.m_h);
    c.users = j.value("users", c.users);
    if (shape_changed) resize_tables(c);
    if (j.contains("tx_positions")) c.tx_positions = positions(j["tx_positions"], "tx_positions");
    if (j.contains("rx_positions")) c.rx_positions = positions(j["rx_positions"], "rx_positions");
    if (j.contains("area")) {
      const auto& a = j["area"];
      auto range = [&](const char* key, double& lo, double& hi) {
        if (!a.contains(key)) return;
        const auto& r = a[key];
        if (!r.is_array() || r.size() != 2) throw ConfigError(std::string("area.") + key + ": expected [min,max]");
        lo = r[0].get<double>();
        hi = r[1].get<double>();
      };
      range("x", c.area.x_min, c.area.x_max);
      range("y", c.area.y_min, c.area.y_max);
      range("z", c.area.z_min, c.area.z_max);
    }
    if (j.contains("zeta2")) c.zeta2 = table(j["zeta2"], c.n_tx, c.users, "zeta2");
    if (j.contains("chi2")) c.chi2 = table(j["chi2"], c.n_tx, c.n_rx, "chi2");
    if (j.contains("sigma2")) c.sigma2 = table(j["sigma2"], c.users, 1, "sigma2", true);
    if (j.contains("xi2")) c.xi2 = table(j["xi2"], c.n_rx, 1, "xi2", true);
    if (j.contains("p_max") && j.contains("p_max_dbm")) throw ConfigError("give only one of p_max, p_max_dbm");
    if (j.contains("p_max")) c.p_max = j["p_max"].get<double>();
    if (j.contains("p_max_dbm")) c.p_max = dbm_to_linear(j["p_max_dbm"].get<double>());
    c.gamma_min = j.value("gamma_min", c.gamma_min);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("system config: ") + e.what());
  }
  c.validate();
  return c;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string scenario_hash(const SystemConfig& config) {
  nlohmann::ordered_json j = to_json(config);
  j.erase("chi2");
  j.erase("sigma2");
  j.erase("xi2");
  j.erase("p_max");
  j.erase("gamma_min");
  return hash_hex(fnv1a64(j.dump()));
}

}  // namespace isac
