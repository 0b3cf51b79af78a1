// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "zext/geometry/billiard.hpp"

#include <nlohmann/json.hpp>

#include <iomanip>
#include <ostream>
#include <vector>

namespace zext::geometry {

/// {"obstacles":[{"cx":..,"cy":..,"r":..},...]}
inline BilliardTable table_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("obstacles") || !j.at("obstacles").is_array()) {
    throw ConfigError("table: expected an object with an \"obstacles\" array");
  }
  BilliardTable t;
  for (const auto& o : j.at("obstacles")) {
    t.obstacles.push_back({o.at("cx").get<double>(), o.at("cy").get<double>(), o.at("r").get<double>()});
  }
  if (j.contains("search_cap")) t.search_cap = j.at("search_cap").get<double>();
  return t;
}

inline nlohmann::json table_to_json(const BilliardTable& t) {
  nlohmann::json obs = nlohmann::json::array();
  for (const auto& o : t.obstacles) obs.push_back({{"cx", o.cx}, {"cy", o.cy}, {"r", o.r}});
  return {{"obstacles", obs}};
}

struct TrajectoryRow {
  double t;
  PhasePoint<double> p;
};

/// Flow states at the (increasing) grid times, starting from p at grid.front().
inline std::vector<TrajectoryRow> sample_trajectory(const PhasePoint<double>& p, const std::vector<double>& grid,
                                                    const BilliardTable& table) {
  std::vector<TrajectoryRow> rows;
  rows.reserve(grid.size());
  PhasePoint<double> cur = p;
  double clock = grid.empty() ? 0.0 : grid.front();
  for (double t : grid) {
    cur = evolve(cur, t - clock, table);
    clock = t;
    rows.push_back({t, cur});
  }
  return rows;
}

/// CSV with columns t,qx,qy,vx,vy,cell.
inline void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryRow>& rows) {
  os << "t,qx,qy,vx,vy,cell\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.t << ',' << r.p.qx() << ',' << r.p.qy << ',' << r.p.vx << ',' << r.p.vy << ',' << cell_index(r.p)
       << '\n';
  }
}

}  // namespace zext::geometry
