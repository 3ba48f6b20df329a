#include "wireharness/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "wireharness/errors.hpp"

namespace wireharness::io {

using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& cell, const std::string& source, std::size_t line) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    throw ParseError(source, line, "expected a finite number, got '" + cell + "'");
  return v;
}

Pose2D pose_from(const json& j, const std::string& source, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ParseError(source, 0, std::string(what) + " must be a [x, y] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& source,
                                 const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw ParseError(source, 0, std::string(what) + " has the wrong number of rows");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw ParseError(source, 0, std::string(what) + " has the wrong number of columns");
    for (Eigen::Index k = 0; k < cols; ++k) {
      if (!row[static_cast<std::size_t>(k)].is_number())
        throw ParseError(source, 0, std::string(what) + " contains a non-number");
      m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
    }
  }
  return m;
}

}  // namespace

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

std::string trajectory_to_csv(const Trajectory& traj, const std::string& config_hash) {
  std::ostringstream out;
  if (!config_hash.empty()) out << "# config_hash: " << config_hash << '\n';
  out << kTrajectoryHeader << '\n';
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const WireState& s = traj.states[i];
    out << format_double(static_cast<double>(i) * kControlPeriod) << ',' << format_double(s.x) << ','
        << format_double(s.y) << ',' << format_double(s.theta) << ',' << format_double(s.f) << ','
        << format_double(traj.twists[i].phi);
    if (i < traj.controls.size()) {
      const ControlCommand& u = traj.controls[i];
      out << ',' << format_double(u.dx) << ',' << format_double(u.dy) << ',' << format_double(u.dtheta);
    } else {
      out << ",,,";
    }
    out << '\n';
  }
  return out.str();
}

Trajectory trajectory_from_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  bool ended = false;
  Trajectory traj;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line != kTrajectoryHeader) throw ParseError(source, lineno, "expected header '" + std::string(kTrajectoryHeader) + "'");
      header_seen = true;
      continue;
    }
    if (ended) throw ParseError(source, lineno, "row after the final (control-free) row");
    const auto cells = split(line, ',');
    if (cells.size() != 9) throw ParseError(source, lineno, "expected 9 columns, got " + std::to_string(cells.size()));
    WireState s{parse_double(cells[1], source, lineno), parse_double(cells[2], source, lineno),
                parse_double(cells[3], source, lineno), parse_double(cells[4], source, lineno)};
    if (s.f < 0.0) throw ParseError(source, lineno, "negative tension");
    traj.states.push_back(s);
    traj.twists.push_back({parse_double(cells[5], source, lineno)});
    const bool no_control = cells[6].empty() && cells[7].empty() && cells[8].empty();
    if (no_control) {
      ended = true;
      continue;
    }
    ControlCommand u{parse_double(cells[6], source, lineno), parse_double(cells[7], source, lineno),
                     parse_double(cells[8], source, lineno)};
    if (!u.within_bounds()) throw ParseError(source, lineno, "control outside the command bounds");
    traj.controls.push_back(u);
  }
  if (!header_seen) throw ParseError(source, lineno, "missing header row");
  if (!ended) throw ParseError(source, lineno, "missing final row with empty control columns");
  if (traj.states.size() < 2) throw ParseError(source, lineno, "trajectory needs at least 2 rows");
  return traj;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string model_to_json(const koopman::KoopmanModel& model, const std::string& config_hash) {
  json j;
  j["lift_spec"] = koopman::lift_spec(model.lift);
  j["K"] = matrix_to_json(model.K);
  j["L"] = matrix_to_json(model.L);
  j["provenance"] = {{"seed", model.provenance.seed},
                     {"source_trajectories", model.provenance.source_trajectories},
                     {"augmentation_factor", model.provenance.augmentation_factor},
                     {"effective_trajectories",
                      model.provenance.source_trajectories * model.provenance.augmentation_factor},
                     {"transitions", model.provenance.transitions}};
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  return j.dump(2) + "\n";
}

koopman::KoopmanModel model_from_json(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, 0, e.what());
  }
  if (!j.contains("lift_spec") || !j["lift_spec"].is_string()) throw ParseError(source, 0, "missing lift_spec");
  koopman::KoopmanModel m;
  try {
    m.lift = koopman::lift_kind_from_spec(j["lift_spec"].get<std::string>());
  } catch (const ConfigError& e) {
    throw ParseError(source, 0, e.what());
  }
  const int n = koopman::lift_dim(m.lift);
  m.K = matrix_from_json(j.value("K", json()), n, n, source, "K");
  m.L = matrix_from_json(j.value("L", json()), n, 3, source, "L");
  if (j.contains("provenance")) {
    const json& p = j["provenance"];
    m.provenance.seed = p.value("seed", std::uint64_t{0});
    m.provenance.source_trajectories = p.value("source_trajectories", std::size_t{0});
    m.provenance.augmentation_factor = p.value("augmentation_factor", std::size_t{1});
    m.provenance.transitions = p.value("transitions", std::size_t{0});
  }
  return m;
}

std::vector<planner::ClampSpec> BoardLayout::route_clamps(const std::string& route_name) const {
  for (const auto& r : routes) {
    if (r.name != route_name) continue;
    std::vector<planner::ClampSpec> out;
    for (const auto& id : r.sequence) out.push_back(clamp(id));
    return out;
  }
  throw ConfigError("board has no route named '" + route_name + "'");
}

const planner::ClampSpec& BoardLayout::clamp(const std::string& id) const {
  for (const auto& c : clamps)
    if (c.id == id) return c;
  throw ConfigError("board has no clamp with id '" + id + "'");
}

BoardLayout board_from_json(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, 0, e.what());
  }
  try {
    BoardLayout b;
    b.connector = pose_from(j.at("connector"), source, "connector");
    const json& grasp = j.at("grasp");
    b.grasp = pose_from(grasp.at("position"), source, "grasp.position");
    b.grasp_rest_length = grasp.at("rest_length").get<double>();
    if (!(b.grasp_rest_length > 0.0)) throw ParseError(source, 0, "grasp.rest_length must be positive");
    b.clamp_radius = j.value("clamp_radius", 6.0);
    for (const json& c : j.at("clamps")) {
      planner::ClampSpec spec;
      spec.id = c.at("id").get<std::string>();
      spec.kind = planner::clamp_kind_from_string(c.at("kind").get<std::string>());
      spec.center = pose_from(c.at("center"), source, "clamp center");
      spec.orientation = c.at("orientation").get<double>();
      if (c.contains("geometry")) {
        const json& g = c["geometry"];
        spec.geometry.side_offset = g.value("side_offset", spec.geometry.side_offset);
        spec.geometry.tip_offset = g.value("tip_offset", spec.geometry.tip_offset);
        spec.geometry.u_pre_offset = g.value("u_pre_offset", spec.geometry.u_pre_offset);
        spec.geometry.u_insert_offset = g.value("u_insert_offset", spec.geometry.u_insert_offset);
      }
      b.clamps.push_back(std::move(spec));
    }
    if (j.contains("routes")) {
      for (const json& r : j["routes"])
        b.routes.push_back({r.at("name").get<std::string>(), r.at("sequence").get<std::vector<std::string>>()});
    } else {
      b.routes.push_back({"main", j.at("sequence").get<std::vector<std::string>>()});
    }
    for (const auto& r : b.routes)
      for (const auto& id : r.sequence) (void)b.clamp(id);
    return b;
  } catch (const json::exception& e) {
    throw ParseError(source, 0, e.what());
  } catch (const ConfigError& e) {
    throw ParseError(source, 0, e.what());
  }
}

std::string board_to_json(const BoardLayout& b) {
  json j;
  j["connector"] = {b.connector.x, b.connector.y};
  j["grasp"] = {{"position", {b.grasp.x, b.grasp.y}}, {"rest_length", b.grasp_rest_length}};
  j["clamp_radius"] = b.clamp_radius;
  j["clamps"] = json::array();
  for (const auto& c : b.clamps)
    j["clamps"].push_back({{"id", c.id},
                           {"kind", planner::to_string(c.kind)},
                           {"center", {c.center.x, c.center.y}},
                           {"orientation", c.orientation},
                           {"geometry",
                            {{"side_offset", c.geometry.side_offset},
                             {"tip_offset", c.geometry.tip_offset},
                             {"u_pre_offset", c.geometry.u_pre_offset},
                             {"u_insert_offset", c.geometry.u_insert_offset}}}});
  j["routes"] = json::array();
  for (const auto& r : b.routes) j["routes"].push_back({{"name", r.name}, {"sequence", r.sequence}});
  return j.dump(2) + "\n";
}

}  // namespace wireharness::io
