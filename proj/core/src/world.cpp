#include "ltlrl/world.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ltlrl/error.hpp"

namespace ltlrl {

double wrap_angle(double a) noexcept {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

const std::array<Action, kNumActions>& action_table() {
  static const std::array<Action, kNumActions> table = [] {
    std::array<Action, kNumActions> t{};
    t[0] = {0.0, 0.0};
    const double speeds[] = {kMaxLinearVelocity / 2.0, kMaxLinearVelocity};
    std::size_t i = 1;
    for (double u : speeds) {
      for (int k = 0; k <= 10; ++k) {
        const double omega = -kMaxAngularVelocity + k * (2.0 * kMaxAngularVelocity / 10.0);
        t[i++] = {u, k == 5 ? 0.0 : omega};
      }
    }
    return t;
  }();
  return table;
}

AgentState step_dynamics(const Environment& env, const AgentState& x, std::size_t action, Rng& rng) {
  if (action >= kNumActions) throw Error("action index out of range");
  return step_dynamics(env, x, action_table()[action], rng);
}

AgentState step_dynamics(const Environment& env, const AgentState& x, const Action& a, Rng& rng) {
  double u = a.u;
  double omega = a.omega;
  if (env.noise.enabled) {
    std::normal_distribution<double> noise(env.noise.mean, env.noise.stddev());
    u += noise(rng);
    omega += noise(rng);
  }
  AgentState next;
  next.x = std::clamp(x.x + u * env.dt * std::cos(x.theta), 0.0, env.width);
  next.y = std::clamp(x.y + u * env.dt * std::sin(x.theta), 0.0, env.height);
  next.theta = wrap_angle(x.theta + omega * env.dt);
  return next;
}

bool in_obstacle(const Environment& env, Vec2 p) noexcept {
  for (const auto& o : env.obstacles)
    if ((p - o.center).norm() < o.radius) return true;
  return false;
}

bool in_any_region(const Environment& env, Vec2 p) noexcept {
  for (const auto& r : env.regions)
    if (r.contains(p)) return true;
  return false;
}

Labeler::Labeler(const Environment& env, const AtomTable& atoms) : env_(&env) {
  for (std::size_t i = 0; i < env.regions.size(); ++i)
    if (auto k = atoms.index_of(env.regions[i].name)) region_bits_.emplace_back(i, Symbol{1} << *k);
  if (auto k = atoms.index_of(kObstacleAtom)) obstacle_bit_ = Symbol{1} << *k;
}

Symbol Labeler::operator()(const AgentState& x) const {
  const Vec2 p = x.position();
  Symbol s = 0;
  for (const auto& [i, bit] : region_bits_)
    if (env_->regions[i].contains(p)) s |= bit;
  if (obstacle_bit_ && in_obstacle(*env_, p)) s |= obstacle_bit_;
  return s;
}

Symbol label(const Environment& env, const AgentState& x, const AtomTable& atoms) { return Labeler(env, atoms)(x); }

FeatureVector features(const Environment& env, const AgentState& x) {
  if (env.obstacles.size() < 2) throw Error("features need at least two obstacles");
  const Vec2 p = x.position();
  std::size_t first = 0, second = 1;
  auto surface = [&](std::size_t i) {
    return std::max(0.0, (env.obstacles[i].center - p).norm() - env.obstacles[i].radius);
  };
  double d_first = surface(0), d_second = surface(1);
  if (d_second < d_first) {
    std::swap(first, second);
    std::swap(d_first, d_second);
  }
  for (std::size_t i = 2; i < env.obstacles.size(); ++i) {
    const double d = surface(i);
    if (d < d_first) {
      second = first;
      d_second = d_first;
      first = i;
      d_first = d;
    } else if (d < d_second) {
      second = i;
      d_second = d;
    }
  }
  auto bearing = [&](std::size_t i) {
    const Vec2 v = env.obstacles[i].center - p;
    return wrap_angle(std::atan2(v.y, v.x) - x.theta);
  };
  return {d_first, bearing(first), d_second, bearing(second), x.x, x.y, x.theta};
}

AgentState sample_initial_state(const Environment& env, Rng& rng) {
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const Vec2 p{uniform01(rng) * env.width, uniform01(rng) * env.height};
    const double theta = wrap_angle(kPi - uniform01(rng) * 2.0 * kPi);
    if (in_obstacle(env, p) || in_any_region(env, p)) continue;
    return {p.x, p.y, theta};
  }
  throw SamplingBudgetExceeded("no free initial state found after 10000 draws");
}

bool square_intersects_disk(Vec2 lo, Vec2 hi, const Obstacle& o) noexcept {
  const double cx = std::clamp(o.center.x, lo.x, hi.x);
  const double cy = std::clamp(o.center.y, lo.y, hi.y);
  return std::hypot(o.center.x - cx, o.center.y - cy) < o.radius;
}

namespace {

double square_disk_gap(const Region& r, const Obstacle& o) {
  const double dx = std::max(0.0, std::abs(o.center.x - r.center.x) - r.half_width);
  const double dy = std::max(0.0, std::abs(o.center.y - r.center.y) - r.half_width);
  return std::hypot(dx, dy) - o.radius;
}

// Free cells of an m x m grid are 4-connected, and no region's cell is blocked.
bool free_cells_connected(const Environment& env, int m) {
  const double cw = env.width / m, ch = env.height / m;
  std::vector<char> blocked(static_cast<std::size_t>(m * m), 0);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c)
      for (const auto& o : env.obstacles)
        if (square_intersects_disk({c * cw, r * ch}, {(c + 1) * cw, (r + 1) * ch}, o)) blocked[r * m + c] = 1;
  for (const auto& reg : env.regions) {
    const int c = std::clamp(static_cast<int>(reg.center.x / cw), 0, m - 1);
    const int r = std::clamp(static_cast<int>(reg.center.y / ch), 0, m - 1);
    if (blocked[r * m + c]) return false;
  }
  const auto free_count = std::count(blocked.begin(), blocked.end(), 0);
  if (free_count == 0) return false;
  const int start = static_cast<int>(std::find(blocked.begin(), blocked.end(), 0) - blocked.begin());
  std::vector<char> seen(blocked.size(), 0);
  std::deque<int> queue{start};
  seen[start] = 1;
  long reached = 0;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    ++reached;
    const int r = v / m, c = v % m;
    const int nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
    for (const auto& n : nbr) {
      if (n[0] < 0 || n[0] >= m || n[1] < 0 || n[1] >= m) continue;
      const int w = n[0] * m + n[1];
      if (!blocked[w] && !seen[w]) {
        seen[w] = 1;
        queue.push_back(w);
      }
    }
  }
  return reached == free_count;
}

}  // namespace

Environment generate_environment(EnvGroup group, std::uint64_t seed, const std::vector<Region>& regions,
                                 const GenerationParams& params) {
  Rng rng(derive_seed(seed, {0x656e76}));
  const int lo = group == EnvGroup::A ? 3 : 10;
  const int count = lo + static_cast<int>(uniform_index(rng, 3));
  Environment env;
  env.group = group == EnvGroup::A ? "A" : "B";
  env.id = env.group + "-" + std::to_string(seed);
  env.width = params.width;
  env.height = params.height;
  env.regions = regions;
  env.dt = params.dt;
  env.noise = params.noise;

  for (int layout = 0; layout < params.placement_budget; ++layout) {
    env.obstacles.clear();
    int attempts = 0;
    while (static_cast<int>(env.obstacles.size()) < count && attempts < params.placement_budget) {
      ++attempts;
      Obstacle o;
      o.radius = params.radius_min + uniform01(rng) * (params.radius_max - params.radius_min);
      o.center = {o.radius + uniform01(rng) * (env.width - 2 * o.radius),
                  o.radius + uniform01(rng) * (env.height - 2 * o.radius)};
      bool ok = true;
      for (const auto& r : env.regions)
        if (square_disk_gap(r, o) < params.clearance) ok = false;
      for (const auto& other : env.obstacles)
        if ((o.center - other.center).norm() - o.radius - other.radius < params.clearance) ok = false;
      if (ok) env.obstacles.push_back(o);
    }
    if (static_cast<int>(env.obstacles.size()) < count) continue;
    if (free_cells_connected(env, params.grid_cells)) {
      validate_environment(env, params.grid_cells);
      return env;
    }
  }
  throw SamplingBudgetExceeded("obstacle placement budget exceeded");
}

void validate_environment(const Environment& env, int grid_cells) {
  if (env.width <= 0 || env.height <= 0) throw Error("workspace bounds must be positive");
  if (env.dt <= 0) throw Error("time step must be positive");
  const double cw = env.width / grid_cells, ch = env.height / grid_cells;
  for (std::size_t i = 0; i < env.regions.size(); ++i) {
    const Region& r = env.regions[i];
    const double x0 = r.center.x - r.half_width, x1 = r.center.x + r.half_width;
    const double y0 = r.center.y - r.half_width, y1 = r.center.y + r.half_width;
    if (x0 < 0 || y0 < 0 || x1 > env.width || y1 > env.height)
      throw Error("region " + r.name + " leaves the workspace");
    if (std::floor(x0 / cw) != std::floor(x1 / cw) || std::floor(y0 / ch) != std::floor(y1 / ch))
      throw Error("region " + r.name + " is not inside a single grid cell");
    for (std::size_t j = 0; j < i; ++j) {
      const Region& s = env.regions[j];
      if (std::abs(r.center.x - s.center.x) <= r.half_width + s.half_width &&
          std::abs(r.center.y - s.center.y) <= r.half_width + s.half_width)
        throw Error("regions " + s.name + " and " + r.name + " overlap");
    }
    for (const auto& o : env.obstacles)
      if (square_disk_gap(r, o) <= 0) throw Error("region " + r.name + " intersects an obstacle");
  }
  for (const auto& o : env.obstacles)
    if (o.radius <= 0) throw Error("obstacle radius must be positive");
}

// ---------------------------------------------------------------------------
// JSON

using nlohmann::json;

std::string environment_to_json(const Environment& env) {
  json j;
  if (!env.id.empty()) j["id"] = env.id;
  if (!env.group.empty()) j["group"] = env.group;
  j["bounds"] = {env.width, env.height};
  j["obstacles"] = json::array();
  for (const auto& o : env.obstacles) j["obstacles"].push_back({{"c", {o.center.x, o.center.y}}, {"r", o.radius}});
  j["regions"] = json::object();
  for (const auto& r : env.regions) j["regions"][r.name] = {{"c", {r.center.x, r.center.y}}, {"hw", r.half_width}};
  j["dt"] = env.dt;
  j["noise"] = {{"mean", env.noise.mean}, {"var", env.noise.variance}};
  if (!env.noise.enabled) j["noise"]["enabled"] = false;
  return j.dump(2);
}

Environment environment_from_json(std::string_view text) {
  Environment env;
  try {
    const json j = json::parse(text);
    env.id = j.value("id", "");
    env.group = j.value("group", "");
    env.width = j.at("bounds").at(0).get<double>();
    env.height = j.at("bounds").at(1).get<double>();
    for (const auto& o : j.value("obstacles", json::array()))
      env.obstacles.push_back({{o.at("c").at(0).get<double>(), o.at("c").at(1).get<double>()}, o.at("r").get<double>()});
    const json regions = j.value("regions", json::object());
    for (const auto& [name, r] : regions.items())
      env.regions.push_back({name, {r.at("c").at(0).get<double>(), r.at("c").at(1).get<double>()}, r.at("hw").get<double>()});
    env.dt = j.value("dt", 0.5);
    if (j.contains("noise")) {
      const auto& n = j["noise"];
      env.noise.mean = n.value("mean", 2e-3);
      if (n.contains("std")) {
        const double sd = n["std"].get<double>();
        env.noise.variance = sd * sd;
      } else {
        env.noise.variance = n.value("var", 1e-3);
      }
      env.noise.enabled = n.value("enabled", true);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("invalid environment JSON: ") + e.what());
  }
  return env;
}

void save_environment(const Environment& env, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot write " + file.string());
  out << environment_to_json(env) << "\n";
}

Environment load_environment(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Environment env = environment_from_json(ss.str());
  if (env.id.empty()) env.id = file.stem().string();
  return env;
}

std::vector<Environment> load_environments(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<Environment> envs;
  for (const auto& f : files) envs.push_back(load_environment(f));
  if (envs.empty()) throw Error("no environment files in " + dir.string());
  return envs;
}

}  // namespace ltlrl
