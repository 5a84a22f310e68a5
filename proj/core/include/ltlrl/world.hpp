#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ltlrl/atoms.hpp"
#include "ltlrl/random.hpp"

namespace ltlrl {

inline constexpr double kPi = 3.14159265358979323846;

// Wraps an angle into (-π, π].
double wrap_angle(double a) noexcept;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend bool operator==(Vec2, Vec2) = default;
  double norm() const { return std::hypot(x, y); }
};

struct Obstacle {
  Vec2 center;
  double radius = 0.0;
};

// Axis-aligned square labelled by an atomic proposition.
struct Region {
  std::string name;
  Vec2 center;
  double half_width = 0.0;

  bool contains(Vec2 p) const noexcept {
    return std::abs(p.x - center.x) <= half_width && std::abs(p.y - center.y) <= half_width;
  }
};

// Gaussian actuation noise added to both velocity commands.
struct NoiseModel {
  double mean = 2e-3;
  double variance = 1e-3;
  bool enabled = true;

  double stddev() const { return std::sqrt(variance); }
};

struct Environment {
  std::string id;
  std::string group;  // "A", "B" or free-form
  double width = 10.0;
  double height = 10.0;
  std::vector<Obstacle> obstacles;
  std::vector<Region> regions;
  double dt = 0.5;
  NoiseModel noise;
};

// Pose [p1, p2, θ].
struct AgentState {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Vec2 position() const { return {x, y}; }
  bool operator==(const AgentState&) const = default;
};

// [ℓ¹, ρ¹, ℓ², ρ², p1, p2, θ]: surface distance and relative bearing to the two nearest
// obstacles, then the pose.
using FeatureVector = std::array<double, 7>;

struct Action {
  double u = 0.0;      // m/s
  double omega = 0.0;  // rad/s
};

inline constexpr std::size_t kNumActions = 23;
inline constexpr double kMaxLinearVelocity = 0.26;
inline constexpr double kMaxAngularVelocity = 1.82;
inline constexpr std::string_view kObstacleAtom = "obs";

// Index 0 is the stop action; 1..11 drive at 0.13 m/s and 12..22 at 0.26 m/s, each over
// eleven evenly spaced turn rates in [-1.82, 1.82].
const std::array<Action, kNumActions>& action_table();

// One Euler step of the noisy unicycle. Position advances along the pre-update heading and
// is clamped to the workspace.
AgentState step_dynamics(const Environment& env, const AgentState& x, std::size_t action, Rng& rng);
AgentState step_dynamics(const Environment& env, const AgentState& x, const Action& action, Rng& rng);

// Precomputes the atom bits of an environment's regions for repeated labelling.
class Labeler {
 public:
  Labeler(const Environment& env, const AtomTable& atoms);
  Symbol operator()(const AgentState& x) const;

 private:
  const Environment* env_;
  std::vector<std::pair<std::size_t, Symbol>> region_bits_;
  Symbol obstacle_bit_ = 0;
};

// L(x): region atoms whose square contains the position, plus "obs" inside any obstacle.
Symbol label(const Environment& env, const AgentState& x, const AtomTable& atoms);

// ψ(x). Requires at least two obstacles. Ties in distance keep obstacle index order.
FeatureVector features(const Environment& env, const AgentState& x);

bool in_obstacle(const Environment& env, Vec2 p) noexcept;
bool in_any_region(const Environment& env, Vec2 p) noexcept;

// Uniform over the obstacle-free, region-free workspace; heading uniform in (-π, π].
AgentState sample_initial_state(const Environment& env, Rng& rng);

enum class EnvGroup { A, B };

struct GenerationParams {
  double width = 10.0;
  double height = 10.0;
  double radius_min = 0.3;
  double radius_max = 0.6;
  double clearance = 0.25;  // minimum gap between obstacles, regions and walls
  int grid_cells = 12;      // discretization the regions and free space must respect
  double dt = 0.5;
  NoiseModel noise;
  int placement_budget = 10000;
};

// Obstacle count uniform in [3,5] (group A) or [10,12] (group B); obstacles placed by
// rejection so they stay clear of each other and of the given regions, and so the free grid
// cells stay connected.
Environment generate_environment(EnvGroup group, std::uint64_t seed, const std::vector<Region>& regions,
                                 const GenerationParams& params = {});

// Throws Error describing the first violated environment invariant.
void validate_environment(const Environment& env, int grid_cells = 12);

bool square_intersects_disk(Vec2 lo, Vec2 hi, const Obstacle& o) noexcept;

std::string environment_to_json(const Environment& env);
Environment environment_from_json(std::string_view text);

void save_environment(const Environment& env, const std::filesystem::path& file);
Environment load_environment(const std::filesystem::path& file);
// Every *.json file of a directory, sorted by file name.
std::vector<Environment> load_environments(const std::filesystem::path& dir);

}  // namespace ltlrl
