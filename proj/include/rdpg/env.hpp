#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rdpg/array.hpp"

namespace rdpg {

// 2-D corridor world. The walkable surface is a single-valued piecewise-linear
// height field; hurdles are solid blocks stored separately so their vertical
// faces can block and reflect rays.

enum class Feature { flat, slope, stair, gap, hurdle };
const char* feature_name(Feature k);

struct Piece {  // linear height-field piece over [x0, x1)
  double x0, x1, h0, h1;
};

struct Hurdle {  // block sitting on the ground
  double x0, x1, base, top;
};

struct Edge {  // ray-cast surface segment (x0,y0)-(x1,y1)
  double x0, y0, x1, y1;
};

struct VEdge {  // vertical obstacle edge for the horizontal collision sweep
  double x, ylo, yhi;
};

struct FeatureInfo {  // for dumps/plots
  Feature kind;
  double x0, x1, a, b;  // a,b: kind-specific (peak / rise / depth / top ...)
};

struct Terrain {
  double length = 100.0;
  std::vector<Piece> pieces;  // sorted, covering [0, length]
  std::vector<Hurdle> hurdles;
  std::vector<FeatureInfo> features;
  std::vector<Edge> edges;    // built by rebuild_edges()
  std::vector<VEdge> vedges;  // built by rebuild_edges()

  double ground_height(double x) const;   // height field only
  double support_height(double x) const;  // max(field, hurdle tops spanning x)

  static Terrain flat(double length);
  void add_hurdle(double x0, double x1, double height);  // base = ground there
  // regenerate edges/vedges from pieces + hurdles (call after edits)
  void rebuild_edges();
};

// Deterministic procedural corridor. difficulty 0 -> single flat piece; at
// difficulty 1 every slot holds a feature and the four kinds round-robin, so a
// 100 m corridor provably contains each kind at least once.
Terrain generate_terrain(uint64_t seed, double difficulty, double length = 100.0);

struct EnvConfig {
  int rays = 10;
  double ray_max = 8.0;
  double sensor_height = 1.0;
  double a_max = 8.0;     // horizontal thrust scale (m/s^2)
  double j_max = 6.0;     // jump impulse scale (m/s)
  double v_max = 6.0;     // horizontal speed clamp (m/s)
  double gravity = 9.8;
  double dt = 0.02;
  double x_goal = 60.0;
  double kill_depth = -2.0;
  double step_over = 0.25;  // max ledge height the body walks over
  int max_steps = 2000;
  void validate() const;
  int obs_dim() const { return rays + 4; }
};

struct BodyState {
  double x = 1.0, y = 0.0, vx = 0.0, vy = 0.0;
  bool grounded = true;
};

enum class Cause { running, goal, collision, timeout };
const char* cause_name(Cause c);

struct StepResult {
  Array obs;
  double reward = 0.0;
  bool done = false;
  Cause cause = Cause::running;
};

// Fan of `rays` rays from (x, y+sensor_height), angles 0..-90 deg in equal
// steps, first hit against edges, clipped to ray_max.
Array raycast(const BodyState& b, const Terrain& t, const EnvConfig& cfg);

class CorridorEnv {
 public:
  CorridorEnv(Terrain t, EnvConfig cfg);

  Array reset();
  StepResult step(const Array& action);  // [thrust, jump] in [-1,1]^2
  Array observe() const;                 // [ranges..., y-support, vx, vy, grounded]

  const Terrain& terrain() const { return terrain_; }
  const EnvConfig& config() const { return cfg_; }
  int steps_taken() const { return steps_; }
  bool done() const { return done_; }
  Cause cause() const { return cause_; }

  BodyState body;  // exposed for oracle tests

 private:
  Terrain terrain_;
  EnvConfig cfg_;
  int steps_ = 0;
  bool done_ = false;
  Cause cause_ = Cause::running;
};

// dumps for plotting (line-delimited JSON for steps, one JSON object for terrain)
std::string terrain_json(const Terrain& t);
std::string step_json(int t, const BodyState& b, const Array& action, double reward,
                      const Array& ranges);

}  // namespace rdpg
