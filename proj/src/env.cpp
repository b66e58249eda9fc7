#include "rdpg/env.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace rdpg {

const char* feature_name(Feature k) {
  switch (k) {
    case Feature::flat: return "flat";
    case Feature::slope: return "slope";
    case Feature::stair: return "stair";
    case Feature::gap: return "gap";
    case Feature::hurdle: return "hurdle";
  }
  return "?";
}

const char* cause_name(Cause c) {
  switch (c) {
    case Cause::running: return "running";
    case Cause::goal: return "goal";
    case Cause::collision: return "collision";
    case Cause::timeout: return "timeout";
  }
  return "?";
}

double Terrain::ground_height(double x) const {
  if (pieces.empty()) throw UsageError("Terrain: no pieces");
  x = std::min(std::max(x, pieces.front().x0), pieces.back().x1);
  // last piece whose x0 <= x
  size_t lo = 0, hi = pieces.size();
  while (hi - lo > 1) {
    size_t mid = (lo + hi) / 2;
    if (pieces[mid].x0 <= x) lo = mid; else hi = mid;
  }
  const Piece& p = pieces[lo];
  if (p.x1 <= p.x0) return p.h0;
  return p.h0 + (p.h1 - p.h0) * ((x - p.x0) / (p.x1 - p.x0));
}

double Terrain::support_height(double x) const {
  double h = ground_height(x);
  for (const Hurdle& b : hurdles)
    if (x >= b.x0 && x <= b.x1) h = std::max(h, b.top);
  return h;
}

Terrain Terrain::flat(double length) {
  if (length <= 0.0) throw ConfigError("Terrain::flat: length must be positive");
  Terrain t;
  t.length = length;
  t.pieces.push_back({0.0, length, 0.0, 0.0});
  t.features.push_back({Feature::flat, 0.0, length, 0.0, 0.0});
  t.rebuild_edges();
  return t;
}

void Terrain::add_hurdle(double x0, double x1, double height) {
  if (!(x1 > x0) || !(height > 0.0)) throw ConfigError("add_hurdle: bad geometry");
  double base = ground_height(0.5 * (x0 + x1));
  hurdles.push_back({x0, x1, base, base + height});
  features.push_back({Feature::hurdle, x0, x1, height, x1 - x0});
  rebuild_edges();
}

void Terrain::rebuild_edges() {
  edges.clear();
  vedges.clear();
  for (size_t i = 0; i < pieces.size(); ++i) {
    const Piece& p = pieces[i];
    if (p.x1 > p.x0) edges.push_back({p.x0, p.h0, p.x1, p.h1});
    if (i + 1 < pieces.size()) {
      double ha = p.h1, hb = pieces[i + 1].h0;
      if (ha != hb) {
        edges.push_back({p.x1, ha, p.x1, hb});
        vedges.push_back({p.x1, std::min(ha, hb), std::max(ha, hb)});
      }
    }
  }
  for (const Hurdle& b : hurdles) {
    edges.push_back({b.x0, b.base, b.x0, b.top});
    edges.push_back({b.x0, b.top, b.x1, b.top});
    edges.push_back({b.x1, b.top, b.x1, b.base});
    vedges.push_back({b.x0, b.base, b.top});
    vedges.push_back({b.x1, b.base, b.top});
  }
}

Terrain generate_terrain(uint64_t seed, double difficulty, double length) {
  if (!(difficulty >= 0.0 && difficulty <= 1.0))
    throw ConfigError("generate_terrain: difficulty must be in [0,1]");
  if (!(length >= 20.0)) throw ConfigError("generate_terrain: length too short");

  Terrain t;
  t.length = length;
  if (difficulty <= 0.0) {
    t.pieces.push_back({0.0, length, 0.0, 0.0});
    t.features.push_back({Feature::flat, 0.0, length, 0.0, 0.0});
    t.rebuild_edges();
    return t;
  }

  Rng rng = Rng::derive(seed, 0x7E44);
  Feature cycle[4] = {Feature::slope, Feature::stair, Feature::gap, Feature::hurdle};
  for (int i = 3; i > 0; --i) std::swap(cycle[i], cycle[size_t(rng.uniform_int(0, i))]);

  const double margin = 4.0;      // flat lead-in and lead-out
  const double footprint = 8.5;   // upper bound on any feature's width
  const double s = difficulty;
  double x = margin;
  double flat_from = 0.0;
  int idx = 0;

  while (true) {
    x += rng.uniform(2.0, 4.0);
    if (x >= length - margin - footprint) break;
    if (rng.u01() >= s) continue;
    Feature k = cycle[idx++ % 4];
    switch (k) {
      case Feature::slope: {
        double w = rng.uniform(4.0, 8.0);
        double peak = rng.uniform(0.2, 0.2 + 0.6 * s);
        t.pieces.push_back({flat_from, x, 0.0, 0.0});
        t.pieces.push_back({x, x + 0.5 * w, 0.0, peak});
        t.pieces.push_back({x + 0.5 * w, x + w, peak, 0.0});
        t.features.push_back({Feature::slope, x, x + w, peak, w});
        flat_from = x + w;
        x = flat_from;
        break;
      }
      case Feature::stair: {
        int n = 1 + int(rng.uniform_int(0, int64_t(3.0 * s + 0.5)));
        double rise = rng.uniform(0.12, 0.15 + 0.075 * s);
        double run = rng.uniform(0.35, 0.5);
        t.pieces.push_back({flat_from, x, 0.0, 0.0});
        double cx = x;
        for (int i = 1; i <= n; ++i) {  // up
          t.pieces.push_back({cx, cx + run, i * rise, i * rise});
          cx += run;
        }
        t.pieces.push_back({cx, cx + run, n * rise, n * rise});  // landing
        cx += run;
        for (int i = n - 1; i >= 0; --i) {  // down
          t.pieces.push_back({cx, cx + run, i * rise, i * rise});
          cx += run;
        }
        t.features.push_back({Feature::stair, x, cx, rise, double(n)});
        flat_from = cx;
        x = flat_from;
        break;
      }
      case Feature::gap: {
        double w = rng.uniform(0.8, 0.8 + 1.4 * s);
        const double floor = -3.0;  // below kill depth: falling in is fatal
        t.pieces.push_back({flat_from, x, 0.0, 0.0});
        t.pieces.push_back({x, x + w, floor, floor});
        t.features.push_back({Feature::gap, x, x + w, -floor, w});
        flat_from = x + w;
        x = flat_from;
        break;
      }
      case Feature::hurdle: {
        double h = rng.uniform(0.4, 0.4 + 0.5 * s);
        double w = rng.uniform(0.3, 0.8);
        t.hurdles.push_back({x, x + w, 0.0, h});  // flat base continues below
        t.features.push_back({Feature::hurdle, x, x + w, h, w});
        x += w;
        break;
      }
      case Feature::flat:
        break;
    }
  }
  t.pieces.push_back({flat_from, length, 0.0, 0.0});
  t.rebuild_edges();
  return t;
}

void EnvConfig::validate() const {
  if (rays < 2) throw ConfigError("env: rays must be >= 2");
  if (!(ray_max > 0.0)) throw ConfigError("env: ray_max must be positive");
  if (!(dt > 0.0)) throw ConfigError("env: dt must be positive");
  if (!(x_goal > 1.0)) throw ConfigError("env: x_goal must exceed the start position");
  if (!(step_over > 0.0)) throw ConfigError("env: step_over must be positive");
  if (max_steps < 1) throw ConfigError("env: max_steps must be >= 1");
  if (!(v_max > 0.0) || !(a_max >= 0.0) || !(j_max >= 0.0) || !(gravity >= 0.0))
    throw ConfigError("env: bad dynamics constants");
}

Array raycast(const BodyState& b, const Terrain& t, const EnvConfig& cfg) {
  Array out = Array::zeros({cfg.rays});
  const double ox = b.x, oy = b.y + cfg.sensor_height;
  for (int k = 0; k < cfg.rays; ++k) {
    double th = -(M_PI / 2.0) * double(k) / double(cfg.rays - 1);
    double dx = std::cos(th), dy = std::sin(th);
    double best = cfg.ray_max;
    for (const Edge& e : t.edges) {
      double ex = e.x1 - e.x0, ey = e.y1 - e.y0;
      double det = ex * dy - ey * dx;
      if (std::abs(det) < 1e-12) continue;  // parallel
      double wx = e.x0 - ox, wy = e.y0 - oy;
      double tt = (ex * wy - ey * wx) / det;
      double ss = (dx * wy - dy * wx) / det;
      if (tt > 1e-9 && ss >= 0.0 && ss <= 1.0) best = std::min(best, tt);
    }
    out[k] = best;
  }
  return out;
}

CorridorEnv::CorridorEnv(Terrain t, EnvConfig cfg) : terrain_(std::move(t)), cfg_(cfg) {
  cfg_.validate();
  if (terrain_.edges.empty()) terrain_.rebuild_edges();
  reset();
}

Array CorridorEnv::reset() {
  body = BodyState{};
  body.x = 1.0;
  body.y = terrain_.support_height(body.x);
  steps_ = 0;
  done_ = false;
  cause_ = Cause::running;
  return observe();
}

Array CorridorEnv::observe() const {
  Array ranges = raycast(body, terrain_, cfg_);
  Array obs = Array::zeros({cfg_.rays + 4});
  for (int k = 0; k < cfg_.rays; ++k) obs[k] = ranges[k];
  obs[cfg_.rays + 0] = body.y - terrain_.support_height(body.x);
  obs[cfg_.rays + 1] = body.vx;
  obs[cfg_.rays + 2] = body.vy;
  obs[cfg_.rays + 3] = body.grounded ? 1.0 : 0.0;
  return obs;
}

StepResult CorridorEnv::step(const Array& action) {
  if (done_) throw UsageError("CorridorEnv::step: episode already done");
  if (action.numel() < 2) throw UsageError("CorridorEnv::step: action must have 2 entries");
  double a1 = std::clamp(action[0], -1.0, 1.0);
  double a2 = std::clamp(action[1], -1.0, 1.0);

  const double x_old = body.x, y_old = body.y;

  // velocity phase (semi-implicit Euler)
  body.vx = std::clamp(body.vx + a1 * cfg_.a_max * cfg_.dt, -cfg_.v_max, cfg_.v_max);
  if (body.grounded && a2 > 0.0) {
    body.vy = a2 * cfg_.j_max;
    body.grounded = false;
  }
  if (!body.grounded) body.vy -= cfg_.gravity * cfg_.dt;

  // tentative motion
  const double x_new = body.x + body.vx * cfg_.dt;
  const double y_end = body.grounded ? y_old : y_old + body.vy * cfg_.dt;

  // sweep vertical obstacle edges along the horizontal motion; an edge whose
  // top is more than step_over above the body at the crossing blocks it
  bool collided = false;
  double hit_x = 0.0, hit_y = 0.0, hit_d = 0.0;
  const double dxm = x_new - x_old;
  if (dxm != 0.0) {
    for (const VEdge& e : terrain_.vedges) {
      bool crossed = dxm > 0.0 ? (x_old < e.x && e.x <= x_new)
                               : (x_new <= e.x && e.x < x_old);
      if (!crossed) continue;
      double f = (e.x - x_old) / dxm;
      double yc = y_old + (y_end - y_old) * f;
      if (yc < e.yhi - cfg_.step_over) {
        double d = std::abs(e.x - x_old);
        if (!collided || d < hit_d) {
          collided = true;
          hit_d = d;
          hit_x = e.x;
          hit_y = yc;
        }
      }
    }
  }

  if (collided) {
    body.x = hit_x;
    body.y = hit_y;
    done_ = true;
    cause_ = Cause::collision;
  } else {
    body.x = x_new;
    if (body.grounded) {
      double h = terrain_.support_height(body.x);
      double dy = h - body.y;
      if (dy > cfg_.step_over) {  // ground rose faster than the body can step
        done_ = true;
        cause_ = Cause::collision;
      } else if (dy >= -cfg_.step_over) {
        body.y = h;  // walk, following the surface
      } else {
        body.grounded = false;  // walked off a ledge
        body.vy = 0.0;
      }
    } else {
      body.y = y_end;
      double h = terrain_.support_height(body.x);
      if (body.y <= h) {  // touch down
        body.y = h;
        body.vy = 0.0;
        body.grounded = true;
      }
    }
    if (!done_ && body.y < cfg_.kill_depth) {
      done_ = true;
      cause_ = Cause::collision;
    }
  }

  double reward = (body.x - x_old) / cfg_.dt;
  if (cause_ == Cause::collision) reward += -20.0;

  if (!done_ && body.x >= cfg_.x_goal) {
    done_ = true;
    cause_ = Cause::goal;
  }
  ++steps_;
  if (!done_ && steps_ >= cfg_.max_steps) {
    done_ = true;
    cause_ = Cause::timeout;
  }

  StepResult res;
  res.obs = observe();
  res.reward = reward;
  res.done = done_;
  res.cause = cause_;
  return res;
}

std::string terrain_json(const Terrain& t) {
  nlohmann::json j;
  j["length"] = t.length;
  j["features"] = nlohmann::json::array();
  for (const FeatureInfo& f : t.features)
    j["features"].push_back({{"kind", feature_name(f.kind)},
                             {"x0", f.x0},
                             {"x1", f.x1},
                             {"a", f.a},
                             {"b", f.b}});
  j["pieces"] = nlohmann::json::array();
  for (const Piece& p : t.pieces) j["pieces"].push_back({p.x0, p.x1, p.h0, p.h1});
  j["hurdles"] = nlohmann::json::array();
  for (const Hurdle& h : t.hurdles) j["hurdles"].push_back({h.x0, h.x1, h.base, h.top});
  return j.dump();
}

std::string step_json(int t, const BodyState& b, const Array& action, double reward,
                      const Array& ranges) {
  nlohmann::json j;
  j["t"] = t;
  j["x"] = b.x;
  j["y"] = b.y;
  j["vx"] = b.vx;
  j["vy"] = b.vy;
  j["grounded"] = b.grounded;
  j["a"] = action.data;
  j["r"] = reward;
  j["ranges"] = ranges.data;
  return j.dump();
}

}  // namespace rdpg
