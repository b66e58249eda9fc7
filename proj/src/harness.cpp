#include "rdpg/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace rdpg {

namespace {

int64_t p_int(const std::string& v) {
  size_t pos = 0;
  long long r = 0;
  try {
    r = std::stoll(v, &pos);
  } catch (...) {
    throw ConfigError("not an integer: '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("not an integer: '" + v + "'");
  return r;
}

uint64_t p_u64(const std::string& v) {
  size_t pos = 0;
  unsigned long long r = 0;
  try {
    r = std::stoull(v, &pos);
  } catch (...) {
    throw ConfigError("not an unsigned integer: '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("not an unsigned integer: '" + v + "'");
  return r;
}

double p_f64(const std::string& v) {
  size_t pos = 0;
  double r = 0.0;
  try {
    r = std::stod(v, &pos);
  } catch (...) {
    throw ConfigError("not a number: '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError("not a number: '" + v + "'");
  return r;
}

bool p_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  throw ConfigError("not a boolean: '" + v + "'");
}

std::vector<std::string> p_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(v);
  while (std::getline(ss, cur, ','))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string f64_str(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += xs[i];
  }
  return out;
}

uint64_t terrain_seed(uint64_t seed, uint64_t idx) {
  return splitmix64(splitmix64(seed ^ 0x7E22A11FULL) + idx);
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void apply_kv(RunConfig& c, const std::string& key, const std::string& v) {
  if (key == "seed") c.seed = p_u64(v);
  else if (key == "episodes") c.episodes = int(p_int(v));
  else if (key == "eval_episodes") c.eval_episodes = int(p_int(v));
  else if (key == "difficulty") c.difficulty = p_f64(v);
  else if (key == "out_dir") c.out_dir = v;
  else if (key == "checkpoint_every") c.checkpoint_every = int(p_int(v));
  else if (key == "updates_per_episode") c.updates_per_episode = int(p_int(v));
  else if (key == "threads") c.threads = int(p_int(v));
  else if (key == "log_walltime") c.log_walltime = p_bool(v);
  else if (key == "gamma") c.td.gamma = p_f64(v);
  else if (key == "lambda") c.td.lambda = p_f64(v);
  else if (key == "tau") c.td.tau = p_f64(v);
  else if (key == "opt_len") c.td.l = int(p_int(v));
  else if (key == "upd_len") c.td.u = int(p_int(v));
  else if (key == "scan_len") c.td.s = int(p_int(v));
  else if (key == "batch") c.td.batch = int(p_int(v));
  else if (key == "actor_lr") c.actor_lr = p_f64(v);
  else if (key == "critic_lr") c.critic_lr = p_f64(v);
  else if (key == "grad_clip") c.grad_clip = p_f64(v);
  else if (key == "conv_channels") c.conv_channels = int(p_int(v));
  else if (key == "conv_width") c.conv_width = int(p_int(v));
  else if (key == "vis_units") c.vis_units = int(p_int(v));
  else if (key == "pro_units") c.pro_units = int(p_int(v));
  else if (key == "act_units") c.act_units = int(p_int(v));
  else if (key == "actor_lstm") c.actor_lstm = int(p_int(v));
  else if (key == "critic_lstm") c.critic_lstm = int(p_int(v));
  else if (key == "action_dim") c.action_dim = int(p_int(v));
  else if (key == "replay_episodes") c.replay_episodes = int(p_int(v));
  else if (key == "injected_episodes") c.injected_episodes = int(p_int(v));
  else if (key == "anneal_half_life") c.anneal_half_life = p_f64(v);
  else if (key == "injection_on") c.injection_on = p_bool(v);
  else if (key == "teacher_files") c.teacher_files = p_list(v);
  else if (key == "ou_theta") c.ou_theta = p_f64(v);
  else if (key == "ou_sigma") c.ou_sigma = p_f64(v);
  else if (key == "ou_mu") c.ou_mu = p_f64(v);
  else if (key == "param_noise_sigma") c.param_noise_sigma = p_f64(v);
  else if (key == "param_noise_period") c.param_noise_period = int(p_int(v));
  else if (key == "rays") c.env.rays = int(p_int(v));
  else if (key == "ray_max") c.env.ray_max = p_f64(v);
  else if (key == "sensor_height") c.env.sensor_height = p_f64(v);
  else if (key == "a_max") c.env.a_max = p_f64(v);
  else if (key == "j_max") c.env.j_max = p_f64(v);
  else if (key == "v_max") c.env.v_max = p_f64(v);
  else if (key == "gravity") c.env.gravity = p_f64(v);
  else if (key == "dt") c.env.dt = p_f64(v);
  else if (key == "x_goal") c.env.x_goal = p_f64(v);
  else if (key == "kill_depth") c.env.kill_depth = p_f64(v);
  else if (key == "step_over") c.env.step_over = p_f64(v);
  else if (key == "max_steps") c.env.max_steps = int(p_int(v));
  else if (key == "terrain_length") c.terrain_length = p_f64(v);
  else if (key == "scan_off") c.scan_off = p_bool(v);
  else if (key == "td0_baseline") c.td0_baseline = p_bool(v);
  else if (key == "ddpg") c.ddpg = p_bool(v);
  else throw ConfigError("unknown config key: '" + key + "'");
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file: " + path);
  RunConfig cfg;
  std::string line;
  int ln = 0;
  while (std::getline(f, line)) {
    ++ln;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(ln) + ": expected key=value");
    apply_kv(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return cfg;
}

RunConfig finalized(RunConfig c) {
  if (c.td0_baseline) {
    c.td.l = 1;
    c.td.u = 1;
    c.td.s = 0;
  }
  if (c.scan_off) c.td.s = 0;
  if (c.ddpg) c.td.s = 0;  // no recurrent state to initialize
  c.td.validate();
  c.env.validate();
  if (c.episodes < 0) throw ConfigError("episodes must be >= 0");
  if (c.eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  if (!(c.difficulty >= 0.0 && c.difficulty <= 1.0))
    throw ConfigError("difficulty must be in [0,1]");
  if (!(c.actor_lr > 0.0) || !(c.critic_lr > 0.0))
    throw ConfigError("learning rates must be positive");
  if (!(c.grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
  if (c.action_dim < 2) throw ConfigError("action_dim must be >= 2 (thrust, jump)");
  if (c.updates_per_episode < 0) throw ConfigError("updates_per_episode must be >= 0");
  if (c.threads < 0) throw ConfigError("threads must be >= 0");
  if (c.checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (c.param_noise_period < 0) throw ConfigError("param_noise_period must be >= 0");
  if (c.param_noise_sigma < 0.0) throw ConfigError("param_noise_sigma must be >= 0");
  if (c.ou_theta < 0.0 || c.ou_sigma < 0.0) throw ConfigError("OU parameters must be >= 0");
  if (c.replay_episodes < 1) throw ConfigError("replay_episodes must be >= 1");
  if (c.injected_episodes < 0) throw ConfigError("injected_episodes must be >= 0");
  if (!(c.anneal_half_life > 0.0)) throw ConfigError("anneal_half_life must be positive");
  if (c.injection_on && c.teacher_files.empty())
    throw ConfigError("injection_on requires teacher_files");
  if (!(c.terrain_length >= c.env.x_goal + 10.0))
    throw ConfigError("terrain_length must extend at least 10 m past x_goal");
  actor_config(c).validate(false);
  critic_config(c).validate(true);
  return c;
}

std::string config_dump(const RunConfig& c) {
  std::ostringstream o;
  o << "seed=" << c.seed << "\n";
  o << "episodes=" << c.episodes << "\n";
  o << "eval_episodes=" << c.eval_episodes << "\n";
  o << "difficulty=" << f64_str(c.difficulty) << "\n";
  o << "out_dir=" << c.out_dir << "\n";
  o << "checkpoint_every=" << c.checkpoint_every << "\n";
  o << "updates_per_episode=" << c.updates_per_episode << "\n";
  o << "threads=" << c.threads << "\n";
  o << "log_walltime=" << (c.log_walltime ? 1 : 0) << "\n";
  o << "gamma=" << f64_str(c.td.gamma) << "\n";
  o << "lambda=" << f64_str(c.td.lambda) << "\n";
  o << "tau=" << f64_str(c.td.tau) << "\n";
  o << "opt_len=" << c.td.l << "\n";
  o << "upd_len=" << c.td.u << "\n";
  o << "scan_len=" << c.td.s << "\n";
  o << "batch=" << c.td.batch << "\n";
  o << "actor_lr=" << f64_str(c.actor_lr) << "\n";
  o << "critic_lr=" << f64_str(c.critic_lr) << "\n";
  o << "grad_clip=" << f64_str(c.grad_clip) << "\n";
  o << "conv_channels=" << c.conv_channels << "\n";
  o << "conv_width=" << c.conv_width << "\n";
  o << "vis_units=" << c.vis_units << "\n";
  o << "pro_units=" << c.pro_units << "\n";
  o << "act_units=" << c.act_units << "\n";
  o << "actor_lstm=" << c.actor_lstm << "\n";
  o << "critic_lstm=" << c.critic_lstm << "\n";
  o << "action_dim=" << c.action_dim << "\n";
  o << "replay_episodes=" << c.replay_episodes << "\n";
  o << "injected_episodes=" << c.injected_episodes << "\n";
  o << "anneal_half_life=" << f64_str(c.anneal_half_life) << "\n";
  o << "injection_on=" << (c.injection_on ? 1 : 0) << "\n";
  o << "teacher_files=" << join(c.teacher_files) << "\n";
  o << "ou_theta=" << f64_str(c.ou_theta) << "\n";
  o << "ou_sigma=" << f64_str(c.ou_sigma) << "\n";
  o << "ou_mu=" << f64_str(c.ou_mu) << "\n";
  o << "param_noise_sigma=" << f64_str(c.param_noise_sigma) << "\n";
  o << "param_noise_period=" << c.param_noise_period << "\n";
  o << "rays=" << c.env.rays << "\n";
  o << "ray_max=" << f64_str(c.env.ray_max) << "\n";
  o << "sensor_height=" << f64_str(c.env.sensor_height) << "\n";
  o << "a_max=" << f64_str(c.env.a_max) << "\n";
  o << "j_max=" << f64_str(c.env.j_max) << "\n";
  o << "v_max=" << f64_str(c.env.v_max) << "\n";
  o << "gravity=" << f64_str(c.env.gravity) << "\n";
  o << "dt=" << f64_str(c.env.dt) << "\n";
  o << "x_goal=" << f64_str(c.env.x_goal) << "\n";
  o << "kill_depth=" << f64_str(c.env.kill_depth) << "\n";
  o << "step_over=" << f64_str(c.env.step_over) << "\n";
  o << "max_steps=" << c.env.max_steps << "\n";
  o << "terrain_length=" << f64_str(c.terrain_length) << "\n";
  o << "scan_off=" << (c.scan_off ? 1 : 0) << "\n";
  o << "td0_baseline=" << (c.td0_baseline ? 1 : 0) << "\n";
  o << "ddpg=" << (c.ddpg ? 1 : 0) << "\n";
  return o.str();
}

NetConfig actor_config(const RunConfig& c) {
  NetConfig n;
  n.k_visual = c.env.rays;
  n.p_proprio = 4;
  n.action_dim = c.action_dim;
  n.conv_channels = c.conv_channels;
  n.conv_width = c.conv_width;
  n.vis_units = c.vis_units;
  n.pro_units = c.pro_units;
  n.act_units = c.act_units;
  n.lstm_units = c.actor_lstm;
  n.recurrent = !c.ddpg;
  return n;
}

NetConfig critic_config(const RunConfig& c) {
  NetConfig n = actor_config(c);
  n.lstm_units = c.critic_lstm;
  return n;
}

std::string metrics_json(const EpisodeMetrics& m, bool with_walltime) {
  nlohmann::json j;
  j["episode"] = m.episode;
  j["return"] = m.ret;
  j["steps"] = m.steps;
  j["cause"] = cause_name(m.cause);
  j["r100ma"] = m.r100ma;
  j["loss"] = m.loss;
  j["grad_norm"] = m.grad_norm;
  j["updates"] = m.updates;
  j["anneal"] = m.anneal;
  j["param_noise"] = m.param_noise;
  if (with_walltime) j["wall_ms"] = m.wall_ms;
  return j.dump();
}

namespace {

double last_window_mean(const std::vector<double>& xs, size_t window) {
  size_t n = std::min(xs.size(), window);
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (size_t i = xs.size() - n; i < xs.size(); ++i) sum += xs[i];  // oldest first
  return sum / double(n);
}

Checkpoint snapshot(const Trainer& trainer, uint64_t episode) {
  Checkpoint ck;
  ck.episode = episode;
  ck.actor = trainer.nets().actor;
  ck.critic = trainer.nets().critic;
  ck.actor_target = trainer.nets().actor_target;
  ck.critic_target = trainer.nets().critic_target;
  ck.actor_opt = trainer.actor_opt();
  ck.critic_opt = trainer.critic_opt();
  return ck;
}

}  // namespace

TrainResult train(const RunConfig& cfg_in, std::ostream* console) {
  const RunConfig cfg = finalized(cfg_in);
  std::filesystem::create_directories(cfg.out_dir);
  {
    std::ofstream f(cfg.out_dir + "/config.txt");
    f << config_dump(cfg);
    if (!f) throw IoError("cannot write " + cfg.out_dir + "/config.txt");
  }

  NetBundle nets = make_bundle(actor_config(cfg), critic_config(cfg), cfg.seed);
  ExecConfig exec{cfg.threads};
  Trainer trainer(std::move(nets), cfg.td, exec, cfg.actor_lr, cfg.critic_lr, cfg.grad_clip);

  EpisodeStore store(cfg.env.obs_dim(), cfg.action_dim, cfg.replay_episodes,
                     cfg.injected_episodes, cfg.anneal_half_life);
  if (cfg.injection_on) {
    for (const std::string& path : cfg.teacher_files) {
      LoadedEpisodes le = load_episodes(path);
      if (le.obs_dim != store.obs_dim() || le.act_dim != store.act_dim())
        throw ConfigError("teacher file dims do not match the run config: " + path);
      store.inject(le.episodes);
      if (console)
        *console << "injected " << le.episodes.size() << " teacher episodes from "
                 << path << "\n";
    }
  }

  save_checkpoint(cfg.out_dir + "/ckpt_init.bin", snapshot(trainer, 0));

  std::ofstream mf(cfg.out_dir + "/metrics.jsonl");
  if (!mf) throw IoError("cannot write " + cfg.out_dir + "/metrics.jsonl");
  mf << "{\"schema\":\"rdpg-metrics\",\"version\":1}\n";

  Rng ou_rng = Rng::derive(cfg.seed, 3);
  Rng pn_rng = Rng::derive(cfg.seed, 4);
  Rng upd_rng = Rng::derive(cfg.seed, 5);
  OuProcess ou(cfg.action_dim, cfg.ou_theta, cfg.ou_sigma, cfg.ou_mu, cfg.env.dt);
  ParamNoiseStash stash;

  std::vector<double> returns;
  TrainResult result;
  double best = -std::numeric_limits<double>::infinity();

  for (int ep = 1; ep <= cfg.episodes; ++ep) {
    auto t0 = std::chrono::steady_clock::now();
    store.set_anneal(ep - 1);

    bool noisy = cfg.param_noise_sigma > 0.0 && cfg.param_noise_period > 0 &&
                 (ep - 1) % cfg.param_noise_period == 0;
    if (noisy) apply_param_noise(trainer.nets().actor, cfg.param_noise_sigma, pn_rng, stash);

    CorridorEnv env(generate_terrain(terrain_seed(cfg.seed, uint64_t(ep)), cfg.difficulty,
                                     cfg.terrain_length),
                    cfg.env);
    ou.reset();
    LstmState st = trainer.nets().actor_model.zero_state();
    Array obs = env.reset();
    double ret = 0.0;
    int steps = 0;
    Cause cause = Cause::running;
    while (true) {
      Array a = trainer.nets().actor_model.step(obs, st, trainer.nets().actor);
      const Array& noise = ou.step(ou_rng);
      for (int k = 0; k < a.numel(); ++k)
        a[k] = std::clamp(a[k] + noise[k], -1.0, 1.0);
      StepResult res = env.step(a);
      Transition tr;
      tr.o = obs;
      tr.a = a;
      tr.o_next = res.obs;
      tr.r = res.reward;
      // timeout truncates the episode without being a true terminal
      tr.done = res.done && res.cause != Cause::timeout;
      store.push(tr);
      ret += res.reward;
      ++steps;
      obs = res.obs;
      if (res.done) {
        cause = res.cause;
        break;
      }
    }
    store.end_episode();

    if (noisy) remove_param_noise(trainer.nets().actor, stash);  // before any update

    int want = cfg.updates_per_episode > 0 ? cfg.updates_per_episode : std::max(1, steps / 4);
    int updates = 0;
    try {
      for (int i = 0; i < want; ++i)
        if (trainer.update(store, upd_rng) == Trainer::Status::done) ++updates;
    } catch (const NumericsError& e) {
      result.halted = true;
      result.halt_reason = e.what();
      save_checkpoint(cfg.out_dir + "/ckpt_halt.bin", snapshot(trainer, uint64_t(ep)));
      std::ofstream hf(cfg.out_dir + "/halt.txt");
      hf << "episode " << ep << ": " << e.what() << "\n";
      if (console) *console << "halt at episode " << ep << ": " << e.what() << "\n";
    }

    returns.push_back(ret);
    double r100 = last_window_mean(returns, 100);

    EpisodeMetrics m;
    m.episode = ep;
    m.ret = ret;
    m.steps = steps;
    m.cause = cause;
    m.r100ma = r100;
    m.loss = updates > 0 ? trainer.last_report().loss : 0.0;
    m.grad_norm = updates > 0 ? trainer.last_report().grad_norm : 0.0;
    m.updates = updates;
    m.anneal = store.anneal();
    m.param_noise = noisy;
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
    mf << metrics_json(m, cfg.log_walltime) << "\n";
    if (console)
      *console << "episode " << ep << " return " << ret << " steps " << steps << " cause "
               << cause_name(cause) << " r100ma " << r100 << "\n";

    result.episodes_run = ep;
    result.final_r100ma = r100;
    if (r100 > best) {
      best = r100;
      result.best_r100ma = best;
      save_checkpoint(cfg.out_dir + "/ckpt_best.bin", snapshot(trainer, uint64_t(ep)));
    }
    if (cfg.checkpoint_every > 0 && ep % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "ckpt_ep%06d.bin", ep);
      save_checkpoint(cfg.out_dir + "/" + name, snapshot(trainer, uint64_t(ep)));
    }
    if (result.halted) break;
  }

  save_checkpoint(cfg.out_dir + "/ckpt_final.bin",
                  snapshot(trainer, uint64_t(result.episodes_run)));
  mf.flush();
  if (!mf) throw IoError("failed writing metrics stream");
  return result;
}

RolloutResult rollout_policy(const ActorModel& model, const ParamSet& actor,
                             const Terrain& terrain, const EnvConfig& env_cfg) {
  CorridorEnv env(terrain, env_cfg);
  LstmState st = model.zero_state();
  Array obs = env.reset();
  RolloutResult out;
  while (true) {
    Array a = model.step(obs, st, actor);
    StepResult res = env.step(a);
    Transition tr;
    tr.o = obs;
    tr.a = a;
    tr.o_next = res.obs;
    tr.r = res.reward;
    tr.done = res.done && res.cause != Cause::timeout;
    out.episode.steps.push_back(std::move(tr));
    out.ret += res.reward;
    ++out.steps;
    obs = res.obs;
    if (res.done) {
      out.cause = res.cause;
      break;
    }
  }
  return out;
}

EvalResult evaluate(const Checkpoint& ck, const RunConfig& cfg_in, int n_episodes,
                    uint64_t eval_seed) {
  const RunConfig cfg = finalized(cfg_in);
  if (n_episodes < 1) throw UsageError("evaluate: need at least one episode");
  NetConfig acfg = config_from_meta(ck.actor);
  if (acfg.k_visual != cfg.env.rays || acfg.action_dim != cfg.action_dim)
    throw ConfigError("checkpoint dims do not match the run config");
  ActorModel model(acfg);

  std::vector<RolloutResult> rr(static_cast<size_t>(n_episodes));
  std::vector<std::string> errs(static_cast<size_t>(n_episodes));
  int nt = cfg.threads == 0 ? omp_get_max_threads() : cfg.threads;
#pragma omp parallel for schedule(static) num_threads(nt)
  for (int i = 0; i < n_episodes; ++i) {
    try {
      Terrain t = generate_terrain(terrain_seed(eval_seed, 0x6E7A0000ULL + uint64_t(i)),
                                   cfg.difficulty, cfg.terrain_length);
      rr[size_t(i)] = rollout_policy(model, ck.actor, t, cfg.env);
    } catch (const std::exception& e) {
      errs[size_t(i)] = e.what();
    }
  }
  for (const std::string& e : errs)
    if (!e.empty()) throw NumericsError("evaluate: " + e);

  EvalResult out;
  out.episodes = n_episodes;
  out.min_return = std::numeric_limits<double>::infinity();
  out.max_return = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const RolloutResult& r : rr) {  // merged in seed order
    out.returns.push_back(r.ret);
    out.causes.push_back(r.cause);
    if (r.cause == Cause::goal) ++out.successes;
    sum += r.ret;
    out.min_return = std::min(out.min_return, r.ret);
    out.max_return = std::max(out.max_return, r.ret);
  }
  out.success_ratio = double(out.successes) / double(n_episodes);
  out.mean_return = sum / double(n_episodes);
  return out;
}

int record_teacher(const Checkpoint& ck, const RunConfig& cfg_in, int n_episodes,
                   uint64_t record_seed, const std::string& out_file) {
  const RunConfig cfg = finalized(cfg_in);
  if (n_episodes < 0) throw UsageError("record_teacher: negative episode count");
  NetConfig acfg = config_from_meta(ck.actor);
  if (acfg.k_visual != cfg.env.rays || acfg.action_dim != cfg.action_dim)
    throw ConfigError("checkpoint dims do not match the run config");
  ActorModel model(acfg);

  std::vector<Episode> eps;
  for (int i = 0; i < n_episodes; ++i) {
    Terrain t = generate_terrain(terrain_seed(record_seed, 0x7EAC0000ULL + uint64_t(i)),
                                 cfg.difficulty, cfg.terrain_length);
    eps.push_back(rollout_policy(model, ck.actor, t, cfg.env).episode);
  }
  save_episodes(out_file, eps, cfg.env.obs_dim(), cfg.action_dim);
  return int(eps.size());
}

}  // namespace rdpg
