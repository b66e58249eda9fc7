#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rdpg/env.hpp"
#include "rdpg/explore.hpp"
#include "rdpg/tdlearn.hpp"

namespace rdpg {

// Everything a run needs, loadable from a key=value file. Ablation flags fold
// into the effective TD/network settings in finalized().
struct RunConfig {
  // run shape
  uint64_t seed = 1;
  int episodes = 100;
  int eval_episodes = 200;
  double difficulty = 0.0;
  std::string out_dir = "run_out";
  int checkpoint_every = 200;
  int updates_per_episode = 0;  // 0: one update per 4 rollout steps
  int threads = 1;              // slice/eval parallelism; 0 = all cores
  bool log_walltime = false;    // wall clock in metrics breaks bitwise reproducibility

  // learning
  TdConfig td;
  double actor_lr = 1e-4, critic_lr = 1e-3, grad_clip = 10.0;

  // networks
  int conv_channels = 16, conv_width = 3;
  int vis_units = 16, pro_units = 48, act_units = 16;
  int actor_lstm = 64, critic_lstm = 80;
  int action_dim = 2;

  // replay + injection
  int replay_episodes = 300, injected_episodes = 200;
  double anneal_half_life = 500.0;
  bool injection_on = false;
  std::vector<std::string> teacher_files;

  // exploration
  double ou_theta = 0.15, ou_sigma = 0.2, ou_mu = 0.0;
  double param_noise_sigma = 0.05;
  int param_noise_period = 5;  // episodes between noisy rollouts; 0 disables

  // environment
  EnvConfig env;
  double terrain_length = 100.0;

  // ablations
  bool scan_off = false;      // s = 0
  bool td0_baseline = false;  // l = u = 1, s = 0
  bool ddpg = false;          // dense layer instead of LSTM, s = 0
};

// set one key; unknown key or bad value -> ConfigError
void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value);
// key=value lines, '#' comments; missing file -> IoError
RunConfig load_config(const std::string& path);
// ablation implications applied, then everything validated
RunConfig finalized(RunConfig cfg);
// every key, parseable by apply_kv (round-trips)
std::string config_dump(const RunConfig& cfg);

NetConfig actor_config(const RunConfig& cfg);
NetConfig critic_config(const RunConfig& cfg);

struct EpisodeMetrics {
  int episode = 0;
  double ret = 0.0;
  int steps = 0;
  Cause cause = Cause::running;
  double r100ma = 0.0;  // mean return over the last min(100, n) episodes
  double loss = 0.0;    // critic loss of the episode's last update
  double grad_norm = 0.0;
  int updates = 0;
  double anneal = 1.0;
  bool param_noise = false;
  double wall_ms = 0.0;
};

std::string metrics_json(const EpisodeMetrics& m, bool with_walltime);

struct TrainResult {
  int episodes_run = 0;
  double final_r100ma = 0.0;
  double best_r100ma = 0.0;
  bool halted = false;
  std::string halt_reason;
};

// Outer loop: per episode — (periodic parameter noise) -> OU rollout from zero
// hidden state -> store -> denoise -> gradient updates -> metrics/checkpoints.
// Non-finite numerics checkpoint ckpt_halt.bin and stop the run.
TrainResult train(const RunConfig& cfg, std::ostream* console = nullptr);

struct RolloutResult {
  Episode episode;
  double ret = 0.0;
  int steps = 0;
  Cause cause = Cause::running;
};

// one noise-free rollout of a fixed policy
RolloutResult rollout_policy(const ActorModel& model, const ParamSet& actor,
                             const Terrain& terrain, const EnvConfig& env_cfg);

struct EvalResult {
  int episodes = 0, successes = 0;
  double success_ratio = 0.0;
  double mean_return = 0.0, min_return = 0.0, max_return = 0.0;
  std::vector<double> returns;
  std::vector<Cause> causes;
};

// noise-free rollouts on fresh terrains; episodes may run in parallel but
// results merge in seed order
EvalResult evaluate(const Checkpoint& ck, const RunConfig& cfg, int n_episodes,
                    uint64_t eval_seed);

// noise-free rollouts written as a teacher episode file; returns episode count
int record_teacher(const Checkpoint& ck, const RunConfig& cfg, int n_episodes,
                   uint64_t record_seed, const std::string& out_file);

}  // namespace rdpg
