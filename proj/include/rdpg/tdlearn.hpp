#pragma once

#include "rdpg/networks.hpp"
#include "rdpg/replay.hpp"

namespace rdpg {

struct TdConfig {
  double gamma = 0.99;
  double lambda = 0.9;
  double tau = 0.001;
  int l = 8;   // optimization (window / BPTT) length
  int u = 8;   // update length: positions 0..u-1 carry loss weight
  int s = 24;  // max scan prefix
  int batch = 32;
  void validate() const;
};

// slice-level parallelism; 1 = serial reference, 0 = all hardware threads.
// Per-slice results are always reduced in slice index order, so the outcome
// is bitwise identical for every thread count.
struct ExecConfig {
  int threads = 1;
};

struct NetBundle {
  ActorModel actor_model;
  CriticModel critic_model;
  ParamSet actor, critic, actor_target, critic_target;
};

NetBundle make_bundle(const NetConfig& actor_cfg, const NetConfig& critic_cfg, uint64_t seed);

// Recurrent states right before each slice window, one set per slice.
struct SliceScan {
  LstmState beh_actor, beh_critic, tar_actor, tar_critic;
};

std::vector<SliceScan> scan_batch(const SliceBatch& batch, const NetBundle& nets,
                                  const ExecConfig& exec);

// Loss weights over window positions i = 0..u-1: lambda^i normalized by the
// actual sum, so they always add to exactly one (lambda = 1 -> uniform 1/u).
// Position 0 measures the longest backup.
std::vector<double> interp_weights(double lambda, int u);

// i-th window position measured with backup length l-i:
//   sum_{t'=i}^{l-1} gamma^{t'-i} r_{t'}  +  gamma^{l-i} q_tar  -  q_beh
double multi_step_td(const std::vector<double>& rewards, int i, int l,
                     double gamma, double q_tar, double q_beh);

struct TailQ {
  double q = 0.0;
  bool masked = false;  // done at the tail: no bootstrap
};

// Target-network Q at the slice tail: both targets advance over the window
// (their own scan prefix first), then the target actor proposes the tail
// action and the target critic scores it.
TailQ tail_target_q(const Slice& slice, const SliceScan& scan, const NetBundle& nets);

struct TdReport {
  std::vector<std::vector<double>> td;  // [slice][position 0..l-1]
  std::vector<double> tail_q;           // masked tails reported as 0
  double loss = 0.0;
  double grad_norm = 0.0;               // critic gradient norm before clipping
};

struct CriticResult {
  ParamSet grads;
  TdReport report;
};

// Weighted squared multi-step TD loss on the tail bootstrap, averaged over
// slices. Gradient flows through behavioral Q at positions 0..u-1 and back
// through the critic recurrence across the whole l-length window; the scan
// prefix and the tail target contribute none.
CriticResult critic_update(const SliceBatch& batch, const std::vector<SliceScan>& scans,
                           const NetBundle& nets, const TdConfig& cfg, const ExecConfig& exec);

// Ascent direction on mean Q over all window positions, actions re-proposed
// by the current actor. Recurrent states enter every position as constants:
// the recurrence is advanced on stored data but never differentiated through.
ParamSet actor_update(const SliceBatch& batch, const std::vector<SliceScan>& scans,
                      const NetBundle& nets, const TdConfig& cfg, const ExecConfig& exec);

// The objective actor_update ascends (for tests and diagnostics).
double actor_objective(const SliceBatch& batch, const std::vector<SliceScan>& scans,
                       const NetBundle& nets, const TdConfig& cfg);

// Sample -> scan -> critic ADAM -> actor ADAM -> soft target updates.
// A failed update leaves parameters, moments and targets bitwise unchanged.
class Trainer {
 public:
  Trainer(NetBundle nets, TdConfig td, ExecConfig exec,
          double actor_lr, double critic_lr, double grad_clip);
  Trainer(NetBundle nets, TdConfig td, ExecConfig exec,
          AdamOpt actor_opt, AdamOpt critic_opt, double grad_clip);

  enum class Status { done, not_ready };
  Status update(const EpisodeStore& store, Rng& rng);

  NetBundle& nets() { return nets_; }
  const NetBundle& nets() const { return nets_; }
  AdamOpt& actor_opt() { return actor_opt_; }
  AdamOpt& critic_opt() { return critic_opt_; }
  const AdamOpt& actor_opt() const { return actor_opt_; }
  const AdamOpt& critic_opt() const { return critic_opt_; }
  const TdReport& last_report() const { return last_; }
  const TdConfig& td() const { return td_; }

 private:
  NetBundle nets_;
  TdConfig td_;
  ExecConfig exec_;
  AdamOpt actor_opt_, critic_opt_;
  double clip_;
  TdReport last_;
};

}  // namespace rdpg
