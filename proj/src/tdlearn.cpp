#include "rdpg/tdlearn.hpp"

#include <omp.h>

#include <cmath>

namespace rdpg {

void TdConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("TdConfig: gamma must be in (0,1]");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("TdConfig: lambda must be in (0,1]");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("TdConfig: tau must be in [0,1]");
  if (l < 1) throw ConfigError("TdConfig: l must be >= 1");
  if (u < 1 || u > l) throw ConfigError("TdConfig: u must satisfy 1 <= u <= l");
  if (s < 0) throw ConfigError("TdConfig: s must be >= 0");
  if (batch < 1) throw ConfigError("TdConfig: batch must be >= 1");
}

NetBundle make_bundle(const NetConfig& actor_cfg, const NetConfig& critic_cfg, uint64_t seed) {
  ActorModel am(actor_cfg);
  CriticModel cm(critic_cfg);
  ParamSet actor = am.init_params(splitmix64(seed ^ 0xA));
  ParamSet critic = cm.init_params(splitmix64(seed ^ 0xC));
  ParamSet at = clone_target(actor);
  ParamSet ct = clone_target(critic);
  return NetBundle{std::move(am), std::move(cm), std::move(actor), std::move(critic),
                   std::move(at), std::move(ct)};
}

static int resolve_threads(const ExecConfig& exec) {
  if (exec.threads == 1) return 1;
  if (exec.threads <= 0) return omp_get_max_threads();
  return exec.threads;
}

static void rethrow_first(const std::vector<std::string>& errs) {
  for (const std::string& e : errs)
    if (!e.empty()) throw NumericsError(e);
}

std::vector<SliceScan> scan_batch(const SliceBatch& batch, const NetBundle& nets,
                                  const ExecConfig& exec) {
  const int n = static_cast<int>(batch.slices.size());
  std::vector<SliceScan> out(n);
  std::vector<std::string> errs(n);
  const int nt = resolve_threads(exec);
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
  for (int k = 0; k < n; ++k) {
    try {
      const Slice& sl = batch.slices[k];
      out[k].beh_actor = nets.actor_model.scan(sl.scan_obs, nets.actor);
      out[k].beh_critic = nets.critic_model.scan(sl.scan_obs, sl.scan_act, nets.critic);
      out[k].tar_actor = nets.actor_model.scan(sl.scan_obs, nets.actor_target);
      out[k].tar_critic = nets.critic_model.scan(sl.scan_obs, sl.scan_act, nets.critic_target);
    } catch (const std::exception& e) {
      errs[k] = e.what();
    }
  }
  rethrow_first(errs);
  return out;
}

std::vector<double> interp_weights(double lambda, int u) {
  if (u < 1) throw ConfigError("interp_weights: u must be >= 1");
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw ConfigError("interp_weights: lambda must be in (0,1]");
  std::vector<double> w(u);
  double p = 1.0, sum = 0.0;
  for (int i = 0; i < u; ++i) {
    w[i] = p;
    sum += p;
    p *= lambda;
  }
  for (int i = 0; i < u; ++i) w[i] /= sum;
  return w;
}

double multi_step_td(const std::vector<double>& rewards, int i, int l,
                     double gamma, double q_tar, double q_beh) {
  if (l < 1 || static_cast<int>(rewards.size()) < l)
    throw ConfigError("multi_step_td: reward window too short");
  if (i < 0 || i >= l) throw ConfigError("multi_step_td: position out of range");
  double acc = 0.0, gp = 1.0;
  for (int t = i; t < l; ++t) {
    acc += gp * rewards[t];
    gp *= gamma;
  }
  acc += gp * q_tar;  // gp == gamma^(l-i)
  return acc - q_beh;
}

TailQ tail_target_q(const Slice& slice, const SliceScan& scan, const NetBundle& nets) {
  if (slice.done_at_tail) return TailQ{0.0, true};
  LstmState sa = scan.tar_actor;
  LstmState sc = scan.tar_critic;
  for (const Transition& t : slice.window) {
    nets.actor_model.advance(t.o, sa, nets.actor_target);
    nets.critic_model.advance(t.o, t.a, sc, nets.critic_target);
  }
  Array a_tail = nets.actor_model.step(slice.tail_obs, sa, nets.actor_target);
  double q = nets.critic_model.step(slice.tail_obs, a_tail, sc, nets.critic_target);
  return TailQ{q, false};
}

CriticResult critic_update(const SliceBatch& batch, const std::vector<SliceScan>& scans,
                           const NetBundle& nets, const TdConfig& cfg, const ExecConfig& exec) {
  cfg.validate();
  const int n = static_cast<int>(batch.slices.size());
  if (n == 0) throw UsageError("critic_update: empty batch");
  if (scans.size() != batch.slices.size())
    throw UsageError("critic_update: scans do not match the batch");
  if (batch.l != cfg.l) throw ConfigError("critic_update: batch window length != cfg.l");

  const std::vector<double> w = interp_weights(cfg.lambda, cfg.u);
  const double nn = static_cast<double>(n);

  std::vector<ParamSet> slice_grads(n);
  std::vector<double> slice_loss(n, 0.0);
  TdReport report;
  report.td.assign(n, {});
  report.tail_q.assign(n, 0.0);
  std::vector<std::string> errs(n);

  const int nt = resolve_threads(exec);
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
  for (int k = 0; k < n; ++k) {
    try {
      const Slice& sl = batch.slices[k];
      const TailQ tq = tail_target_q(sl, scans[k], nets);
      report.tail_q[k] = tq.q;

      // behavioral critic over the window, on tape: recurrent links recorded,
      // the scanned-in state enters as a constant
      Tape tape;
      Bind cb = bind_params(tape, nets.critic, true);
      Value h = tape.constant(scans[k].beh_critic.h);
      Value c = tape.constant(scans[k].beh_critic.c);
      std::vector<Value> qv(cfg.l);
      std::vector<double> rewards(cfg.l);
      for (int i = 0; i < cfg.l; ++i) {
        const Transition& t = sl.window[i];
        Value act = tape.constant(t.a);
        qv[i] = nets.critic_model.step_taped(tape, cb, t.o, act, h, c, &h, &c);
        rewards[i] = t.r;
      }

      std::vector<double>& td = report.td[k];
      td.resize(cfg.l);
      for (int i = 0; i < cfg.l; ++i)
        td[i] = multi_step_td(rewards, i, cfg.l, cfg.gamma, tq.q, tape.val(qv[i]).data[0]);

      double loss = 0.0;
      for (int i = 0; i < cfg.u; ++i) {
        if (!std::isfinite(td[i]))
          throw NumericsError("critic_update: non-finite TD at slice " + std::to_string(k) +
                              " position " + std::to_string(i));
        loss += w[i] * td[i] * td[i];
        // d(mean loss)/dq_i: the TD enters as (target - q_i)
        tape.seed(qv[i], -2.0 * w[i] * td[i] / nn);
      }
      slice_loss[k] = loss;
      tape.backward();
      slice_grads[k] = tape.param_grads_like(nets.critic);
    } catch (const std::exception& e) {
      errs[k] = e.what();
    }
  }
  rethrow_first(errs);

  // fixed index-order reduction keeps the result independent of thread count
  CriticResult out;
  out.grads = zeros_like(nets.critic);
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    accumulate(out.grads, slice_grads[k]);
    total += slice_loss[k];
  }
  report.loss = total / nn;
  if (!std::isfinite(report.loss)) throw NumericsError("critic_update: non-finite loss");
  if (!out.grads.finite()) throw NumericsError("critic_update: non-finite gradient");
  report.grad_norm = out.grads.l2_norm();
  out.report = std::move(report);
  return out;
}

ParamSet actor_update(const SliceBatch& batch, const std::vector<SliceScan>& scans,
                      const NetBundle& nets, const TdConfig& cfg, const ExecConfig& exec) {
  cfg.validate();
  const int n = static_cast<int>(batch.slices.size());
  if (n == 0) throw UsageError("actor_update: empty batch");
  if (scans.size() != batch.slices.size())
    throw UsageError("actor_update: scans do not match the batch");

  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(cfg.l));
  std::vector<ParamSet> slice_grads(n);
  std::vector<std::string> errs(n);

  const int nt = resolve_threads(exec);
#pragma omp parallel for schedule(static) num_threads(nt) if (nt > 1)
  for (int k = 0; k < n; ++k) {
    try {
      const Slice& sl = batch.slices[k];
      LstmState sa = scans[k].beh_actor;
      LstmState sc = scans[k].beh_critic;
      Tape tape;
      Bind ab = bind_params(tape, nets.actor, true);
      Bind cb = bind_params(tape, nets.critic, false);  // constants: no critic update here
      for (int i = 0; i < cfg.l; ++i) {
        const Transition& t = sl.window[i];
        // states are constants at every position: recurrence not differentiated
        Value ha = tape.constant(sa.h), ca = tape.constant(sa.c);
        Value hc = tape.constant(sc.h), cc = tape.constant(sc.c);
        Value act = nets.actor_model.step_taped(tape, ab, t.o, ha, ca, nullptr, nullptr);
        Value q = nets.critic_model.step_taped(tape, cb, t.o, act, hc, cc, nullptr, nullptr);
        tape.seed(q, scale);
        // advance on stored data: actor sees the observation stream, the
        // critic state follows the actions actually taken
        nets.actor_model.advance(t.o, sa, nets.actor);
        nets.critic_model.advance(t.o, t.a, sc, nets.critic);
      }
      tape.backward();
      slice_grads[k] = tape.param_grads_like(nets.actor);
      if (!slice_grads[k].finite())
        throw NumericsError("actor_update: non-finite gradient at slice " + std::to_string(k));
    } catch (const std::exception& e) {
      errs[k] = e.what();
    }
  }
  rethrow_first(errs);

  ParamSet grads = zeros_like(nets.actor);
  for (int k = 0; k < n; ++k) accumulate(grads, slice_grads[k]);
  if (!grads.finite()) throw NumericsError("actor_update: non-finite gradient");
  return grads;
}

double actor_objective(const SliceBatch& batch, const std::vector<SliceScan>& scans,
                       const NetBundle& nets, const TdConfig& cfg) {
  const int n = static_cast<int>(batch.slices.size());
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    const Slice& sl = batch.slices[k];
    LstmState sa = scans[k].beh_actor;
    LstmState sc = scans[k].beh_critic;
    for (int i = 0; i < cfg.l; ++i) {
      const Transition& t = sl.window[i];
      LstmState sa_i = sa;
      LstmState sc_i = sc;
      Array a = nets.actor_model.step(t.o, sa_i, nets.actor);
      total += nets.critic_model.step(t.o, a, sc_i, nets.critic);
      nets.actor_model.advance(t.o, sa, nets.actor);
      nets.critic_model.advance(t.o, t.a, sc, nets.critic);
    }
  }
  return total / (static_cast<double>(n) * static_cast<double>(cfg.l));
}

Trainer::Trainer(NetBundle nets, TdConfig td, ExecConfig exec,
                 double actor_lr, double critic_lr, double grad_clip)
    : nets_(std::move(nets)),
      td_(td),
      exec_(exec),
      actor_opt_(nets_.actor, actor_lr),
      critic_opt_(nets_.critic, critic_lr),
      clip_(grad_clip) {
  td_.validate();
}

Trainer::Trainer(NetBundle nets, TdConfig td, ExecConfig exec,
                 AdamOpt actor_opt, AdamOpt critic_opt, double grad_clip)
    : nets_(std::move(nets)),
      td_(td),
      exec_(exec),
      actor_opt_(std::move(actor_opt)),
      critic_opt_(std::move(critic_opt)),
      clip_(grad_clip) {
  td_.validate();
}

Trainer::Status Trainer::update(const EpisodeStore& store, Rng& rng) {
  auto mb = store.sample_batch(td_.batch, td_.s, td_.l, rng);
  if (!mb) return Status::not_ready;
  const SliceBatch& batch = *mb;
  auto scans = scan_batch(batch, nets_, exec_);

  ParamSet actor_bak = nets_.actor;
  ParamSet critic_bak = nets_.critic;
  AdamOpt aopt_bak = actor_opt_;
  AdamOpt copt_bak = critic_opt_;
  try {
    CriticResult cr = critic_update(batch, scans, nets_, td_, exec_);
    clip_global_norm(cr.grads, clip_);
    critic_opt_.step(nets_.critic, cr.grads);
    // actor ascends Q against the freshly updated critic
    ParamSet ag = actor_update(batch, scans, nets_, td_, exec_);
    clip_global_norm(ag, clip_);
    ag.scale(-1.0);
    actor_opt_.step(nets_.actor, ag);
    if (!nets_.actor.finite() || !nets_.critic.finite())
      throw NumericsError("update: parameters left the finite range");
    last_ = std::move(cr.report);
  } catch (...) {
    nets_.actor = std::move(actor_bak);
    nets_.critic = std::move(critic_bak);
    actor_opt_ = std::move(aopt_bak);
    critic_opt_ = std::move(copt_bak);
    throw;
  }
  soft_update(nets_.actor_target, nets_.actor, td_.tau);
  soft_update(nets_.critic_target, nets_.critic, td_.tau);
  return Status::done;
}

}  // namespace rdpg
