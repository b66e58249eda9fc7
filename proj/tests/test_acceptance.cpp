// End-to-end acceptance checks. Each test case prints exactly one
// "criterion N PASS|FAIL <what>" line so a run can be skimmed from the log.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "rdpg/gradcheck.hpp"
#include "rdpg/harness.hpp"

using namespace rdpg;
namespace fs = std::filesystem;

namespace {

void report(int n, bool ok, const std::string& what) {
  std::printf("criterion %d %s %s\n", n, ok ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
}

double now_s() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

NetConfig tiny_cfg() {
  NetConfig c;
  c.k_visual = 3;
  c.p_proprio = 2;
  c.action_dim = 2;
  c.conv_channels = 3;
  c.conv_width = 3;
  c.vis_units = 4;
  c.pro_units = 4;
  c.act_units = 4;
  c.lstm_units = 4;
  return c;
}

Array rnd_vec(int n, Rng& rng) {
  Array v = Array::zeros({n});
  for (double& x : v.data) x = rng.uniform(-1.0, 1.0);
  return v;
}

void fill_store(EpisodeStore& st, int obs_dim, int act_dim, Rng& rng, int n_eps = 4,
                int len = 12) {
  for (int e = 0; e < n_eps; ++e) {
    for (int i = 0; i < len; ++i) {
      Transition t;
      t.o = rnd_vec(obs_dim, rng);
      t.a = rnd_vec(act_dim, rng);
      t.o_next = rnd_vec(obs_dim, rng);
      t.r = rng.normal();
      t.done = (e % 2 == 0) && i == len - 1;
      st.push(t);
    }
    st.end_episode();
  }
}

// weighted squared-TD loss recomputed along the plain (untaped) forward path,
// with caller-chosen position weights; accumulation order matches the library
double plain_loss(const SliceBatch& batch, const std::vector<SliceScan>& scans,
                  const NetBundle& nets, const TdConfig& cfg, const std::vector<double>& w) {
  double total = 0.0;
  for (size_t k = 0; k < batch.slices.size(); ++k) {
    const Slice& sl = batch.slices[k];
    TailQ tq = tail_target_q(sl, scans[k], nets);
    LstmState sc = scans[k].beh_critic;
    std::vector<double> rewards(size_t(cfg.l));
    std::vector<double> qs(size_t(cfg.l));
    for (int i = 0; i < cfg.l; ++i) {
      qs[size_t(i)] =
          nets.critic_model.step(sl.window[size_t(i)].o, sl.window[size_t(i)].a, sc, nets.critic);
      rewards[size_t(i)] = sl.window[size_t(i)].r;
    }
    double loss = 0.0;
    for (int i = 0; i < cfg.u; ++i) {
      double td = multi_step_td(rewards, i, cfg.l, cfg.gamma, tq.q, qs[size_t(i)]);
      loss += w[size_t(i)] * td * td;
    }
    total += loss;
  }
  return total / double(batch.slices.size());
}

// exact running sum (TwoSum error compensation)
struct DD {
  double hi = 0.0, lo = 0.0;
  void add(double v) {
    double s = hi + v;
    double bb = s - hi;
    double err = (hi - (s - bb)) + (v - bb);
    hi = s;
    lo += err;
    double t = hi + lo;
    lo = lo - (t - hi);
    hi = t;
  }
};

ParamSet zeroed(const ParamSet& src) {
  ParamSet p = clone_target(src);
  for (auto& [name, a] : p.items()) a.fill(0.0);
  return p;
}

std::string run_dir(const std::string& tag) {
  fs::path d = fs::temp_directory_path() / ("rdpg_accept_" + tag);
  fs::remove_all(d);
  return d.string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("criterion 1: analytic gradients match finite differences") {
  double t0 = now_s();
  std::vector<GradCheck> checks = run_gradient_checks(7, 1e-4);
  double secs = now_s() - t0;

  bool cover_dense = false, cover_conv = false, cover_lstm = false;
  bool cover_closs = false, cover_aobj = false;
  for (const GradCheck& c : checks) {
    cover_dense |= c.name.find("dense/") != std::string::npos;
    cover_conv |= c.name.find("conv") != std::string::npos;
    cover_lstm |= c.name.find("lstm/") != std::string::npos;
    cover_closs |= c.name.find("critic_loss/") != std::string::npos;
    cover_aobj |= c.name.find("actor_objective/") != std::string::npos;
  }
  bool all = all_pass(checks);
  bool ok = all && checks.size() >= 40 && secs < 60.0 && cover_dense && cover_conv &&
            cover_lstm && cover_closs && cover_aobj;
  report(1, ok, "gradient checks (" + std::to_string(checks.size()) + " checks, " +
                    std::to_string(secs) + " s)");
  CHECK(all);
  CHECK(checks.size() >= 40);
  CHECK(secs < 60.0);
  CHECK(cover_dense);
  CHECK(cover_conv);
  CHECK(cover_lstm);
  CHECK(cover_closs);
  CHECK(cover_aobj);
}

TEST_CASE("criterion 2: interpolation weight and TD algebra") {
  Rng rng(21);
  bool sums_ok = true;
  for (int t = 0; t < 100; ++t) {
    double lambda = rng.uniform(1e-3, 1.0);
    int u = 1 + rng.uniform_int(0, 11);
    std::vector<double> w = interp_weights(lambda, u);
    double s = std::accumulate(w.begin(), w.end(), 0.0);
    sums_ok = sums_ok && std::fabs(s - 1.0) <= 1e-12;
  }
  CHECK(sums_ok);

  // fixed batch shared by the weighting comparisons
  NetConfig nc = tiny_cfg();
  EpisodeStore store(nc.k_visual + nc.p_proprio, nc.action_dim, 16, 16, 100.0);
  NetBundle nets = make_bundle(nc, nc, 22);
  Rng fill(23);
  fill_store(store, nc.k_visual + nc.p_proprio, nc.action_dim, fill);

  TdConfig cfg;
  cfg.gamma = 0.95;
  cfg.l = 3;
  cfg.s = 4;
  cfg.batch = 6;

  Rng samp(24);
  auto mb = store.sample_batch(6, cfg.s, cfg.l, samp);
  REQUIRE(mb.has_value());
  std::vector<SliceScan> scans = scan_batch(*mb, nets, ExecConfig{1});

  cfg.lambda = 1.0;
  cfg.u = 3;
  double loss_flat = critic_update(*mb, scans, nets, cfg, ExecConfig{1}).report.loss;
  std::vector<double> uniform(size_t(cfg.u), 1.0 / double(cfg.u));
  double loss_flat_ref = plain_loss(*mb, scans, nets, cfg, uniform);
  bool lambda1_ok = loss_flat == loss_flat_ref;  // bitwise
  CHECK(lambda1_ok);

  cfg.lambda = 0.9;
  cfg.u = 1;
  double loss_u1 = critic_update(*mb, scans, nets, cfg, ExecConfig{1}).report.loss;
  double loss_u1_ref = plain_loss(*mb, scans, nets, cfg, {1.0});
  bool u1_ok = loss_u1 == loss_u1_ref;  // single longest backup, weight one
  CHECK(u1_ok);

  bool gamma0_ok = true;
  Rng grng(25);
  for (int t = 0; t < 20; ++t) {
    int l = 1 + grng.uniform_int(0, 5);
    std::vector<double> rs(size_t(l), 0.0);
    for (double& r : rs) r = grng.normal();
    double qt = grng.normal(), qb = grng.normal();
    int i = grng.uniform_int(0, l - 1);
    gamma0_ok = gamma0_ok && multi_step_td(rs, i, l, 0.0, qt, qb) == rs[size_t(i)] - qb;
  }
  CHECK(gamma0_ok);

  report(2, sums_ok && lambda1_ok && u1_ok && gamma0_ok,
         "weights sum to one; lambda=1, u=1 and gamma=0 reductions are exact");
}

TEST_CASE("criterion 3: every interior step gets every backup length once") {
  EpisodeStore store(2, 1, 8, 8, 100.0);
  bool ok = true;
  int pairs = 0, interior_steps = 0;
  for (int l = 1; l <= 5 && ok; ++l) {
    for (int T = l; T <= 12 && ok; ++T) {
      Episode ep;
      for (int t = 0; t < T; ++t) {
        Transition tr;
        tr.o = Array::zeros({2});
        tr.a = Array::zeros({1});
        tr.o_next = Array::zeros({2});
        tr.r = double(t);  // marker: reward identifies the source step
        ep.steps.push_back(tr);
      }
      ++pairs;
      for (int t = l - 1; t <= T - l && ok; ++t) {  // steps with l containing windows
        ++interior_steps;
        std::vector<int> lengths;
        for (int w = t - l + 1; w <= t; ++w) {
          Slice sl = store.make_slice(ep, w, 0, l);
          int pos = -1;
          for (int i = 0; i < l; ++i)
            if (sl.window[size_t(i)].r == double(t)) pos = i;
          if (pos < 0) {
            ok = false;
            break;
          }
          lengths.push_back(l - pos);  // rewards i..l-1 plus bootstrap
        }
        std::sort(lengths.begin(), lengths.end());
        for (int i = 0; i < l; ++i) ok = ok && lengths[size_t(i)] == i + 1;
      }
    }
  }
  report(3, ok && pairs > 0,
         "exhaustive T<=12, l<=5 sweep (" + std::to_string(interior_steps) + " interior steps)");
  CHECK(ok);
  CHECK(pairs == 50);
  CHECK(interior_steps > 0);
}

TEST_CASE("criterion 4: scanning a prefix equals the full forward pass") {
  NetConfig nc = tiny_cfg();
  NetBundle nets = make_bundle(nc, nc, 41);
  int obs_dim = nc.k_visual + nc.p_proprio;
  Rng rng(42);

  bool split_ok = true;
  for (int t = 0; t < 50; ++t) {
    int len = 6 + rng.uniform_int(0, 10);
    std::vector<Array> obs, act;
    for (int i = 0; i < len; ++i) {
      obs.push_back(rnd_vec(obs_dim, rng));
      act.push_back(rnd_vec(nc.action_dim, rng));
    }
    int split = rng.uniform_int(0, len);

    LstmState full_a = nets.actor_model.zero_state();
    LstmState full_c = nets.critic_model.zero_state();
    for (int i = 0; i < len; ++i) {
      nets.actor_model.advance(obs[size_t(i)], full_a, nets.actor);
      nets.critic_model.advance(obs[size_t(i)], act[size_t(i)], full_c, nets.critic);
    }

    std::vector<Array> o_pre(obs.begin(), obs.begin() + split);
    std::vector<Array> a_pre(act.begin(), act.begin() + split);
    LstmState sa = nets.actor_model.scan(o_pre, nets.actor);
    LstmState sc = nets.critic_model.scan(o_pre, a_pre, nets.critic);
    for (int i = split; i < len; ++i) {
      nets.actor_model.advance(obs[size_t(i)], sa, nets.actor);
      nets.critic_model.advance(obs[size_t(i)], act[size_t(i)], sc, nets.critic);
    }
    split_ok = split_ok && sa.bit_equal(full_a) && sc.bit_equal(full_c);
  }
  CHECK(split_ok);

  // tail bootstrap value against a from-scratch full forward pass
  EpisodeStore store(obs_dim, nc.action_dim, 16, 16, 100.0);
  Rng fill(43);
  fill_store(store, obs_dim, nc.action_dim, fill, 4, 14);
  const int l = 4, s = 16;  // s covers any prefix entirely
  bool tail_ok = true;
  for (const Episode& ep : store.native()) {
    int T = int(ep.steps.size());
    for (int start = 0; start + l <= T; ++start) {
      SliceBatch b;
      b.s = s;
      b.l = l;
      b.slices.push_back(store.make_slice(ep, start, s, l));
      std::vector<SliceScan> scans = scan_batch(b, nets, ExecConfig{1});
      TailQ tq = tail_target_q(b.slices[0], scans[0], nets);

      const Slice& sl = b.slices[0];
      if (sl.done_at_tail) {
        tail_ok = tail_ok && tq.masked && tq.q == 0.0;
        continue;
      }
      // target states advance over the entire episode up to the tail
      LstmState ta = nets.actor_model.zero_state();
      LstmState tc = nets.critic_model.zero_state();
      for (int i = 0; i < start + l; ++i) {
        nets.actor_model.advance(ep.steps[size_t(i)].o, ta, nets.actor_target);
        nets.critic_model.advance(ep.steps[size_t(i)].o, ep.steps[size_t(i)].a, tc,
                                  nets.critic_target);
      }
      Array a_tail = nets.actor_model.step(sl.tail_obs, ta, nets.actor_target);
      double q = nets.critic_model.step(sl.tail_obs, a_tail, tc, nets.critic_target);
      tail_ok = tail_ok && !tq.masked && tq.q == q;  // bitwise
    }
  }
  CHECK(tail_ok);

  report(4, split_ok && tail_ok, "scan-then-step and tail bootstrap match full forward bitwise");
}

TEST_CASE("criterion 5: ablation flags collapse to one-step TD exactly") {
  RunConfig rc;
  rc.td0_baseline = true;
  rc.scan_off = true;
  rc.conv_channels = 3;
  rc.vis_units = 4;
  rc.pro_units = 4;
  rc.act_units = 4;
  rc.actor_lstm = 4;
  rc.critic_lstm = 4;
  RunConfig fc = finalized(rc);
  bool fold_ok = fc.td.l == 1 && fc.td.u == 1 && fc.td.s == 0;
  CHECK(fold_ok);

  NetBundle nets = make_bundle(actor_config(fc), critic_config(fc), 51);
  int obs_dim = fc.env.obs_dim();
  EpisodeStore store(obs_dim, fc.action_dim, 16, 16, 100.0);
  Rng fill(52);
  fill_store(store, obs_dim, fc.action_dim, fill, 4, 10);

  TdConfig cfg = fc.td;
  cfg.gamma = 0.97;
  Rng samp(53);
  auto mb = store.sample_batch(8, cfg.s, cfg.l, samp);
  REQUIRE(mb.has_value());
  std::vector<SliceScan> scans = scan_batch(*mb, nets, ExecConfig{1});
  double loss = critic_update(*mb, scans, nets, cfg, ExecConfig{1}).report.loss;

  // independent one-step TD reference: y = r + gamma Q'(o', mu'(o')), all
  // recurrent states starting from zero (nothing scanned, window length one)
  double total = 0.0;
  for (const Slice& sl : mb->slices) {
    const Transition& tr = sl.window.at(0);
    LstmState bc = nets.critic_model.zero_state();
    double q_beh = nets.critic_model.step(tr.o, tr.a, bc, nets.critic);

    LstmState ta = nets.actor_model.zero_state();
    LstmState tc = nets.critic_model.zero_state();
    nets.actor_model.advance(tr.o, ta, nets.actor_target);
    nets.critic_model.advance(tr.o, tr.a, tc, nets.critic_target);
    double acc = tr.r;
    if (sl.done_at_tail) {
      acc += cfg.gamma * 0.0;
    } else {
      Array a_next = nets.actor_model.step(sl.tail_obs, ta, nets.actor_target);
      acc += cfg.gamma * nets.critic_model.step(sl.tail_obs, a_next, tc, nets.critic_target);
    }
    double td = acc - q_beh;
    total += 1.0 * td * td;
  }
  double ref = total / double(mb->slices.size());
  bool loss_ok = loss == ref;  // bitwise
  CHECK(loss_ok);

  // scan_off alone: prefixes are empty, so slice states are the zero state
  bool zero_scan_ok = true;
  for (const SliceScan& sc : scans) {
    zero_scan_ok = zero_scan_ok && sc.beh_critic.bit_equal(nets.critic_model.zero_state()) &&
                   sc.tar_actor.bit_equal(nets.actor_model.zero_state());
  }
  CHECK(zero_scan_ok);

  report(5, fold_ok && loss_ok && zero_scan_ok,
         "td0_baseline+scan_off loss equals hand-written one-step TD bitwise");
}

TEST_CASE("criterion 6: exploration noise contracts") {
  NetConfig nc = tiny_cfg();
  NetBundle nets = make_bundle(nc, nc, 61);

  ParamSet before = clone_target(nets.actor);
  ParamNoiseStash stash;
  Rng prng(62);
  apply_param_noise(nets.actor, 0.1, prng, stash);
  bool changed = !nets.actor.bit_equal(before);
  remove_param_noise(nets.actor, stash);
  bool restored = nets.actor.bit_equal(before);
  CHECK(changed);
  CHECK(restored);

  apply_param_noise(nets.actor, 0.0, prng, stash);  // sigma 0: exact identity
  bool sigma0_id = nets.actor.bit_equal(before);
  remove_param_noise(nets.actor, stash);
  sigma0_id = sigma0_id && nets.actor.bit_equal(before);
  CHECK(sigma0_id);

  OuProcess ou(1, 2.0, 0.5, 0.0, 0.1);
  double want = ou.stationary_variance();
  Rng orng(63);
  for (int i = 0; i < 1000; ++i) ou.step(orng);  // burn-in
  DD sum, sumsq;
  const int N = 100000;
  for (int i = 0; i < N; ++i) {
    double x = ou.step(orng)[0];
    sum.add(x);
    sumsq.add(x * x);
  }
  double mean = sum.hi / N;
  double var = sumsq.hi / N - mean * mean;
  bool var_ok = std::fabs(var - want) / want < 0.05;
  CHECK(var_ok);

  // sigma 0 injects exactly zero noise: the path cannot depend on the rng
  OuProcess quiet1(2, 0.3, 0.0, 0.25, 0.05);
  OuProcess quiet2(2, 0.3, 0.0, 0.25, 0.05);
  quiet1.x[0] = quiet2.x[0] = 1.5;
  Rng ra(1), rb(999);
  bool quiet_ok = true;
  for (int i = 0; i < 50; ++i) {
    const Array& xa = quiet1.step(ra);
    const Array& xb = quiet2.step(rb);
    quiet_ok = quiet_ok && xa.bit_equal(xb);
  }
  quiet_ok = quiet_ok && std::fabs(quiet1.x[0] - 0.25) < std::fabs(1.5 - 0.25);
  CHECK(quiet_ok);

  report(6, changed && restored && sigma0_id && var_ok && quiet_ok,
         "param-noise round trip, OU stationary variance within 5%, sigma=0 exact");
}

TEST_CASE("criterion 7: environment determinism, partial observability, telescoping") {
  EnvConfig ec;
  Terrain terr = generate_terrain(42, 0.8, 100.0);

  // same seed, same actions: bitwise-identical trajectories
  Terrain terr2 = generate_terrain(42, 0.8, 100.0);
  bool terrain_eq = terrain_json(terr) == terrain_json(terr2);
  CorridorEnv e1(terr, ec), e2(terr2, ec);
  Array o1 = e1.reset(), o2 = e2.reset();
  Rng arng(71);
  bool det_ok = o1.bit_equal(o2);
  for (int t = 0; t < 150 && det_ok; ++t) {
    Array a = rnd_vec(2, arng);
    StepResult r1 = e1.step(a), r2 = e2.step(a);
    det_ok = r1.obs.bit_equal(r2.obs) && r1.reward == r2.reward && r1.done == r2.done;
    if (r1.done) break;
  }
  CHECK(terrain_eq);
  CHECK(det_ok);

  // a hurdle beyond sensor range is invisible: observations match flat ground
  Terrain flat = Terrain::flat(100.0);
  Terrain hidden = Terrain::flat(100.0);
  hidden.add_hurdle(15.0, 15.5, 1.0);  // start pose x=1, ray_max=10
  CorridorEnv ef(flat, ec), eh(hidden, ec);
  Array of = ef.reset(), oh = eh.reset();
  bool pomdp_ok = of.bit_equal(oh);
  Array mild = Array::zeros({2});
  mild[0] = 0.2;
  for (int t = 0; t < 30 && pomdp_ok; ++t) {
    StepResult rf = ef.step(mild), rh = eh.step(mild);
    pomdp_ok = rf.obs.bit_equal(rh.obs) && rf.reward == rh.reward;
  }
  CHECK(pomdp_ok);

  // per-episode reward telescoping: sum of dx equals total displacement
  CorridorEnv e3(terr, ec);
  e3.reset();
  Rng arng2(72);
  double x_start = e3.body.x;
  DD dx_sum;
  bool base_ok = true;
  while (true) {
    double x_before = e3.body.x;
    StepResult r = e3.step(rnd_vec(2, arng2));
    double dx = e3.body.x - x_before;
    dx_sum.add(dx);
    double base = dx / ec.dt;
    if (r.cause == Cause::collision) base += -20.0;
    base_ok = base_ok && r.reward == base;
    if (r.done) break;
  }
  bool tele_ok = dx_sum.hi == e3.body.x - x_start && dx_sum.lo == 0.0;
  CHECK(base_ok);
  CHECK(tele_ok);

  report(7, terrain_eq && det_ok && pomdp_ok && base_ok && tele_ok,
         "bitwise replays, out-of-range hurdle invisible, reward telescopes exactly");
}

TEST_CASE("criterion 8: injected sampling share follows the anneal factor") {
  const int obs_dim = 3, act_dim = 1;
  EpisodeStore store(obs_dim, act_dim, 8, 8, 100.0);
  Rng fill(81);
  fill_store(store, obs_dim, act_dim, fill, 4, 10);  // native content

  std::vector<Episode> teach;
  for (int e = 0; e < 4; ++e) {  // matched injected content: same count/length
    Episode ep;
    for (int i = 0; i < 10; ++i) {
      Transition t;
      t.o = rnd_vec(obs_dim, fill);
      t.a = rnd_vec(act_dim, fill);
      t.o_next = rnd_vec(obs_dim, fill);
      t.r = fill.normal();
      ep.steps.push_back(t);
    }
    teach.push_back(ep);
  }
  store.inject(teach);

  store.set_anneal_factor(1.0);
  Rng samp(82);
  const int draws = 10000;
  int injected = 0;
  for (int k = 0; k < draws; ++k) {
    auto b = store.sample_batch(1, 0, 4, samp);
    REQUIRE(b.has_value());
    if (b->slices[0].injected) ++injected;
  }
  // chi-squared on the two cells: (n-5000)^2/2500 < 6.635 <=> p > 0.01
  double chi2 = double(injected - 5000) * double(injected - 5000) / 2500.0;
  bool share_ok = chi2 < 6.635;
  CHECK(share_ok);

  store.set_anneal_factor(0.0);
  int injected0 = 0;
  for (int k = 0; k < draws; ++k) {
    auto b = store.sample_batch(1, 0, 4, samp);
    REQUIRE(b.has_value());
    if (b->slices[0].injected) ++injected0;
  }
  bool zero_ok = injected0 == 0;
  CHECK(zero_ok);

  report(8, share_ok && zero_ok,
         "anneal 1 draws " + std::to_string(injected) + "/10000 injected; anneal 0 draws none");
}

TEST_CASE("criterion 9: learning smoke test beats idle and one-step baseline") {
  double t0 = now_s();
  RunConfig base;
  base.difficulty = 0.0;
  base.episodes = 1500;
  base.env.max_steps = 200;
  base.td.batch = 16;
  base.updates_per_episode = 1;
  base.critic_lr = 2e-5;  // sized so 1500 episodes land mid-curve, where the
  base.actor_lr = 2e-6;   // backup-length comparison is informative
  base.threads = 1;

  // the idle policy stands still on flat ground: its return is exactly zero
  NetBundle probe = make_bundle(actor_config(base), critic_config(base), 90);
  ParamSet idle = zeroed(probe.actor);
  RolloutResult zr = rollout_policy(probe.actor_model, idle,
                                    generate_terrain(901, 0.0, base.terrain_length), base.env);
  double zero_ret = zr.ret;
  CHECK(zero_ret == 0.0);

  int wins = 0, above_idle = 0;
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    RunConfig r = base;
    r.seed = seed;
    r.out_dir = run_dir("c9_rdpg_s" + std::to_string(seed));
    TrainResult rr = train(r);

    RunConfig t = base;
    t.seed = seed;
    t.td0_baseline = true;
    t.out_dir = run_dir("c9_td0_s" + std::to_string(seed));
    TrainResult rt = train(t);

    bool beat_idle = rr.final_r100ma >= zero_ret + 20.0;
    bool beat_td0 = rr.final_r100ma > rt.final_r100ma;
    above_idle += beat_idle;
    wins += (beat_idle && beat_td0);
    std::printf("  seed %llu: r100ma %.2f vs one-step %.2f (idle %.2f)%s\n",
                (unsigned long long)seed, rr.final_r100ma, rt.final_r100ma, zero_ret,
                beat_idle && beat_td0 ? "" : "  [loss]");
    std::fflush(stdout);
    CHECK(!rr.halted);
    CHECK(!rt.halted);
  }
  double minutes = (now_s() - t0) / 60.0;
  bool ok = wins >= 2 && minutes <= 45.0;
  report(9, ok,
         "1500-episode flat-corridor runs: " + std::to_string(wins) +
             "/3 seeds beat the one-step baseline and idle+20 (" + std::to_string(minutes) +
             " min)");
  CHECK(wins >= 2);
  CHECK(above_idle >= 2);
  CHECK(minutes <= 45.0);
}

TEST_CASE("criterion 10: identical configs produce identical metrics streams") {
  RunConfig c;
  c.episodes = 4;
  c.seed = 7;
  c.difficulty = 0.0;
  c.updates_per_episode = 1;
  c.conv_channels = 3;
  c.vis_units = 4;
  c.pro_units = 4;
  c.act_units = 4;
  c.actor_lstm = 6;
  c.critic_lstm = 6;
  c.td.l = 4;
  c.td.u = 2;
  c.td.s = 4;
  c.td.batch = 2;
  c.env.max_steps = 40;

  RunConfig a = c, b = c;
  a.out_dir = run_dir("c10_a");
  b.out_dir = run_dir("c10_b");
  train(a);
  train(b);
  bool metrics_eq = slurp(a.out_dir + "/metrics.jsonl") == slurp(b.out_dir + "/metrics.jsonl");
  bool ckpt_eq = slurp(a.out_dir + "/ckpt_final.bin") == slurp(b.out_dir + "/ckpt_final.bin");
  report(10, metrics_eq && ckpt_eq, "two same-seed runs are byte-identical");
  CHECK(metrics_eq);
  CHECK(ckpt_eq);
}
