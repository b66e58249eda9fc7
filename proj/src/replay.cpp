#include "rdpg/replay.hpp"

#include <cmath>
#include <fstream>

#include "rdpg/params.hpp"

namespace rdpg {

EpisodeStore::EpisodeStore(int obs_dim, int act_dim, int capacity_native,
                           int capacity_injected, double anneal_half_life)
    : obs_dim_(obs_dim),
      act_dim_(act_dim),
      cap_native_(static_cast<size_t>(capacity_native)),
      cap_injected_(static_cast<size_t>(capacity_injected)),
      half_life_(anneal_half_life) {
  if (obs_dim < 1 || act_dim < 1) throw ConfigError("EpisodeStore: bad dims");
  if (capacity_native < 1) throw ConfigError("EpisodeStore: native capacity must be >= 1");
  if (capacity_injected < 0) throw ConfigError("EpisodeStore: negative injected capacity");
  if (!(anneal_half_life > 0.0)) throw ConfigError("EpisodeStore: half life must be > 0");
}

void EpisodeStore::check_dims(const Transition& t, const char* what) const {
  if (t.o.numel() != obs_dim_ || t.o_next.numel() != obs_dim_ || t.a.numel() != act_dim_)
    throw ConfigError(std::string(what) + ": transition dims do not match the store");
}

void EpisodeStore::push(const Transition& t) {
  check_dims(t, "push");
  open_.push_back(t);
  if (t.done) end_episode();
}

void EpisodeStore::end_episode() {
  if (open_.empty()) return;
  for (size_t i = 0; i + 1 < open_.size(); ++i)
    if (open_[i].done) throw UsageError("EpisodeStore: done before the episode end");
  native_.push_back(Episode{std::move(open_), false});
  open_.clear();
  while (native_.size() > cap_native_) native_.pop_front();
}

void EpisodeStore::inject(const std::vector<Episode>& eps) {
  for (const Episode& e : eps) {
    if (e.steps.empty()) throw ConfigError("inject: empty episode");
    for (const Transition& t : e.steps) check_dims(t, "inject");
    for (size_t i = 0; i + 1 < e.steps.size(); ++i)
      if (e.steps[i].done) throw ConfigError("inject: done before the episode end");
  }
  for (const Episode& e : eps) {
    Episode copy = e;
    copy.injected = true;
    injected_.push_back(std::move(copy));
    while (injected_.size() > cap_injected_) injected_.pop_front();
  }
}

double EpisodeStore::set_anneal(int64_t episode_index) {
  if (episode_index < 0) throw UsageError("set_anneal: negative episode index");
  anneal_ = std::pow(0.5, static_cast<double>(episode_index) / half_life_);
  return anneal_;
}

void EpisodeStore::set_anneal_factor(double f) {
  if (!(f >= 0.0 && f <= 1.0)) throw UsageError("set_anneal_factor: f must be in [0,1]");
  anneal_ = f;
}

bool EpisodeStore::ready(int l) const {
  for (const Episode& e : native_)
    if (static_cast<int>(e.steps.size()) >= l) return true;
  if (anneal_ > 0.0)
    for (const Episode& e : injected_)
      if (static_cast<int>(e.steps.size()) >= l) return true;
  return false;
}

Slice EpisodeStore::make_slice(const Episode& ep, int start, int s, int l) const {
  const int T = static_cast<int>(ep.steps.size());
  if (l < 1 || s < 0) throw UsageError("make_slice: bad window shape");
  if (start < 0 || start > T - l) throw UsageError("make_slice: start out of range");
  Slice sl;
  sl.start = start;
  sl.injected = ep.injected;
  const int sp = std::min(s, start);
  sl.scan_obs.reserve(sp);
  sl.scan_act.reserve(sp);
  for (int i = start - sp; i < start; ++i) {
    sl.scan_obs.push_back(ep.steps[i].o);
    sl.scan_act.push_back(ep.steps[i].a);
  }
  sl.window.assign(ep.steps.begin() + start, ep.steps.begin() + start + l);
  for (int i = 0; i + 1 < l; ++i)
    if (sl.window[i].done) throw UsageError("make_slice: window crosses an episode boundary");
  sl.tail_obs = sl.window.back().o_next;
  sl.done_at_tail = sl.window.back().done;
  return sl;
}

std::optional<SliceBatch> EpisodeStore::sample_batch(int n, int s, int l, Rng& rng) const {
  if (n < 1) throw UsageError("sample_batch: batch size must be >= 1");
  if (l < 1 || s < 0) throw UsageError("sample_batch: bad window shape");

  // stage one: episode choice, natives weighted 1 and injected weighted by the
  // current anneal factor; only episodes long enough for a full window count
  std::vector<const Episode*> eligible;
  std::vector<double> weight;
  for (const Episode& e : native_) {
    if (static_cast<int>(e.steps.size()) >= l) {
      eligible.push_back(&e);
      weight.push_back(1.0);
    }
  }
  if (anneal_ > 0.0) {
    for (const Episode& e : injected_) {
      if (static_cast<int>(e.steps.size()) >= l) {
        eligible.push_back(&e);
        weight.push_back(anneal_);
      }
    }
  }
  double total = 0.0;
  for (double w : weight) total += w;
  if (eligible.empty() || total <= 0.0) return std::nullopt;

  SliceBatch batch;
  batch.s = s;
  batch.l = l;
  batch.slices.reserve(n);
  for (int k = 0; k < n; ++k) {
    double r = rng.u01() * total;
    size_t pick = 0;
    double acc = 0.0;
    for (size_t i = 0; i < eligible.size(); ++i) {
      acc += weight[i];
      if (r < acc) { pick = i; break; }
      pick = i;  // numeric edge: fall back to the last eligible episode
    }
    const Episode& ep = *eligible[pick];
    const int T = static_cast<int>(ep.steps.size());
    // stage two: window start uniform over {0..T-l}
    const int start = rng.uniform_int(0, T - l);
    batch.slices.push_back(make_slice(ep, start, s, l));
  }
  return batch;
}

static constexpr char kTeachMagic[8] = {'R', 'D', 'P', 'G', 'T', 'E', 'A', '1'};

void save_episodes(const std::string& path, const std::vector<Episode>& eps,
                   int obs_dim, int act_dim) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  bin::w_magic(os, kTeachMagic);
  bin::w_u32(os, 1);  // version
  bin::w_u32(os, static_cast<uint32_t>(obs_dim));
  bin::w_u32(os, static_cast<uint32_t>(act_dim));
  bin::w_u64(os, eps.size());
  for (const Episode& e : eps) {
    bin::w_u64(os, e.steps.size());
    for (const Transition& t : e.steps) {
      if (t.o.numel() != obs_dim || t.o_next.numel() != obs_dim || t.a.numel() != act_dim)
        throw ConfigError("save_episodes: transition dims mismatch");
      for (double v : t.o.data) bin::w_f64(os, v);
      for (double v : t.a.data) bin::w_f64(os, v);
      bin::w_f64(os, t.r);
      for (double v : t.o_next.data) bin::w_f64(os, v);
      bin::w_u8(os, t.done ? 1 : 0);
    }
  }
  if (!os) throw IoError("write failed: " + path);
}

LoadedEpisodes load_episodes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  bin::expect_magic(is, kTeachMagic, "episode");
  uint32_t version = bin::r_u32(is);
  if (version != 1) throw IoError("unsupported episode file version");
  LoadedEpisodes out;
  out.obs_dim = static_cast<int>(bin::r_u32(is));
  out.act_dim = static_cast<int>(bin::r_u32(is));
  uint64_t n_eps = bin::r_u64(is);
  out.episodes.reserve(n_eps);
  for (uint64_t e = 0; e < n_eps; ++e) {
    uint64_t n_tr = bin::r_u64(is);
    Episode ep;
    ep.steps.reserve(n_tr);
    for (uint64_t i = 0; i < n_tr; ++i) {
      Transition t;
      t.o = Array::zeros({out.obs_dim});
      for (double& v : t.o.data) v = bin::r_f64(is);
      t.a = Array::zeros({out.act_dim});
      for (double& v : t.a.data) v = bin::r_f64(is);
      t.r = bin::r_f64(is);
      t.o_next = Array::zeros({out.obs_dim});
      for (double& v : t.o_next.data) v = bin::r_f64(is);
      t.done = bin::r_u8(is) != 0;
      ep.steps.push_back(std::move(t));
    }
    out.episodes.push_back(std::move(ep));
  }
  return out;
}

}  // namespace rdpg
