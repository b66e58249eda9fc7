#pragma once

#include <deque>
#include <optional>

#include "rdpg/array.hpp"

namespace rdpg {

struct Transition {
  Array o, a;
  Array o_next;
  double r = 0.0;
  bool done = false;  // true only on the final transition of an episode
};

struct Episode {
  std::vector<Transition> steps;
  bool injected = false;
};

// One training slice: an optimization window of l consecutive transitions,
// plus up to s observations (and actions) immediately preceding it for
// gradient-free state initialization, plus the observation one past the tail.
struct Slice {
  std::vector<Array> scan_obs;
  std::vector<Array> scan_act;
  std::vector<Transition> window;
  Array tail_obs;
  bool done_at_tail = false;
  bool injected = false;
  int start = 0;  // window offset inside the source episode
};

struct SliceBatch {
  int s = 0, l = 0;
  std::vector<Slice> slices;
};

// Whole-episode FIFO stores: one ring for episodes gathered by the learner,
// a separate ring for externally injected (teacher) episodes whose sampling
// weight anneals over training.
class EpisodeStore {
 public:
  EpisodeStore(int obs_dim, int act_dim, int capacity_native,
               int capacity_injected, double anneal_half_life);

  void push(const Transition& t);  // done=true auto-closes the episode
  void end_episode();              // manual close; no-op when nothing is open
  void inject(const std::vector<Episode>& eps);
  // injected-episode weight 0.5^(episode_index / half_life); returns it
  double set_anneal(int64_t episode_index);
  void set_anneal_factor(double f);  // direct override, f in [0,1]
  double anneal() const { return anneal_; }

  // an update can run iff some episode of length >= l has positive weight
  bool ready(int l) const;
  // two-stage draw: episode by weight, then window start uniform on {0..T-l}
  std::optional<SliceBatch> sample_batch(int n, int s, int l, Rng& rng) const;
  Slice make_slice(const Episode& ep, int start, int s, int l) const;

  const std::deque<Episode>& native() const { return native_; }
  const std::deque<Episode>& injected_eps() const { return injected_; }
  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }

 private:
  void check_dims(const Transition& t, const char* what) const;

  int obs_dim_, act_dim_;
  size_t cap_native_, cap_injected_;
  double half_life_;
  double anneal_ = 1.0;
  std::deque<Episode> native_, injected_;
  std::vector<Transition> open_;
};

// Teacher episode files: versioned binary, bit-exact round trip.
void save_episodes(const std::string& path, const std::vector<Episode>& eps,
                   int obs_dim, int act_dim);
struct LoadedEpisodes {
  std::vector<Episode> episodes;
  int obs_dim = 0, act_dim = 0;
};
LoadedEpisodes load_episodes(const std::string& path);

}  // namespace rdpg
