#pragma once

#include "rdpg/tape.hpp"

namespace rdpg {

// Topology knobs shared by actor and critic. The critic additionally mixes an
// action branch into the pre-recurrent feature vector and ends in a linear
// scalar head; the actor ends in a tanh head of action_dim units.
struct NetConfig {
  int k_visual = 10;      // rangefinder inputs fed to the conv front-end
  int p_proprio = 4;
  int action_dim = 2;
  int conv_channels = 16;
  int conv_width = 3;
  int vis_units = 16;
  int pro_units = 48;
  int act_units = 16;     // critic action branch width
  int lstm_units = 64;
  bool recurrent = true;  // false: equal-width dense layer instead of the LSTM

  void validate(bool critic) const;
  int trunk_units(bool critic) const {
    return vis_units + pro_units + (critic ? act_units : 0);
  }
};

struct LstmState {
  Array h, c;
  static LstmState zero(int units) {
    return LstmState{Array::zeros({units}), Array::zeros({units})};
  }
  bool bit_equal(const LstmState& o) const {
    return h.bit_equal(o.h) && c.bit_equal(o.c);
  }
};

// Param names -> tape handles for one network.
struct Bind {
  std::map<std::string, Value> v;
  Value at(const std::string& name) const;
};

Bind bind_params(Tape& tape, const ParamSet& ps, bool learnable);

void split_obs(const NetConfig& cfg, const Array& obs, Array& vis, Array& pro);

class ActorModel {
 public:
  NetConfig cfg;

  explicit ActorModel(NetConfig c) : cfg(std::move(c)) { cfg.validate(false); }

  ParamSet init_params(uint64_t seed) const;
  // advance the recurrent state without computing the head (used by scans)
  void advance(const Array& obs, LstmState& st, const ParamSet& p) const;
  Array step(const Array& obs, LstmState& st, const ParamSet& p) const;
  // gradient-free state initialization from an observation prefix
  LstmState scan(const std::vector<Array>& obs_prefix, const ParamSet& p) const;
  LstmState zero_state() const {
    return LstmState::zero(cfg.recurrent ? cfg.lstm_units : 0);
  }
  Value step_taped(Tape& tape, const Bind& b, const Array& obs,
                   Value h, Value c, Value* h_out, Value* c_out) const;
};

class CriticModel {
 public:
  NetConfig cfg;

  explicit CriticModel(NetConfig c) : cfg(std::move(c)) { cfg.validate(true); }

  ParamSet init_params(uint64_t seed) const;
  void advance(const Array& obs, const Array& action, LstmState& st, const ParamSet& p) const;
  double step(const Array& obs, const Array& action, LstmState& st, const ParamSet& p) const;
  // scans (o, a) pairs: the critic state depends on the acted trajectory
  LstmState scan(const std::vector<Array>& obs_prefix,
                 const std::vector<Array>& act_prefix, const ParamSet& p) const;
  LstmState zero_state() const {
    return LstmState::zero(cfg.recurrent ? cfg.lstm_units : 0);
  }
  Value step_taped(Tape& tape, const Bind& b, const Array& obs, Value action,
                   Value h, Value c, Value* h_out, Value* c_out) const;
};

// deep copy used when spawning target networks
ParamSet clone_target(const ParamSet& p);

// Everything needed to resume or evaluate a run.
struct Checkpoint {
  uint64_t episode = 0;
  ParamSet actor, critic, actor_target, critic_target;
  AdamOpt actor_opt, critic_opt;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// rebuild a NetConfig from the meta block a ParamSet carries
NetConfig config_from_meta(const ParamSet& ps);

}  // namespace rdpg
