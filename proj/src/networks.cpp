#include "rdpg/networks.hpp"

#include <cmath>
#include <fstream>

namespace rdpg {

void NetConfig::validate(bool critic) const {
  if (k_visual < 1 || p_proprio < 1 || action_dim < 1)
    throw ConfigError("NetConfig: input dims must be positive");
  if (conv_channels < 1 || conv_width < 1 || vis_units < 1 || pro_units < 1 || lstm_units < 1)
    throw ConfigError("NetConfig: layer widths must be positive");
  if (critic && act_units < 1)
    throw ConfigError("NetConfig: critic action branch width must be positive");
  if (k_visual < conv_width)
    throw ConfigError("NetConfig: conv filter wider than the visual input");
}

Value Bind::at(const std::string& name) const {
  auto it = v.find(name);
  if (it == v.end()) throw ConfigError("Bind: missing parameter " + name);
  return it->second;
}

Bind bind_params(Tape& tape, const ParamSet& ps, bool learnable) {
  Bind b;
  for (const auto& [name, a] : ps.items())
    b.v[name] = learnable ? tape.param(name, a) : tape.constant(a);
  return b;
}

void split_obs(const NetConfig& cfg, const Array& obs, Array& vis, Array& pro) {
  if (obs.numel() != cfg.k_visual + cfg.p_proprio)
    throw ConfigError("observation size does not match the network config");
  vis.shape = {cfg.k_visual};
  vis.data.assign(obs.data.begin(), obs.data.begin() + cfg.k_visual);
  pro.shape = {cfg.p_proprio};
  pro.data.assign(obs.data.begin() + cfg.k_visual, obs.data.end());
}

namespace {

Array uniform_init(Rng& rng, int rows, int cols, int fan_in) {
  Array w = Array::zeros({rows, cols});
  const double lim = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : w.data) v = rng.uniform(-lim, lim);
  return w;
}

// weights uniform in +/- 1/sqrt(fan-in); biases zero except the LSTM forget
// gate block which starts at +1 so early cells retain memory
ParamSet init_common(const NetConfig& cfg, uint64_t seed, bool critic) {
  Rng rng = Rng::derive(seed, critic ? 0xC517 : 0xAC70);
  ParamSet p;
  p.add("conv_w", uniform_init(rng, cfg.conv_channels, cfg.conv_width, cfg.conv_width));
  p.add("conv_b", Array::zeros({cfg.conv_channels}));
  p.add("vis_w", uniform_init(rng, cfg.vis_units, cfg.conv_channels, cfg.conv_channels));
  p.add("vis_b", Array::zeros({cfg.vis_units}));
  p.add("pro_w", uniform_init(rng, cfg.pro_units, cfg.p_proprio, cfg.p_proprio));
  p.add("pro_b", Array::zeros({cfg.pro_units}));
  if (critic) {
    p.add("act_w", uniform_init(rng, cfg.act_units, cfg.action_dim, cfg.action_dim));
    p.add("act_b", Array::zeros({cfg.act_units}));
  }
  const int trunk = cfg.trunk_units(critic);
  const int H = cfg.lstm_units;
  if (cfg.recurrent) {
    p.add("rec_wx", uniform_init(rng, 4 * H, trunk, trunk));
    p.add("rec_wh", uniform_init(rng, 4 * H, H, H));
    Array rb = Array::zeros({4 * H});
    for (int k = 0; k < H; ++k) rb.data[H + k] = 1.0;
    p.add("rec_b", std::move(rb));
  } else {
    p.add("ff_w", uniform_init(rng, H, trunk, trunk));
    p.add("ff_b", Array::zeros({H}));
  }
  const int out_dim = critic ? 1 : cfg.action_dim;
  p.add("out_w", uniform_init(rng, out_dim, H, H));
  p.add("out_b", Array::zeros({out_dim}));

  p.meta["k_visual"] = cfg.k_visual;
  p.meta["p_proprio"] = cfg.p_proprio;
  p.meta["action_dim"] = cfg.action_dim;
  p.meta["conv_channels"] = cfg.conv_channels;
  p.meta["conv_width"] = cfg.conv_width;
  p.meta["vis_units"] = cfg.vis_units;
  p.meta["pro_units"] = cfg.pro_units;
  p.meta["act_units"] = cfg.act_units;
  p.meta["lstm_units"] = cfg.lstm_units;
  p.meta["recurrent"] = cfg.recurrent ? 1 : 0;
  p.meta["critic"] = critic ? 1 : 0;
  p.meta["seed"] = static_cast<int64_t>(seed);
  return p;
}

// shared feature trunk: conv+pool on the rangefinder block, dense merges,
// optional action branch, concatenated in a fixed order
Array trunk_plain(const NetConfig& cfg, bool critic, const Array& obs,
                  const Array* action, const ParamSet& p) {
  Array vis, pro;
  split_obs(cfg, obs, vis, pro);
  Array cf, fv, fp;
  kern::conv1d_pool(vis, p.at("conv_w"), p.at("conv_b"), cf, nullptr);
  kern::dense(cf, p.at("vis_w"), p.at("vis_b"), Act::relu, fv);
  kern::dense(pro, p.at("pro_w"), p.at("pro_b"), Act::relu, fp);
  Array cat;
  if (critic) {
    Array fa;
    kern::dense(*action, p.at("act_w"), p.at("act_b"), Act::relu, fa);
    cat = Array::zeros({fv.numel() + fp.numel() + fa.numel()});
    int off = 0;
    for (double v : fv.data) cat.data[off++] = v;
    for (double v : fp.data) cat.data[off++] = v;
    for (double v : fa.data) cat.data[off++] = v;
  } else {
    cat = Array::zeros({fv.numel() + fp.numel()});
    int off = 0;
    for (double v : fv.data) cat.data[off++] = v;
    for (double v : fp.data) cat.data[off++] = v;
  }
  return cat;
}

Value trunk_taped(const NetConfig& cfg, bool critic, Tape& tape, const Bind& b,
                  const Array& obs, Value action) {
  Array vis, pro;
  split_obs(cfg, obs, vis, pro);
  Value vv = tape.constant(std::move(vis));
  Value pv = tape.constant(std::move(pro));
  Value cf = tape.conv1d_pool(vv, b.at("conv_w"), b.at("conv_b"));
  Value fv = tape.dense(cf, b.at("vis_w"), b.at("vis_b"), Act::relu);
  Value fp = tape.dense(pv, b.at("pro_w"), b.at("pro_b"), Act::relu);
  if (critic) {
    Value fa = tape.dense(action, b.at("act_w"), b.at("act_b"), Act::relu);
    return tape.concat({fv, fp, fa});
  }
  return tape.concat({fv, fp});
}

}  // namespace

ParamSet ActorModel::init_params(uint64_t seed) const { return init_common(cfg, seed, false); }
ParamSet CriticModel::init_params(uint64_t seed) const { return init_common(cfg, seed, true); }

void ActorModel::advance(const Array& obs, LstmState& st, const ParamSet& p) const {
  if (!cfg.recurrent) return;
  Array cat = trunk_plain(cfg, false, obs, nullptr, p);
  kern::lstm_step(cat, st.h, st.c, p.at("rec_wx"), p.at("rec_wh"), p.at("rec_b"),
                  st.h, st.c, nullptr);
}

Array ActorModel::step(const Array& obs, LstmState& st, const ParamSet& p) const {
  Array cat = trunk_plain(cfg, false, obs, nullptr, p);
  Array hid;
  if (cfg.recurrent) {
    kern::lstm_step(cat, st.h, st.c, p.at("rec_wx"), p.at("rec_wh"), p.at("rec_b"),
                    st.h, st.c, nullptr);
    hid = st.h;
  } else {
    kern::dense(cat, p.at("ff_w"), p.at("ff_b"), Act::relu, hid);
  }
  Array a;
  kern::dense(hid, p.at("out_w"), p.at("out_b"), Act::tanh, a);
  return a;
}

LstmState ActorModel::scan(const std::vector<Array>& obs_prefix, const ParamSet& p) const {
  LstmState st = zero_state();
  for (const Array& o : obs_prefix) advance(o, st, p);
  return st;
}

Value ActorModel::step_taped(Tape& tape, const Bind& b, const Array& obs,
                             Value h, Value c, Value* h_out, Value* c_out) const {
  Value cat = trunk_taped(cfg, false, tape, b, obs, Value{});
  Value hid;
  if (cfg.recurrent) {
    Value cn;
    hid = tape.lstm_step(cat, h, c, b.at("rec_wx"), b.at("rec_wh"), b.at("rec_b"), &cn);
    if (h_out) *h_out = hid;
    if (c_out) *c_out = cn;
  } else {
    hid = tape.dense(cat, b.at("ff_w"), b.at("ff_b"), Act::relu);
    if (h_out) *h_out = h;
    if (c_out) *c_out = c;
  }
  return tape.dense(hid, b.at("out_w"), b.at("out_b"), Act::tanh);
}

void CriticModel::advance(const Array& obs, const Array& action, LstmState& st,
                          const ParamSet& p) const {
  if (!cfg.recurrent) return;
  Array cat = trunk_plain(cfg, true, obs, &action, p);
  kern::lstm_step(cat, st.h, st.c, p.at("rec_wx"), p.at("rec_wh"), p.at("rec_b"),
                  st.h, st.c, nullptr);
}

double CriticModel::step(const Array& obs, const Array& action, LstmState& st,
                         const ParamSet& p) const {
  if (action.numel() != cfg.action_dim)
    throw ConfigError("critic: action size mismatch");
  Array cat = trunk_plain(cfg, true, obs, &action, p);
  Array hid;
  if (cfg.recurrent) {
    kern::lstm_step(cat, st.h, st.c, p.at("rec_wx"), p.at("rec_wh"), p.at("rec_b"),
                    st.h, st.c, nullptr);
    hid = st.h;
  } else {
    kern::dense(cat, p.at("ff_w"), p.at("ff_b"), Act::relu, hid);
  }
  Array q;
  kern::dense(hid, p.at("out_w"), p.at("out_b"), Act::identity, q);
  return q.data[0];
}

LstmState CriticModel::scan(const std::vector<Array>& obs_prefix,
                            const std::vector<Array>& act_prefix, const ParamSet& p) const {
  if (obs_prefix.size() != act_prefix.size())
    throw ConfigError("critic scan: prefix length mismatch");
  LstmState st = zero_state();
  for (size_t i = 0; i < obs_prefix.size(); ++i)
    advance(obs_prefix[i], act_prefix[i], st, p);
  return st;
}

Value CriticModel::step_taped(Tape& tape, const Bind& b, const Array& obs, Value action,
                              Value h, Value c, Value* h_out, Value* c_out) const {
  Value cat = trunk_taped(cfg, true, tape, b, obs, action);
  Value hid;
  if (cfg.recurrent) {
    Value cn;
    hid = tape.lstm_step(cat, h, c, b.at("rec_wx"), b.at("rec_wh"), b.at("rec_b"), &cn);
    if (h_out) *h_out = hid;
    if (c_out) *c_out = cn;
  } else {
    hid = tape.dense(cat, b.at("ff_w"), b.at("ff_b"), Act::relu);
    if (h_out) *h_out = h;
    if (c_out) *c_out = c;
  }
  return tape.dense(hid, b.at("out_w"), b.at("out_b"), Act::identity);
}

ParamSet clone_target(const ParamSet& p) { return p; }

static constexpr char kCkptMagic[8] = {'R', 'D', 'P', 'G', 'C', 'K', 'P', '1'};

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  bin::w_magic(os, kCkptMagic);
  bin::w_u32(os, 1);  // version
  bin::w_u64(os, ck.episode);
  ck.actor.write(os);
  ck.critic.write(os);
  ck.actor_target.write(os);
  ck.critic_target.write(os);
  ck.actor_opt.write(os);
  ck.critic_opt.write(os);
  if (!os) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  bin::expect_magic(is, kCkptMagic, "checkpoint");
  uint32_t version = bin::r_u32(is);
  if (version != 1) throw IoError("unsupported checkpoint version");
  Checkpoint ck;
  ck.episode = bin::r_u64(is);
  ck.actor = ParamSet::read(is);
  ck.critic = ParamSet::read(is);
  ck.actor_target = ParamSet::read(is);
  ck.critic_target = ParamSet::read(is);
  ck.actor_opt = AdamOpt::read(is);
  ck.critic_opt = AdamOpt::read(is);
  return ck;
}

NetConfig config_from_meta(const ParamSet& ps) {
  NetConfig cfg;
  auto get = [&](const char* k) {
    auto it = ps.meta.find(k);
    if (it == ps.meta.end()) throw IoError(std::string("parameter meta missing ") + k);
    return static_cast<int>(it->second);
  };
  cfg.k_visual = get("k_visual");
  cfg.p_proprio = get("p_proprio");
  cfg.action_dim = get("action_dim");
  cfg.conv_channels = get("conv_channels");
  cfg.conv_width = get("conv_width");
  cfg.vis_units = get("vis_units");
  cfg.pro_units = get("pro_units");
  cfg.act_units = get("act_units");
  cfg.lstm_units = get("lstm_units");
  cfg.recurrent = get("recurrent") != 0;
  return cfg;
}

}  // namespace rdpg
