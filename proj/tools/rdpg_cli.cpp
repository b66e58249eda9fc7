#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "rdpg/gradcheck.hpp"
#include "rdpg/harness.hpp"

using namespace rdpg;

namespace {

RunConfig build_config(const std::string& config_path, const std::vector<std::string>& sets) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
  for (const std::string& s : sets) {
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_kv(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  return cfg;
}

void keep_input_config(const std::string& config_path, const std::string& out_dir) {
  if (config_path.empty()) return;
  std::filesystem::create_directories(out_dir);
  std::ifstream in(config_path, std::ios::binary);
  std::ofstream out(out_dir + "/config_input.txt", std::ios::binary);
  out << in.rdbuf();
}

int run_train(const std::string& config_path, const std::vector<std::string>& sets,
              const std::vector<std::string>& teacher) {
  RunConfig cfg = build_config(config_path, sets);
  if (!teacher.empty()) {
    cfg.teacher_files.insert(cfg.teacher_files.end(), teacher.begin(), teacher.end());
    cfg.injection_on = true;
  }
  keep_input_config(config_path, cfg.out_dir);
  TrainResult r = train(cfg, &std::cout);
  std::cout << "episodes " << r.episodes_run << " final_r100ma " << r.final_r100ma
            << " best_r100ma " << r.best_r100ma << "\n";
  if (r.halted) {
    std::cerr << "halted: " << r.halt_reason << "\n";
    return 1;
  }
  return 0;
}

void dump_trajectory(const std::string& path, const Checkpoint& ck, const RunConfig& cfg,
                     uint64_t seed) {
  NetConfig acfg = config_from_meta(ck.actor);
  ActorModel model(acfg);
  Terrain terrain = generate_terrain(seed, cfg.difficulty, cfg.terrain_length);
  {
    std::ofstream tf(path + ".terrain.json");
    if (!tf) throw IoError("cannot write " + path + ".terrain.json");
    tf << terrain_json(terrain) << "\n";
  }
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  CorridorEnv env(terrain, cfg.env);
  LstmState st = model.zero_state();
  Array obs = env.reset();
  int t = 0;
  while (true) {
    Array a = model.step(obs, st, ck.actor);
    StepResult res = env.step(a);
    Array ranges = Array::zeros({cfg.env.rays});
    for (int k = 0; k < cfg.env.rays; ++k) ranges[k] = res.obs[k];
    f << step_json(t, env.body, a, res.reward, ranges) << "\n";
    ++t;
    obs = res.obs;
    if (res.done) break;
  }
  if (!f) throw IoError("failed writing " + path);
}

int run_eval(const std::string& ckpt_path, const std::string& config_path,
             const std::vector<std::string>& sets, int episodes, uint64_t seed,
             const std::string& trajectory) {
  RunConfig cfg = build_config(config_path, sets);
  Checkpoint ck = load_checkpoint(ckpt_path);
  int n = episodes > 0 ? episodes : cfg.eval_episodes;
  uint64_t es = seed != 0 ? seed : splitmix64(cfg.seed ^ 0xE7A1ULL);
  EvalResult r = evaluate(ck, cfg, n, es);
  std::cout << "episodes " << r.episodes << "\n"
            << "successes " << r.successes << "\n"
            << "success_ratio " << r.success_ratio << "\n"
            << "mean_return " << r.mean_return << "\n"
            << "min_return " << r.min_return << "\n"
            << "max_return " << r.max_return << "\n";
  if (!trajectory.empty()) dump_trajectory(trajectory, ck, finalized(cfg), es);
  return 0;
}

int run_record(const std::string& ckpt_path, const std::string& config_path,
               const std::vector<std::string>& sets, int episodes, uint64_t seed,
               const std::string& out_file) {
  RunConfig cfg = build_config(config_path, sets);
  Checkpoint ck = load_checkpoint(ckpt_path);
  uint64_t rs = seed != 0 ? seed : splitmix64(cfg.seed ^ 0x7EAC4ULL);
  int n = record_teacher(ck, cfg, episodes, rs, out_file);
  std::cout << "recorded " << n << " episodes to " << out_file << "\n";
  return 0;
}

int run_check_grad(uint64_t seed, double tol) {
  std::vector<GradCheck> checks = run_gradient_checks(seed, tol);
  for (const GradCheck& c : checks)
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " rel_err " << c.rel_err << "\n";
  bool ok = all_pass(checks);
  std::cout << (ok ? "all gradient checks passed" : "gradient checks FAILED") << " ("
            << checks.size() << " checks, tol " << tol << ")\n";
  return ok ? 0 : 1;
}

int run_td_demo(double lambda, double gamma, int l, int u) {
  if (u <= 0) u = l;
  if (u > l) throw ConfigError("td-demo: u must be <= l");
  std::vector<double> w = interp_weights(lambda, u);
  std::cout << "interpolation weights (lambda=" << lambda << ", u=" << u << "):";
  for (double wi : w) std::cout << " " << wi;
  std::cout << "\n";
  double sum = 0.0;
  for (double wi : w) sum += wi;
  std::cout << "sum " << sum << "\n";

  // demo decomposition: unit rewards, fixed bootstrap and behavior values
  std::vector<double> rewards(size_t(l), 1.0);
  const double q_tar = 0.5, q_beh = 0.4;
  std::cout << "demo: rewards all 1, gamma=" << gamma << ", tail q_tar=" << q_tar
            << ", behavior q=" << q_beh << "\n";
  std::cout << "position | backup length | weight | td\n";
  for (int i = 0; i < l; ++i) {
    double td = multi_step_td(rewards, i, l, gamma, q_tar, q_beh);
    std::cout << i << " | " << (l - i) << " | " << (i < u ? w[size_t(i)] : 0.0) << " | " << td
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recurrent deterministic policy gradient training on a 2-D corridor POMDP"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path, out_file, trajectory;
  std::vector<std::string> sets, teacher;
  int episodes = 0;
  uint64_t seed = 0;
  double tol = 1e-4, lambda = 0.9, gamma = 0.99;
  int dl = 8, du = 0;

  CLI::App* tr = app.add_subcommand("train", "train a policy");
  tr->add_option("--config", config_path, "key=value config file");
  tr->add_option("--set", sets, "override one config key (key=value)");

  CLI::App* it = app.add_subcommand("inject-train", "train with teacher episodes injected");
  it->add_option("--config", config_path, "key=value config file");
  it->add_option("--set", sets, "override one config key (key=value)");
  it->add_option("--teacher", teacher, "teacher episode file(s)")->required();

  CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  ev->add_option("--config", config_path, "key=value config file");
  ev->add_option("--set", sets, "override one config key (key=value)");
  ev->add_option("--episodes", episodes, "evaluation episodes (default: config)");
  ev->add_option("--seed", seed, "terrain seed base (default: derived from config seed)");
  ev->add_option("--trajectory", trajectory, "dump one rollout as JSON lines to this path");

  CLI::App* rc = app.add_subcommand("record-teacher", "record noise-free episodes");
  rc->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  rc->add_option("--config", config_path, "key=value config file");
  rc->add_option("--set", sets, "override one config key (key=value)");
  rc->add_option("--episodes", episodes, "episodes to record")->default_val(20);
  rc->add_option("--seed", seed, "terrain seed base (default: derived from config seed)");
  rc->add_option("--out", out_file, "output teacher file")->required();

  CLI::App* cg = app.add_subcommand("check-grad", "finite-difference gradient verification");
  cg->add_option("--seed", seed, "probe seed")->default_val(7);
  cg->add_option("--tol", tol, "relative error tolerance")->default_val(1e-4);

  CLI::App* td = app.add_subcommand("td-demo", "print interpolation weights and TDs");
  td->add_option("--lambda", lambda, "interpolation factor in (0,1]")->default_val(0.9);
  td->add_option("--gamma", gamma, "discount")->default_val(0.99);
  td->add_option("--l", dl, "optimization length")->default_val(8);
  td->add_option("--u", du, "update length (default: l)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage exits 2, --help exits 0
  }

  try {
    if (tr->parsed()) return run_train(config_path, sets, {});
    if (it->parsed()) return run_train(config_path, sets, teacher);
    if (ev->parsed()) return run_eval(ckpt_path, config_path, sets, episodes, seed, trajectory);
    if (rc->parsed()) return run_record(ckpt_path, config_path, sets, episodes, seed, out_file);
    if (cg->parsed()) return run_check_grad(seed, tol);
    if (td->parsed()) return run_td_demo(lambda, gamma, dl, du);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 2;
  } catch (const NumericsError& e) {
    std::cerr << "numerics error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
