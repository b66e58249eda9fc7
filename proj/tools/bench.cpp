#include <CLI11.hpp>

#include <omp.h>

#include <chrono>
#include <iostream>

#include "rdpg/tdlearn.hpp"

using namespace rdpg;

namespace {

EpisodeStore synthetic_store(int obs_dim, int act_dim, int episodes, int steps, uint64_t seed) {
  EpisodeStore store(obs_dim, act_dim, episodes + 1, 0, 500.0);
  Rng rng(seed);
  for (int e = 0; e < episodes; ++e) {
    for (int t = 0; t < steps; ++t) {
      Transition tr;
      tr.o = Array::zeros({obs_dim});
      tr.o_next = Array::zeros({obs_dim});
      tr.a = Array::zeros({act_dim});
      for (double& v : tr.o.data) v = rng.uniform(-1.0, 1.0);
      for (double& v : tr.o_next.data) v = rng.uniform(-1.0, 1.0);
      for (double& v : tr.a.data) v = rng.uniform(-1.0, 1.0);
      tr.r = rng.uniform(-1.0, 1.0);
      tr.done = (t == steps - 1) && rng.u01() < 0.5;
      store.push(tr);
    }
    store.end_episode();
  }
  return store;
}

struct BenchRun {
  double total_ms = 0.0;
  ParamSet actor, critic;
};

BenchRun run_updates(const EpisodeStore& store, const TdConfig& td, int threads, int updates) {
  NetConfig acfg, ccfg;
  acfg.k_visual = 10;
  acfg.p_proprio = 4;
  ccfg = acfg;
  ccfg.lstm_units = 80;
  NetBundle nets = make_bundle(acfg, ccfg, 11);
  Trainer trainer(std::move(nets), td, ExecConfig{threads}, 1e-4, 1e-3, 10.0);
  Rng rng = Rng::derive(9, 5);

  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < updates; ++i)
    if (trainer.update(store, rng) != Trainer::Status::done)
      throw UsageError("bench: store not ready");
  auto t1 = std::chrono::steady_clock::now();

  BenchRun out;
  out.total_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  out.actor = trainer.nets().actor;
  out.critic = trainer.nets().critic;
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"update-step benchmark: serial reference vs OpenMP slice parallelism"};
  int updates = 20, batch = 32, l = 8, u = 8, s = 24;
  app.add_option("--updates", updates, "gradient updates per run")->default_val(20);
  app.add_option("--batch", batch, "slices per update")->default_val(32);
  app.add_option("--l", l, "optimization length")->default_val(8);
  app.add_option("--u", u, "update length")->default_val(8);
  app.add_option("--s", s, "scan length")->default_val(24);
  CLI11_PARSE(app, argc, argv);

  try {
    TdConfig td;
    td.l = l;
    td.u = u;
    td.s = s;
    td.batch = batch;
    td.validate();

    EpisodeStore store = synthetic_store(14, 2, 12, s + l + 8, 21);

    std::cout << "updates " << updates << ", batch " << batch << ", l/u/s " << l << "/" << u
              << "/" << s << ", hardware threads " << omp_get_max_threads() << "\n";
    std::cout << "threads | total ms | ms/update\n";

    BenchRun serial = run_updates(store, td, 1, updates);
    std::cout << "1 (serial reference) | " << serial.total_ms << " | "
              << serial.total_ms / updates << "\n";

    BenchRun par = run_updates(store, td, 0, updates);
    std::cout << omp_get_max_threads() << " (OpenMP) | " << par.total_ms << " | "
              << par.total_ms / updates << "\n";

    bool match = serial.actor.bit_equal(par.actor) && serial.critic.bit_equal(par.critic);
    std::cout << "parameters after " << updates
              << " updates bitwise identical across thread counts: " << (match ? "yes" : "NO")
              << "\n";
    if (!match) return 1;
    std::cout << "speedup x" << (par.total_ms > 0 ? serial.total_ms / par.total_ms : 0.0)
              << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
