#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "rdpg/replay.hpp"

#ifndef RDPG_CLI_PATH
#error "RDPG_CLI_PATH must point at the rdpg binary"
#endif

using namespace rdpg;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int code = -1;
  std::string out;  // stdout + stderr merged
};

CmdResult run_cli(const std::string& args) {
  std::string cmd = std::string(RDPG_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  CmdResult r;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

size_t count_of(const std::string& hay, const std::string& needle) {
  size_t c = 0, pos = 0;
  while ((pos = hay.find(needle, pos)) != std::string::npos) {
    ++c;
    pos += needle.size();
  }
  return c;
}

// overrides that make a train run finish in a couple of seconds
const char* kTinySets =
    " --set episodes=2 --set max_steps=30 --set batch=2"
    " --set opt_len=4 --set upd_len=2 --set scan_len=4"
    " --set conv_channels=3 --set vis_units=4 --set pro_units=4 --set act_units=4"
    " --set actor_lstm=6 --set critic_lstm=6 --set updates_per_episode=1";

}  // namespace

TEST_CASE("usage errors and help") {
  CHECK(run_cli("").code == 2);                 // a subcommand is required
  CHECK(run_cli("frobnicate").code == 2);       // unknown subcommand
  CHECK(run_cli("eval").code == 2);             // missing required --checkpoint
  CHECK(run_cli("inject-train").code == 2);     // missing required --teacher

  CmdResult help = run_cli("--help");
  CHECK(help.code == 0);
  CHECK(help.out.find("train") != std::string::npos);
  CHECK(help.out.find("eval") != std::string::npos);
  CHECK(help.out.find("td-demo") != std::string::npos);
}

TEST_CASE("td-demo prints the interpolation table") {
  CmdResult r = run_cli("td-demo --lambda 1 --l 3");
  CHECK(r.code == 0);
  // flat weighting: three equal weights that sum to one
  CHECK(count_of(r.out, "0.333333") >= 3);
  CHECK(r.out.find("sum 1\n") != std::string::npos);
  // backup lengths count down from l to 1
  CHECK(r.out.find("0 | 3 |") != std::string::npos);
  CHECK(r.out.find("1 | 2 |") != std::string::npos);
  CHECK(r.out.find("2 | 1 |") != std::string::npos);

  CHECK(run_cli("td-demo --l 3 --u 5").code == 2);   // u > l
  CHECK(run_cli("td-demo --lambda 0").code == 2);    // weights need lambda in (0,1]
}

TEST_CASE("gradient verification subcommand") {
  CmdResult r = run_cli("check-grad --seed 7");
  CHECK(r.code == 0);
  CHECK(r.out.find("all gradient checks passed") != std::string::npos);
  CHECK(count_of(r.out, "PASS ") >= 40);
  CHECK(count_of(r.out, "FAIL ") == 0);
}

TEST_CASE("config errors exit with code 2") {
  CHECK(run_cli("train --config /tmp/definitely_missing.cfg").code == 2);
  CmdResult bad = run_cli("train --set not_a_key=3");
  CHECK(bad.code == 2);
  CHECK(bad.out.find("config error") != std::string::npos);
  CHECK(run_cli("train --set no_equals_sign").code == 2);
  CHECK(run_cli("train --set episodes=lots").code == 2);
  CHECK(run_cli("eval --checkpoint /tmp/missing_ckpt.bin").code == 2);
}

TEST_CASE("train, eval, record, inject round trip") {
  std::string dir = "/tmp/rdpg_cli_run";
  fs::remove_all(dir);

  CmdResult tr = run_cli("train" + std::string(kTinySets) + " --set out_dir=" + dir);
  CHECK(tr.code == 0);
  CHECK(tr.out.find("episodes 2") != std::string::npos);
  CHECK(fs::exists(dir + "/metrics.jsonl"));
  CHECK(fs::exists(dir + "/config.txt"));
  CHECK(fs::exists(dir + "/ckpt_final.bin"));

  std::string ck = dir + "/ckpt_final.bin";
  CmdResult ev = run_cli("eval --checkpoint " + ck + " --episodes 3 --seed 5");
  CHECK(ev.code == 0);
  CHECK(ev.out.find("episodes 3") != std::string::npos);
  CHECK(ev.out.find("success_ratio") != std::string::npos);
  CHECK(ev.out.find("mean_return") != std::string::npos);

  CmdResult ev2 = run_cli("eval --checkpoint " + ck + " --episodes 3 --seed 5");
  CHECK(ev2.out == ev.out);  // same seed, same report

  // trajectory dump: JSON lines plus a terrain description
  std::string traj = "/tmp/rdpg_cli_traj.jsonl";
  fs::remove(traj);
  fs::remove(traj + ".terrain.json");
  CmdResult evt = run_cli("eval --checkpoint " + ck +
                          " --episodes 1 --seed 5 --set max_steps=20 --trajectory " + traj);
  CHECK(evt.code == 0);
  REQUIRE(fs::exists(traj));
  REQUIRE(fs::exists(traj + ".terrain.json"));
  CHECK(fs::file_size(traj) > 0);

  std::string teach = "/tmp/rdpg_cli_teacher.bin";
  fs::remove(teach);
  CmdResult rc = run_cli("record-teacher --checkpoint " + ck + " --episodes 2 --seed 9" +
                         " --set max_steps=30 --out " + teach);
  CHECK(rc.code == 0);
  CHECK(rc.out.find("recorded 2 episodes") != std::string::npos);
  LoadedEpisodes le = load_episodes(teach);
  CHECK(le.episodes.size() == 2);
  CHECK(le.obs_dim == 14);  // 10 rays + 4 body senses
  CHECK(le.act_dim == 2);

  std::string dir2 = "/tmp/rdpg_cli_run2";
  fs::remove_all(dir2);
  CmdResult inj = run_cli("inject-train" + std::string(kTinySets) + " --set out_dir=" + dir2 +
                          " --teacher " + teach);
  CHECK(inj.code == 0);
  CHECK(fs::exists(dir2 + "/ckpt_final.bin"));

  // a config file is honored and copied next to the outputs
  std::string cfg_path = "/tmp/rdpg_cli_cfg.txt";
  std::string dir3 = "/tmp/rdpg_cli_run3";
  fs::remove_all(dir3);
  {
    std::FILE* f = std::fopen(cfg_path.c_str(), "w");
    REQUIRE(f != nullptr);
    std::fputs("episodes=1\nmax_steps=20\nbatch=2\nopt_len=4\nupd_len=2\nscan_len=4\n", f);
    std::fputs("conv_channels=3\nvis_units=4\npro_units=4\nact_units=4\n", f);
    std::fputs("actor_lstm=6\ncritic_lstm=6\nupdates_per_episode=1\n", f);
    std::fclose(f);
  }
  CmdResult cf = run_cli("train --config " + cfg_path + " --set out_dir=" + dir3);
  CHECK(cf.code == 0);
  CHECK(fs::exists(dir3 + "/config_input.txt"));
  CHECK(fs::exists(dir3 + "/metrics.jsonl"));
}
