#include "support.hpp"

#include "ma2gcn/config.hpp"
#include "ma2gcn/pipeline.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace ma2gcn;
using namespace testing;

namespace {

RunConfig small_run() {
  auto c = RunConfig::synthetic_defaults();
  c.synth.taxis = 12;
  c.synth.hours = 8.0;
  c.model.hidden = c.model.attn_hidden = 6;
  c.model.channels = 4;
  c.model.blocks = 2;
  c.train.epochs = 2;
  return c;
}

struct Built {
  TempDir dir{"pipe"};
  RunConfig cfg = small_run();
  fs::path graph() const { return dir / "graph"; }
};

// synth -> ingest -> build-graph into one temporary directory
void build(Built &b) {
  run_synth(b.cfg.synth, b.cfg.timezone, b.dir / "raw");
  run_ingest(b.dir / "raw", b.cfg.grid.bbox, b.cfg.timezone, b.dir / "traj.bin");
  run_build_graph(b.dir / "traj.bin", b.cfg, b.graph());
}

struct Proc {
  int code = -1;
  std::string out;
};

Proc cli(const std::string &args) {
  const std::string cmd = std::string(MA2GCN_CLI_PATH) + " " + args + " 2>/dev/null";
  Proc p;
  FILE *f = ::popen(cmd.c_str(), "r");
  REQUIRE(f != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), f)) > 0)
    p.out.append(buf.data(), n);
  const int status = ::pclose(f);
  p.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return p;
}

std::string slurp(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

} // namespace

TEST_SUITE("pipeline") {

TEST_CASE("binary artifacts round-trip") {
  TempDir dir("artifacts");
  Rng rng(1);
  FeatureTensor x;
  x.T = 3;
  x.N = 4;
  x.start_time = 1171900800;
  x.interval_seconds = 300;
  x.values = random_values(rng, 24, 0, 60);
  x.mask = {1, 0, 1, 1, 0, 0, 1, 1, 1, 1, 1, 0};
  write_feature_file(dir / "f.bin", x);
  const auto y = read_feature_file(dir / "f.bin");
  CHECK(y.T == 3);
  CHECK(y.N == 4);
  CHECK(y.start_time == x.start_time);
  CHECK(y.values == x.values);
  CHECK(y.mask == x.mask);

  EntryExitMatrix e;
  e.S = 2;
  e.N = 2;
  e.start_time = 5;
  e.counts = {0, 1, 2, 3, 4, 5, 6, 7};
  e.mean_travel_time = random_values(rng, 8, 0, 600);
  write_entry_exit_file(dir / "e.bin", e);
  const auto e2 = read_entry_exit_file(dir / "e.bin");
  CHECK(e2.counts == e.counts);
  CHECK(e2.mean_travel_time == e.mean_travel_time);
  CHECK(e2.segment_seconds == e.segment_seconds);

  Matrix m(3, 3);
  m << 0.1, 1.0 / 3.0, -2.5e-17, 1e300, 0, 7, 5e-324, 2.0 / 7.0, 1e-5;
  write_matrix_csv(dir / "m.csv", m);
  CHECK(read_matrix_csv(dir / "m.csv") == m);

  {
    std::ofstream os(dir / "bad.csv");
    os << "1,2\n3\n";
  }
  CHECK_KIND(read_matrix_csv(dir / "bad.csv"), ErrorKind::IoError);
  {
    std::ofstream os(dir / "rect.csv");
    os << "1,2,3\n4,5,6\n";
  }
  CHECK_KIND(read_matrix_csv(dir / "rect.csv"), ErrorKind::IoError);
  CHECK_KIND(read_feature_file(dir / "m.csv"), ErrorKind::IoError);
  CHECK_KIND(read_feature_file(dir / "nothing.bin"), ErrorKind::IoError);
}

TEST_CASE("library pipeline end to end") {
  Built b;
  const auto synth = run_synth(b.cfg.synth, b.cfg.timezone, b.dir / "raw");
  CHECK(synth["files"] == 12);
  CHECK(fs::exists(b.dir / "raw.json"));

  const auto ingest = run_ingest(b.dir / "raw", b.cfg.grid.bbox, b.cfg.timezone, b.dir / "traj.bin");
  CHECK(ingest["files"] == 12);
  CHECK(ingest["skipped"] == 0);
  CHECK(ingest["records"] == synth["points"]);
  CHECK(fs::exists(b.dir / "traj.bin.json"));

  const auto graph = run_build_graph(b.dir / "traj.bin", b.cfg, b.graph());
  CHECK(graph["N"] == 25);
  CHECK(graph["T"] == 96);
  for (const char *f : {"features.bin", "features.json", "adjacency_initial.csv", "adjacency_squared.csv",
                        "adjacency_mobility.csv", "entry_exit.bin", "entry_exit.json", "graph.json"})
    CHECK_MESSAGE(fs::exists(b.graph() / f), f);
  const auto g = load_graph_dir(b.graph());
  CHECK(g.initial.rows() == 25);
  CHECK(g.mobility == g.mobility.transpose());
  CHECK(g.mobility.diagonal().isZero());
  CHECK(g.mobility.sum() > 0.0);

  const auto report = run_train(b.graph(), b.cfg, b.dir / "run");
  CHECK(report["model"] == "MA2GCN");
  CHECK(report["epochs"] == 2);
  for (const char *f : {"checkpoint.bin", "epoch_log.csv", "config.json", "report.json"})
    CHECK_MESSAGE(fs::exists(b.dir / "run" / f), f);
  CHECK(parse_run_config(read_json_file(b.dir / "run" / "config.json")).model == b.cfg.model);

  const auto eval = run_evaluate(b.dir / "run" / "checkpoint.bin", b.graph(), b.cfg.split);
  CHECK(eval["test"].dump() == report["test"].dump());
  CHECK(eval["baselines"].dump() == report["baselines"].dump());

  // one window straight from the feature tensor
  Json window = Json::array();
  for (std::size_t t = 0; t < b.cfg.model.P; ++t) {
    Json step = Json::array();
    for (std::size_t n = 0; n < 25; ++n)
      step.push_back(Json::array({g.features.observed(t, n) ? Json(g.features.at(t, n, 0)) : Json(nullptr),
                                  g.features.at(t, n, 1)}));
    window.push_back(step);
  }
  const auto pred = run_predict(b.dir / "run" / "checkpoint.bin", Json{{"window", window}});
  REQUIRE(pred["prediction"].size() == 1);
  CHECK(pred["prediction"][0].size() == 25);
  CHECK(pred["attention_weights"].size() == 4);
  double total = 0.0;
  for (const auto &w : pred["attention_weights"])
    total += w.get<double>();
  CHECK(total == doctest::Approx(1.0));
  window.erase(0);
  CHECK_KIND(run_predict(b.dir / "run" / "checkpoint.bin", Json{{"window", window}}), ErrorKind::ValidationError);

  run_report({b.dir / "run"}, b.dir / "report");
  const auto table = slurp(b.dir / "report" / "metrics_table.csv");
  CHECK(table.rfind("run,model,channel,MAE,MAPE,RMSE\n", 0) == 0);
  CHECK(table.find("run,MA2GCN,speed,") != std::string::npos);
  CHECK(table.find("run,last-value,speed,") != std::string::npos);
  CHECK(table.find("run,historical-average,flow,") != std::string::npos);
  const auto curve = slurp(b.dir / "report" / "loss_curve.csv");
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 3);
}

TEST_CASE("pipeline validation") {
  Built b;
  build(b);
  auto wrong = b.cfg;
  wrong.model.N = 16;
  CHECK_KIND(run_train(b.graph(), wrong, b.dir / "bad"), ErrorKind::ValidationError);

  auto seg = b.cfg;
  seg.mobility_segment = 50;
  CHECK_KIND(run_build_graph(b.dir / "traj.bin", seg, b.dir / "g2"), ErrorKind::ConfigError);
  CHECK_KIND(load_graph_dir(b.dir / "nowhere"), ErrorKind::IoError);
  CHECK_KIND(run_ingest(b.dir / "nowhere", b.cfg.grid.bbox, "UTC", b.dir / "t.bin"), ErrorKind::IoError);
  CHECK_KIND(run_report({}, b.dir / "r"), ErrorKind::ConfigError);
}

TEST_CASE("same seed, same bytes") {
  Built a, b;
  build(a);
  build(b);
  CHECK(slurp(a.graph() / "features.bin") == slurp(b.graph() / "features.bin"));
  CHECK(slurp(a.graph() / "adjacency_mobility.csv") == slurp(b.graph() / "adjacency_mobility.csv"));
  run_train(a.graph(), a.cfg, a.dir / "run");
  run_train(b.graph(), b.cfg, b.dir / "run");
  CHECK(slurp(a.dir / "run" / "report.json") == slurp(b.dir / "run" / "report.json"));
  CHECK(slurp(a.dir / "run" / "checkpoint.bin") == slurp(b.dir / "run" / "checkpoint.bin"));
}

TEST_CASE("command line exit codes") {
  CHECK(cli("").code == 2);
  CHECK(cli("--help").code == 0);
  CHECK(cli("frobnicate").code == 2);

  const auto full = cli("config --preset full");
  REQUIRE(full.code == 0);
  CHECK(parse_run_config(Json::parse(full.out)).model.N == 225);
  const auto synth = cli("config --preset synthetic");
  REQUIRE(synth.code == 0);
  CHECK(parse_run_config(Json::parse(synth.out)).model.N == 25);

  TempDir dir("cli");
  CHECK(cli("train --data x --out y --config " + (dir / "missing.json").string()).code == 2);
  CHECK(cli("ingest --input " + (dir / "none").string() + " --out " + (dir / "t.bin").string()).code == 3);

  write_json_file(dir / "small.json", to_json(small_run()));
  const std::string cfg = " --config " + (dir / "small.json").string();
  const auto s = cli("synth" + cfg + " --out " + (dir / "raw").string());
  REQUIRE(s.code == 0);
  CHECK(Json::parse(s.out)["files"] == 12);
  REQUIRE(cli("ingest" + cfg + " --input " + (dir / "raw").string() + " --out " + (dir / "t.bin").string()).code == 0);
  REQUIRE(cli("build-graph" + cfg + " --traj " + (dir / "t.bin").string() + " --out " + (dir / "g").string()).code ==
          0);
  // a full-size model against a 25-cell graph
  CHECK(cli("train --data " + (dir / "g").string() + " --out " + (dir / "run").string()).code == 4);
  const auto tr = cli("train" + cfg + " --epochs 1 --data " + (dir / "g").string() + " --out " + (dir / "run").string());
  REQUIRE(tr.code == 0);
  CHECK(Json::parse(tr.out)["epochs"] == 1);
  const auto ev = cli("evaluate --checkpoint " + (dir / "run" / "checkpoint.bin").string() + " --data " +
                      (dir / "g").string());
  CHECK(ev.code == 0);
  CHECK(cli("evaluate --checkpoint " + (dir / "t.bin").string() + " --data " + (dir / "g").string()).code == 3);
  const auto rep = cli("report --runs " + (dir / "run").string() + " --out " + (dir / "rep").string());
  CHECK(rep.code == 0);
  CHECK(fs::exists(dir / "rep" / "metrics_table.csv"));
}

} // TEST_SUITE
