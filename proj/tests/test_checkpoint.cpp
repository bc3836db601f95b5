#include "support.hpp"

#include "ma2gcn/checkpoint.hpp"
#include "ma2gcn/grid.hpp"

#include <fstream>

using namespace ma2gcn;
using namespace testing;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.N = 4;
  c.P = 3;
  c.hidden = c.attn_hidden = 5;
  c.blocks = 2;
  c.channels = 3;
  return c;
}

Checkpoint sample(bool with_graphs) {
  Ma2gcnModel m(tiny(), 21);
  FeatureStats stats;
  stats.mean = {31.5, 4.25};
  stats.stddev = {7.0, 1.5};
  stats.cell_speed_mean = {30, 31, 32, 33};
  stats.global_speed_mean = 31.5;
  stats.fit_intervals = 40;
  TrainResult r;
  r.optimizer_steps = 17;
  Rng rng(1);
  r.adam_m = random_values(rng, m.parameters().scalar_count());
  r.adam_v = random_values(rng, m.parameters().scalar_count(), 0.0, 1.0);
  auto c = make_checkpoint(m, stats, LossConfig{0.4}, TrainConfig{}, &r, "00ff");
  if (with_graphs) {
    const auto a = build_initial_adjacency(GridSpec{{0, 0, 1, 1}, 2, 300});
    c.initial = a.values;
    c.squared = square_adjacency(a).values;
    c.mobility = random_adjacency(rng, 4);
  }
  return c;
}

} // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("save and load round trip") {
  TempDir dir("ckpt");
  for (bool graphs : {false, true}) {
    const auto c = sample(graphs);
    save_checkpoint(dir / "c.bin", c);
    const auto d = load_checkpoint(dir / "c.bin");
    CHECK(d.model == c.model);
    CHECK(d.loss.theta == 0.4);
    CHECK(d.names == c.names);
    CHECK(d.shapes == c.shapes);
    CHECK(d.parameters == c.parameters);
    CHECK(d.adam_m == c.adam_m);
    CHECK(d.adam_v == c.adam_v);
    CHECK(d.optimizer_steps == 17);
    CHECK(d.stats.mean == c.stats.mean);
    CHECK(d.stats.cell_speed_mean == c.stats.cell_speed_mean);
    CHECK(d.stats.fit_intervals == 40);
    CHECK(d.data_digest == "00ff");
    CHECK(d.has_graphs() == graphs);
    if (graphs) {
      CHECK(d.initial == c.initial);
      CHECK(d.mobility == c.mobility);
    } else {
      CHECK_KIND(d.static_graphs(), ErrorKind::ValidationError);
    }
  }
}

TEST_CASE("restored model reproduces the forward pass") {
  TempDir dir("ckpt_fwd");
  Ma2gcnModel m(tiny(), 33);
  const auto a = build_initial_adjacency(GridSpec{{0, 0, 1, 1}, 2, 300});
  const auto graphs = StaticGraphs::prepare(a.values, square_adjacency(a).values, a.values);
  auto c = make_checkpoint(m, FeatureStats{}, {}, {}, nullptr, "");
  save_checkpoint(dir / "m.bin", c);
  const auto restored = restore_model(load_checkpoint(dir / "m.bin"));
  Rng rng(2);
  const auto window = random_const(rng, {3, 3, 4, 2});
  const auto p1 = m.forward(window, graphs).prediction;
  const auto p2 = restored.forward(window, graphs).prediction;
  CHECK(max_abs_diff(p1.values(), p2.values()) == 0.0);
}

TEST_CASE("malformed files") {
  TempDir dir("ckpt_bad");
  CHECK_KIND(load_checkpoint(dir / "absent.bin"), ErrorKind::IoError);
  {
    std::ofstream os(dir / "junk.bin", std::ios::binary);
    os << "NOTACHECKPOINT";
  }
  CHECK_KIND(load_checkpoint(dir / "junk.bin"), ErrorKind::IoError);

  save_checkpoint(dir / "ok.bin", sample(true));
  const auto size = std::filesystem::file_size(dir / "ok.bin");
  std::filesystem::copy_file(dir / "ok.bin", dir / "short.bin");
  std::filesystem::resize_file(dir / "short.bin", size - 8);
  CHECK_KIND(load_checkpoint(dir / "short.bin"), ErrorKind::IoError);
  {
    std::ofstream os(dir / "ok.bin", std::ios::binary | std::ios::app);
    os << 'x';
  }
  CHECK_KIND(load_checkpoint(dir / "ok.bin"), ErrorKind::IoError);

  auto c = sample(false);
  c.model.channels = 4;
  CHECK_KIND(restore_model(c), ErrorKind::IoError);
}

} // TEST_SUITE
