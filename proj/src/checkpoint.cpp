#include "ma2gcn/checkpoint.hpp"

#include "binary_io.hpp"
#include "ma2gcn/config.hpp"
#include "ma2gcn/error.hpp"

#include <cstring>

namespace ma2gcn {

namespace {

constexpr char kMagic[8] = {'M', 'A', '2', 'C', 'K', 'P', 'T', '\0'};

[[noreturn]] void bad_file(const std::string &msg) { throw Error(ErrorKind::IoError, "checkpoint: " + msg); }

} // namespace

Checkpoint make_checkpoint(const Ma2gcnModel &model, const FeatureStats &stats, const LossConfig &lc,
                           const TrainConfig &tc, const TrainResult *result, std::string data_digest) {
  Checkpoint c;
  c.model = model.config();
  c.loss = lc;
  c.train = tc;
  c.stats = stats;
  const auto &ps = model.parameters();
  for (std::size_t k = 0; k < ps.size(); ++k) {
    c.names.push_back(ps.name(k));
    c.shapes.push_back(ps.at(k).shape());
  }
  c.parameters = ps.snapshot();
  if (result) {
    c.optimizer_steps = result->optimizer_steps;
    c.adam_m = result->adam_m;
    c.adam_v = result->adam_v;
  }
  c.data_digest = std::move(data_digest);
  return c;
}

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &c) {
  Json params = Json::array();
  for (std::size_t k = 0; k < c.names.size(); ++k)
    params.push_back(Json{{"name", c.names[k]}, {"shape", c.shapes[k]}});
  const Json manifest{{"schema_version", kCheckpointVersion},
                      {"model", to_json(c.model)},
                      {"loss", to_json(c.loss)},
                      {"train", to_json(c.train)},
                      {"stats", to_json(c.stats)},
                      {"parameters", params},
                      {"parameter_count", c.parameters.size()},
                      {"optimizer_steps", c.optimizer_steps},
                      {"has_optimizer_state", !c.adam_m.empty()},
                      {"has_graphs", c.has_graphs()},
                      {"data_digest", c.data_digest}};
  const std::string text = manifest.dump();

  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  auto os = io::open_out(path.string());
  os.write(kMagic, sizeof kMagic);
  io::write_pod<std::uint32_t>(os, kCheckpointVersion);
  io::write_pod<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  io::write_doubles(os, c.parameters);
  io::write_doubles(os, c.adam_m);
  io::write_doubles(os, c.adam_v);
  if (c.has_graphs()) {
    for (const Matrix *m : {&c.initial, &c.squared, &c.mobility}) {
      if (m->rows() != static_cast<Eigen::Index>(c.model.N) || m->cols() != static_cast<Eigen::Index>(c.model.N))
        throw Error(ErrorKind::ShapeMismatch, "checkpoint graphs must be N x N");
      io::write_doubles(os, std::vector<double>(m->data(), m->data() + m->size()));
    }
  }
  if (!os)
    throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  auto is = io::open_in(path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    bad_file(path.string() + " is not a checkpoint");
  if (io::read_pod<std::uint32_t>(is) != kCheckpointVersion)
    bad_file("unsupported version");
  const auto len = io::read_pod<std::uint64_t>(is);
  if (len > (std::uint64_t{1} << 32))
    bad_file("manifest too large");
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len)))
    bad_file("truncated manifest");

  Checkpoint c;
  try {
    const Json m = Json::parse(text);
    from_json(m.at("model"), c.model);
    from_json(m.at("loss"), c.loss);
    from_json(m.at("train"), c.train);
    from_json(m.at("stats"), c.stats);
    for (const auto &p : m.at("parameters")) {
      c.names.push_back(p.at("name").get<std::string>());
      c.shapes.push_back(p.at("shape").get<ad::Shape>());
    }
    const auto count = m.at("parameter_count").get<std::size_t>();
    c.optimizer_steps = m.at("optimizer_steps").get<std::uint64_t>();
    const bool has_state = m.at("has_optimizer_state").get<bool>();
    const bool has_graphs = m.at("has_graphs").get<bool>();
    c.data_digest = m.at("data_digest").get<std::string>();
    std::size_t expected = 0;
    for (const auto &s : c.shapes)
      expected += ad::numel(s);
    if (expected != count)
      bad_file("parameter count disagrees with shapes");
    c.parameters = io::read_doubles(is, count);
    if (has_state) {
      c.adam_m = io::read_doubles(is, count);
      c.adam_v = io::read_doubles(is, count);
    }
    if (has_graphs) {
      const auto n = static_cast<Eigen::Index>(c.model.N);
      for (Matrix *g : {&c.initial, &c.squared, &c.mobility}) {
        const auto v = io::read_doubles(is, c.model.N * c.model.N);
        *g = Eigen::Map<const Matrix>(v.data(), n, n);
      }
    }
  } catch (const nlohmann::json::exception &e) {
    bad_file(std::string("bad manifest: ") + e.what());
  } catch (const Error &e) {
    if (e.kind() == ErrorKind::IoError)
      throw;
    bad_file(e.what());
  }
  if (is.peek() != std::char_traits<char>::eof())
    bad_file("trailing bytes");
  return c;
}

StaticGraphs Checkpoint::static_graphs() const {
  if (!has_graphs())
    throw Error(ErrorKind::ValidationError, "checkpoint carries no graphs");
  return StaticGraphs::prepare(initial, squared, mobility);
}

Ma2gcnModel restore_model(const Checkpoint &c) {
  Ma2gcnModel model(c.model, 0);
  auto &ps = model.parameters();
  if (ps.size() != c.names.size())
    bad_file("parameter list does not match the model config");
  for (std::size_t k = 0; k < ps.size(); ++k)
    if (ps.name(k) != c.names[k] || ps.at(k).shape() != c.shapes[k])
      bad_file("parameter " + c.names[k] + " does not match the model config");
  ps.restore(c.parameters);
  return model;
}

} // namespace ma2gcn
