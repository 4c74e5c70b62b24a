#include "blockdetail/diffusion/checkpoint.h"

#include "blockdetail/common/error.h"
#include "blockdetail/motion/motion_io.h"

#include <algorithm>
#include <bit>
#include <cstring>

namespace blockdetail {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'B', 'D', 'C', 'K', 'P', 'T', '\0', '\0'};

template <typename T>
void put(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    if (bytes_.size() - pos_ < sizeof(T)) {
      throw ParseError(std::string("checkpoint truncated while reading ") + what, pos_);
    }
    unsigned char raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    T value;
    std::memcpy(&value, raw, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(std::string("checkpoint truncated while reading ") + what, pos_);
    }
    std::string_view out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t position() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& v, const char* field) {
  if (!v.is_array()) throw ValidationError("expected an array", field);
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ValidationError("expected a number", field);
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

}  // namespace

Checkpoint checkpoint_from(const TrainingResult& result) {
  Checkpoint c;
  c.net = result.net;
  c.training = result.config.to_json();
  c.final_loss = result.final_loss;
  c.clip_count = result.clip_count;
  return c;
}

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  if (!checkpoint.net) throw ValidationError("checkpoint has no network", "net");
  const TinyDenoiserNet& net = *checkpoint.net;
  const NetworkConfig& cfg = net.config();

  json shapes = json::array();
  for (const ParameterBlock& b : net.blocks()) {
    shapes.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}, {"offset", b.offset}});
  }
  const json header = {
      {"mode", std::string(to_string(cfg.mode))},
      {"network",
       {{"frames", cfg.shape.frames},
        {"joints", cfg.shape.joints},
        {"dims", cfg.shape.dims},
        {"hidden", cfg.hidden},
        {"depth", cfg.depth},
        {"time_embedding", cfg.time_embedding},
        {"temporal_length", cfg.temporal_length}}},
      {"schedule",
       {{"kind", "cosine"},
        {"steps", net.schedule().steps()},
        {"offset", net.schedule().offset()}}},
      {"shapes", shapes},
      {"stats", {{"mean", vector_to_json(net.stats().mean)}, {"scale", vector_to_json(net.stats().scale)}}},
      {"training", checkpoint.training},
      {"final_loss", checkpoint.final_loss},
      {"clip_count", checkpoint.clip_count}};
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, header_text.size());
  out += header_text;
  const Eigen::VectorXd& p = net.parameters();
  put<std::uint64_t>(out, static_cast<std::uint64_t>(p.size()));
  out.reserve(out.size() + p.size() * sizeof(double));
  for (Eigen::Index i = 0; i < p.size(); ++i) put<double>(out, p[i]);
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(sizeof(kMagic), "magic") != std::string_view(kMagic, sizeof(kMagic))) {
    throw ParseError("not a checkpoint file (bad magic)", 0);
  }
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), 8);
  }
  const auto header_bytes = in.get<std::uint64_t>("header length");
  const std::size_t header_start = in.position();
  json header;
  try {
    header = json::parse(in.take(header_bytes, "header"));
  } catch (const json::parse_error& e) {
    throw ParseError("malformed checkpoint header", header_start + e.byte);
  }

  Checkpoint c;
  NetworkConfig cfg;
  NoiseSchedule schedule;
  ChannelStats stats;
  try {
    cfg.mode = parse_denoiser_mode(header.at("mode").get<std::string>());
    const json& n = header.at("network");
    cfg.shape = {n.at("frames").get<int>(), n.at("joints").get<int>(), n.at("dims").get<int>()};
    cfg.hidden = n.at("hidden").get<int>();
    cfg.depth = n.at("depth").get<int>();
    cfg.time_embedding = n.at("time_embedding").get<int>();
    cfg.temporal_length = n.value("temporal_length", 0.0);
    cfg.validate();
    const json& s = header.at("schedule");
    if (s.at("kind").get<std::string>() != "cosine") {
      throw ValidationError("unsupported schedule kind", "schedule.kind");
    }
    schedule = NoiseSchedule(s.at("steps").get<int>(), s.at("offset").get<double>());
    stats.mean = vector_from_json(header.at("stats").at("mean"), "stats.mean");
    stats.scale = vector_from_json(header.at("stats").at("scale"), "stats.scale");
    c.training = header.value("training", json());
    c.final_loss = header.value("final_loss", 0.0);
    c.clip_count = header.value("clip_count", 0);

    const std::vector<ParameterBlock> expected = TinyDenoiserNet::layout(cfg);
    const json& shapes = header.at("shapes");
    if (!shapes.is_array() || shapes.size() != expected.size()) {
      throw ValidationError("shape table has " + std::to_string(shapes.size()) +
                                " blocks, config implies " + std::to_string(expected.size()),
                            "shapes");
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
      const json& b = shapes[i];
      ParameterBlock got{b.at("name").get<std::string>(), b.at("rows").get<int>(),
                         b.at("cols").get<int>(), b.at("offset").get<Eigen::Index>()};
      if (!(got == expected[i])) {
        throw ValidationError("shape table entry '" + got.name + "' does not match layout (" +
                                  expected[i].name + " " + std::to_string(expected[i].rows) +
                                  "x" + std::to_string(expected[i].cols) + ")",
                              "shapes[" + std::to_string(i) + "]");
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint header: ") + e.what(), "header");
  }

  auto net = std::make_shared<TinyDenoiserNet>(cfg, schedule, std::move(stats));
  const auto count = in.get<std::uint64_t>("parameter count");
  if (count != static_cast<std::uint64_t>(net->parameter_count())) {
    throw ValidationError("checkpoint stores " + std::to_string(count) +
                              " parameters, layout needs " + std::to_string(net->parameter_count()),
                          "parameters");
  }
  Eigen::VectorXd params(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < params.size(); ++i) params[i] = in.get<double>("parameters");
  if (!in.at_end()) throw ParseError("trailing bytes after parameters", in.position());
  net->set_parameters(std::move(params));
  c.net = std::move(net);
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_text_file(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_text_file(path));
}

}  // namespace blockdetail
