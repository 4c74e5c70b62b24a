#include "blockdetail/diffusion/network.h"

#include "blockdetail/common/error.h"
#include "blockdetail/common/rng.h"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <utility>

namespace blockdetail {

namespace {

using Eigen::Map;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Map<const MatrixXd> view(const VectorXd& p, const ParameterBlock& b) {
  return {p.data() + b.offset, b.rows, b.cols};
}

Map<MatrixXd> view(VectorXd& p, const ParameterBlock& b) {
  return {p.data() + b.offset, b.rows, b.cols};
}

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

}  // namespace

std::string_view to_string(DenoiserMode mode) {
  return mode == DenoiserMode::unconditioned ? "U" : "R";
}

DenoiserMode parse_denoiser_mode(std::string_view text) {
  if (text == "U" || text == "u" || text == "unconditioned") return DenoiserMode::unconditioned;
  if (text == "R" || text == "r" || text == "retiming") return DenoiserMode::retiming;
  throw ValidationError("unknown denoiser mode '" + std::string(text) + "' (expected U or R)",
                        "mode");
}

int NetworkConfig::input_size() const {
  const int per_clip = output_size();
  return (mode == DenoiserMode::retiming ? 2 * per_clip : per_clip) + time_embedding;
}

void NetworkConfig::validate() const {
  if (shape.frames < 1 || shape.joints < 1 || shape.dims < 1) {
    throw ValidationError("network shape must be positive", "network.shape");
  }
  if (hidden < 1) throw ValidationError("hidden width must be positive", "network.hidden");
  if (depth < 0) throw ValidationError("depth must be non-negative", "network.depth");
  if (time_embedding < 2 || time_embedding % 2 != 0) {
    throw ValidationError("time embedding size must be even and >= 2", "network.time_embedding");
  }
  if (!(temporal_length >= 0.0) || !std::isfinite(temporal_length)) {
    throw ValidationError("temporal length must be finite and >= 0", "network.temporal_length");
  }
}

ChannelStats ChannelStats::fit(std::span<const MotionArray> clips, double min_scale) {
  if (clips.empty()) throw ValidationError("no clips to fit channel statistics", "dataset");
  const int channels = clips.front().channels();
  VectorXd sum = VectorXd::Zero(channels);
  VectorXd sum_sq = VectorXd::Zero(channels);
  double count = 0.0;
  for (const MotionArray& clip : clips) {
    if (!(clip.shape() == clips.front().shape())) {
      throw ValidationError("clips differ in shape", "dataset");
    }
    sum += clip.data().colwise().sum().transpose();
    count += clip.frames();
  }
  ChannelStats stats;
  stats.mean = sum / count;
  for (const MotionArray& clip : clips) {
    sum_sq += (clip.data().rowwise() - stats.mean.transpose()).array().square().matrix().colwise().sum().transpose();
  }
  stats.scale = (sum_sq / count).cwiseSqrt().cwiseMax(min_scale);
  return stats;
}

Eigen::VectorXd timestep_embedding(int t, int steps, int size) {
  const int half = size / 2;
  const double tau = 1000.0 * t / steps;
  VectorXd e(size);
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    e[i] = std::sin(tau * freq);
    e[half + i] = std::cos(tau * freq);
  }
  return e;
}

std::vector<ParameterBlock> TinyDenoiserNet::layout(const NetworkConfig& config) {
  config.validate();
  std::vector<ParameterBlock> blocks;
  Eigen::Index offset = 0;
  auto add = [&](std::string name, int rows, int cols) {
    blocks.push_back({std::move(name), rows, cols, offset});
    offset += Eigen::Index{rows} * cols;
  };
  const int h = config.hidden;
  add("in.W", h, config.input_size());
  add("in.b", h, 1);
  for (int l = 0; l < config.depth; ++l) {
    const std::string p = "block" + std::to_string(l);
    add(p + ".W", h, h);
    add(p + ".V", h, config.time_embedding);
    add(p + ".b", h, 1);
  }
  add("out.W", config.output_size(), h);
  add("out.b", config.output_size(), 1);
  return blocks;
}

TinyDenoiserNet::TinyDenoiserNet(NetworkConfig config, NoiseSchedule schedule, ChannelStats stats)
    : config_(std::move(config)),
      schedule_(std::move(schedule)),
      stats_(std::move(stats)),
      blocks_(layout(config_)) {
  const int channels = config_.shape.channels();
  if (stats_.mean.size() != channels || stats_.scale.size() != channels) {
    throw ValidationError("channel statistics do not match network shape", "stats");
  }
  if (!stats_.mean.allFinite() || !(stats_.scale.array() > 0.0).all()) {
    throw ValidationError("channel statistics must be finite with positive scale", "stats");
  }
  const ParameterBlock& last = blocks_.back();
  params_ = VectorXd::Zero(last.offset + last.size());

  const int frames = config_.shape.frames;
  if (config_.temporal_length > 0.0) {
    MatrixXd k(frames, frames);
    const double l2 = config_.temporal_length * config_.temporal_length;
    for (int a = 0; a < frames; ++a) {
      for (int b = 0; b < frames; ++b) k(a, b) = std::exp(-0.5 * (a - b) * (a - b) / l2);
    }
    k.diagonal().array() += 1e-6;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(k);
    basis_ = eig.eigenvectors();
    eigenvalues_ = eig.eigenvalues().cwiseMax(0.0);
  } else {
    basis_ = MatrixXd::Identity(frames, frames);
    eigenvalues_ = VectorXd::Ones(frames);
  }
}

void TinyDenoiserNet::set_parameters(Eigen::VectorXd params) {
  if (params.size() != params_.size()) {
    throw ValidationError("parameter vector has " + std::to_string(params.size()) +
                              " entries, network expects " + std::to_string(params_.size()),
                          "parameters");
  }
  if (!params.allFinite()) throw ValidationError("non-finite parameter", "parameters");
  params_ = std::move(params);
}

void TinyDenoiserNet::initialize(std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal;
  params_.setZero();
  for (const ParameterBlock& b : blocks_) {
    if (b.cols == 1 || b.name.rfind("out.", 0) == 0) continue;
    double scale = 1.0 / std::sqrt(double(b.cols));
    if (b.name.find(".W") != std::string::npos && b.name != "in.W") scale *= 0.5;
    auto m = view(params_, b);
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = scale * normal(rng);
    }
  }
}

struct TinyDenoiserNet::Workspace {
  Eigen::Index items = 0;
  MatrixXd input;                // I x B
  MatrixXd embed;                // E x B
  std::vector<MatrixXd> hidden;  // depth + 1 of H x B
  std::vector<MatrixXd> pre;     // depth of H x B
  MatrixXd head;                 // O x B
  MatrixXd base;                 // O x B, m + G (y - sqrt(ab) m)
  MatrixXd spread;               // C x B, k * s
};

void TinyDenoiserNet::forward(std::span<const MotionArray> noisy,
                              std::span<const Condition> conditions, std::span<const int> ts,
                              Workspace& ws) const {
  const Eigen::Index items = static_cast<Eigen::Index>(noisy.size());
  const bool retiming = config_.mode == DenoiserMode::retiming;
  if (ts.size() != 1 && static_cast<Eigen::Index>(ts.size()) != items) {
    throw ValidationError("need one timestep or one per item", "t");
  }
  if (retiming && static_cast<Eigen::Index>(conditions.size()) != items) {
    throw ValidationError("retiming network needs one condition per item", "conditions");
  }
  if (!retiming && !conditions.empty()) {
    throw ValidationError("unconditioned network takes no condition", "conditions");
  }
  for (int t : ts) check_denoiser_inputs(schedule_, config_.shape, noisy, t);

  const int frames = config_.shape.frames;
  const int channels = config_.shape.channels();
  const int out_size = config_.output_size();
  ws.items = items;
  ws.input.resize(config_.input_size(), items);
  ws.embed.resize(config_.time_embedding, items);
  ws.base.resize(out_size, items);
  ws.spread.resize(channels, items);
  MatrixXd centered(frames, channels);

  for (Eigen::Index i = 0; i < items; ++i) {
    const int t = ts.size() == 1 ? ts[0] : ts[i];
    const double ab = schedule_.alpha_bar(t);
    const double root_ab = std::sqrt(ab);
    ws.embed.col(i) = timestep_embedding(t, schedule_.steps(), config_.time_embedding);
    const MatrixXd& y = noisy[i].data();
    for (int c = 0; c < channels; ++c) {
      const double m = stats_.mean[c];
      const double s = stats_.scale[c];
      const double marginal = ab * s * s + 1.0 - ab;
      const double inv_std = 1.0 / std::sqrt(marginal);
      ws.spread(c, i) = std::sqrt((1.0 - ab) / marginal) * s;
      for (int f = 0; f < frames; ++f) {
        centered(f, c) = y(f, c) - root_ab * m;
        ws.input(Eigen::Index{c} * frames + f, i) = centered(f, c) * inv_std;
      }
      if (retiming) {
        const MatrixXd& x = conditions[i].frames.data();
        if (!(conditions[i].frames.shape() == config_.shape)) {
          throw ValidationError("condition shape does not match network", "conditions");
        }
        for (int f = 0; f < frames; ++f) {
          ws.input(out_size + Eigen::Index{c} * frames + f, i) = (x(f, c) - m) / s;
        }
      }
    }
    ws.input.col(i).tail(config_.time_embedding) = ws.embed.col(i);

    MatrixXd modes = basis_.transpose() * centered;
    for (int c = 0; c < channels; ++c) {
      const double s2 = stats_.scale[c] * stats_.scale[c];
      for (int j = 0; j < frames; ++j) {
        const double l = eigenvalues_[j];
        modes(j, c) *= root_ab * s2 * l / (ab * s2 * l + 1.0 - ab);
      }
    }
    Eigen::Map<MatrixXd> base(ws.base.col(i).data(), frames, channels);
    base.noalias() = basis_ * modes;
    base.rowwise() += stats_.mean.transpose();
  }

  std::size_t b = 0;
  const auto& blocks = blocks_;
  ws.hidden.resize(config_.depth + 1);
  ws.pre.resize(config_.depth);
  ws.hidden[0].noalias() = view(params_, blocks[b]) * ws.input;
  ws.hidden[0].colwise() += view(params_, blocks[b + 1]).col(0);
  b += 2;
  for (int l = 0; l < config_.depth; ++l, b += 3) {
    MatrixXd& a = ws.pre[l];
    a.noalias() = view(params_, blocks[b]) * ws.hidden[l];
    a.noalias() += view(params_, blocks[b + 1]) * ws.embed;
    a.colwise() += view(params_, blocks[b + 2]).col(0);
    ws.hidden[l + 1] = ws.hidden[l] + a.unaryExpr([](double v) { return v * sigmoid(v); });
  }
  ws.head.noalias() = view(params_, blocks[b]) * ws.hidden[config_.depth];
  ws.head.colwise() += view(params_, blocks[b + 1]).col(0);
}

void TinyDenoiserNet::predict(std::span<const MotionArray> noisy,
                              std::span<const Condition> conditions, std::span<const int> ts,
                              std::span<MotionArray> out) const {
  if (out.size() != noisy.size()) throw ValidationError("output batch size mismatch");
  Workspace ws;
  forward(noisy, conditions, ts, ws);
  const int frames = config_.shape.frames;
  const int channels = config_.shape.channels();
  for (Eigen::Index i = 0; i < ws.items; ++i) {
    if (!(out[i].shape() == config_.shape)) out[i] = MotionArray(config_.shape);
    MatrixXd& x0 = out[i].data();
    for (int c = 0; c < channels; ++c) {
      const double k = ws.spread(c, i);
      for (int f = 0; f < frames; ++f) {
        const Eigen::Index o = Eigen::Index{c} * frames + f;
        x0(f, c) = ws.base(o, i) + k * ws.head(o, i);
      }
    }
  }
}

double TinyDenoiserNet::loss(std::span<const MotionArray> noisy,
                             std::span<const Condition> conditions, std::span<const int> ts,
                             std::span<const MotionArray> targets,
                             Eigen::VectorXd* gradient) const {
  if (targets.size() != noisy.size()) throw ValidationError("target batch size mismatch");
  Workspace ws;
  forward(noisy, conditions, ts, ws);
  const int frames = config_.shape.frames;
  const int channels = config_.shape.channels();
  const double norm = 1.0 / (double(ws.items) * config_.output_size());

  MatrixXd d_head(ws.head.rows(), ws.items);
  double total = 0.0;
  for (Eigen::Index i = 0; i < ws.items; ++i) {
    if (!(targets[i].shape() == config_.shape)) {
      throw ValidationError("target shape does not match network", "targets");
    }
    const MatrixXd& target = targets[i].data();
    for (int c = 0; c < channels; ++c) {
      const double s = stats_.scale[c];
      const double k = ws.spread(c, i);
      for (int f = 0; f < frames; ++f) {
        const Eigen::Index o = Eigen::Index{c} * frames + f;
        const double diff = ws.base(o, i) + k * ws.head(o, i) - target(f, c);
        total += diff * diff / (s * s);
        d_head(o, i) = 2.0 * norm * diff * k / (s * s);
      }
    }
  }
  const double value = total * norm;
  if (!gradient) return value;

  gradient->resize(params_.size());
  VectorXd& grad = *gradient;
  const int depth = config_.depth;
  std::size_t b = blocks_.size() - 2;
  view(grad, blocks_[b]).noalias() = d_head * ws.hidden[depth].transpose();
  view(grad, blocks_[b + 1]).col(0) = d_head.rowwise().sum();
  MatrixXd d_hidden = view(params_, blocks_[b]).transpose() * d_head;

  for (int l = depth - 1; l >= 0; --l) {
    b = 2 + 3 * static_cast<std::size_t>(l);
    const MatrixXd d_pre = d_hidden.cwiseProduct(ws.pre[l].unaryExpr([](double a) {
      const double s = sigmoid(a);
      return s * (1.0 + a * (1.0 - s));
    }));
    view(grad, blocks_[b]).noalias() = d_pre * ws.hidden[l].transpose();
    view(grad, blocks_[b + 1]).noalias() = d_pre * ws.embed.transpose();
    view(grad, blocks_[b + 2]).col(0) = d_pre.rowwise().sum();
    d_hidden.noalias() += view(params_, blocks_[b]).transpose() * d_pre;
  }
  view(grad, blocks_[0]).noalias() = d_hidden * ws.input.transpose();
  view(grad, blocks_[1]).col(0) = d_hidden.rowwise().sum();
  return value;
}

NetworkDenoiserU::NetworkDenoiserU(std::shared_ptr<const TinyDenoiserNet> net)
    : net_(std::move(net)) {
  if (!net_ || net_->config().mode != DenoiserMode::unconditioned) {
    throw ValidationError("U denoiser needs an unconditioned network", "model");
  }
}

void NetworkDenoiserU::predict_batch(std::span<const MotionArray> noisy, int t,
                                     std::span<MotionArray> out) const {
  const int ts[] = {t};
  net_->predict(noisy, {}, ts, out);
}

NetworkDenoiserR::NetworkDenoiserR(std::shared_ptr<const TinyDenoiserNet> net)
    : net_(std::move(net)) {
  if (!net_ || net_->config().mode != DenoiserMode::retiming) {
    throw ValidationError("R denoiser needs a retiming network", "model");
  }
}

void NetworkDenoiserR::predict_batch(std::span<const Condition> conditions,
                                     std::span<const MotionArray> noisy, int t,
                                     std::span<MotionArray> out) const {
  if (conditions.size() != noisy.size()) throw ValidationError("batch size mismatch");
  const int ts[] = {t};
  net_->predict(noisy, conditions, ts, out);
}

}  // namespace blockdetail
