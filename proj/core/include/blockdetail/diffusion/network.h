#pragma once

#include "blockdetail/diffusion/denoiser.h"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace blockdetail {

/// U takes only (t, Y_t); R additionally reads the dense condition X.
enum class DenoiserMode { unconditioned, retiming };

std::string_view to_string(DenoiserMode mode);
/// Accepts "U"/"unconditioned" and "R"/"retiming".
DenoiserMode parse_denoiser_mode(std::string_view text);

struct NetworkConfig {
  DenoiserMode mode = DenoiserMode::unconditioned;
  ArrayShape shape{60, 16, 3};
  int hidden = 256;
  int depth = 4;
  int time_embedding = 32;
  double temporal_length = 0.0;  // frames; 0 treats frames as independent

  int input_size() const;
  int output_size() const { return shape.channels() * shape.frames; }
  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Per-channel location/scale used to standardize network inputs and to
/// parameterize its output.
struct ChannelStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  /// Mean and standard deviation over all frames of all clips, with the
  /// scale floored at `min_scale`.
  static ChannelStats fit(std::span<const MotionArray> clips, double min_scale = 0.02);

  friend bool operator==(const ChannelStats& a, const ChannelStats& b) {
    return a.mean.size() == b.mean.size() && a.mean == b.mean &&
           a.scale.size() == b.scale.size() && a.scale == b.scale;
  }
};

struct ParameterBlock {
  std::string name;
  int rows = 0;
  int cols = 0;
  Eigen::Index offset = 0;

  Eigen::Index size() const { return Eigen::Index{rows} * cols; }

  friend bool operator==(const ParameterBlock&, const ParameterBlock&) = default;
};

/// Whole-clip residual MLP x0-predictor.
///
/// Input: the noisy clip standardized per channel by its marginal scale
/// sqrt(ab s^2 + 1 - ab), the standardized condition (R only) and a
/// sinusoidal timestep embedding e. Trunk: h = W_in x + b, then `depth`
/// blocks h <- h + silu(W h + V e + b). The head output r is read as a
/// standardized correction on top of a fixed Gaussian estimate:
///   x0 = m + G (y - sqrt(ab) m) + k s r,   k = sqrt((1 - ab) / (ab s^2 + 1 - ab)).
/// Per channel, G is the posterior-mean gain of a prior with covariance
/// s^2 K, K the squared-exponential correlation over frames with length
/// `temporal_length`: with K = Q diag(l) Q^T,
///   G = Q diag(sqrt(ab) s^2 l / (ab s^2 l + 1 - ab)) Q^T.
/// Length 0 gives K = I, the per-entry Wiener gain. The head starts at zero,
/// so an untrained net is exactly this Gaussian estimate.
class TinyDenoiserNet {
 public:
  TinyDenoiserNet(NetworkConfig config, NoiseSchedule schedule, ChannelStats stats);

  static std::vector<ParameterBlock> layout(const NetworkConfig& config);

  const NetworkConfig& config() const { return config_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  const ChannelStats& stats() const { return stats_; }
  const std::vector<ParameterBlock>& blocks() const { return blocks_; }

  Eigen::Index parameter_count() const { return params_.size(); }
  const Eigen::VectorXd& parameters() const { return params_; }
  /// Throws ValidationError on size mismatch or non-finite entries.
  void set_parameters(Eigen::VectorXd params);

  /// Deterministic random initialization of the trunk; head set to zero.
  void initialize(std::uint64_t seed);

  /// x0 predictions for a batch. `conditions` must be empty for U and have
  /// one entry per item for R. `ts` holds one timestep per item or a single
  /// shared one.
  void predict(std::span<const MotionArray> noisy, std::span<const Condition> conditions,
               std::span<const int> ts, std::span<MotionArray> out) const;

  /// Mean over items and entries of ((x0 - target) / s)^2. When `gradient`
  /// is non-null it receives d loss / d parameters (overwritten).
  double loss(std::span<const MotionArray> noisy, std::span<const Condition> conditions,
              std::span<const int> ts, std::span<const MotionArray> targets,
              Eigen::VectorXd* gradient) const;

 private:
  struct Workspace;
  void forward(std::span<const MotionArray> noisy, std::span<const Condition> conditions,
               std::span<const int> ts, Workspace& ws) const;

  NetworkConfig config_;
  NoiseSchedule schedule_;
  ChannelStats stats_;
  std::vector<ParameterBlock> blocks_;
  Eigen::VectorXd params_;
  Eigen::MatrixXd basis_;        // Q, F x F
  Eigen::VectorXd eigenvalues_;  // l
};

/// Sinusoidal embedding of t in `size` dims (half sines, half cosines).
Eigen::VectorXd timestep_embedding(int t, int steps, int size);

class NetworkDenoiserU final : public DenoiserU {
 public:
  explicit NetworkDenoiserU(std::shared_ptr<const TinyDenoiserNet> net);

  const NoiseSchedule& schedule() const override { return net_->schedule(); }
  ArrayShape shape() const override { return net_->config().shape; }
  std::string name() const override { return "network-u"; }
  void predict_batch(std::span<const MotionArray> noisy, int t,
                     std::span<MotionArray> out) const override;

  const TinyDenoiserNet& net() const { return *net_; }

 private:
  std::shared_ptr<const TinyDenoiserNet> net_;
};

class NetworkDenoiserR final : public DenoiserR {
 public:
  explicit NetworkDenoiserR(std::shared_ptr<const TinyDenoiserNet> net);

  const NoiseSchedule& schedule() const override { return net_->schedule(); }
  ArrayShape shape() const override { return net_->config().shape; }
  std::string name() const override { return "network-r"; }
  void predict_batch(std::span<const Condition> conditions, std::span<const MotionArray> noisy,
                     int t, std::span<MotionArray> out) const override;

  const TinyDenoiserNet& net() const { return *net_; }

 private:
  std::shared_ptr<const TinyDenoiserNet> net_;
};

}  // namespace blockdetail
