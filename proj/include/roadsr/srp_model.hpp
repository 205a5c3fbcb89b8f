#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "roadsr/geometry.hpp"
#include "roadsr/optim.hpp"

namespace roadsr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct SrpConfig {
  int t_e = 3;
  int t_d = 5;
  int feature_dim = 146;
  int hidden_dim = 64;
  int logit_embed_dim = 16;
  static constexpr int kRegionsIntersection = 13;
  static constexpr int kRegionsNon = 5;

  void validate() const;
  /// Region count of classifier i (0 = non-intersection, 1 = intersection).
  static constexpr int regions(int i) { return i == 0 ? kRegionsNon : kRegionsIntersection; }
};

/// Minimal gated unit: u = sigmoid(W_u x + U_u h + b_u), c = tanh(W_c x + U_c h + b_c),
/// h' = (1 - u) h + u c.
struct GatedCell {
  MatrixXd Wu, Uu, bu, Wc, Uc, bc;
};

struct SrpParams {
  GatedCell enc;  // input = [feature; fed-back summary]
  GatedCell dec;  // input = previous fused logit embedding
  MatrixXd topo_W, topo_b;
  std::array<MatrixXd, 2> reg_W, reg_b;  // index 0: 5 regions, 1: 13 regions
  std::array<MatrixXd, 2> exp_Q, exp_q;  // logit expansion maps -> logit_embed_dim

  struct Entry {
    std::string name;
    MatrixXd* tensor;
    bool is_bias;
  };
  std::vector<Entry> tensors();
  std::vector<std::pair<std::string, const MatrixXd*>> tensors() const;

  static SrpParams zeros(const SrpConfig& cfg);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  static SrpParams random(const SrpConfig& cfg, std::uint64_t seed);

  void set_zero();
  std::size_t parameter_count() const;
  bool all_finite() const;
  /// FNV-1a over the raw bytes of every tensor in a fixed order.
  std::uint64_t checksum() const;
  bool operator==(const SrpParams& o) const;
};

struct DecoderStep {
  VectorXd g_prev, d_in, u, c, g;
  std::array<VectorXd, 2> y;
  VectorXd e;
};

struct EncoderStep {
  VectorXd x, h_prev, u, c, h;
  VectorXd z;
  std::array<VectorXd, 2> y;
  std::vector<DecoderStep> decoder;  // unrolled from h
  VectorXd summary;                  // mean decoder embedding, fed to the next step
};

/// Every intermediate of a forward pass.
struct SrpTrace {
  std::vector<EncoderStep> steps;
};

struct SrpOutputs {
  std::vector<VectorXd> z;                   // per encoder step, 2 logits
  std::array<std::vector<VectorXd>, 2> y_e;  // per encoder step, per classifier
  std::array<std::vector<VectorXd>, 2> y_d;  // per decoder step of the last encoder step
  std::vector<VectorXd> h;                   // encoder hidden states; h.back() is the accumulator state

  const VectorXd& accumulator() const { return h.back(); }
};

struct TrainingTarget {
  std::vector<int> topology;        // o_t per encoder step
  std::vector<int> current;         // s_t per encoder step, -1 = masked
  std::vector<int> future;          // s_{t+m} for m in [0, t_d), -1 = masked
};

struct LossBreakdown {
  double total = 0.0;
  double topology = 0.0;
  double encoder_region = 0.0;
  double decoder_region = 0.0;
};

using Window = std::vector<VectorXd>;

/// Embedding of both classifiers' logits fed to the next decoder step.
VectorXd expand_logits(const SrpParams& p, const VectorXd& y0, const VectorXd& y1);

SrpTrace forward_trace(const SrpParams& p, const SrpConfig& cfg, const Window& window);
SrpOutputs outputs_of(const SrpTrace& trace);
SrpOutputs forward(const SrpParams& p, const SrpConfig& cfg, const Window& window);

double softmax_cross_entropy(const VectorXd& logits, int target);
VectorXd softmax(const VectorXd& logits);

LossBreakdown srp_loss(const SrpOutputs& out, const TrainingTarget& target, const SrpConfig& cfg);

/// Analytic gradient of srp_loss; the returned params hold d loss / d theta.
SrpParams backward(const SrpParams& p, const SrpConfig& cfg, const Window& window, const TrainingTarget& target,
                   LossBreakdown* loss = nullptr);

struct SrpPrediction {
  int topology_class = 0;
  int current_region = 0;            // index in the selected vocabulary
  std::vector<int> future_regions;   // t_d entries
  std::array<double, 2> topology_prob{};
};

/// Index of the largest entry; ties go to the lowest index.
int argmax(const VectorXd& v);

SrpPrediction predict(const SrpParams& p, const SrpConfig& cfg, const Window& window);

struct TrainSample {
  Window window;
  TrainingTarget target;
};

struct TrainResult {
  SrpParams params;
  std::vector<double> epoch_loss;  // mean per-sample loss seen during each epoch
};

/// Adam with decoupled weight decay on weight matrices. Mini-batch gradients
/// are summed in batch order, so results are bit-reproducible.
TrainResult train(const std::vector<TrainSample>& data, const SrpConfig& cfg, const AdamHyper& hyper,
                  const SrpParams* init = nullptr);

double mean_loss(const SrpParams& p, const SrpConfig& cfg, const std::vector<TrainSample>& data);

}  // namespace roadsr
