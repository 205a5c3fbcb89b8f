#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

namespace roadsr {

struct AdamHyper {
  double lr = 1e-4;
  double weight_decay = 5e-4;
  int epochs = 60;
  int batch = 32;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
};

/// Adam with decoupled weight decay; decay applies only to tensors flagged in `decay`.
class Adam {
 public:
  Adam(std::vector<Eigen::MatrixXd*> params, std::vector<bool> decay, const AdamHyper& hyper)
      : params_(std::move(params)), decay_(std::move(decay)), hy_(hyper) {
    for (auto* p : params_) {
      m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
  }

  /// grads[i] is the mean gradient for params[i].
  void step(const std::vector<const Eigen::MatrixXd*>& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(hy_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(hy_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const Eigen::MatrixXd& g = *grads[i];
      m_[i] = hy_.beta1 * m_[i] + (1.0 - hy_.beta1) * g;
      v_[i] = hy_.beta2 * v_[i] + (1.0 - hy_.beta2) * g.cwiseProduct(g);
      Eigen::MatrixXd& w = *params_[i];
      if (decay_[i]) w *= (1.0 - hy_.lr * hy_.weight_decay);
      w.array() -= hy_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + hy_.eps);
    }
  }

 private:
  std::vector<Eigen::MatrixXd*> params_;
  std::vector<bool> decay_;
  AdamHyper hy_;
  std::vector<Eigen::MatrixXd> m_, v_;
  long t_ = 0;
};

}  // namespace roadsr
