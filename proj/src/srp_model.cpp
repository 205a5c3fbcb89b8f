#include "roadsr/srp_model.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "roadsr/scene_sim.hpp"

namespace roadsr {

void SrpConfig::validate() const {
  if (t_e < 1 || t_d < 1) throw ContractError("t_e and t_d must be >= 1");
  if (feature_dim < 1 || hidden_dim < 1 || logit_embed_dim < 1) throw ContractError("SRP dimensions must be >= 1");
}

namespace {

GatedCell cell_shape(int in, int hidden) {
  return {MatrixXd::Zero(hidden, in), MatrixXd::Zero(hidden, hidden), MatrixXd::Zero(hidden, 1),
          MatrixXd::Zero(hidden, in), MatrixXd::Zero(hidden, hidden), MatrixXd::Zero(hidden, 1)};
}

VectorXd sigmoid(const VectorXd& v) { return (1.0 + (-v.array()).exp()).inverse().matrix(); }

}  // namespace

std::vector<SrpParams::Entry> SrpParams::tensors() {
  std::vector<Entry> t;
  auto cell = [&](const std::string& prefix, GatedCell& c) {
    t.push_back({prefix + ".Wu", &c.Wu, false});
    t.push_back({prefix + ".Uu", &c.Uu, false});
    t.push_back({prefix + ".bu", &c.bu, true});
    t.push_back({prefix + ".Wc", &c.Wc, false});
    t.push_back({prefix + ".Uc", &c.Uc, false});
    t.push_back({prefix + ".bc", &c.bc, true});
  };
  cell("enc", enc);
  cell("dec", dec);
  t.push_back({"topo.W", &topo_W, false});
  t.push_back({"topo.b", &topo_b, true});
  for (int i = 0; i < 2; ++i) {
    const std::string s = std::to_string(i);
    t.push_back({"region" + s + ".W", &reg_W[i], false});
    t.push_back({"region" + s + ".b", &reg_b[i], true});
    t.push_back({"expand" + s + ".Q", &exp_Q[i], false});
    t.push_back({"expand" + s + ".q", &exp_q[i], true});
  }
  return t;
}

std::vector<std::pair<std::string, const MatrixXd*>> SrpParams::tensors() const {
  std::vector<std::pair<std::string, const MatrixXd*>> out;
  for (const auto& e : const_cast<SrpParams*>(this)->tensors()) out.emplace_back(e.name, e.tensor);
  return out;
}

SrpParams SrpParams::zeros(const SrpConfig& cfg) {
  cfg.validate();
  const int h = cfg.hidden_dim, f = cfg.feature_dim, e = cfg.logit_embed_dim;
  SrpParams p;
  p.enc = cell_shape(f + e, h);
  p.dec = cell_shape(e, h);
  p.topo_W = MatrixXd::Zero(2, h);
  p.topo_b = MatrixXd::Zero(2, 1);
  for (int i = 0; i < 2; ++i) {
    const int r = SrpConfig::regions(i);
    p.reg_W[i] = MatrixXd::Zero(r, h);
    p.reg_b[i] = MatrixXd::Zero(r, 1);
    p.exp_Q[i] = MatrixXd::Zero(e, r);
    p.exp_q[i] = MatrixXd::Zero(e, 1);
  }
  return p;
}

SrpParams SrpParams::random(const SrpConfig& cfg, std::uint64_t seed) {
  SrpParams p = zeros(cfg);
  auto rng = make_rng(seed, 11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& t : p.tensors()) {
    if (t.is_bias) continue;
    const double scale = 1.0 / std::sqrt(static_cast<double>(t.tensor->cols()));
    for (Eigen::Index j = 0; j < t.tensor->cols(); ++j) {
      for (Eigen::Index i = 0; i < t.tensor->rows(); ++i) (*t.tensor)(i, j) = scale * u(rng);
    }
  }
  return p;
}

void SrpParams::set_zero() {
  for (auto& t : tensors()) t.tensor->setZero();
}

std::size_t SrpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors()) n += static_cast<std::size_t>(t->size());
  return n;
}

bool SrpParams::all_finite() const {
  for (const auto& [name, t] : tensors()) {
    if (!t->allFinite()) return false;
  }
  return true;
}

std::uint64_t SrpParams::checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& [name, t] : tensors()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(t->data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(t->size()) * sizeof(double); ++i) {
      h = (h ^ bytes[i]) * 1099511628211ull;
    }
  }
  return h;
}

bool SrpParams::operator==(const SrpParams& o) const {
  const auto a = tensors();
  const auto b = o.tensors();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].second->rows() != b[i].second->rows() || a[i].second->cols() != b[i].second->cols()) return false;
    if (*a[i].second != *b[i].second) return false;
  }
  return true;
}

VectorXd expand_logits(const SrpParams& p, const VectorXd& y0, const VectorXd& y1) {
  return p.exp_Q[0] * y0 + p.exp_q[0].col(0) + p.exp_Q[1] * y1 + p.exp_q[1].col(0);
}

namespace {

void cell_forward(const GatedCell& c, const VectorXd& x, const VectorXd& h, VectorXd& u, VectorXd& cand,
                  VectorXd& out) {
  u = sigmoid(c.Wu * x + c.Uu * h + c.bu.col(0));
  cand = (c.Wc * x + c.Uc * h + c.bc.col(0)).array().tanh().matrix();
  out = ((1.0 - u.array()) * h.array() + u.array() * cand.array()).matrix();
}

// Returns d loss / d h and d loss / d x; accumulates parameter gradients.
void cell_backward(const GatedCell& c, GatedCell& g, const VectorXd& x, const VectorXd& h, const VectorXd& u,
                   const VectorXd& cand, const VectorXd& dout, VectorXd& dh, VectorXd& dx) {
  const VectorXd du = (dout.array() * (cand - h).array()).matrix();
  const VectorXd dc = (dout.array() * u.array()).matrix();
  const VectorXd dpu = (du.array() * u.array() * (1.0 - u.array())).matrix();
  const VectorXd dpc = (dc.array() * (1.0 - cand.array().square())).matrix();
  g.Wu.noalias() += dpu * x.transpose();
  g.Uu.noalias() += dpu * h.transpose();
  g.bu.col(0) += dpu;
  g.Wc.noalias() += dpc * x.transpose();
  g.Uc.noalias() += dpc * h.transpose();
  g.bc.col(0) += dpc;
  dh = (dout.array() * (1.0 - u.array())).matrix();
  dh.noalias() += c.Uu.transpose() * dpu + c.Uc.transpose() * dpc;
  dx = c.Wu.transpose() * dpu + c.Wc.transpose() * dpc;
}

std::vector<DecoderStep> decode(const SrpParams& p, const SrpConfig& cfg, const VectorXd& h0) {
  std::vector<DecoderStep> steps(static_cast<std::size_t>(cfg.t_d));
  VectorXd g = h0;
  VectorXd d = VectorXd::Zero(cfg.logit_embed_dim);
  for (auto& s : steps) {
    s.g_prev = g;
    s.d_in = d;
    cell_forward(p.dec, d, g, s.u, s.c, s.g);
    for (int i = 0; i < 2; ++i) s.y[i] = p.reg_W[i] * s.g + p.reg_b[i].col(0);
    s.e = expand_logits(p, s.y[0], s.y[1]);
    g = s.g;
    d = s.e;
  }
  return steps;
}

}  // namespace

SrpTrace forward_trace(const SrpParams& p, const SrpConfig& cfg, const Window& window) {
  cfg.validate();
  if (static_cast<int>(window.size()) != cfg.t_e) throw ContractError("window length must equal t_e");
  SrpTrace tr;
  tr.steps.resize(window.size());
  VectorXd h = VectorXd::Zero(cfg.hidden_dim);
  VectorXd a = VectorXd::Zero(cfg.logit_embed_dim);
  for (std::size_t t = 0; t < window.size(); ++t) {
    if (window[t].size() != cfg.feature_dim) throw ContractError("feature dimension mismatch");
    auto& s = tr.steps[t];
    s.x.resize(cfg.feature_dim + cfg.logit_embed_dim);
    s.x << window[t], a;
    s.h_prev = h;
    cell_forward(p.enc, s.x, h, s.u, s.c, s.h);
    s.z = p.topo_W * s.h + p.topo_b.col(0);
    for (int i = 0; i < 2; ++i) s.y[i] = p.reg_W[i] * s.h + p.reg_b[i].col(0);
    s.decoder = decode(p, cfg, s.h);
    s.summary = VectorXd::Zero(cfg.logit_embed_dim);
    for (const auto& d : s.decoder) s.summary += d.e;
    s.summary /= static_cast<double>(cfg.t_d);
    h = s.h;
    a = s.summary;
  }
  return tr;
}

SrpOutputs outputs_of(const SrpTrace& tr) {
  SrpOutputs out;
  for (const auto& s : tr.steps) {
    out.z.push_back(s.z);
    out.h.push_back(s.h);
    for (int i = 0; i < 2; ++i) out.y_e[i].push_back(s.y[i]);
  }
  for (const auto& d : tr.steps.back().decoder) {
    for (int i = 0; i < 2; ++i) out.y_d[i].push_back(d.y[i]);
  }
  return out;
}

SrpOutputs forward(const SrpParams& p, const SrpConfig& cfg, const Window& window) {
  return outputs_of(forward_trace(p, cfg, window));
}

VectorXd softmax(const VectorXd& logits) {
  const VectorXd ex = (logits.array() - logits.maxCoeff()).exp().matrix();
  return ex / ex.sum();
}

double softmax_cross_entropy(const VectorXd& logits, int target) {
  if (target < 0 || target >= logits.size()) throw ContractError("cross-entropy target out of range");
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits(target);
}

namespace {

void validate_target(const TrainingTarget& tg, const SrpConfig& cfg) {
  if (static_cast<int>(tg.topology.size()) != cfg.t_e || static_cast<int>(tg.current.size()) != cfg.t_e ||
      static_cast<int>(tg.future.size()) != cfg.t_d) {
    throw ContractError("training target shape does not match the SRP config");
  }
  for (int t = 0; t < cfg.t_e; ++t) {
    const int o = tg.topology[t];
    if (o != 0 && o != 1) throw ContractError("topology target must be 0 or 1");
    if (tg.current[t] < -1 || tg.current[t] >= SrpConfig::regions(o)) throw ContractError("region target out of range");
  }
  const int o = tg.topology.back();
  for (int m = 0; m < cfg.t_d; ++m) {
    if (tg.future[m] < -1 || tg.future[m] >= SrpConfig::regions(o)) throw ContractError("future target out of range");
  }
}

// d CE / d logits = softmax - onehot
VectorXd ce_grad(const VectorXd& logits, int target) {
  VectorXd g = softmax(logits);
  g(target) -= 1.0;
  return g;
}

int unmasked(const std::vector<int>& v) {
  return static_cast<int>(std::count_if(v.begin(), v.end(), [](int x) { return x >= 0; }));
}

}  // namespace

LossBreakdown srp_loss(const SrpOutputs& out, const TrainingTarget& tg, const SrpConfig& cfg) {
  validate_target(tg, cfg);
  if (static_cast<int>(out.z.size()) != cfg.t_e || static_cast<int>(out.y_d[0].size()) != cfg.t_d) {
    throw ContractError("outputs do not match the SRP config");
  }
  LossBreakdown l;
  for (int t = 0; t < cfg.t_e; ++t) {
    const int o = tg.topology[t];
    l.topology += softmax_cross_entropy(out.z[t], o);
    if (tg.current[t] >= 0) l.encoder_region += softmax_cross_entropy(out.y_e[o][t], tg.current[t]);
  }
  const int o = tg.topology.back();
  const int n = unmasked(tg.future);
  for (int m = 0; m < cfg.t_d; ++m) {
    if (tg.future[m] >= 0) l.decoder_region += softmax_cross_entropy(out.y_d[o][m], tg.future[m]);
  }
  if (n > 0) l.decoder_region /= n;
  l.total = l.topology + l.encoder_region + l.decoder_region;
  return l;
}

SrpParams backward(const SrpParams& p, const SrpConfig& cfg, const Window& window, const TrainingTarget& tg,
                   LossBreakdown* loss) {
  validate_target(tg, cfg);
  const SrpTrace tr = forward_trace(p, cfg, window);
  if (loss) *loss = srp_loss(outputs_of(tr), tg, cfg);
  SrpParams g = SrpParams::zeros(cfg);
  const int te = cfg.t_e, td = cfg.t_d, E = cfg.logit_embed_dim;
  const int o_last = tg.topology.back();
  const int n_future = unmasked(tg.future);

  VectorXd dh_next = VectorXd::Zero(cfg.hidden_dim);  // from step t+1's recurrence
  VectorXd da_next = VectorXd::Zero(E);               // d loss / d summary of step t
  for (int t = te - 1; t >= 0; --t) {
    const auto& s = tr.steps[t];
    VectorXd dh = dh_next;

    // Encoder heads.
    const int o = tg.topology[t];
    const VectorXd dz = ce_grad(s.z, o);
    g.topo_W.noalias() += dz * s.h.transpose();
    g.topo_b.col(0) += dz;
    dh.noalias() += p.topo_W.transpose() * dz;
    if (tg.current[t] >= 0) {
      const VectorXd dy = ce_grad(s.y[o], tg.current[t]);
      g.reg_W[o].noalias() += dy * s.h.transpose();
      g.reg_b[o].col(0) += dy;
      dh.noalias() += p.reg_W[o].transpose() * dy;
    }

    // Decoder unrolled from this step: the last one feeds the loss, earlier
    // ones feed the next encoder input through their mean embedding.
    const bool last = t == te - 1;
    const VectorXd de_summary = da_next / static_cast<double>(td);
    VectorXd dd_next = VectorXd::Zero(E);  // d loss / d input of decoder step m+1
    VectorXd dg_next = VectorXd::Zero(cfg.hidden_dim);
    for (int m = td - 1; m >= 0; --m) {
      const auto& d = s.decoder[m];
      VectorXd de = dd_next;
      if (!last) de += de_summary;
      std::array<VectorXd, 2> dy;
      for (int i = 0; i < 2; ++i) {
        dy[i] = p.exp_Q[i].transpose() * de;
        g.exp_Q[i].noalias() += de * d.y[i].transpose();
        g.exp_q[i].col(0) += de;
      }
      if (last && tg.future[m] >= 0) dy[o_last] += ce_grad(d.y[o_last], tg.future[m]) / n_future;
      VectorXd dg = dg_next;
      for (int i = 0; i < 2; ++i) {
        g.reg_W[i].noalias() += dy[i] * d.g.transpose();
        g.reg_b[i].col(0) += dy[i];
        dg.noalias() += p.reg_W[i].transpose() * dy[i];
      }
      VectorXd dgp, ddin;
      cell_backward(p.dec, g.dec, d.d_in, d.g_prev, d.u, d.c, dg, dgp, ddin);
      dg_next = dgp;
      dd_next = ddin;
    }
    dh += dg_next;

    VectorXd dhp, dx;
    cell_backward(p.enc, g.enc, s.x, s.h_prev, s.u, s.c, dh, dhp, dx);
    dh_next = dhp;
    da_next = dx.tail(E);
  }
  return g;
}

int argmax(const VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return best;
}

SrpPrediction predict(const SrpParams& p, const SrpConfig& cfg, const Window& window) {
  const SrpOutputs out = forward(p, cfg, window);
  SrpPrediction pr;
  const VectorXd pz = softmax(out.z.back());
  pr.topology_prob = {pz(0), pz(1)};
  pr.topology_class = argmax(out.z.back());
  const int o = pr.topology_class;
  pr.current_region = argmax(out.y_e[o].back());
  for (const auto& y : out.y_d[o]) pr.future_regions.push_back(argmax(y));
  return pr;
}

double mean_loss(const SrpParams& p, const SrpConfig& cfg, const std::vector<TrainSample>& data) {
  if (data.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : data) acc += srp_loss(forward(p, cfg, s.window), s.target, cfg).total;
  return acc / static_cast<double>(data.size());
}

TrainResult train(const std::vector<TrainSample>& data, const SrpConfig& cfg, const AdamHyper& hy,
                  const SrpParams* init) {
  if (data.empty()) throw ContractError("train: empty dataset");
  if (hy.batch < 1 || hy.epochs < 0 || !(hy.lr > 0.0)) throw ContractError("train: invalid hyperparameters");
  TrainResult res;
  res.params = init ? *init : SrpParams::random(cfg, hy.seed);
  std::vector<MatrixXd*> ptrs;
  std::vector<bool> decay;
  for (auto& e : res.params.tensors()) {
    ptrs.push_back(e.tensor);
    decay.push_back(!e.is_bias);
  }
  Adam opt(ptrs, decay, hy);
  auto rng = make_rng(hy.seed, 12);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  SrpParams grad = SrpParams::zeros(cfg);
  auto gt = grad.tensors();
  std::vector<const MatrixXd*> gptrs;
  for (auto& e : gt) gptrs.push_back(e.tensor);
  for (int epoch = 0; epoch < hy.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hy.batch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(hy.batch));
      grad.set_zero();
      for (std::size_t k = start; k < stop; ++k) {
        LossBreakdown l;
        const SrpParams gk = backward(res.params, cfg, data[order[k]].window, data[order[k]].target, &l);
        epoch_loss += l.total;
        const auto gkt = gk.tensors();
        for (std::size_t i = 0; i < gt.size(); ++i) *gt[i].tensor += *gkt[i].second;
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (auto& e : gt) *e.tensor *= inv;
      opt.step(gptrs);
    }
    res.epoch_loss.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  return res;
}

}  // namespace roadsr
