#include "roadsr/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "roadsr/geometry.hpp"

namespace roadsr {

PredictionRecord make_record(std::vector<double> scores, int gt, std::int64_t sample_id, std::int64_t frame_id) {
  if (scores.empty()) throw ContractError("prediction record needs scores");
  int best = 0;
  for (int i = 1; i < static_cast<int>(scores.size()); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return {std::move(scores), best, gt, sample_id, frame_id};
}

double average_precision(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw ContractError("average_precision: length mismatch");
  const auto n_pos = static_cast<double>(std::count(positive.begin(), positive.end(), true));
  if (n_pos == 0) return 0.0;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<double> recall, precision;
  double tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += positive[order[j]] ? 1 : 0;
      seen += 1;
      ++j;
    }
    recall.push_back(tp / n_pos);
    precision.push_back(tp / seen);
    i = j;
  }
  for (std::size_t k = precision.size(); k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t k = 0; k < recall.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

MetricsReport compute_metrics(const std::vector<PredictionRecord>& records, int n_classes) {
  if (records.empty()) throw ContractError("compute_metrics: no records");
  if (n_classes < 1) throw ContractError("compute_metrics: n_classes must be positive");
  for (const auto& r : records) {
    if (static_cast<int>(r.class_scores.size()) != n_classes) throw ContractError("compute_metrics: n_classes mismatch");
    if (r.gt < 0 || r.gt >= n_classes || r.predicted < 0 || r.predicted >= n_classes) {
      throw ContractError("compute_metrics: class index out of range");
    }
  }
  MetricsReport rep;
  rep.n_records = records.size();
  std::vector<std::size_t> tp(n_classes, 0), pred(n_classes, 0), support(n_classes, 0);
  std::size_t correct = 0;
  for (const auto& r : records) {
    pred[r.predicted]++;
    support[r.gt]++;
    if (r.predicted == r.gt) {
      tp[r.gt]++;
      correct++;
    }
  }
  rep.accuracy = static_cast<double>(correct) / static_cast<double>(records.size());
  rep.micro_avg_precision = rep.accuracy;
  double macro = 0.0, map = 0.0;
  int supported = 0;
  for (int c = 0; c < n_classes; ++c) {
    ClassMetrics m;
    m.support = support[c];
    m.predicted = pred[c];
    m.no_predictions = pred[c] == 0;
    m.precision = pred[c] == 0 ? 0.0 : static_cast<double>(tp[c]) / static_cast<double>(pred[c]);
    std::vector<double> s;
    std::vector<bool> pos;
    s.reserve(records.size());
    pos.reserve(records.size());
    for (const auto& r : records) {
      s.push_back(r.class_scores[c]);
      pos.push_back(r.gt == c);
    }
    m.ap = average_precision(s, pos);
    if (m.support > 0) {
      macro += m.precision;
      map += m.ap;
      ++supported;
    }
    rep.per_class[c] = m;
  }
  rep.macro_avg_precision = macro / supported;
  rep.map = map / supported;
  return rep;
}

nlohmann::ordered_json to_json(const MetricsReport& r, const std::vector<std::string>& class_names) {
  nlohmann::ordered_json j;
  j["macro_avg_precision"] = r.macro_avg_precision;
  j["micro_avg_precision"] = r.micro_avg_precision;
  j["map"] = r.map;
  j["accuracy"] = r.accuracy;
  j["n_records"] = r.n_records;
  nlohmann::ordered_json pc = nlohmann::ordered_json::object();
  for (const auto& [c, m] : r.per_class) {
    const std::string key = c < static_cast<int>(class_names.size()) ? class_names[c] : std::to_string(c);
    pc[key] = {{"precision", m.precision},
               {"ap", m.ap},
               {"support", m.support},
               {"predicted", m.predicted},
               {"no_predictions", m.no_predictions}};
  }
  j["per_class"] = pc;
  return j;
}

}  // namespace roadsr
