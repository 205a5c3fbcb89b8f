#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace roadsr {

struct PredictionRecord {
  std::vector<double> class_scores;
  int predicted = 0;
  int gt = 0;
  std::int64_t sample_id = 0;
  std::int64_t frame_id = 0;
};

/// Record whose prediction is the argmax of the scores (ties to the lowest index).
PredictionRecord make_record(std::vector<double> scores, int gt, std::int64_t sample_id = 0,
                             std::int64_t frame_id = 0);

struct ClassMetrics {
  double precision = 0.0;  // TP / (TP + FP) at argmax decisions
  double ap = 0.0;
  std::size_t support = 0;
  std::size_t predicted = 0;
  bool no_predictions = false;  // precision forced to 0
};

struct MetricsReport {
  double macro_avg_precision = 0.0;
  double micro_avg_precision = 0.0;
  double map = 0.0;
  double accuracy = 0.0;
  std::size_t n_records = 0;
  std::map<int, ClassMetrics> per_class;
};

/// Area under the precision-recall curve with max-precision-to-the-right
/// interpolation; records sharing a score enter the ranking together.
double average_precision(const std::vector<double>& scores, const std::vector<bool>& positive);

/// Macro and mAP average over classes with support > 0.
MetricsReport compute_metrics(const std::vector<PredictionRecord>& records, int n_classes);

/// Fixed key names; class_names (if given) label the per_class entries.
nlohmann::ordered_json to_json(const MetricsReport& r, const std::vector<std::string>& class_names = {});

}  // namespace roadsr
