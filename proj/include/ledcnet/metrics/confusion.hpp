#pragma once

#include <cstdint>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ledcnet/core/errors.hpp"
#include "ledcnet/core/tensor.hpp"

namespace ledcnet {

struct ClassScores {
  double precision = 0, recall = 0, f1 = 0, iou = 0;
  bool defined = true;  // false when the class never occurs in truth or prediction
};

/// C x C count table; rows are ground truth, columns are predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int64_t num_classes)
      : c_(num_classes), counts_(static_cast<size_t>(num_classes * num_classes), 0) {
    if (num_classes < 1) throw ConfigError("confusion matrix: need at least one class");
  }

  int64_t num_classes() const { return c_; }
  int64_t count(int64_t truth, int64_t pred) const {
    return counts_[static_cast<size_t>(truth * c_ + pred)];
  }
  int64_t total() const {
    int64_t t = 0;
    for (int64_t v : counts_) t += v;
    return t;
  }

  void update(const Tensor<int32_t>& pred, const Tensor<int32_t>& target,
              std::optional<int32_t> ignore_index = std::nullopt) {
    if (!pred.same_shape(target))
      throw ShapeError("confusion update: prediction shape " + shape_str(pred.shape()) +
                       " != target shape " + shape_str(target.shape()));
    for (int64_t i = 0; i < pred.numel(); ++i) {
      const int32_t t = target[i];
      if (ignore_index && t == *ignore_index) continue;
      const int32_t p = pred[i];
      if (t < 0 || t >= c_ || p < 0 || p >= c_)
        throw DataError("confusion update: class index out of range (truth " +
                        std::to_string(t) + ", pred " + std::to_string(p) + ")");
      ++counts_[static_cast<size_t>(t * c_ + p)];
    }
  }

  /// Entrywise sum; merging per-worker matrices equals joint counting.
  void merge(const ConfusionMatrix& other) {
    if (other.c_ != c_) throw ShapeError("confusion merge: class count mismatch");
    for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  }

  double overall_accuracy() const {
    const int64_t tot = total();
    if (tot == 0) throw UndefinedMetricError("overall_accuracy: empty confusion matrix");
    int64_t diag = 0;
    for (int64_t k = 0; k < c_; ++k) diag += count(k, k);
    return static_cast<double>(diag) / static_cast<double>(tot);
  }

  ClassScores class_scores(int64_t cls) const {
    if (cls < 0 || cls >= c_)
      throw ParameterError("class_scores: class index " + std::to_string(cls) + " out of range");
    const double tp = static_cast<double>(count(cls, cls));
    double row = 0, col = 0;
    for (int64_t k = 0; k < c_; ++k) {
      row += static_cast<double>(count(cls, k));
      col += static_cast<double>(count(k, cls));
    }
    const double fn = row - tp, fp = col - tp;
    ClassScores s;
    if (row == 0 && col == 0) {
      s.defined = false;  // zero-denominator convention: report 0, flag undefined
      return s;
    }
    s.precision = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
    s.recall = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
    s.f1 = (2 * tp + fp + fn) > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    s.iou = (tp + fp + fn) > 0 ? tp / (tp + fp + fn) : 0.0;
    return s;
  }

  double iou(int64_t cls) const { return class_scores(cls).iou; }

  /// Unweighted mean over all classes, background included. Undefined classes
  /// count as zero by default ("include"); "exclude" drops them from the mean.
  double mean_iou(bool exclude_undefined = false) const {
    return mean_of(&ClassScores::iou, exclude_undefined);
  }
  double mean_f1(bool exclude_undefined = false) const {
    return mean_of(&ClassScores::f1, exclude_undefined);
  }

 private:
  double mean_of(double ClassScores::* field, bool exclude_undefined) const {
    if (total() == 0) throw UndefinedMetricError("mean metric: empty confusion matrix");
    double sum = 0;
    int64_t n = 0;
    for (int64_t k = 0; k < c_; ++k) {
      const ClassScores s = class_scores(k);
      if (exclude_undefined && !s.defined) continue;
      sum += s.*field;
      ++n;
    }
    if (n == 0) throw UndefinedMetricError("mean metric: no defined classes");
    return sum / static_cast<double>(n);
  }

  int64_t c_;
  std::vector<int64_t> counts_;
};

struct MetricReport {
  double overall_accuracy = 0;
  double mean_f1 = 0;
  double mean_iou = 0;
  std::vector<std::string> class_names;
  std::vector<ClassScores> per_class;

  static MetricReport from(const ConfusionMatrix& cm, std::vector<std::string> names = {}) {
    MetricReport r;
    r.overall_accuracy = cm.overall_accuracy();
    r.mean_f1 = cm.mean_f1();
    r.mean_iou = cm.mean_iou();
    for (int64_t k = 0; k < cm.num_classes(); ++k) r.per_class.push_back(cm.class_scores(k));
    if (names.empty())
      for (int64_t k = 0; k < cm.num_classes(); ++k)
        names.push_back("class" + std::to_string(k));
    r.class_names = std::move(names);
    return r;
  }

  /// Flat key-value block, percentages with two decimals.
  std::string to_text() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    for (size_t k = 0; k < per_class.size(); ++k) {
      os << "iou." << class_names[k] << " = " << per_class[k].iou * 100.0;
      if (!per_class[k].defined) os << "  # undefined";
      os << "\n";
    }
    for (size_t k = 0; k < per_class.size(); ++k)
      os << "f1." << class_names[k] << " = " << per_class[k].f1 * 100.0 << "\n";
    os << "overall_accuracy = " << overall_accuracy * 100.0 << "\n";
    os << "mean_f1 = " << mean_f1 * 100.0 << "\n";
    os << "mean_iou = " << mean_iou * 100.0 << "\n";
    return os.str();
  }
};

}  // namespace ledcnet
