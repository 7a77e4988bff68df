#pragma once

#include <algorithm>
#include <string>

#include "ledcnet/core/errors.hpp"

namespace ledcnet {

/// Reduce-on-plateau: when the monitored metric fails to improve for
/// `patience` consecutive epochs the learning rate is multiplied by `factor`,
/// never falling below `min_lr`. Mode "max" treats larger values as better.
class ReduceLROnPlateau {
 public:
  struct Options {
    double factor = 0.5;
    int64_t patience = 5;
    double min_lr = 1e-6;
    double threshold = 1e-8;  // minimal improvement that counts
    bool maximize = true;
  };

  ReduceLROnPlateau(double initial_lr, const Options& o) : opts_(o), lr_(initial_lr) {
    if (!(o.factor > 0 && o.factor < 1))
      throw ParameterError("plateau scheduler: factor must be in (0,1)");
    if (o.patience < 1) throw ParameterError("plateau scheduler: patience must be >= 1");
  }

  double lr() const { return lr_; }

  /// Feeds one epoch's monitored value; returns the (possibly reduced) lr.
  double step(double metric) {
    const bool improved = !has_best_ || (opts_.maximize ? metric > best_ + opts_.threshold
                                                        : metric < best_ - opts_.threshold);
    if (improved) {
      best_ = metric;
      has_best_ = true;
      bad_epochs_ = 0;
    } else {
      ++bad_epochs_;
      if (bad_epochs_ >= opts_.patience) {
        lr_ = std::max(lr_ * opts_.factor, opts_.min_lr);
        bad_epochs_ = 0;
      }
    }
    return lr_;
  }

 private:
  Options opts_;
  double lr_;
  double best_ = 0;
  bool has_best_ = false;
  int64_t bad_epochs_ = 0;
};

}  // namespace ledcnet
