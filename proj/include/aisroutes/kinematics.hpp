// Speed estimates shared by port detection and segmentation.
#pragma once

#include <cstddef>
#include <deque>

#include "aisroutes/ingest.hpp"

namespace aisroutes {

/// Reported SOG when present, else the speed implied by the move from
/// `prev` (zero without a predecessor).
Knots fix_speed(const AisRecord* prev, const AisRecord& rec);

/// Mean fix speed over a trailing time window, stretched back to cover at
/// least `min_fixes` fixes when the window itself holds fewer.
class RollingSpeed {
 public:
  RollingSpeed(Seconds window, std::size_t min_fixes) : window_(window), min_fixes_(min_fixes) {}

  /// Adds a fix (time-ordered) and returns the current average.
  Knots push(Timestamp ts, Knots speed);
  Knots average() const;
  void reset();
  bool empty() const { return fixes_.empty(); }

 private:
  struct Fix {
    Timestamp ts;
    Knots speed;
  };
  Seconds window_;
  std::size_t min_fixes_;
  std::deque<Fix> fixes_;
  double sum_ = 0.0;
};

}  // namespace aisroutes
