#include "aisroutes/kinematics.hpp"

namespace aisroutes {

Knots fix_speed(const AisRecord* prev, const AisRecord& rec) {
  if (rec.sog) return *rec.sog;
  if (prev == nullptr || rec.ts <= prev->ts) return 0.0;
  return mps_to_knots(haversine_distance(prev->pos, rec.pos) / static_cast<double>(rec.ts - prev->ts));
}

Knots RollingSpeed::push(Timestamp ts, Knots speed) {
  fixes_.push_back({ts, speed});
  sum_ += speed;
  while (fixes_.size() > min_fixes_ &&
         static_cast<double>(ts - fixes_.front().ts) > window_) {
    sum_ -= fixes_.front().speed;
    fixes_.pop_front();
  }
  return average();
}

Knots RollingSpeed::average() const {
  if (fixes_.empty()) return 0.0;
  return sum_ / static_cast<double>(fixes_.size());
}

void RollingSpeed::reset() {
  fixes_.clear();
  sum_ = 0.0;
}

}  // namespace aisroutes
