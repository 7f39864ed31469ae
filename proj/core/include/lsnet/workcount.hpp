#pragma once
#include <cstdint>

namespace lsnet {

// Exact work accounting for the attention stages. Counts are derived from
// tensor shapes at execution time, never sampled, so instrumented totals can
// be compared against closed-form expectations with ==.
struct WorkCounter {
  int64_t neighbor_slots = 0;  // (point, neighbor) pairs fed to attention pooling
  int64_t mlp_macs = 0;        // multiply-accumulates across all pointwise MLPs
  int64_t gathers = 0;         // scalars copied by feature gathers

  WorkCounter& operator+=(const WorkCounter& o) {
    neighbor_slots += o.neighbor_slots;
    mlp_macs += o.mlp_macs;
    gathers += o.gathers;
    return *this;
  }
  friend bool operator==(const WorkCounter&, const WorkCounter&) = default;
};

namespace work {

WorkCounter* current();
void set_current(WorkCounter* c);

inline void add_slots(int64_t n) {
  if (WorkCounter* c = current()) c->neighbor_slots += n;
}
inline void add_macs(int64_t n) {
  if (WorkCounter* c = current()) c->mlp_macs += n;
}
inline void add_gathers(int64_t n) {
  if (WorkCounter* c = current()) c->gathers += n;
}

// RAII scope that routes counting into `counter` (nullptr disables).
class Scope {
 public:
  explicit Scope(WorkCounter* counter) : prev_(current()) { set_current(counter); }
  ~Scope() { set_current(prev_); }
  Scope(const Scope&) = delete;
  Scope& operator=(const Scope&) = delete;

 private:
  WorkCounter* prev_;
};

}  // namespace work
}  // namespace lsnet
