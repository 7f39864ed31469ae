#include "lsnet/workcount.hpp"

namespace lsnet::work {

namespace {
thread_local WorkCounter* g_counter = nullptr;
}

WorkCounter* current() { return g_counter; }
void set_current(WorkCounter* c) { g_counter = c; }

}  // namespace lsnet::work
