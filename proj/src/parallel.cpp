#include "kdisc/parallel.hpp"

#include <atomic>

namespace kdisc {
namespace {
std::atomic<unsigned> g_max_threads{0};
} // namespace

void set_max_threads(unsigned threads) noexcept { g_max_threads.store(threads); }

unsigned max_threads() noexcept {
  const unsigned cap = g_max_threads.load();
  if (cap != 0) return cap;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

} // namespace kdisc
