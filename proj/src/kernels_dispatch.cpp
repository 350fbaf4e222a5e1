#include "hvtrack/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace hvt::kernels {

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Table& table_for(Backend b) {
#if defined(__x86_64__) || defined(_M_X64)
  if (b == Backend::avx2) {
    if (!avx2_supported()) throw std::runtime_error("avx2 kernels requested but cpu lacks avx2/fma");
    return avx2_table;
  }
#else
  if (b == Backend::avx2) throw std::runtime_error("avx2 kernels unavailable on this architecture");
#endif
  return scalar_table;
}

namespace {

std::atomic<const Table*> g_active{nullptr};

const Table* pick_default() {
  if (const char* env = std::getenv("HVTRACK_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return &table_for(Backend::scalar);
    if (std::strcmp(env, "avx2") == 0) return &table_for(Backend::avx2);
  }
  return avx2_supported() ? &table_for(Backend::avx2) : &table_for(Backend::scalar);
}

}  // namespace

const Table& active() {
  const Table* t = g_active.load(std::memory_order_acquire);
  if (!t) {
    t = pick_default();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

void select(Backend b) { g_active.store(&table_for(b), std::memory_order_release); }

}  // namespace hvt::kernels
