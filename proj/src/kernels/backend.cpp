#include "facet/kernels/backend.hpp"

#include <atomic>
#include <cstring>
#include <string>

#include "facet/errors.hpp"

#if defined(__x86_64__) || defined(__i386__) || defined(_M_X64)
#define FACET_KERNELS_X86 1
#endif

namespace facet::kernels {

extern const KernelTable kScalarTable;
#ifdef FACET_KERNELS_X86
extern const KernelTable kAvx2Table;
#endif

namespace {

std::atomic<const KernelTable*> g_table{nullptr};
std::atomic<Backend> g_backend{Backend::scalar};

const KernelTable* table_ptr(Backend b) {
#ifdef FACET_KERNELS_X86
  if (b == Backend::avx2) return &kAvx2Table;
#endif
  (void)b;
  return &kScalarTable;
}

void activate(Backend b) {
  g_backend.store(b, std::memory_order_relaxed);
  g_table.store(table_ptr(b), std::memory_order_release);
}

}  // namespace

bool cpu_supports(Backend b) {
  if (b == Backend::scalar) return true;
#ifdef FACET_KERNELS_X86
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detect_best() { return cpu_supports(Backend::avx2) ? Backend::avx2 : Backend::scalar; }

Backend active() {
  if (g_table.load(std::memory_order_acquire) == nullptr) activate(detect_best());
  return g_backend.load(std::memory_order_relaxed);
}

void force(Backend b) {
  if (!cpu_supports(b)) {
    throw ConfigError(std::string("kernel backend '") + name(b) + "' is not supported on this CPU");
  }
  activate(b);
}

void reset_to_auto() { activate(detect_best()); }

const char* name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

Backend parse_backend(const char* s) {
  if (std::strcmp(s, "scalar") == 0) return Backend::scalar;
  if (std::strcmp(s, "avx2") == 0) return Backend::avx2;
  if (std::strcmp(s, "auto") == 0) return detect_best();
  throw ConfigError(std::string("unknown kernel backend '") + s + "' (expected scalar|avx2|auto)");
}

const KernelTable& table() {
  const KernelTable* t = g_table.load(std::memory_order_acquire);
  if (t == nullptr) {
    activate(detect_best());
    t = g_table.load(std::memory_order_acquire);
  }
  return *t;
}

const KernelTable& table_for(Backend b) { return *table_ptr(b); }

}  // namespace facet::kernels
