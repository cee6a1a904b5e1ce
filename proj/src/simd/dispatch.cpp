#include <atomic>
#include <cstdlib>
#include <string>

#include "cstalign/error.hpp"
#include "cstalign/simd/kernels.hpp"

namespace cstalign::simd {

std::string_view to_string(Level level) {
  switch (level) {
    case Level::scalar: return "scalar";
    case Level::avx2: return "avx2";
    case Level::neon: return "neon";
  }
  return "unknown";
}

Level detected_level() {
#if defined(__x86_64__) || defined(_M_X64)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Level::avx2;
  return Level::scalar;
#elif defined(__aarch64__)
  return Level::neon;
#else
  return Level::scalar;
#endif
}

bool is_supported(Level level) {
  switch (level) {
    case Level::scalar: return true;
    case Level::avx2: return detected_level() == Level::avx2;
    case Level::neon: return detected_level() == Level::neon;
  }
  return false;
}

const KernelTable& kernels_for(Level level) {
  if (!is_supported(level))
    throw Error(ErrorKind::UnsupportedSimdLevel, "simd/kernels_for",
                std::string(to_string(level)) + " is not available on this CPU");
  switch (level) {
#if defined(__x86_64__) || defined(_M_X64)
    case Level::avx2: return avx2_kernels();
#endif
#if defined(__aarch64__)
    case Level::neon: return neon_kernels();
#endif
    default: return scalar_kernels();
  }
}

namespace {

Level initial_level() {
  if (const char* env = std::getenv("CSTALIGN_SIMD")) {
    const std::string_view want(env);
    for (Level level : {Level::scalar, Level::avx2, Level::neon})
      if (want == to_string(level) && is_supported(level)) return level;
  }
  return detected_level();
}

std::atomic<const KernelTable*>& active_table() {
  static std::atomic<const KernelTable*> table{&kernels_for(initial_level())};
  return table;
}

}  // namespace

const KernelTable& active() { return *active_table().load(std::memory_order_acquire); }

Level active_level() { return active().level; }

void set_active_level(Level level) {
  active_table().store(&kernels_for(level), std::memory_order_release);
}

}  // namespace cstalign::simd
