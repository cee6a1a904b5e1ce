#pragma once

#include <cstddef>
#include <string_view>

namespace cstalign::simd {

enum class Level { scalar, avx2, neon };

std::string_view to_string(Level level);

struct AdamWCoefficients {
  double lr;
  double beta1;
  double beta2;
  double epsilon;
  double weight_decay;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

// One implementation set per instruction set. Every variant must agree with
// the scalar reference: bitwise for element-wise kernels, to rounding for
// reductions (the vector variants reassociate sums).
struct KernelTable {
  Level level;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*scale)(double alpha, double* x, std::size_t n);
  void (*adamw)(double* param, const double* grad, double* m, double* v, std::size_t n,
                const AdamWCoefficients& c);
};

const KernelTable& scalar_kernels();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_kernels();
#endif
#if defined(__aarch64__)
const KernelTable& neon_kernels();
#endif

// Best level the running CPU supports.
Level detected_level();
bool is_supported(Level level);
const KernelTable& kernels_for(Level level);

// Kernel table used by the library. Chosen on first use from detected_level(),
// or from the CSTALIGN_SIMD environment variable (scalar|avx2|neon) when set.
const KernelTable& active();
Level active_level();
void set_active_level(Level level);

}  // namespace cstalign::simd
