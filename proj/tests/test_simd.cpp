#include "doctest.h"

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "cstalign/error.hpp"
#include "cstalign/simd/kernels.hpp"

using namespace cstalign;
using simd::Level;

namespace {

std::vector<double> randv(std::size_t n, std::mt19937_64& g) {
  std::normal_distribution<double> nd(0.0, 3.0);
  std::vector<double> v(n);
  for (auto& x : v) x = nd(g);
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

// Every vector level compiled in and usable on this machine.
std::vector<Level> vector_levels() {
  std::vector<Level> out;
  for (Level l : {Level::avx2, Level::neon})
    if (simd::is_supported(l)) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("scalar kernels match plain loops") {
  std::mt19937_64 g(11);
  const auto& k = simd::scalar_kernels();
  for (std::size_t n : {0u, 1u, 3u, 17u}) {
    const auto a = randv(n, g), b = randv(n, g);
    double d = 0, s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      d += a[i] * b[i];
      s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    CHECK(k.dot(a.data(), b.data(), n) == doctest::Approx(d).epsilon(1e-14));
    CHECK(k.squared_distance(a.data(), b.data(), n) == doctest::Approx(s).epsilon(1e-14));
  }
}

TEST_CASE("vector kernels agree with scalar reference") {
  const auto levels = vector_levels();
  if (levels.empty()) MESSAGE("no vector level on this machine; equivalence not exercised");
  std::mt19937_64 g(5);
  const auto& ref = simd::scalar_kernels();
  for (Level lv : levels) {
    const auto& vk = simd::kernels_for(lv);
    CAPTURE(simd::to_string(lv));
    // Lengths straddle every tail size of a 4-wide loop.
    for (std::size_t n = 0; n <= 67; ++n) {
      const auto a = randv(n, g), b = randv(n, g);
      const double rd = ref.dot(a.data(), b.data(), n), vd = vk.dot(a.data(), b.data(), n);
      double mag = 0;
      for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
      CHECK(std::abs(rd - vd) <= 1e-12 * std::max(1.0, mag));
      const double rs = ref.squared_distance(a.data(), b.data(), n);
      const double vs = vk.squared_distance(a.data(), b.data(), n);
      CHECK(std::abs(rs - vs) <= 1e-12 * std::max(1.0, rs));

      // Element-wise kernels: bitwise.
      auto y1 = b, y2 = b;
      ref.axpy(0.37, a.data(), y1.data(), n);
      vk.axpy(0.37, a.data(), y2.data(), n);
      CHECK(bitwise_equal(y1, y2));
      auto s1 = a, s2 = a;
      ref.scale(-1.25, s1.data(), n);
      vk.scale(-1.25, s2.data(), n);
      CHECK(bitwise_equal(s1, s2));

      simd::AdamWCoefficients c{1e-3, 0.9, 0.999, 1e-8, 0.2, 1 - 0.9 * 0.9, 1 - 0.999 * 0.999};
      auto p1 = a, p2 = a, m1 = randv(n, g), v1 = randv(n, g);
      for (auto& x : v1) x = x * x;
      auto m2 = m1, v2 = v1;
      ref.adamw(p1.data(), b.data(), m1.data(), v1.data(), n, c);
      vk.adamw(p2.data(), b.data(), m2.data(), v2.data(), n, c);
      CHECK(bitwise_equal(p1, p2));
      CHECK(bitwise_equal(m1, m2));
      CHECK(bitwise_equal(v1, v2));
    }
  }
}

TEST_CASE("level selection") {
  CHECK(simd::is_supported(Level::scalar));
  CHECK(simd::kernels_for(Level::scalar).level == Level::scalar);
  const Level before = simd::active_level();
  simd::set_active_level(Level::scalar);
  CHECK(simd::active().level == Level::scalar);
  CHECK(simd::active_level() == Level::scalar);
  simd::set_active_level(before);
  CHECK(simd::active_level() == before);
}

TEST_CASE("unsupported level is rejected") {
  for (Level l : {Level::avx2, Level::neon}) {
    if (simd::is_supported(l)) continue;
    try {
      (void)simd::kernels_for(l);
      FAIL("expected throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::UnsupportedSimdLevel);
    }
  }
}
