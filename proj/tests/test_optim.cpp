#include "doctest.h"

#include <cmath>
#include <numbers>

#include "cstalign/encoder.hpp"
#include "cstalign/error.hpp"
#include "cstalign/optim.hpp"

using namespace cstalign;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::IoError;
}

Matrix scalar(double v) { return Matrix(1, 1, v); }

void step_once(Matrix& p, const Matrix& g, OptimizerState& s, double lr, const AdamWHyper& h) {
  Matrix* ps[] = {&p};
  const Matrix* gs[] = {&g};
  adamw_step(ps, gs, s, lr, h);
}

OptimizerState state_for(const Matrix& p) {
  const Matrix* ps[] = {&p};
  return init_optimizer_state(ps);
}

}  // namespace

TEST_CASE("schedule anchors") {
  const double peak = 3e-4;
  const std::uint64_t total = 1000;
  CHECK(lr_at(0, total, peak, 0.1) == 0.0);
  CHECK(lr_at(100, total, peak, 0.1) == doctest::Approx(peak).epsilon(1e-15));
  CHECK(std::abs(lr_at(total, total, peak, 0.1)) <= 1e-12 * peak);
}

TEST_CASE("schedule shape") {
  const double peak = 1.0;
  // Linear ramp.
  CHECK(lr_at(50, 1000, peak, 0.1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(lr_at(25, 1000, peak, 0.1) == doctest::Approx(0.25).epsilon(1e-15));
  // Half way through the decay: 0.5 * (1 + cos(pi/2)).
  CHECK(lr_at(550, 1000, peak, 0.1) == doctest::Approx(0.5).epsilon(1e-12));
  // Hand-evaluated cosine point.
  const double progress = (800.0 - 100.0) / 900.0;
  CHECK(lr_at(800, 1000, peak, 0.1) ==
        doctest::Approx(0.5 * (1.0 + std::cos(std::numbers::pi * progress))).epsilon(1e-12));
  double prev = 2.0;
  for (std::uint64_t s = 100; s <= 1000; ++s) {
    const double v = lr_at(s, 1000, peak, 0.1);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("short schedules still start at zero and reach peak") {
  // 0.1 * 3 rounds to 0 warmup steps; at least one is used.
  CHECK(lr_at(0, 3, 2.0, 0.1) == 0.0);
  CHECK(lr_at(1, 3, 2.0, 0.1) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(std::abs(lr_at(3, 3, 2.0, 0.1)) <= 1e-12 * 2.0);
}

TEST_CASE("schedule errors") {
  CHECK(kind_of([] { lr_at(0, 0, 1.0, 0.1); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { lr_at(11, 10, 1.0, 0.1); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("one AdamW step by hand") {
  // t = 1: m = 0.1 g, v = 0.001 g^2, m_hat = g, v_hat = g^2,
  // update = g / (|g| + eps).
  Matrix p = scalar(1.0);
  auto s = state_for(p);
  AdamWHyper h;
  h.weight_decay = 0.0;
  step_once(p, scalar(1.0), s, 0.1, h);
  const double expect = 1.0 - 0.1 * (1.0 / (1.0 + 1e-8));
  CHECK(std::abs(p(0, 0) - expect) <= 1e-10);
  CHECK(std::abs(p(0, 0) - 0.9) <= 1e-8);
  CHECK(s.step == 1);
  CHECK(std::abs(s.m[0](0, 0) - 0.1) <= 1e-15);
  CHECK(std::abs(s.v[0](0, 0) - 0.001) <= 1e-15);
}

TEST_CASE("two AdamW steps with decay by hand") {
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8, wd = 0.2;
  const double g1 = 0.3, g2 = -1.7;
  double p = 2.0, m = 0, v = 0;
  for (int t = 1; t <= 2; ++t) {
    const double g = t == 1 ? g1 : g2;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    p = p - lr * (mh / (std::sqrt(vh) + eps) + wd * p);
  }
  Matrix pm = scalar(2.0);
  auto s = state_for(pm);
  AdamWHyper h;
  step_once(pm, scalar(g1), s, lr, h);
  step_once(pm, scalar(g2), s, lr, h);
  CHECK(std::abs(pm(0, 0) - p) <= 1e-10);
}

TEST_CASE("zero gradient fixed point and pure decay") {
  Matrix p(2, 3, 1.5);
  auto s = state_for(p);
  AdamWHyper h;
  h.weight_decay = 0.0;
  step_once(p, Matrix(2, 3), s, 0.1, h);
  for (double v : p.values()) CHECK(v == 1.5);

  Matrix q(2, 3, 1.5);
  auto s2 = state_for(q);
  h.weight_decay = 0.2;
  step_once(q, Matrix(2, 3), s2, 0.1, h);
  for (double v : q.values()) CHECK(std::abs(v - 1.5 * (1 - 0.02)) <= 1e-12);
}

TEST_CASE("non-finite gradient aborts without touching state") {
  Matrix p(1, 2, 1.0), q(1, 1, 3.0);
  Matrix g1(1, 2, 0.5), g2(1, 1, std::nan(""));
  Matrix* ps[] = {&p, &q};
  const Matrix* gs[] = {&g1, &g2};
  auto s = init_optimizer_state(std::span<const Matrix* const>(ps, 2));
  const auto before = s;
  CHECK(kind_of([&] { adamw_step(ps, gs, s, 0.1, AdamWHyper{}); }) == ErrorKind::NonFiniteGradient);
  CHECK(p(0, 0) == 1.0);
  CHECK(q(0, 0) == 3.0);
  CHECK(s == before);
}

TEST_CASE("shape mismatch") {
  Matrix p(1, 2), g(2, 1);
  auto s = state_for(p);
  CHECK(kind_of([&] { step_once(p, g, s, 0.1, AdamWHyper{}); }) == ErrorKind::ShapeError);
}

TEST_CASE("encoder overload updates every tensor") {
  EncoderConfig c;
  c.feature_dim = 3;
  c.image_hidden = {4};
  c.vocab_size = 5;
  c.text_embed_dim = 2;
  c.text_hidden = {};
  c.embed_dim = 2;
  auto params = init_params(c, 1);
  auto grads = params.zeros_like();
  for (auto& nt : grads.tensors()) nt.tensor->fill(0.25);
  auto state = init_optimizer_state(params);
  const auto before = params;
  AdamWHyper h;
  h.weight_decay = 0.0;
  adamw_step(params, grads, state, 0.01, h);
  const auto a = before.tensors();
  const auto b = params.tensors();
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < a[k].tensor->size(); ++i)
      CHECK(b[k].tensor->values()[i] == doctest::Approx(a[k].tensor->values()[i] - 0.01).epsilon(1e-9));
}
