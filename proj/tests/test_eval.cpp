#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>

#include "cstalign/encoder.hpp"
#include "cstalign/error.hpp"
#include "cstalign/eval.hpp"
#include "oracles.hpp"

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

Matrix gaussian(std::size_t n, std::size_t d, std::mt19937_64& g, double s = 1.0) {
  std::normal_distribution<double> nd(0.0, s);
  Matrix m(n, d);
  for (auto& v : m.values()) v = nd(g);
  return m;
}

oracle::Grid to_grid(const Matrix& m) {
  oracle::Grid g(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) g[i][j] = m(i, j);
  return g;
}

const std::vector<int> kKs = {1, 2, 5, 10};

}  // namespace

TEST_CASE("zero-shot exact match and degenerate K") {
  std::mt19937_64 g(1);
  const auto classes = normalize_rows(gaussian(6, 8, g));
  std::vector<int> labels = {0, 1, 2, 3, 4, 5, 2, 2};
  Matrix images(labels.size(), 8);
  for (std::size_t i = 0; i < labels.size(); ++i)
    std::copy(classes.row(labels[i]).begin(), classes.row(labels[i]).end(), images.row(i).begin());
  CHECK(zero_shot_classify(images, classes, labels) == 1.0);

  const auto one = normalize_rows(gaussian(1, 8, g));
  const std::vector<int> zeros(5, 0);
  CHECK(zero_shot_classify(normalize_rows(gaussian(5, 8, g)), one, zeros) == 1.0);
  CHECK(kind_of([&] { zero_shot_classify(images, Matrix(0, 8), labels); }) == ErrorKind::EmptyClassSet);
}

TEST_CASE("zero-shot chance level for random images") {
  const std::size_t K = 5, M = 20000;
  const auto prompts = Matrix::identity(K);
  std::mt19937_64 g(2);
  const auto images = normalize_rows(gaussian(M, K, g));
  std::vector<int> labels(M);
  for (auto& l : labels) l = static_cast<int>(g() % K);
  const double acc = zero_shot_classify(images, prompts, labels);
  const double p = 1.0 / K, sigma = std::sqrt(p * (1 - p) / M);
  CHECK(std::abs(acc - p) <= 3 * sigma);
}

TEST_CASE("zero-shot ties go to the lowest class id and rescaling is harmless") {
  Matrix classes(3, 2);
  classes(0, 0) = 1;
  classes(1, 0) = 1;
  classes(2, 1) = 1;
  Matrix img(1, 2);
  img(0, 0) = 1;
  CHECK(nearest_class(img, classes) == std::vector<int>{0});

  std::mt19937_64 g(3);
  const auto c = normalize_rows(gaussian(4, 6, g));
  const auto x = normalize_rows(gaussian(50, 6, g));
  std::vector<int> labels(50);
  for (auto& l : labels) l = static_cast<int>(g() % 4);
  auto c3 = c;
  scale(3.0, c3.values());
  CHECK(zero_shot_classify(x, c, labels) == zero_shot_classify(x, c3, labels));
}

TEST_CASE("self-retrieval is perfect") {
  const auto eye = Matrix::identity(6);
  const auto r = recall_at_k(eye, eye, kKs);
  for (int k : kKs) {
    CHECK(r.i2t.at(k) == 1.0);
    CHECK(r.t2i.at(k) == 1.0);
  }
  std::mt19937_64 g(4);
  const auto v = normalize_rows(gaussian(20, 16, g));
  const auto rv = recall_at_k(v, v, kKs);
  for (int k : kKs) CHECK(rv.i2t.at(k) == 1.0);
}

TEST_CASE("one swapped pair") {
  // Enumerated by hand for N = 5: queries 0 and 1 see their partner at rank 2
  // (similarity 0, beaten only by the swapped row), every other query hits at rank 1.
  const std::size_t n = 5;
  const auto V = Matrix::identity(n);
  auto T = V;
  std::swap_ranges(T.row(0).begin(), T.row(0).end(), T.row(1).begin());
  const auto r = recall_at_k(V, T, kKs);
  CHECK(r.i2t.at(1) == doctest::Approx(double(n - 2) / n));
  CHECK(r.t2i.at(1) == doctest::Approx(double(n - 2) / n));
  CHECK(r.i2t.at(2) >= double(n - 2) / n);
  CHECK(r.i2t.at(2) == 1.0);
}

TEST_CASE("recall is monotone in K") {
  std::mt19937_64 g(5);
  for (int t = 0; t < 20; ++t) {
    const auto V = normalize_rows(gaussian(30, 4, g)), T = normalize_rows(gaussian(30, 4, g));
    const auto r = recall_at_k(V, T, kKs);
    for (std::size_t i = 1; i < kKs.size(); ++i) {
      CHECK(r.i2t.at(kKs[i]) >= r.i2t.at(kKs[i - 1]));
      CHECK(r.t2i.at(kKs[i]) >= r.t2i.at(kKs[i - 1]));
    }
    for (const auto& [k, v] : r.i2t) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK(kind_of([] { recall_at_k(Matrix(0, 3), Matrix(0, 3), kKs); }) == ErrorKind::EmptySet);
}

TEST_CASE("class-level retrieval convention") {
  // Two classes; captions are e0 (class 0) and e1 (class 1).
  Matrix caps = Matrix::identity(2);
  const std::vector<int> cap_labels = {0, 1};
  // Images: two of class 0 (one near e0, one near e1), one of class 1 near e1.
  Matrix imgs(3, 2);
  imgs(0, 0) = 1.0;
  imgs(1, 1) = 1.0;
  imgs(2, 0) = 0.2;
  imgs(2, 1) = 0.98;
  const std::vector<int> img_labels = {0, 0, 1};
  const std::vector<int> ks = {1, 2};
  const auto r = class_recall_at_k(normalize_rows(imgs), img_labels, caps, cap_labels, ks);
  // i2t: image 1 (class 0) retrieves caption 1 first.
  CHECK(r.i2t.at(1) == doctest::Approx(2.0 / 3.0));
  CHECK(r.i2t.at(2) == 1.0);
  // t2i: caption 0 -> image 0 (class 0) hit; caption 1 -> image 1 (class 0) first: miss,
  // then image 2 (class 1) at rank 2.
  CHECK(r.t2i.at(1) == doctest::Approx(0.5));
  CHECK(r.t2i.at(2) == 1.0);
}

TEST_CASE("linear probe") {
  std::mt19937_64 g(6);
  // Two separable blobs.
  auto make = [&](std::size_t per) {
    Matrix x(2 * per, 3);
    std::vector<int> y(2 * per);
    std::normal_distribution<double> nd(0.0, 0.1);
    for (std::size_t i = 0; i < 2 * per; ++i) {
      y[i] = static_cast<int>(i % 2);
      x(i, 0) = (y[i] ? 1.0 : -1.0) + nd(g);
      x(i, 1) = nd(g);
      x(i, 2) = nd(g);
    }
    return std::pair{x, y};
  };
  const auto [tx, ty] = make(20);
  const auto [sx, sy] = make(50);
  const auto r = linear_probe(tx, ty, sx, sy, 16, 3, 1);
  CHECK(r.shots == 16);
  REQUIRE(r.accuracies.size() == 3);
  for (double a : r.accuracies) CHECK(a == 1.0);
  CHECK(r.mean == 1.0);
  CHECK(r.sd == 0.0);
  CHECK(linear_probe(tx, ty, sx, sy, 4, 3, 9).accuracies == linear_probe(tx, ty, sx, sy, 4, 3, 9).accuracies);
}

TEST_CASE("probe on identical embeddings is at chance") {
  const std::size_t K = 4;
  Matrix tx(K * 5, 2, 0.5), sx(K * 25, 2, 0.5);
  std::vector<int> ty(K * 5), sy(K * 25);
  for (std::size_t i = 0; i < ty.size(); ++i) ty[i] = static_cast<int>(i % K);
  for (std::size_t i = 0; i < sy.size(); ++i) sy[i] = static_cast<int>(i % K);
  const auto r = linear_probe(tx, ty, sx, sy, 5, 2, 0);
  CHECK(r.mean == doctest::Approx(1.0 / K).epsilon(1e-12));
}

TEST_CASE("probe accuracy does not drop with more shots") {
  // Overlapping Gaussian classes so few-shot fits are noisy.
  std::mt19937_64 g(7);
  const std::size_t K = 4, per = 140, d = 6;
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<std::vector<double>> centres(K, std::vector<double>(d));
  for (auto& c : centres)
    for (auto& v : c) v = nd(g);
  auto draw = [&](std::size_t n) {
    Matrix x(n * K, d);
    std::vector<int> y(n * K);
    for (std::size_t i = 0; i < n * K; ++i) {
      y[i] = static_cast<int>(i % K);
      for (std::size_t j = 0; j < d; ++j) x(i, j) = centres[y[i]][j] + 1.0 * nd(g);
    }
    return std::pair{x, y};
  };
  const auto [tx, ty] = draw(per);
  const auto [sx, sy] = draw(100);
  double prev = 0.0;
  for (std::size_t shots : {1, 4, 16, 32, 64, 128}) {
    const double m = linear_probe(tx, ty, sx, sy, shots, 10, 3).mean;
    CAPTURE(shots);
    CHECK(m >= prev);
    prev = m;
  }
}

TEST_CASE("probe errors") {
  Matrix tx(4, 2), sx(2, 2);
  const std::vector<int> ty = {0, 0, 1, 1}, sy = {0, 2};
  CHECK(kind_of([&] { linear_probe(tx, ty, sx, sy, 1, 1, 0); }) == ErrorKind::MissingClass);
  const std::vector<int> sy_ok = {0, 1};
  CHECK(kind_of([&] { linear_probe(tx, ty, sx, sy_ok, 3, 1, 0); }) == ErrorKind::InsufficientSamples);
}

TEST_CASE("silhouette hand-computed instance") {
  // Points on a line: {0, 1} and {4, 6}.
  Matrix x(4, 2);
  x(0, 0) = 0;
  x(1, 0) = 1;
  x(2, 0) = 4;
  x(3, 0) = 6;
  const std::vector<int> lab = {7, 7, 9, 9};
  const double expect = (4.0 / 5.0 + 3.0 / 4.0 + 1.5 / 3.5 + 3.5 / 5.5) / 4.0;
  CHECK(std::abs(silhouette(x, lab, Grouping::by_class).silhouette - expect) <= 1e-12);
  CHECK(std::abs(oracle::silhouette(to_grid(x), lab) - expect) <= 1e-12);
}

TEST_CASE("silhouette matches the oracle on random data") {
  std::mt19937_64 g(8);
  for (int t = 0; t < 10; ++t) {
    const auto x = gaussian(25, 3, g);
    std::vector<int> lab(25);
    for (auto& l : lab) l = static_cast<int>(g() % 4);
    lab[0] = 99;  // a singleton group
    const double s = silhouette(x, lab, Grouping::by_crop).silhouette;
    CHECK(std::abs(s - oracle::silhouette(to_grid(x), lab)) <= 1e-12);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("silhouette separation, permutation baseline, invariances") {
  std::mt19937_64 g(9);
  Matrix x(40, 3);
  std::vector<int> lab(40);
  std::normal_distribution<double> nd(0.0, 0.05);
  for (std::size_t i = 0; i < 40; ++i) {
    lab[i] = static_cast<int>(i % 2);
    x(i, 0) = (lab[i] ? 10.0 : -10.0) + nd(g);
    x(i, 1) = nd(g);
    x(i, 2) = nd(g);
  }
  const double tight = silhouette(x, lab, Grouping::by_class).silhouette;
  CHECK(tight > 0.9);

  // Rotation about z by 0.7 rad and a translation.
  Matrix y = x;
  const double c = std::cos(0.7), s = std::sin(0.7);
  for (std::size_t i = 0; i < 40; ++i) {
    y(i, 0) = c * x(i, 0) - s * x(i, 1) + 3.0;
    y(i, 1) = s * x(i, 0) + c * x(i, 1) - 2.0;
    y(i, 2) = x(i, 2) + 1.0;
  }
  CHECK(silhouette(y, lab, Grouping::by_class).silhouette == doctest::Approx(tight).epsilon(1e-12));

  const auto pts = gaussian(200, 4, g);
  std::vector<int> perm(200);
  for (std::size_t i = 0; i < 200; ++i) perm[i] = static_cast<int>(i % 4);
  double mean = 0;
  const int trials = 40;
  for (int t = 0; t < trials; ++t) {
    std::shuffle(perm.begin(), perm.end(), g);
    mean += silhouette(pts, perm, Grouping::by_class).silhouette;
  }
  CHECK(std::abs(mean / trials) < 0.05);

  const std::vector<int> one(40, 1);
  CHECK(kind_of([&] { silhouette(x, one, Grouping::by_class); }) == ErrorKind::UndefinedSilhouette);
}

TEST_CASE("group labels") {
  const auto v = ConceptVocabulary::build(
      {{"apple", "scab", "x"}, {"apple", "rust", "x"}, {"tomato", "scab", "x"}, {"grape", "healthy", ""}});
  const std::vector<int> ids = {0, 1, 2, 3, 2};
  const auto crop = group_labels(v, ids, Grouping::by_crop);
  CHECK(crop[0] == crop[1]);
  CHECK(crop[0] != crop[2]);
  CHECK(crop[2] == crop[4]);
  const auto cond = group_labels(v, ids, Grouping::by_condition);
  CHECK(cond[0] == cond[2]);
  CHECK(cond[0] != cond[1]);
  CHECK(group_labels(v, ids, Grouping::by_class) == ids);
}

TEST_CASE("ranking report") {
  std::vector<Concept> concepts;
  for (int i = 0; i < 6; ++i)
    concepts.push_back(Concept{i, i < 3 ? "apple" : "tomato", "c" + std::to_string(i), "x"});
  const auto cands = Matrix::identity(6);
  const std::vector<double> q = {0, 0, 0, 0, 1, 0};
  const auto r = ranking_report(q, cands, concepts, 5);
  REQUIRE(r.size() == 5);
  CHECK(r[0].index == 4);
  CHECK(r[0].score == 1.0);
  // Remaining zero scores in index order.
  CHECK(r[1].index == 0);
  CHECK(r[2].index == 1);
  CHECK(r[4].index == 3);
  CHECK(same_crop_count(r, "apple") == 3);
  CHECK(same_crop_count(r, "tomato") == 2);

  const std::vector<double> orth = {0, 0, 0, 0, 0, 0};
  const auto z = ranking_report(orth, cands, concepts, 10);
  REQUIRE(z.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(z[i].index == i);
    CHECK(z[i].score == 0.0);
  }
}

TEST_CASE("paired sign test") {
  const std::vector<double> a = {3, 3, 3, 3, 3, 3, 3, 3, 1, 1, 2};
  const std::vector<double> b = {2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2};
  const auto r = paired_sign_test(a, b);
  CHECK(r.wins == 8);
  CHECK(r.losses == 2);
  CHECK(r.ties == 1);
  CHECK(r.p_value == doctest::Approx((45.0 + 10.0 + 1.0) / 1024.0).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(oracle::binomial_upper_tail(10, 8)).epsilon(1e-12));

  std::vector<double> many_a(200, 1.0), many_b(200, 0.0);
  for (int i = 0; i < 80; ++i) many_b[i] = 2.0;
  CHECK(paired_sign_test(many_a, many_b).p_value ==
        doctest::Approx(oracle::binomial_upper_tail(200, 120)).epsilon(1e-9));

  const std::vector<double> same = {1, 2, 3};
  CHECK(paired_sign_test(same, same).p_value == 1.0);
  CHECK(kind_of([&] { paired_sign_test(same, a); }) == ErrorKind::ShapeError);
}
