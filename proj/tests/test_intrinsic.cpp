#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "crpt/error.hpp"
#include "crpt/intrinsic.hpp"
#include "crpt/rng.hpp"

using namespace crpt;
using namespace crpt::intrinsic;
using crpt::nd::Tensor;

namespace {
// Brute-force oracle: all pairwise distances, sorted.
double knn_oracle(const std::vector<double>& z, const std::vector<std::vector<double>>& members,
                  std::size_t k) {
  std::vector<double> d;
  for (const auto& m : members) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += (z[i] - m[i]) * (z[i] - m[i]);
    d.push_back(std::sqrt(s));
  }
  std::sort(d.begin(), d.end());
  return d[k - 1];
}
}  // namespace

TEST_CASE("projection set is FIFO at capacity") {
  ProjectionSet q(4);
  for (int i = 0; i < 6; ++i) q.push({double(i)});
  REQUIRE(q.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(q.value(i)[0] == double(i + 2));
}

TEST_CASE("update_q: a lone candidate is selected by every prototype") {
  proto::PrototypeBank bank(5, 3, 77);
  ProjectionSet q(64);
  Tensor cand({1, 3}, {0.2, -0.4, 0.9});
  update_q(q, cand, bank);
  REQUIRE(q.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(q.value(i)[0] == doctest::Approx(0.2));
    CHECK(q.value(i)[1] == doctest::Approx(-0.4));
    CHECK(q.value(i)[2] == doctest::Approx(0.9));
  }
}

TEST_CASE("update_q: prototypes select themselves from their own bank") {
  // Distinct, mutually non-collinear unit vectors.
  Tensor raw({3, 2}, {1.0, 0.0, 0.0, 1.0, std::sqrt(0.5), std::sqrt(0.5)});
  proto::PrototypeBank bank(raw);
  ProjectionSet q(64);
  update_q(q, raw, bank);
  REQUIRE(q.size() == 3);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(q.value(j)[0] == doctest::Approx(raw.at(j, 0)));
    CHECK(q.value(j)[1] == doctest::Approx(raw.at(j, 1)));
  }
}

TEST_CASE("update_q is permutation-invariant in the candidate batch") {
  Rng rng(5);
  Tensor cands({6, 4});
  for (double& v : cands.data) v = rng.normal();
  proto::PrototypeBank bank(8, 4, 3);

  ProjectionSet q1(64), q2(64);
  update_q(q1, cands, bank);

  std::vector<std::size_t> perm{5, 2, 0, 4, 1, 3};
  Tensor shuffled({6, 4});
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 4; ++j) shuffled.at(i, j) = cands.at(perm[i], j);
  update_q(q2, shuffled, bank);

  REQUIRE(q1.size() == q2.size());
  auto as_sorted = [](const ProjectionSet& q) {
    std::vector<std::vector<double>> v;
    for (std::size_t i = 0; i < q.size(); ++i) v.push_back(q.value(i));
    std::sort(v.begin(), v.end());
    return v;
  };
  CHECK(as_sorted(q1) == as_sorted(q2));
}

TEST_CASE("update_q rejects degenerate candidates") {
  proto::PrototypeBank bank(4, 2, 1);
  ProjectionSet q(8);
  Tensor zero_row({1, 2});  // zero-norm candidate rows are rejected by normalization
  CHECK_THROWS_AS(update_q(q, zero_row, bank), Error);
  Tensor wrong_dim({1, 3}, {1.0, 0.0, 0.0});
  CHECK_THROWS_AS(update_q(q, wrong_dim, bank), Error);
}

TEST_CASE("knn_reward hand values") {
  ProjectionSet q(8);
  q.push({1.0});
  q.push({2.0});
  q.push({4.0});
  CHECK(knn_reward({0.0}, q, 3) == doctest::Approx(4.0));
  CHECK(knn_reward({0.0}, q, 1) == doctest::Approx(1.0));

  // k = 1 with a single member
  ProjectionSet single(4);
  single.push({3.0});
  CHECK(knn_reward({1.0}, single, 1) == doctest::Approx(2.0));
}

TEST_CASE("self-exclusion is by identity, not by value") {
  ProjectionSet q(8);
  const std::uint64_t id_z = q.push({1.0, 1.0});
  q.push({4.0, 5.0});
  // the member queries its own neighborhood: its own entry is skipped
  CHECK(knn_reward({1.0, 1.0}, q, 1, id_z) == doctest::Approx(5.0));
  // an equal-valued distinct query keeps the duplicate as a neighbor
  CHECK(knn_reward({1.0, 1.0}, q, 1) == doctest::Approx(0.0));

  ProjectionSet dup(8);
  dup.push({2.0});
  dup.push({2.0});
  CHECK(knn_reward({2.0}, dup, 1) == doctest::Approx(0.0));  // duplicates carry density
}

TEST_CASE("knn_reward needs k eligible members") {
  ProjectionSet q(8);
  q.push({0.0});
  CHECK_THROWS_AS(knn_reward({1.0}, q, 2), Error);
  try {
    knn_reward({1.0}, q, 2);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InsufficientNeighbors);
  }
}

TEST_CASE("knn_reward equals the brute-force oracle on 10^4 random cases") {
  Rng rng(99);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(64);
    const std::size_t dim = 1 + rng.uniform_index(6);
    const std::size_t k = 1 + rng.uniform_index(std::min<std::size_t>(5, n));
    ProjectionSet q(64);
    std::vector<std::vector<double>> members;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> m(dim);
      for (double& v : m) v = rng.uniform(-3.0, 3.0);
      members.push_back(m);
      q.push(std::move(m));
    }
    std::vector<double> z(dim);
    for (double& v : z) v = rng.uniform(-3.0, 3.0);
    const double got = knn_reward(z, q, k);
    const double want = knn_oracle(z, members, k);
    REQUIRE(got == want);  // exact: same arithmetic on the same doubles
  }
}

TEST_CASE("knn_reward is translation invariant") {
  Rng rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng.uniform_index(20);
    ProjectionSet q(64), q_shift(64);
    std::vector<double> shift{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5)};
    std::vector<double> z{rng.normal(), rng.normal(), rng.normal()};
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> m{rng.normal(), rng.normal(), rng.normal()};
      q.push(m);
      q_shift.push({m[0] + shift[0], m[1] + shift[1], m[2] + shift[2]});
    }
    std::vector<double> z_shift{z[0] + shift[0], z[1] + shift[1], z[2] + shift[2]};
    CHECK(knn_reward(z, q, 3) == doctest::Approx(knn_reward(z_shift, q_shift, 3)).epsilon(1e-9));
  }
}

TEST_CASE("augment_reward") {
  CHECK(augment_reward(1.0, 0.5, 0.2) == doctest::Approx(1.1).epsilon(1e-15));
  CHECK(augment_reward(3.0, 0.7, 0.0) == 3.0);
  CHECK(augment_reward(3.0, 0.0, 0.2) == 3.0);
  CHECK_THROWS_AS(augment_reward(std::nan(""), 0.0, 0.2), Error);
}
