#include <doctest.h>

#include <random>

#include "gridburden/network.hpp"
#include "support/oracles.hpp"

using namespace gridburden;

namespace {

Network two_bus() {
  Network net;
  net.buses = {{1, "a", true}, {2, "b", false}};
  net.lines = {{1, 2, 10.0, 50.0}};
  net.generators = {{1, 0.5, 10.0, 100.0}};
  return net;
}

Network triangle() {
  Network net;
  net.buses = {{1, "", true}, {2, "", false}, {3, "", false}};
  net.lines = {{1, 2, 1.0, 50.0}, {1, 3, 1.0, 50.0}, {2, 3, 1.0, 50.0}};
  net.generators = {{1, 0.5, 10.0, 100.0}};
  return net;
}

}  // namespace

TEST_CASE("ptdf: two-bus line toward the slack") {
  const Eigen::MatrixXd f = ptdf(two_bus());
  REQUIRE(f.rows() == 1);
  REQUIRE(f.cols() == 2);
  CHECK(f(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(f(0, 1) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("ptdf: slack column is identically zero") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rc = test::random_case(rng, 2 + trial % 4, 7);
    const Eigen::MatrixXd f = ptdf(rc.network);
    const int slack = rc.network.slack_index();
    CHECK(f.col(slack).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("ptdf: equal-susceptance triangle matches the explicit 2x2 inverse") {
  // Reduced Bbus = [[2, -1], [-1, 2]], inverse = 1/3 [[2, 1], [1, 2]]:
  //   F = [ 0  -2/3  -1/3 ]
  //       [ 0  -1/3  -2/3 ]
  //       [ 0   1/3  -1/3 ]
  const Eigen::MatrixXd f = ptdf(triangle());
  Eigen::MatrixXd expected(3, 3);
  expected << 0.0, -2.0 / 3.0, -1.0 / 3.0,
              0.0, -1.0 / 3.0, -2.0 / 3.0,
              0.0,  1.0 / 3.0, -1.0 / 3.0;
  CHECK((f - expected).lpNorm<Eigen::Infinity>() < 1e-12);

  const Eigen::MatrixXd reference = test::ptdf_by_power_flow(triangle());
  CHECK((f - reference).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("ptdf: agrees with per-injection power-flow solves on random networks") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const auto rc = test::random_case(rng, 2 + trial % 5, 7);
    const Eigen::MatrixXd f = ptdf(rc.network);
    const Eigen::MatrixXd reference = test::ptdf_by_power_flow(rc.network);
    CHECK((f - reference).lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("ptdf: flows conserve balanced injections") {
  std::mt19937 rng(13);
  std::normal_distribution<double> gauss(0.0, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto rc = test::random_case(rng, 3 + trial % 3, 6);
    const int n = rc.network.bus_count();
    const Eigen::MatrixXd f = ptdf(rc.network);
    const Eigen::MatrixXd incidence = line_incidence(rc.network);

    Eigen::VectorXd q(n);
    for (int i = 0; i < n; ++i) q(i) = gauss(rng);
    q.array() -= q.mean();  // 1'q = 0

    // Net flow out of each bus equals its injection.
    const Eigen::VectorXd divergence = incidence.transpose() * (f * q);
    CHECK((divergence - q).lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("ptdf: disconnected network is rejected") {
  Network net = two_bus();
  net.buses.push_back({3, "island", false});
  CHECK_THROWS_AS(ptdf(net), Error);
  try {
    ptdf(net);
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::DisconnectedNetwork);
  }
}

TEST_CASE("generator_incidence: placement and column sums") {
  Network net = two_bus();
  net.generators = {{2, 0.5, 10.0, 100.0}};
  const Eigen::MatrixXd b = generator_incidence(net);
  CHECK(b(0, 0) == 0.0);
  CHECK(b(1, 0) == 1.0);

  Network one;
  one.buses = {{1, "", true}};
  one.generators = {{1, 0.5, 10.0, 100.0}};
  const Eigen::MatrixXd b1 = generator_incidence(one);
  REQUIRE(b1.rows() == 1);
  CHECK(b1(0, 0) == 1.0);

  std::mt19937 rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const auto rc = test::random_case(rng, 3 + trial % 3, 5);
    const Eigen::MatrixXd bi = generator_incidence(rc.network);
    for (int j = 0; j < bi.cols(); ++j) CHECK(bi.col(j).sum() == doctest::Approx(1.0));
  }
}

TEST_CASE("normalize: merges identical co-located generators") {
  Network net = two_bus();
  net.generators = {{1, 0.5, 10.0, 50.0}, {1, 0.5, 10.0, 30.0}};
  const Network merged = normalize(net);
  REQUIRE(merged.generator_count() == 1);
  CHECK(merged.generators[0].g_max == doctest::Approx(80.0));
}

TEST_CASE("normalize: rejects conflicting co-located generators") {
  Network net = two_bus();
  net.generators = {{1, 0.5, 10.0, 50.0}, {1, 0.5, 12.0, 30.0}};
  try {
    normalize(net);
    FAIL("expected ConflictingColocatedGenerators");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::ConflictingColocatedGenerators);
  }
}

TEST_CASE("normalize: idempotent and slack defaulting") {
  Network net = two_bus();
  net.buses[0].is_slack = false;  // no slack marked
  const Network once = normalize(net);
  CHECK(once.buses[0].is_slack);  // lowest id wins
  const Network twice = normalize(once);
  CHECK(twice.buses.size() == once.buses.size());
  CHECK(twice.generators.size() == once.generators.size());
  CHECK(twice.buses[0].is_slack == once.buses[0].is_slack);
  CHECK(twice.generators[0].g_max == once.generators[0].g_max);

  std::mt19937 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const auto rc = test::random_case(rng, 2 + trial % 4, 6);
    const Network a = normalize(rc.network);
    const Network b = normalize(a);
    REQUIRE(a.buses.size() == b.buses.size());
    for (std::size_t i = 0; i < a.buses.size(); ++i) CHECK(a.buses[i].id == b.buses[i].id);
  }
}

TEST_CASE("validate: catches structural problems") {
  Network net = two_bus();
  net.lines[0].susceptance = 0.0;
  CHECK_THROWS_AS(net.validate(), Error);

  net = two_bus();
  net.buses[1].is_slack = true;  // two slacks
  CHECK_THROWS_AS(net.validate(), Error);

  net = two_bus();
  net.generators.push_back({1, 0.5, 10.0, 1.0});  // duplicate bus, not normalized
  CHECK_THROWS_AS(net.validate(), Error);
}
