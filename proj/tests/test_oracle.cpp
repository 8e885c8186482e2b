#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mtppo/oracle.hpp"

using namespace mtppo;

TEST_CASE("finite differences recover a quadratic gradient") {
  const std::vector<double> point = {0.3, -1.2, 2.5, 0.0};
  const auto half_norm_sq = [](const std::vector<double>& p) {
    double s = 0.0;
    for (double x : p) s += 0.5 * x * x;
    return s;
  };
  const std::vector<double> grad =
      finite_diff_gradient(half_norm_sq, point, 1e-5);
  REQUIRE(grad.size() == point.size());
  for (size_t i = 0; i < point.size(); ++i) {
    CHECK(std::abs(grad[i] - point[i]) <= 1e-8);
  }
}

TEST_CASE("finite differences are exact on linear functions") {
  const std::vector<double> c = {2.0, -3.0, 0.5};
  const std::vector<double> point = {1.0, 1.0, 1.0};
  const auto linear = [&](const std::vector<double>& p) {
    double s = 0.0;
    for (size_t i = 0; i < p.size(); ++i) s += c[i] * p[i];
    return s;
  };
  const std::vector<double> grad = finite_diff_gradient(linear, point, 1e-5);
  for (size_t i = 0; i < c.size(); ++i) {
    CHECK(grad[i] == doctest::Approx(c[i]).epsilon(1e-9));
  }
}

TEST_CASE("finite differences reject a nonpositive step") {
  CHECK_THROWS_AS(
      finite_diff_gradient([](const std::vector<double>&) { return 0.0; },
                           {1.0}, 0.0),
      std::invalid_argument);
}

TEST_CASE("identity suite passes at defaults") {
  const IdentityReport report = run_identity_suite(7, 25, 1e-4);
  CHECK(report.all_passed);
  REQUIRE(report.checks.size() == 7);
  for (const IdentityCheck& check : report.checks) {
    INFO(check.name, " max_residual=", check.max_residual);
    CHECK(check.passed);
    CHECK(check.max_residual <= check.tolerance);
  }
}

TEST_CASE("identity suite rejects zero trials") {
  CHECK_THROWS_AS(run_identity_suite(1, 0, 1e-4), std::invalid_argument);
}

TEST_CASE("identity suite report is deterministic") {
  const std::string a = run_identity_suite(42, 5, 1e-4).to_text();
  const std::string b = run_identity_suite(42, 5, 1e-4).to_text();
  CHECK(a == b);
  CHECK(!a.empty());
  CHECK(a.find("trials") != std::string::npos);
}
