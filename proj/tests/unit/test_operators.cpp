#include "doctest.h"

#include "cnf/errors.hpp"
#include "cnf/operators.hpp"

using namespace cnf;

namespace {

const std::vector<std::string> kXT{"x", "t"};
const std::vector<std::string> kXY{"x", "y"};

// f = x² y + 3 x y² at (1, 2): value 14, fx = 2xy + 3y² = 16, fy = x² + 6xy = 13,
// fxx = 2y = 4, fxy = 2x + 6y = 14, fyy = 6x = 6.
DerivativeBundle poly_bundle() {
  DerivativeBundle b = DerivativeBundle::zeros(1, 2, 2);
  b.value[0] = 14;
  b.jac << 16, 13;
  b.hess << 4, 14, 14, 6;
  return b;
}

}  // namespace

TEST_CASE("parse simple operators") {
  const LinearOperator id = parse_operator("id", kXY);
  REQUIRE(id.terms.size() == 1);
  CHECK(id.terms[0].order() == 0);
  CHECK(id == identity_operator(kXY));

  const LinearOperator adv = parse_operator("dt + beta*dx", kXT);
  REQUIRE(adv.terms.size() == 2);
  CHECK(adv.terms[0].multi_index == std::vector<int>{1, 0});
  CHECK(adv.terms[0].name == "beta");
  CHECK(adv.terms[1].multi_index == std::vector<int>{0, 1});
  CHECK(operator_order(adv) == 1);

  const LinearOperator lap = parse_operator("dx^2 + dy^2", kXY);
  CHECK(operator_order(lap) == 2);
  CHECK(lap.terms.size() == 2);
}

TEST_CASE("canonical form merges like terms and drops whitespace differences") {
  CHECK(parse_operator("dx + dx", kXY) == parse_operator("2*dx", kXY));
  CHECK(parse_operator("dy dx", kXY) == parse_operator("dx dy", kXY));
  CHECK(parse_operator("  - id+dx ", kXY) == parse_operator("dx - id", kXY));
  CHECK(parse_operator("2*3*dx", kXY) == parse_operator("6*dx", kXY));
}

TEST_CASE("to_string round-trips") {
  for (const char* s : {"id", "dt + beta*dx", "dx^2 + dy^2", "2*dx dy - id", "-0.5*k*dy + 3*dx"}) {
    const auto& dims = std::string(s).find('t') != std::string::npos ? kXT : kXY;
    const LinearOperator op = parse_operator(s, dims);
    CAPTURE(s);
    CHECK(parse_operator(to_string(op), dims) == op);
  }
}

TEST_CASE("parse errors carry offset and expectations") {
  try {
    parse_operator("dx + ", kXY);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 5);
    CHECK(!e.expected().empty());
  }
  CHECK_THROWS_AS(parse_operator("dz", kXY), ParseError);
  CHECK_THROWS_AS(parse_operator("dx^3", kXY), ParseError);
  CHECK_THROWS_AS(parse_operator("", kXY), ParseError);
  CHECK_THROWS_AS(parse_operator("dx dy dx", kXY), ParseError);
}

TEST_CASE("apply_operator on a hand-differentiated polynomial") {
  const DerivativeBundle b = poly_bundle();
  const Point at = Eigen::Vector2d(1, 2);
  CHECK(apply_operator(identity_operator(kXY), b, at)[0] == 14);
  CHECK(apply_operator(parse_operator("dx", kXY), b, at)[0] == 16);
  CHECK(apply_operator(parse_operator("dx^2 + dy^2", kXY), b, at)[0] == 10);
  CHECK(apply_operator(parse_operator("2*dx dy - id", kXY), b, at)[0] == 14);

  CoefficientRegistry coeffs;
  coeffs.set("k", 0.5);
  coeffs.set("g", CoefficientField([](const Point& p) { return p[1]; }));
  CHECK(apply_operator(parse_operator("k*dy + g*dx", kXY), b, at, coeffs)[0] == doctest::Approx(6.5 + 32));
  CHECK(apply_slots(operator_slots(parse_operator("k*dy + g*dx", kXY), at, coeffs), b)[0] ==
        doctest::Approx(38.5));
}

TEST_CASE("apply_operator errors") {
  DerivativeBundle b = DerivativeBundle::zeros(1, 2, 1);
  const Point at = Eigen::Vector2d(0, 0);
  CHECK_THROWS_AS(apply_operator(parse_operator("dx^2", kXY), b, at), OrderTooLow);
  CHECK_THROWS_AS(apply_operator(parse_operator("beta*dx", kXY), b, at), UnknownCoefficient);
  CHECK_THROWS_AS(apply_operator(parse_operator("dx", kXT), DerivativeBundle::zeros(1, 3, 1), at),
                  DimensionMismatch);
}
