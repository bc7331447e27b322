#include <gtest/gtest.h>

#include <cmath>

#include "gridlqr/errors.hpp"
#include "gridlqr/netcase.hpp"
#include "oracles.hpp"
#include "test_cases.hpp"

using namespace gridlqr;

TEST(NetCase, NineBusSizes) {
  const NetworkCase net = load_case("case9", "typical");
  EXPECT_EQ(net.num_buses(), 9);
  EXPECT_EQ(net.num_generators(), 3);
  EXPECT_EQ(net.num_loads(), 6);
  EXPECT_EQ(net.slack, 0);
  EXPECT_EQ(net.buses[0].kind, BusKind::kSlack);
  for (int k = 0; k < 3; ++k) EXPECT_NE(net.buses[k].kind, BusKind::kLoad);
  for (int k = 3; k < 9; ++k) EXPECT_EQ(net.buses[k].kind, BusKind::kLoad);
}

TEST(NetCase, TypicalMachineParameters) {
  const NetworkCase net = load_case("case9", "typical");
  for (const Generator& g : net.generators) {
    EXPECT_DOUBLE_EQ(g.machine.inertia, 0.2);
    EXPECT_DOUBLE_EQ(g.machine.damping, 0.0);
    EXPECT_DOUBLE_EQ(g.machine.tau_d, 5.0);
    EXPECT_DOUBLE_EQ(g.machine.x_d, 0.7);
    EXPECT_DOUBLE_EQ(g.machine.x_q, 0.5);
    EXPECT_DOUBLE_EQ(g.machine.x_d_prime, 0.07);
    EXPECT_DOUBLE_EQ(g.machine.tau_c, 0.2);
    EXPECT_DOUBLE_EQ(g.machine.droop, 0.02);
  }
  EXPECT_EQ(parse_case(testcase::two_bus(50), "").generators[0].machine, MachineParams::typical());
}

TEST(NetCase, MachineOverrides) {
  const std::string machines = "typical = true\n[bus 1]\nM = 0.5\nD = 1.5\n";
  const NetworkCase net = parse_case(testcase::two_bus(50), machines);
  EXPECT_DOUBLE_EQ(net.generators[0].machine.inertia, 0.5);
  EXPECT_DOUBLE_EQ(net.generators[0].machine.damping, 1.5);
  EXPECT_DOUBLE_EQ(net.generators[0].machine.x_d, 0.7);
}

TEST(NetCase, Errors) {
  const std::string two_slack = testcase::two_bus(50, 0, "  3 3 0 0 0 0 1 1 0 100 1 1.1 0.9;\n");
  try {
    parse_case(two_slack, "");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("multiple slack"), std::string::npos);
  }
  std::string no_slack = testcase::two_bus(50);
  no_slack.replace(no_slack.find("1 3 0"), 5, "1 2 0");
  EXPECT_THROW(parse_case(no_slack, ""), ParseError);
  std::string dup = testcase::two_bus(50);
  dup.replace(dup.find("  2 1 "), 6, "  1 1 ");
  EXPECT_THROW(parse_case(dup, ""), ParseError);
  std::string short_row = testcase::two_bus(50);
  short_row.replace(short_row.find("  1 2 0 0.1"), std::string("  1 2 0 0.1 0 250 250 250 0 0 1 -360 360;").size(),
                    "  1 2 0;");
  EXPECT_THROW(parse_case(short_row, ""), ParseError);
  std::string ragged = testcase::two_bus(50);
  ragged.replace(ragged.find("  2 1 "), 6, "  2 1 7 ");
  EXPECT_THROW(parse_case(ragged, ""), ParseError);
  EXPECT_THROW(parse_case(testcase::two_bus(50), "[bus 1]\ntau_d = 0\n"), ParseError);
  EXPECT_THROW(parse_case(testcase::two_bus(50), "[bus 1]\ntau_c = -1\n"), ParseError);
  EXPECT_THROW(parse_case(testcase::two_bus(50), "[bus 2]\nM = 1\n"), ParseError);
}

TEST(NetCase, RoundTrip) {
  for (const char* name : {"case9", "case14", "case39", "case57"}) {
    const NetworkCase net = load_case(name, "typical");
    const NetworkCase again = parse_case(serialize_case(net), serialize_machines(net));
    EXPECT_EQ(net.buses, again.buses) << name;
    EXPECT_EQ(net.branches, again.branches) << name;
    EXPECT_EQ(net.generators, again.generators) << name;
    EXPECT_EQ(net.slack, again.slack) << name;
  }
  const NetworkCase ne = load_case("case39", "case39_ne");
  EXPECT_EQ(parse_case(serialize_case(ne), serialize_machines(ne)).generators, ne.generators);
}

TEST(Ybus, SingleLine) {
  const AdmittanceMatrix y = build_ybus(parse_case(testcase::two_bus(0), ""));
  EXPECT_NEAR(y.g.cwiseAbs().maxCoeff(), 0.0, 1e-15);
  EXPECT_NEAR(y.b(0, 0), -10.0, 1e-12);
  EXPECT_NEAR(y.b(1, 1), -10.0, 1e-12);
  EXPECT_NEAR(y.b(0, 1), 10.0, 1e-12);
  EXPECT_NEAR(y.b(1, 0), 10.0, 1e-12);
}

TEST(Ybus, ShuntOnly) {
  NetworkCase net = parse_case(testcase::two_bus(0), "");
  net.branches.clear();
  net.buses[0].shunt_b = 0.5;
  const AdmittanceMatrix y = build_ybus(net);
  EXPECT_DOUBLE_EQ(y.b(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(y.g(0, 0), 0.0);
}

TEST(Ybus, ZeroImpedanceRejected) {
  NetworkCase net = parse_case(testcase::two_bus(0), "");
  net.branches[0].series_x = 0.0;
  EXPECT_THROW(build_ybus(net), ConfigError);
}

TEST(Ybus, MatchesIncidenceAssembly) {
  for (const char* name : {"case9", "case14", "case39", "case57"}) {
    const NetworkCase net = load_case(name, "typical");
    const AdmittanceMatrix y = build_ybus(net);
    const Eigen::MatrixXcd ref = oracle::ybus_incidence(net);
    EXPECT_LT((y.g - ref.real()).cwiseAbs().maxCoeff(), 1e-12) << name;
    EXPECT_LT((y.b - ref.imag()).cwiseAbs().maxCoeff(), 1e-12) << name;
  }
}

TEST(Ybus, NineBusRowSumsAreShuntInjections) {
  const NetworkCase net = load_case("case9", "typical");
  const AdmittanceMatrix y = build_ybus(net);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(net.num_buses());
  for (const Branch& br : net.branches) {
    expected[br.from] += br.charging_b / 2.0;
    expected[br.to] += br.charging_b / 2.0;
  }
  for (int k = 0; k < net.num_buses(); ++k) expected[k] += net.buses[k].shunt_b;
  EXPECT_LT((y.b.rowwise().sum() - expected).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(y.g.rowwise().sum().cwiseAbs().maxCoeff(), 1e-10);
}
