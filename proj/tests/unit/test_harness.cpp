#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bilinear/harness.hpp"

using namespace bilinear;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.d1 = c.d2 = 3;
  c.n_arms_left = c.n_arms_right = 5;
  c.T = 100;
  c.reps = 2;
  c.seed = 3;
  c.tune = false;
  c.c = 0.1;
  c.T1 = 18;
  c.threads = 2;
  return c;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bilinear_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(ParseConfig, EmptyGivesDefaults) {
  EXPECT_EQ(parse_config(""), ExperimentConfig{});
  EXPECT_EQ(parse_config("  \n"), ExperimentConfig{});
  EXPECT_EQ(parse_config("{}"), ExperimentConfig{});
}

TEST(ParseConfig, ErrorsNameTheField) {
  auto field_of = [](std::string_view text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(field_of(R"({"reps": 0})"), "reps");
  EXPECT_EQ(field_of(R"({"sigma": -1})"), "sigma");
  EXPECT_EQ(field_of(R"({"r": 9})"), "r");
  EXPECT_EQ(field_of(R"({"T": "many"})"), "T");
  EXPECT_EQ(field_of(R"({"bogus": 1})"), "bogus");
  EXPECT_EQ(field_of(R"({"methods": ["nope"]})"), "methods");
  EXPECT_THROW(parse_config("{not json"), ConfigError);
}

TEST(ParseConfig, DumpRoundTrip) {
  ExperimentConfig c = small_config();
  c.methods = {Method::Isse, Method::Oful};
  c.gamma_mode = GammaMode::Full;
  c.noise = NoiseKind::Rademacher;
  c.grids[Method::EstrBm] = MethodGrid{{0.1, 0.5}, {16, 32}};
  EXPECT_EQ(parse_config(dump_config(c)), c);
  EXPECT_EQ(parse_config(dump_config(ExperimentConfig{})), ExperimentConfig{});
}

TEST(ParseConfig, LoadMissingFileThrows) {
  EXPECT_THROW(load_config("/nonexistent/path/config.json"), ConfigError);
}

TEST(Method, ParseRoundTrip) {
  for (auto m : {Method::Oful, Method::EstrOs, Method::EstrBm, Method::Isse}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_method("greedy"), InvalidInput);
}

TEST(GridFor, UntunedTunedAndExplicit) {
  ExperimentConfig c = small_config();
  EXPECT_EQ(c.grid_for(Method::EstrBm), (MethodGrid{{0.1}, {18}}));
  EXPECT_EQ(c.grid_for(Method::Oful), (MethodGrid{{0.1}, {0}}));
  c.tune = true;
  c.T = 1000;
  const MethodGrid g = c.grid_for(Method::EstrOs);
  EXPECT_EQ(g.c, default_grid(Method::EstrOs).c);
  for (std::size_t t1 : g.T1) EXPECT_LT(t1, c.T);
  c.grids[Method::Isse] = MethodGrid{{0.2}, {}};
  EXPECT_EQ(c.grid_for(Method::Isse), (MethodGrid{{0.2}, {0}}));
}

TEST(MakeInstance, PureFunctionOfSeedAndRep) {
  const ExperimentConfig c = small_config();
  const Instance a = make_instance(c, 1), b = make_instance(c, 1), other = make_instance(c, 0);
  EXPECT_EQ(a.env.theta(), b.env.theta());
  EXPECT_EQ(a.X.matrix(), b.X.matrix());
  EXPECT_NE(a.env.theta(), other.env.theta());
  EXPECT_NEAR(frobenius_norm(a.env.theta()), c.theta_frobenius, 1e-12);
}

TEST(MeanAndBand, Formula) {
  const Vector a{1, 2}, b{3, 2}, c{2, 2};
  Vector mean, half;
  mean_and_band({&a, &b, &c}, mean, half);
  EXPECT_NEAR(mean[0], 2.0, 1e-15);
  EXPECT_NEAR(half[0], 1.96 * 1.0 / std::sqrt(3.0), 1e-12);
  EXPECT_EQ(half[1], 0.0);
}

TEST(RunExperiment, SmokeAndDeterminism) {
  ExperimentConfig c = small_config();
  c.methods = {Method::Oful};
  const AggregateResult r1 = run_experiment(c);
  ASSERT_EQ(r1.methods.size(), 1u);
  const MethodResult& m = r1.methods[0];
  EXPECT_EQ(m.traces.size(), 2u);
  EXPECT_EQ(m.mean.size(), 100u);
  for (std::size_t t = 1; t < m.mean.size(); ++t) EXPECT_GE(m.mean[t], m.mean[t - 1]);

  c.threads = 1;
  const AggregateResult r2 = run_experiment(c);
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_EQ(r1.methods[0].traces[k].cumulative(), r2.methods[0].traces[k].cumulative());
  }
}

TEST(RunExperiment, MethodOrderDoesNotChangeTraces) {
  ExperimentConfig c = small_config();
  c.methods = {Method::Oful, Method::EstrBm, Method::Isse};
  const AggregateResult a = run_experiment(c);
  c.methods = {Method::Isse, Method::Oful, Method::EstrBm};
  const AggregateResult b = run_experiment(c);
  for (const MethodResult& ma : a.methods) {
    const auto it = std::find_if(b.methods.begin(), b.methods.end(),
                                 [&](const MethodResult& mb) { return mb.method == ma.method; });
    ASSERT_NE(it, b.methods.end());
    for (std::size_t k = 0; k < ma.traces.size(); ++k) {
      EXPECT_EQ(ma.traces[k].cumulative(), it->traces[k].cumulative());
    }
  }
  EXPECT_EQ(b.methods[0].method, Method::Isse);
}

TEST(RunExperiment, MethodsShareTheInstance) {
  // Identical best arm value implies the same instance; check through the oracle.
  const ExperimentConfig c = small_config();
  const Instance inst = make_instance(c, 0);
  for (Method m : {Method::Oful, Method::EstrOs}) {
    const EstrConfig ec = method_config(c, inst, m, 0.1, 18);
    EXPECT_EQ(ec.S_F, c.theta_frobenius);
    EXPECT_LE(ec.S_r, ec.S_2);
    EXPECT_NEAR(ec.S_r, inst.env.singular_value(1), 1e-12);
  }
}

TEST(Csv, RowsReloadAndAggregate) {
  ExperimentConfig c = small_config();
  c.T = 3;
  c.T1 = 1;
  c.reps = 2;
  c.methods = {Method::Oful, Method::Isse};
  const AggregateResult r = run_experiment(c);
  const fs::path dir = temp_dir("csv");
  emit_csv(r, dir / "results.csv", 1);
  EXPECT_EQ(read_file(dir / "results.csv").substr(0, 36), "method,rep,t,inst_regret,cum_regret\n");
  const std::vector<CsvRow> rows = load_csv(dir / "results.csv");
  ASSERT_EQ(rows.size(), 2u * 2u * 3u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].method == rows[i - 1].method && rows[i].rep == rows[i - 1].rep) {
      EXPECT_GE(rows[i].cum_regret, rows[i - 1].cum_regret);
      EXPECT_EQ(rows[i].t, rows[i - 1].t + 1);
    }
  }
  // Values survive the text round trip exactly.
  const RegretTrace& tr = r.methods[0].traces[0];
  for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(rows[t].cum_regret, tr.cumulative()[t]);

  const std::vector<CurveSummary> s = summarize(rows);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].method, "oful");
  EXPECT_EQ(s[0].t, (std::vector<std::size_t>{1, 2, 3}));
  for (std::size_t t = 0; t < 3; ++t) EXPECT_NEAR(s[0].mean[t], r.methods[0].mean[t], 1e-12);
}

TEST(Csv, LoggedRounds) {
  EXPECT_TRUE(logged_round(1, 1000, 10));
  EXPECT_TRUE(logged_round(100, 1000, 10));
  EXPECT_FALSE(logged_round(101, 1000, 10));
  EXPECT_TRUE(logged_round(110, 1000, 10));
  EXPECT_TRUE(logged_round(997, 997, 10));
}

TEST(Csv, MalformedInputThrows) {
  const fs::path dir = temp_dir("bad_csv");
  std::ofstream(dir / "bad.csv") << "method,rep,t,inst_regret,cum_regret\noful,0,x,0,0\n";
  EXPECT_THROW(load_csv(dir / "bad.csv"), InvalidInput);
}

TEST(Plot, SvgHasCurvesAndOrderedLegend) {
  std::vector<CurveSummary> curves(2);
  curves[0] = {"oful", {1, 2, 3}, {0.0, 1.0, 1.5}, {0.0, 0.1, 0.2}};
  curves[1] = {"isse", {1, 2, 3}, {0.0, 0.5, 0.7}, {0.0, 0.1, 0.1}};
  const fs::path dir = temp_dir("svg");
  emit_plot(curves, dir / "plot.svg");
  const std::string svg = read_file(dir / "plot.svg");
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("class=\"mean\""), std::string::npos);
  EXPECT_NE(svg.find("class=\"band\""), std::string::npos);
  const auto legend = svg.find("class=\"legend\"");
  ASSERT_NE(legend, std::string::npos);
  const auto p1 = svg.find(">oful<", legend), p2 = svg.find(">isse<", legend);
  ASSERT_NE(p1, std::string::npos);
  ASSERT_NE(p2, std::string::npos);
  EXPECT_LT(p1, p2);
}

TEST(CheckInvariants, SmallRunIsClean) {
  ExperimentConfig c = small_config();
  c.reps = 4;
  c.T = 200;
  const InvariantReport rep = check_invariants(c);
  EXPECT_EQ(rep.runs, 12u);
  EXPECT_GT(rep.checks, rep.runs);
  for (const auto& v : rep.violations) ADD_FAILURE() << v;
}
