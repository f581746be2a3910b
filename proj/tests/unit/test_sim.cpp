#include "nlander/flight_log.hpp"
#include "nlander/labels.hpp"
#include "nlander/metrics.hpp"
#include "nlander/sim.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace nlander;

namespace {

const FlightLog& full_collection() {
  static const FlightLog log = collect_training_flight(CollectionProgram{}, DisturbanceField{}, VehicleParams{});
  return log;
}

std::string csv_of(const FlightLog& log) {
  std::ostringstream os;
  write_flight_log_csv(log, os);
  return os.str();
}

}  // namespace

TEST(Simulation, UndisturbedHoverStaysOnTheSetpoint) {
  const FlightLog log =
      run_scenario(hover_scenario(DisturbanceField::none(), 1.0, 10.0), VehicleParams{}, ControllerGains{}, nullptr);
  double worst = 0.0;
  for (const auto& r : log.records) worst = std::max(worst, r.p_tilde.norm());
  EXPECT_LT(worst, 1e-3);
}

TEST(Simulation, OracleModelDrivesTheCompositeVariableToZero) {
  const DisturbanceField field;
  const FieldOracleModel oracle(field);
  const FlightLog log = run_scenario(hover_scenario(field, 0.1, 30.0), VehicleParams{}, ControllerGains{}, &oracle,
                                     ControllerOptions{true, true});
  double worst_s = 0.0, worst_p = 0.0;
  for (const auto& r : log.records) {
    if (r.t < 20.0) continue;
    worst_s = std::max(worst_s, r.s.norm());
    worst_p = std::max(worst_p, r.p_tilde.norm());
  }
  EXPECT_LT(worst_s, 1e-4);
  EXPECT_LT(worst_p, 1e-4);
}

TEST(Simulation, RecordsAreEvenlySpacedAtTheDeclaredRate) {
  const FlightLog log = run_scenario(landing_scenario(DisturbanceField{}, 1.0, 3.0, 5.0), VehicleParams{},
                                     ControllerGains{}, nullptr);
  for (std::size_t k = 1; k < log.size(); ++k) {
    EXPECT_NEAR(log.records[k].t - log.records[k - 1].t, log.dt(), 1e-12);
  }
}

TEST(Simulation, LoopRatesFollowTheSchedule) {
  const Scenario sc = cross_table_scenario(DisturbanceField::none(), 0.7, 1.2, 0.6, 10.0, 10.0);
  const FlightLog log = run_scenario(sc, VehicleParams{}, ControllerGains{}, nullptr);
  const auto& s = log.meta.at("schedule");
  EXPECT_EQ(s.at("physics_steps").get<long>(), 10000);
  EXPECT_EQ(s.at("position_updates").get<long>(), 101);
  EXPECT_EQ(s.at("attitude_updates").get<long>(), 1001);
  EXPECT_EQ(s.at("allocation_updates").get<long>(), 5001);
  ASSERT_EQ(log.size(), 1001u);
  EXPECT_DOUBLE_EQ(log.rate_hz, 100.0);
  // The reference is sampled by the 10 Hz position loop only.
  for (std::size_t k = 1; k < log.size(); ++k) {
    const bool changed = log.records[k].p_d != log.records[k - 1].p_d;
    EXPECT_EQ(changed, k % 10 == 0) << "record " << k;
  }
}

TEST(Simulation, SameSeedGivesBitwiseIdenticalLogs) {
  Scenario sc = landing_scenario(DisturbanceField{}, 1.0, 5.0, 8.0);
  sc.noise.enabled = true;
  sc.seed = 42;
  const std::string a = csv_of(run_scenario(sc, VehicleParams{}, ControllerGains{}, nullptr));
  const std::string b = csv_of(run_scenario(sc, VehicleParams{}, ControllerGains{}, nullptr));
  EXPECT_EQ(a, b);
  sc.seed = 43;
  EXPECT_NE(a, csv_of(run_scenario(sc, VehicleParams{}, ControllerGains{}, nullptr)));
}

TEST(Simulation, DivergenceCarriesThePartialLog) {
  Scenario sc = landing_scenario(DisturbanceField{}, 1.0, 10.0, 12.0);
  sc.sim.domain_bound = 0.5;
  try {
    run_scenario(sc, VehicleParams{}, ControllerGains{}, nullptr);
    FAIL() << "expected a divergence";
  } catch (const DivergenceError& e) {
    const FlightLog& p = e.partial_log();
    ASSERT_FALSE(p.empty());
    EXPECT_GT(p.records.back().t, 1.0);
    EXPECT_LT(p.records.back().t, 12.0);
    EXPECT_TRUE(p.meta.contains("schedule"));
  }
}

TEST(Collection, CoversHeightsAndVerticalSpeeds) {
  const FlightLog& log = full_collection();
  const CollectionProgram prog;
  std::set<std::size_t> visited;
  const auto h = prog.hover_heights();
  double vz_min = 0.0, vz_max = 0.0;
  for (const auto& r : log.records) {
    vz_min = std::min(vz_min, r.x.v.z());
    vz_max = std::max(vz_max, r.x.v.z());
    if (r.x.v.norm() > 0.1) continue;
    for (std::size_t i = 0; i < h.size(); ++i)
      if (std::abs(r.x.p.z() - h[i]) < 0.01) visited.insert(i);
  }
  EXPECT_GE(visited.size(), 20u);
  EXPECT_GE(h.front(), 0.05);
  EXPECT_LE(h.back(), 1.5);
  EXPECT_LE(vz_min, -0.9);
  EXPECT_GE(vz_max, 0.9);
  EXPECT_NEAR(log.records.back().t, prog.part1_duration + prog.part2_duration, 1e-9);
}

TEST(FlightLogCsv, RoundTripIsBitwise) {
  const FlightLog log = run_scenario(landing_scenario(DisturbanceField{}, 1.0, 4.0, 6.0), VehicleParams{},
                                     ControllerGains{}, nullptr);
  const std::string a = csv_of(log);
  std::istringstream in(a);
  const FlightLog back = read_flight_log_csv(in);
  EXPECT_EQ(csv_of(back), a);
  EXPECT_EQ(back.meta, log.meta);
  ASSERT_EQ(back.size(), log.size());
  for (std::size_t k = 0; k < log.size(); ++k) {
    EXPECT_EQ(back.records[k].x.R, log.records[k].x.R);
    EXPECT_EQ(back.records[k].f_u_avg, log.records[k].f_u_avg);
    EXPECT_EQ(back.records[k].contact, log.records[k].contact);
  }
}

TEST(FlightLogCsv, RejectsOtherVersionsAndBadMeta) {
  std::istringstream v2("# nlander-flightlog v2 rate_hz=100\n");
  EXPECT_THROW(read_flight_log_csv(v2), IoError);
  std::istringstream none("t,segment\n");
  EXPECT_THROW(read_flight_log_csv(none), IoError);
  std::istringstream meta("# nlander-flightlog v1 rate_hz=100\n# meta {oops\n");
  EXPECT_THROW(read_flight_log_csv(meta), IoError);
}

TEST(Labels, MatchIntervalAveragedTrueForce) {
  const FlightLog log = collect_training_flight(CollectionProgram{}, DisturbanceField{}, VehicleParams{}, 40.0);
  const TrainingSet set = extract_labels(log, VehicleParams{}, FeatureSpec{});
  ASSERT_GT(set.size(), 3000u);
  // Oracle: a central difference over two log intervals equals the mean force
  // over both, i.e. the average of the two interval means.
  std::size_t c = 0;
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < log.size(); ++k) {
    const auto& r = log.records;
    if (r[k - 1].contact || r[k].contact || r[k + 1].contact) continue;
    const Vec3 oracle = 0.5 * (r[k].f_a_avg + r[k + 1].f_a_avg);
    worst = std::max(worst, (Vec3(set.targets.col(static_cast<Eigen::Index>(c))) - oracle).norm());
    ++c;
  }
  EXPECT_EQ(c, set.size());
  EXPECT_LT(worst, 1e-3);
}

TEST(Labels, ContactRowsAreDroppedAndShortLogsRefused) {
  const FlightLog log = run_scenario(landing_scenario(DisturbanceField{}, 2.0, 4.0, 8.0), VehicleParams{},
                                     ControllerGains{}, nullptr);
  int contact = 0;
  for (const auto& r : log.records) contact += r.contact;
  ASSERT_GT(contact, 0);
  const TrainingSet set = extract_labels(log, VehicleParams{}, FeatureSpec{});
  EXPECT_LT(set.size(), log.size() - 2);
  FlightLog tiny = log;
  tiny.records.resize(2);
  EXPECT_THROW(extract_labels(tiny, VehicleParams{}, FeatureSpec{}), TooShortLogError);
}

TEST(Metrics, SteadyStateBoundArithmetic) {
  EXPECT_NEAR(steady_state_bound(0.1, 2.0, 8.0, 1.0), 0.1 / 14.0, 1e-15);
  EXPECT_TRUE(std::isinf(steady_state_bound(0.1, 2.0, 1.0, 1.0)));
}

TEST(Metrics, DistanceToTableEdge) {
  TableParams t;
  EXPECT_NEAR(distance_to_table_edge(t.center_x, t.center_y, t), 0.5, 1e-12);
  EXPECT_NEAR(distance_to_table_edge(t.center_x + 0.6, t.center_y, t), 0.1, 1e-12);
  EXPECT_NEAR(distance_to_table_edge(t.center_x + 0.8, t.center_y + 0.9, t), 0.5, 1e-12);
}

TEST(Metrics, EvaluationIsAPureFunctionOfTheLog) {
  const FlightLog log = run_scenario(landing_scenario(DisturbanceField{}, 1.0, 5.0, 9.0), VehicleParams{},
                                     ControllerGains{}, nullptr);
  EvaluationInputs in;
  const auto a = metrics_to_json(evaluate(log, ControllerGains{}, in)).dump();
  std::istringstream csv(csv_of(log));
  const auto b = metrics_to_json(evaluate(read_flight_log_csv(csv), ControllerGains{}, in)).dump();
  EXPECT_EQ(a, b);
}

TEST(Metrics, LandingTerminalErrorIsMeasuredAtTheEnd) {
  const FlightLog log = run_scenario(landing_scenario(DisturbanceField::none(), 1.0, 5.0, 12.0), VehicleParams{},
                                     ControllerGains{}, nullptr);
  const Metrics m = evaluate(log, ControllerGains{}, EvaluationInputs{});
  EXPECT_LT(m.terminal_z_error, 1e-3);
  EXPECT_EQ(m.segment_rms_z.size(), 3u);
}
