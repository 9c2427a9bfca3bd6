#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "qtraj/io.hpp"

using namespace qtraj;
namespace fs = std::filesystem;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "qtraj_test_io";
  fs::create_directories(dir);
  return dir / name;
}

MeasurementConfig config(Scheme s) {
  MeasurementConfig c;
  c.scheme = s;
  c.theta = 0.25;
  c.vartheta = 0.25 + std::numbers::pi / 2;
  c.dt = 1e-3;
  return c;
}

}  // namespace

TEST(Doubles, ShortestRoundTrip) {
  for (double v : {0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 6.02214076e23, 5e-324, -1.7976931348623157e308,
                   std::numbers::pi}) {
    EXPECT_TRUE(same_bits(io::parse_double(io::format_double(v)), v)) << v;
  }
  EXPECT_EQ(io::format_double(0.1), "0.1");
  EXPECT_THROW(io::parse_double("1.0x"), IoError);
  EXPECT_THROW(io::parse_double(""), IoError);
}

TEST(Csv, SplitKeepsEmptyFields) {
  const auto f = io::split_csv("1,,3,");
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[1], "");
  EXPECT_EQ(f[3], "");
}

class RecordRoundTrip : public ::testing::TestWithParam<Scheme> {};

TEST_P(RecordRoundTrip, BitExact) {
  const auto cfg = config(GetParam());
  const auto rec = run_trajectory(PureTwoQubitState::excited(), cfg, 0.3, 77);
  std::stringstream ss;
  io::write_record(ss, rec);
  const auto back = io::read_record(ss);
  EXPECT_EQ(back.seed, rec.seed);
  EXPECT_EQ(back.t_max, rec.t_max);
  EXPECT_EQ(back.cfg.scheme, cfg.scheme);
  EXPECT_TRUE(same_bits(back.cfg.theta, cfg.theta));
  EXPECT_TRUE(same_bits(back.cfg.vartheta, cfg.vartheta));
  ASSERT_EQ(back.concurrence.size(), rec.concurrence.size());
  ASSERT_EQ(back.readouts.size(), rec.readouts.size());
  for (std::size_t k = 0; k < rec.concurrence.size(); ++k) {
    EXPECT_TRUE(same_bits(back.times[k], rec.times[k]));
    EXPECT_TRUE(same_bits(back.concurrence[k], rec.concurrence[k]));
  }
  // The parsed readouts still certify the stored concurrence series.
  EXPECT_LT(replay_deviation(back), 1e-9);

  std::stringstream again;
  io::write_record(again, back);
  std::stringstream first;
  io::write_record(first, rec);
  EXPECT_EQ(again.str(), first.str());
}

INSTANTIATE_TEST_SUITE_P(AllSchemes, RecordRoundTrip,
                         ::testing::Values(Scheme::photodetection, Scheme::homodyne,
                                           Scheme::heterodyne));

TEST(Record, HeaderAndColumns) {
  const auto rec = run_trajectory(PureTwoQubitState::excited(), config(Scheme::homodyne), 0.002, 1);
  std::stringstream ss;
  io::write_record(ss, rec);
  std::string header, columns, row0;
  std::getline(ss, header);
  std::getline(ss, columns);
  std::getline(ss, row0);
  EXPECT_EQ(header.rfind("# {", 0), 0u);
  EXPECT_EQ(columns, "step,t,x3,x4,concurrence");
  EXPECT_EQ(row0, "0,0,,,0");
}

TEST(Record, RejectsMalformedInput) {
  std::stringstream no_header("step,t\n");
  EXPECT_THROW(io::read_record(no_header), IoError);
  std::stringstream wrong("# {\"format\":\"other\"}\n");
  EXPECT_THROW(io::read_record(wrong), IoError);
}

TEST(Timeseries, RoundTripAndSidecar) {
  const auto st = run_ensemble(PureTwoQubitState::excited(), config(Scheme::photodetection), 1.0, 40, 3);
  const auto path = scratch("series.csv").string();
  io::emit_timeseries(st, path, {{"note", "x"}});
  const auto rows = io::read_timeseries(path);
  ASSERT_EQ(rows.size(), st.t.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    EXPECT_TRUE(same_bits(rows[k].t, st.t[k]));
    EXPECT_TRUE(same_bits(rows[k].mean, st.mean_concurrence[k]));
    EXPECT_TRUE(same_bits(rows[k].std, st.std_concurrence[k]));
    ASSERT_TRUE(rows[k].analytic.has_value());
    EXPECT_EQ(*rows[k].analytic, analytic_mean_concurrence(st.t[k], 1.0));
  }
  std::ifstream side(io::sidecar_path(path));
  const auto j = io::json::parse(side);
  EXPECT_EQ(j.at("format"), "qtraj-timeseries");
  EXPECT_EQ(j.at("n_trajectories"), 40);
  EXPECT_EQ(j.at("fingerprint"), st.fingerprint);
  EXPECT_EQ(j.at("note"), "x");
}

TEST(Timeseries, AnalyticColumnAtPeak) {
  auto cfg = config(Scheme::photodetection);
  cfg.dt = std::log(2.0) / 693.0;
  const auto st = run_ensemble(PureTwoQubitState::excited(), cfg, std::log(2.0), 2, 1);
  std::stringstream ss;
  io::write_timeseries(ss, st);
  const auto rows = io::read_timeseries(ss);
  EXPECT_NEAR(*rows.back().analytic, 0.5, 1e-15);
}

TEST(Timeseries, AnalyticColumnBlankForOtherInitialStates) {
  const auto st = run_ensemble(PureTwoQubitState::ground(), config(Scheme::homodyne), 0.01, 2, 1);
  std::stringstream ss;
  io::write_timeseries(ss, st);
  for (const auto& r : io::read_timeseries(ss)) EXPECT_FALSE(r.analytic.has_value());
}

TEST(Histogram, RoundTripAndSummary) {
  TrajectoryOptions opt;
  opt.snapshot_stride = 0;
  const auto recs = run_records(PureTwoQubitState::excited(), config(Scheme::photodetection), 5.0, 50, 4, opt);
  const auto samples = postselect_heralded(recs);
  ASSERT_FALSE(samples.empty());
  const auto path = scratch("hist.csv").string();
  std::stringstream warn;
  io::emit_histogram(samples, path, io::json::object(), warn);
  EXPECT_TRUE(warn.str().empty());
  const auto rows = io::read_histogram(path);
  ASSERT_EQ(rows.size(), samples.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_TRUE(same_bits(rows[i].b, samples[i].amplitudes.b));
    EXPECT_TRUE(same_bits(rows[i].c, samples[i].amplitudes.c));
    EXPECT_TRUE(same_bits(rows[i].e, samples[i].amplitudes.e));
    EXPECT_TRUE(same_bits(rows[i].first_crossing_time, samples[i].first_crossing_time));
    EXPECT_EQ(rows[i].seed, samples[i].seed);
    EXPECT_EQ(rows[i].step, samples[i].step);
  }
  std::ifstream side(io::summary_path(path));
  const auto j = io::json::parse(side);
  EXPECT_EQ(j.at("summary").at("count"), samples.size());
}

TEST(Histogram, EmptyWritesHeaderAndWarns) {
  const auto path = scratch("empty.csv").string();
  std::stringstream warn;
  io::emit_histogram({}, path, io::json::object(), warn);
  EXPECT_NE(warn.str().find("warning"), std::string::npos);
  EXPECT_TRUE(io::read_histogram(path).empty());
  std::ifstream f(path);
  std::string all((std::istreambuf_iterator<char>(f)), {});
  EXPECT_EQ(all, "first_crossing_time,b,c,e,residual_abs,seed,step\n");
}

TEST(Summary, MatchesTwoPass) {
  const std::vector<double> x{0.5, 0.25, 1.0, 0.75};
  const auto s = io::summarize(x);
  EXPECT_EQ(s.count, 4u);
  EXPECT_DOUBLE_EQ(s.mean, 0.625);
  EXPECT_DOUBLE_EQ(s.variance, (0.015625 + 0.140625 + 0.140625 + 0.015625) / 3.0);
}

TEST(Files, UnwritablePathRaisesIoError) {
  const auto st = run_ensemble(PureTwoQubitState::ground(), config(Scheme::homodyne), 0.01, 1, 1);
  EXPECT_THROW(io::emit_timeseries(st, "/nonexistent_dir_qtraj/x.csv"), IoError);
  EXPECT_THROW(io::read_timeseries("/nonexistent_dir_qtraj/x.csv"), IoError);
}

TEST(Json, ConfigAndStateRoundTrip) {
  const auto cfg = config(Scheme::heterodyne);
  const auto back = io::config_from_json(io::to_json(cfg));
  EXPECT_EQ(back.scheme, cfg.scheme);
  EXPECT_TRUE(same_bits(back.theta, cfg.theta));
  EXPECT_TRUE(same_bits(back.dt, cfg.dt));
  const PureTwoQubitState s(Vector4c(cplx(0.5, 0.1), cplx(-0.3, 0.2), cplx(0.1, -0.4), cplx(0.2, 0.0)));
  const auto sb = io::state_from_json(io::to_json(s));
  for (int i = 0; i < 4; ++i) EXPECT_EQ(sb.amplitudes()(i), s.amplitudes()(i));
}
