#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qtraj/engine.hpp"

using namespace qtraj;

namespace {

constexpr double kPi = std::numbers::pi;

MeasurementConfig config(Scheme s, double theta = 0.0, double vartheta = kPi / 2, double dt = 1e-3) {
  MeasurementConfig c;
  c.scheme = s;
  c.theta = theta;
  c.vartheta = vartheta;
  c.dt = dt;
  return c;
}

int clicks(const PhotoCounts& pc) { return pc.n3 + pc.m4; }

}  // namespace

TEST(ApplyKraus, NoClickOnGroundState) {
  const auto ops = photodetection_kraus(config(Scheme::photodetection, 0, 0, 0.01));
  const auto u = apply_kraus(PureTwoQubitState::ground(), ops[k00]);
  EXPECT_EQ(u.state, PureTwoQubitState::ground());
  EXPECT_EQ(u.weight, 1.0);
}

TEST(ApplyKraus, ClickOnExcitedPair) {
  const auto ops = photodetection_kraus(config(Scheme::photodetection, 0.7, 0, 0.01));
  const auto u = apply_kraus(PureTwoQubitState::excited(), ops[k10]);
  EXPECT_NEAR(u.weight, 0.0099, 1e-16);
  const double h = 1.0 / std::numbers::sqrt2;
  const cplx ph = std::polar(1.0, 0.7);
  EXPECT_LT((u.state.amplitudes() - ph * PureTwoQubitState(0.0, h, h, 0.0).amplitudes()).norm(), 1e-15);
}

TEST(ApplyKraus, HomodyneOriginConcurrence) {
  const double eps = 0.001;
  const auto k = homodyne_kraus(config(Scheme::homodyne, 0.0, kPi / 2, eps), 0.0, 0.0);
  const auto u = apply_kraus(PureTwoQubitState::excited(), k);
  EXPECT_NEAR(concurrence_pure(u.state), 2 * eps * (1 - eps) / ((1 - eps) * (1 - eps) + eps * eps), 1e-15);
  EXPECT_NEAR(concurrence_pure(u.state), 0.002002, 1e-6);
}

TEST(ApplyKraus, Errors) {
  const auto ops = photodetection_kraus(config(Scheme::photodetection, 0, 0, 0.01));
  EXPECT_THROW(apply_kraus(PureTwoQubitState::excited(), ops[k11]), ImpossibleOutcomeError);
  EXPECT_THROW(apply_kraus(PureTwoQubitState::ground(), ops[k10]), ImpossibleOutcomeError);
  EXPECT_THROW(apply_kraus(PureTwoQubitState(1.0, 1.0, 0.0, 0.0), ops[k00]), PreconditionError);
}

TEST(StepCount, CoversInterval) {
  EXPECT_EQ(step_count(4.0, 1e-3), 4000u);
  EXPECT_EQ(step_count(1.0, 0.3), 4u);
  EXPECT_EQ(step_count(0.9, 0.3), 3u);
  EXPECT_THROW(step_count(0.0, 1e-3), PreconditionError);
}

TEST(Trajectory, GroundStateIsDark) {
  for (auto s : {Scheme::photodetection, Scheme::homodyne, Scheme::heterodyne}) {
    const auto rec = run_trajectory(PureTwoQubitState::ground(), config(s), 0.5, 1);
    EXPECT_EQ(rec.steps(), 500u);
    for (double c : rec.concurrence) EXPECT_EQ(c, 0.0);
    EXPECT_LT((rec.final_state.amplitudes() - PureTwoQubitState::ground().amplitudes()).norm(), 1e-15);
  }
}

TEST(Trajectory, RecordLayout) {
  TrajectoryOptions opt;
  opt.snapshot_stride = 7;
  const auto rec = run_trajectory(PureTwoQubitState::excited(), config(Scheme::homodyne), 0.1, 3, opt);
  ASSERT_EQ(rec.times.size(), 101u);
  ASSERT_EQ(rec.concurrence.size(), 101u);
  ASSERT_EQ(rec.readouts.size(), 100u);
  EXPECT_EQ(rec.times[0], 0.0);
  EXPECT_NEAR(rec.times[100], 0.1, 1e-15);
  for (const auto& s : rec.snapshots) EXPECT_EQ(s.step % 7, 0u);
  EXPECT_EQ(rec.snapshots.size(), 15u);
  EXPECT_EQ(rec.norm_warnings, 0u);
}

TEST(Trajectory, DeterministicInSeed) {
  for (auto s : {Scheme::photodetection, Scheme::homodyne, Scheme::heterodyne}) {
    const auto a = run_trajectory(PureTwoQubitState::excited(), config(s, 0.2, 1.0), 1.0, 77);
    const auto b = run_trajectory(PureTwoQubitState::excited(), config(s, 0.2, 1.0), 1.0, 77);
    const auto c = run_trajectory(PureTwoQubitState::excited(), config(s, 0.2, 1.0), 1.0, 78);
    EXPECT_EQ(a.concurrence, b.concurrence);
    EXPECT_EQ(a.final_state, b.final_state);
    if (s != Scheme::photodetection) {
      EXPECT_NE(a.concurrence, c.concurrence);
    }
  }
}

TEST(Trajectory, ReplayCertifiesRecord) {
  TrajectoryOptions opt;
  opt.snapshot_stride = 1;
  const double h = 1.0 / std::numbers::sqrt2;
  for (auto s : {Scheme::photodetection, Scheme::homodyne, Scheme::heterodyne}) {
    for (const auto& init : {PureTwoQubitState::excited(), PureTwoQubitState(0.5, cplx(0, 0.5), -0.5, 0.5),
                             PureTwoQubitState(h, 0.0, 0.0, -h)}) {
      const auto rec = run_trajectory(init, config(s, 0.4, 1.3), 2.0, 5, opt);
      EXPECT_LT(replay_deviation(rec), 1e-9);
      const auto& snap = rec.snapshots[1234];
      ASSERT_EQ(snap.step, 1234u);
      EXPECT_LT((replay_state(rec, 1234).amplitudes() - snap.state.amplitudes()).norm(), 1e-9);
    }
  }
}

TEST(Trajectory, ReplayNeedsReadouts) {
  TrajectoryOptions opt;
  opt.keep_readouts = false;
  const auto rec = run_trajectory(PureTwoQubitState::excited(), config(Scheme::homodyne), 0.1, 1, opt);
  EXPECT_THROW(replay_deviation(rec), PreconditionError);
  EXPECT_THROW(replay_state(rec, 5), PreconditionError);
}

TEST(Trajectory, StatesStayPure) {
  TrajectoryOptions opt;
  opt.snapshot_stride = 1;
  for (auto s : {Scheme::photodetection, Scheme::homodyne, Scheme::heterodyne}) {
    const auto rec = run_trajectory(PureTwoQubitState(0.5, 0.5, 0.5, 0.5), config(s, 0.3, 2.0), 3.0, 9, opt);
    for (const auto& snap : rec.snapshots) ASSERT_NEAR(snap.state.norm_squared(), 1.0, 1e-10);
    EXPECT_EQ(rec.norm_warnings, 0u);
    for (double c : rec.concurrence) {
      ASSERT_GE(c, 0.0);
      ASSERT_LE(c, 1.0);
    }
  }
}

TEST(Trajectory, PhotodetectionJumpStructure) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto rec = run_trajectory(PureTwoQubitState::excited(), config(Scheme::photodetection, 0.3, 2.1), 6.0, seed);
    int total = 0;
    std::vector<PhotoCounts> hits;
    for (std::size_t k = 0; k < rec.readouts.size(); ++k) {
      const auto pc = std::get<PhotoCounts>(rec.readouts[k]);
      const int n = clicks(pc);
      if (n == 0) {
        // concurrence unchanged between clicks
        ASSERT_EQ(rec.concurrence[k + 1], rec.concurrence[k]);
        continue;
      }
      total += n;
      hits.push_back(pc);
      const double want = total == 1 ? 1.0 : 0.0;
      ASSERT_NEAR(rec.concurrence[k + 1], want, 1e-10);
    }
    ASSERT_LE(total, 2);
    if (total == 2) {
      bool same = hits.size() == 1 ? (hits[0].n3 == 2 || hits[0].m4 == 2)
                                   : ((hits[0].n3 == 1) == (hits[1].n3 == 1));
      EXPECT_TRUE(same) << "seed " << seed;
    }
  }
}

TEST(Trajectory, HomodyneFirstStepConcurrence) {
  const double eps = 1e-3;
  const double want = 2 * eps * (1 - eps) / ((1 - eps) * (1 - eps) + eps * eps);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto rec = run_trajectory(PureTwoQubitState::excited(), config(Scheme::homodyne), eps, seed);
    ASSERT_EQ(rec.steps(), 1u);
    const auto x = std::get<QuadraturePair>(rec.readouts[0]);
    const double r2 = x.x3 * x.x3 + x.x4 * x.x4;
    // 2|det| / density, with the determinant law for theta = 0, vartheta = pi/2.
    const auto k = homodyne_kraus(joint_propagator(eps, 0.0, kPi / 2), x.x3, x.x4);
    const double density = (k.matrix * PureTwoQubitState::excited().amplitudes()).squaredNorm();
    EXPECT_NEAR(rec.concurrence[1], 2 * eps * (1 - eps) * std::exp(-r2) / kPi / density, 1e-12);
    EXPECT_NEAR(rec.concurrence[1], want, 10 * eps * eps * (1 + r2));
  }
}

TEST(Trajectory, EqualPhasesNeverEntangle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto rec = run_trajectory(PureTwoQubitState::excited(), config(Scheme::homodyne, 0.8, 0.8), 4.0, seed);
    for (double c : rec.concurrence) ASSERT_LT(c, 1e-10);
  }
}

TEST(Trajectory, HeterodyneNeverEntangles) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto rec = run_trajectory(PureTwoQubitState::excited(), config(Scheme::heterodyne, 0.1, 1.7), 4.0, seed);
    for (double c : rec.concurrence) ASSERT_LT(c, 1e-8);
  }
}

TEST(Trajectory, StopAboveThreshold) {
  TrajectoryOptions opt;
  opt.snapshot_stride = 0;
  opt.stop_above = 0.999;
  const auto rec = run_trajectory(PureTwoQubitState::excited(), config(Scheme::photodetection), 10.0, 4, opt);
  ASSERT_GT(rec.concurrence.back(), 0.999);
  for (std::size_t k = 0; k + 1 < rec.concurrence.size(); ++k) EXPECT_LE(rec.concurrence[k], 0.999);
  ASSERT_EQ(rec.snapshots.size(), 1u);
  EXPECT_EQ(rec.snapshots[0].step, rec.steps());
}

TEST(NoClick, SurvivalMatchesPreBeamsplitterState) {
  // With no clicks the pair stays in |ee>; the probability of that record
  // is the product of no-click weights and should approach exp(-2 gamma t),
  // the |ee>|00> population of the pre-beamsplitter state.
  const double t = 1.5;
  double prev_err = 1.0;
  for (double dt : {1e-2, 1e-3, 1e-4}) {
    const auto ops = photodetection_kraus(config(Scheme::photodetection, 0, 0, dt));
    PureTwoQubitState s = PureTwoQubitState::excited();
    double p = 1.0;
    for (std::size_t k = 0; k < step_count(t, dt); ++k) {
      const auto u = apply_kraus(s, ops[k00]);
      s = u.state;
      p *= u.weight;
    }
    EXPECT_LT((s.amplitudes() - PureTwoQubitState::excited().amplitudes()).norm(), 1e-15);
    const double err = std::abs(std::log(p) / (-2.0 * t) - 1.0);
    EXPECT_LT(err, dt);  // O(eps) correction to the exponent
    EXPECT_LT(err, prev_err);
    prev_err = err;
  }
}

TEST(NoClick, MonteCarloSurvivalFraction) {
  const double t = 0.5;
  const int n = 4000;
  int dark = 0;
  for (int i = 0; i < n; ++i) {
    const auto rec = run_trajectory(PureTwoQubitState::excited(), config(Scheme::photodetection), t, derive_seed(3, i));
    bool any = false;
    for (const auto& o : rec.readouts) any = any || clicks(std::get<PhotoCounts>(o)) > 0;
    dark += !any;
  }
  const double p = std::exp(-2.0 * t);
  EXPECT_NEAR(static_cast<double>(dark) / n, p, 4 * std::sqrt(p * (1 - p) / n));
}

TEST(KrausForOutcome, RebuildsEachFamily) {
  const auto p = joint_propagator(0.01, 0.2, 1.1);
  const auto a = kraus_for_outcome(p, PhotoCounts{2, 0});
  EXPECT_EQ((a.matrix - p.fock[k20]).norm(), 0.0);
  const auto b = kraus_for_outcome(p, QuadraturePair{0.3, -0.2});
  EXPECT_EQ((b.matrix - homodyne_kraus(p, 0.3, -0.2).matrix).norm(), 0.0);
  const auto c = kraus_for_outcome(p, HeterodynePair{{0.1, 0.2}, {-0.3, 0.4}});
  EXPECT_EQ((c.matrix - heterodyne_kraus(p, {0.1, 0.2}, {-0.3, 0.4}).matrix).norm(), 0.0);
}
