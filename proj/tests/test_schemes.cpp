#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "abrsim/abrsim.hpp"
#include "helpers.hpp"

using namespace abrsim;

namespace {

DecisionContext ctx_for(const VideoManifest& m, std::size_t i, double buffer, double est,
                        std::optional<int> last = std::nullopt, bool playing = true) {
  DecisionContext c;
  c.chunk_index = i;
  c.buffer = buffer;
  c.est_bandwidth = est;
  c.last_level = last;
  c.manifest = &m;
  c.allowed_top = m.num_levels();
  c.playing = playing;
  c.playing_indicator = (playing && buffer >= m.chunk_duration_s) ? 1 : 0;
  return c;
}

const std::vector<double> kLadder{350, 600, 1000, 2000, 3000, 5000};

VideoManifest cbr(const std::vector<double>& rates, std::size_t n = 20, const std::vector<double>& q = {}) {
  return make_cbr_manifest("cbr", rates, 2.0, n, q);
}

}  // namespace

// ---- RB ----

TEST(RateBased, Examples) {
  const auto m = cbr({350, 600, 1000, 2000});
  RateBasedScheme rb;
  EXPECT_EQ(rb.decide(ctx_for(m, 0, 0, 1500)).level, 3);
  EXPECT_EQ(rb.decide(ctx_for(m, 0, 0, 100)).level, 1);
  EXPECT_EQ(rb.decide(ctx_for(m, 0, 0, 2000)).level, 4);
}

// ---- BBA-0 ----

TEST(Bba0, Examples) {
  const auto m = cbr(kLadder);
  Bba0Scheme b;
  EXPECT_EQ(b.decide(ctx_for(m, 0, 5, 1000)).level, 1);
  // 350 + 4650 * 25 / 50 = 2675 -> highest level at or below is 2000
  EXPECT_EQ(350.0 + 4650.0 * 25.0 / 50.0, 2675.0);
  EXPECT_EQ(b.decide(ctx_for(m, 0, 35, 1000)).level, 4);
  EXPECT_EQ(b.decide(ctx_for(m, 0, 70, 1000)).level, 6);
  EXPECT_THROW(Bba0Scheme(Bba0Params{60, 10}), ConfigError);
}

// ---- RBA ----

TEST(Rba, Examples) {
  // download times at 2000 kbps: 1000/2000 = 0.5, 4000/2000 = 2, 12000/2000 = 6 s
  const auto m = testutil::manifest_from_sizes({{125000}, {500000}, {1500000}}, 2.0);
  RbaScheme r;
  EXPECT_EQ(r.decide(ctx_for(m, 0, 12, 2000)).level, 2);
  EXPECT_EQ(r.decide(ctx_for(m, 0, 8, 2000)).level, 1);
  EXPECT_EQ(r.decide(ctx_for(m, 0, 12, std::numeric_limits<double>::infinity())).level, 3);
}

// ---- MPC ----

TEST(Mpc, EnumeratesAllSequences) {
  const auto m = cbr({500, 1000}, 10);
  MpcParams p;
  p.horizon = 2;
  MpcScheme s(p);
  s.decide(ctx_for(m, 0, 10, 800));
  EXPECT_EQ(s.evaluations(), 4u);
}

TEST(Mpc, AmpleResourcesPickTop) {
  const auto m = cbr(kLadder, 10);
  MpcParams p;
  p.lambda = 1e6;
  MpcScheme s(p);
  EXPECT_EQ(s.decide(ctx_for(m, 0, 50, 1e9, 6)).level, 6);
}

TEST(Mpc, TieGoesToLowerLevel) {
  const auto m = cbr({1000, 1000}, 10);
  MpcScheme s;
  EXPECT_EQ(s.decide(ctx_for(m, 0, 50, 1e6)).level, 1);
}

TEST(Mpc, SevenThousandSevenHundredSeventySixPerDecision) {
  const auto m = cbr(kLadder, 12);
  MpcScheme s;
  s.decide(ctx_for(m, 0, 10, 2000));
  EXPECT_EQ(s.evaluations(), 7776u);
  s.decide(ctx_for(m, 7, 10, 2000, 3));
  EXPECT_EQ(s.evaluations(), 2u * 7776u);
  s.decide(ctx_for(m, 10, 10, 2000, 3));  // two chunks remain
  EXPECT_EQ(s.evaluations(), 2u * 7776u + 36u);
}

TEST(Mpc, RobustIsNoBolderThanPlain) {
  const auto m = make_vbr_manifest(3, {300, 750, 1200, 1850, 2850, 4300}, 2.0, 60);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto t = random_trace(seed, 300, 1500, 0.6);
    MpcScheme plain;
    MpcParams rp;
    rp.robust = true;
    MpcScheme robust(rp);
    EXPECT_EQ(robust.name(), "robustmpc");
    const auto a = session_metrics(simulate_session(plain, t, m, SimConfig{}), default_qoe_weights(m));
    const auto b = session_metrics(simulate_session(robust, t, m, SimConfig{}), default_qoe_weights(m));
    EXPECT_LE(b.avg_bitrate, a.avg_bitrate + 1e-9);
  }
}

// ---- PIA ----

TEST(Pia, TrackingCostExample) {
  PidParams p;
  p.beta = 1.0;
  const RolloutStart s{60.0, 0.0, true};
  EXPECT_EQ(rollout_tracking_cost(p, p.kp, 60.0, s, 1.0, 2.0, 500, 1000, 1), 250000.0);
  EXPECT_EQ(rollout_tracking_cost(p, p.kp, 60.0, s, 1.0, 2.0, 1000, 1000, 1), 0.0);
}

TEST(Pia, UnitOutputPicksMatchingRate) {
  const auto m = cbr({500, 1000});
  PiaParams p;
  p.pid.beta = 1.0;
  p.horizon = 1;
  p.eta = 0.0;
  PiaScheme s(p);
  const auto d = s.decide(ctx_for(m, 3, 60.0, 1000, 1));
  EXPECT_EQ(*d.u, 1.0);
  EXPECT_EQ(d.level, 2);
}

TEST(Pia, FirstChunkHasNoChangePenalty) {
  const auto m = cbr(kLadder);
  PiaParams heavy;
  heavy.eta = 1e9;
  PiaParams none;
  none.eta = 0.0;
  for (double est : {400.0, 900.0, 2500.0, 7000.0}) {
    PiaScheme a(heavy), b(none);
    EXPECT_EQ(a.decide(ctx_for(m, 0, 0, est, std::nullopt, false)).level,
              b.decide(ctx_for(m, 0, 0, est, std::nullopt, false)).level);
  }
}

TEST(Pia, NegativeOutputForcesTopAndFreezes) {
  const auto m = cbr(kLadder);
  PiaScheme s;
  s.state().integral = -1.2 / 3.6e-5 - 1000.0;  // drives u below zero
  const double before = s.state().integral;
  const auto d = s.decide(ctx_for(m, 5, 30, 2000, 2));
  EXPECT_EQ(d.level, 6);
  EXPECT_EQ(*d.u, 1e-10);
  EXPECT_TRUE(s.state().frozen);
  const std::vector<BufferSample> traj{{0, 2, 30}};
  s.observe(traj);
  EXPECT_EQ(s.state().integral, before);
}

TEST(Pia, EvaluationsAreLevelsTimesHorizon) {
  const auto m = cbr(kLadder);
  PiaScheme s;
  s.decide(ctx_for(m, 2, 20, 2000, 3));
  EXPECT_EQ(s.evaluations(), 6u * 5u);
  auto c = ctx_for(m, 3, 20, 2000, 3);
  c.allowed_top = 4;
  s.decide(c);
  EXPECT_EQ(s.evaluations(), 30u + 20u);
}

TEST(Pia, AntiWindupLiveness) {
  const auto m = cbr(kLadder, 200);
  PiaScheme s;
  const std::vector<BufferSample> traj{{0, 2, 200}};
  int forced = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    s.observe(traj);
    const double before = s.state().integral;
    const double u = pid_output(s.params().pid, 200, before, 60, 1);
    const auto d = s.decide(ctx_for(m, i, 200, 2000, 3));
    if (u <= 1e-10) {
      ++forced;
      EXPECT_EQ(d.level, 6);
      EXPECT_EQ(s.state().integral, before);
      s.observe(traj);
      EXPECT_EQ(s.state().integral, before);
    }
  }
  EXPECT_GT(forced, 0);
}

// ---- PIA-E ----

TEST(Piae, RequiresUnitBeta) {
  PiaParams p;
  p.pid.beta = 0.5;
  EXPECT_THROW(PiaeScheme(p, RampSchedule{}), ConfigError);
  const PiaeScheme ok;
  EXPECT_EQ(ok.ramp().alpha, 4.0);
  EXPECT_EQ(ok.ramp().tau, 300.0);
}

TEST(Piae, MoreAggressiveAtStart) {
  const auto m = cbr(kLadder);
  PiaScheme pia;
  PiaeScheme piae;
  auto c = ctx_for(m, 1, 6.0, 2000, 3);
  c.clock = 0.0;
  const auto a = pia.decide(c);
  const auto b = piae.decide(c);
  EXPECT_LT(*b.u, *a.u);
  EXPECT_GE(b.level, a.level);
}

TEST(Piae, EqualsPiaAfterTau) {
  const auto m = make_vbr_manifest(1, {300, 750, 1200, 1850, 2850, 4300}, 2.0, 50);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> buf(0, 120), est(100, 8000), integ(-5e4, 5e4), clock(300.001, 5000);
  for (int trial = 0; trial < 300; ++trial) {
    PiaScheme pia(PiaeScheme::default_params());
    PiaeScheme piae;
    const double I = integ(rng);
    pia.state().integral = I;
    piae.state().integral = I;
    auto c = ctx_for(m, static_cast<std::size_t>(trial % 50), buf(rng), est(rng),
                     trial % 3 ? std::optional<int>(1 + trial % 6) : std::nullopt);
    c.clock = clock(rng);
    const auto a = pia.decide(c);
    const auto b = piae.decide(c);
    EXPECT_EQ(a.level, b.level);
    EXPECT_EQ(*a.u, *b.u);
    EXPECT_EQ(pia.state().frozen, piae.state().frozen);
  }
}

// ---- CAVA ----

TEST(Cava, OuterTargetExamples) {
  auto build = [](std::int64_t b) {
    std::vector<std::int64_t> l1(6, 100000), l2(6, 200000);
    l1.push_back(b);
    l1.push_back(b);
    l2.push_back(2 * b);
    l2.push_back(2 * b);
    return testutil::manifest_from_sizes({l1, l2}, 2.0);
  };
  CavaParams p;
  p.outer_window = 2;
  const auto flat = build(100000);
  EXPECT_DOUBLE_EQ(cava_outer_target(ctx_for(flat, 6, 10, 1000, 1), p), 60.0);
  const auto half = build(180000);  // 8b / (6a + 2b) = 1.5
  EXPECT_DOUBLE_EQ(cava_outer_target(ctx_for(half, 6, 10, 1000, 1), p), 90.0);
  const auto triple = build(900000);  // ratio 3 clamps to 2
  EXPECT_DOUBLE_EQ(cava_outer_target(ctx_for(triple, 6, 10, 1000, 1), p), 120.0);
  EXPECT_DOUBLE_EQ(cava_outer_target(ctx_for(triple, 6, 10, 1000), p), 60.0);
}

TEST(Cava, Q4InflatesAssumedBandwidth) {
  const auto m = make_vbr_manifest(2, {300, 750, 1200, 1850, 2850, 4300}, 2.0, 40);
  CavaScheme a, b;
  for (int l = 1; l <= 6; ++l) {
    const double x = a.inner_objective(ctx_for(m, 5, 20, 2000, 3), 0.9, 1.1, 1.0, l);
    const double y = b.inner_objective(ctx_for(m, 5, 20, 1.1 * 2000, 3), 0.9, 1.0, 1.0, l);
    EXPECT_DOUBLE_EQ(x, y);
  }
}

namespace {

// Eight positions; position 4 is the largest (Q4). Position 3 is Q3 or Q4
// depending on a one-byte nudge against position 7.
VideoManifest toggle_manifest(bool prev_q4) {
  const std::vector<double> rates{300, 750, 1200, 1850, 2850, 4300};
  const std::vector<double> f{1, 1, 1, 1.5, 3, 1, 1, 1.5};
  std::vector<std::vector<std::int64_t>> sizes;
  for (double r : rates) {
    std::vector<std::int64_t> t;
    for (double x : f) t.push_back(static_cast<std::int64_t>(r * 250.0 * x));
    t[3] += prev_q4 ? 1 : -1;
    sizes.push_back(t);
  }
  return testutil::manifest_from_sizes(sizes, 2.0);
}

template <typename F>
int argmin_level(int top, F&& f) {
  double best = std::numeric_limits<double>::infinity();
  int lvl = 1;
  for (int l = 1; l <= top; ++l) {
    const double v = f(l);
    if (v < best) {
      best = v;
      lvl = l;
    }
  }
  return lvl;
}

}  // namespace

TEST(Cava, EtaToggleFollowsPreviousCategory) {
  CavaParams p;
  p.outer_window = 1;  // target clamps to 2x base in both manifests
  const auto a = toggle_manifest(false);
  const auto b = toggle_manifest(true);
  const auto ca = classify_chunks(a, middle_level(a));
  const auto cb = classify_chunks(b, middle_level(b));
  ASSERT_EQ(ca.at(3), Quartile::Q3);
  ASSERT_EQ(cb.at(3), Quartile::Q4);
  ASSERT_TRUE(ca.is_q4(4) && cb.is_q4(4));

  const double est = 2600;
  const int last = 1;
  CavaScheme sa(p), sb(p);
  const auto da = sa.decide(ctx_for(a, 4, 30, est, last));
  const auto db = sb.decide(ctx_for(b, 4, 30, est, last));
  EXPECT_EQ(sa.current_target(), 120.0);
  EXPECT_EQ(sb.current_target(), 120.0);

  // tracking terms agree level by level; only the change term differs
  CavaScheme ta(p), tb(p);
  ta.decide(ctx_for(a, 4, 30, est, last));
  tb.decide(ctx_for(b, 4, 30, est, last));
  for (int l = 1; l <= 6; ++l)
    EXPECT_EQ(ta.inner_objective(ctx_for(a, 4, 30, est, last), *da.u, 1.1, 0.0, l),
              tb.inner_objective(ctx_for(b, 4, 30, est, last), *db.u, 1.1, 0.0, l));

  const int off = argmin_level(6, [&](int l) { return ta.inner_objective(ctx_for(a, 4, 30, est, last), *da.u, 1.1, 0.0, l); });
  const int on = argmin_level(6, [&](int l) { return tb.inner_objective(ctx_for(b, 4, 30, est, last), *db.u, 1.1, 1.0, l); });
  ASSERT_NE(off, on);
  EXPECT_EQ(da.level, off);
  EXPECT_EQ(db.level, on);
}

TEST(Cava, LowLevelRecomputedWithUnitAlphaWhenBufferSafe) {
  const auto m = make_vbr_manifest(6, {300, 750, 1200, 1850, 2850, 4300}, 2.0, 60);
  const auto cls = classify_chunks(m, middle_level(m));
  int checked = 0;
  for (std::size_t i = 1; i < 55 && checked < 5; ++i) {
    if (cls.is_q4(i)) continue;
    for (double est : {500.0, 800.0, 1200.0, 1600.0}) {
      CavaScheme s, probe;
      const auto c = ctx_for(m, i, 12.0, est, 2);
      const auto d = s.decide(c);
      probe.decide(c);
      const double eta = cls.is_q4(i - 1) ? 0.0 : 1.0;
      const int deflated = argmin_level(6, [&](int l) { return probe.inner_objective(c, *d.u, 0.8, eta, l); });
      if (deflated > 2) continue;
      const int unit = argmin_level(6, [&](int l) { return probe.inner_objective(c, *d.u, 1.0, eta, l); });
      EXPECT_EQ(d.level, unit);
      ++checked;
    }
  }
  EXPECT_GT(checked, 0);
}

TEST(Cava, Validation) {
  CavaParams p;
  p.alpha_q4 = 1.0;
  EXPECT_THROW(CavaScheme{p}, ConfigError);
  CavaParams q;
  q.inner_window = 3;
  EXPECT_THROW(CavaScheme{q}, ConfigError);
  EXPECT_FALSE(CavaParams{}.q4_low_buffer_heuristic);
}

// ---- QUAD ----

TEST(Quad, ExactTargetWins) {
  const auto m = cbr({500, 1000, 2000}, 10, {60, 80, 95});
  QuadScheme s;
  const auto c = ctx_for(m, 3, 60.0, 1500, 2);
  const auto t = quad_terms(QuadParams{}, c, 1.0, 2);
  EXPECT_EQ(t.overshoot, 0.0);
  EXPECT_EQ(t.target, 0.0);
  EXPECT_EQ(t.change, 0.0);
  const auto d = s.decide(c);
  EXPECT_EQ(*d.u, 1.0);
  EXPECT_EQ(d.level, 2);
}

TEST(Quad, LowBufferCapsAtFairLevel) {
  const auto m = cbr({300, 600, 1000, 2000, 3000, 5000}, 10, {30, 40, 55, 70, 85, 95});
  QuadScheme s;
  const auto c = ctx_for(m, 3, 6.0, 50000, 5);
  const double u = pid_output(QuadParams{}.pid, 6.0, 0.0, 60.0, 1);
  const std::vector<double> rates{300, 600, 1000, 2000, 3000, 5000};
  ASSERT_GE(bitrate_from_u(u, 50000, rates), 5);
  EXPECT_EQ(s.decide(c).level, 2);
}

TEST(Quad, TwoLevelNumericObjective) {
  // level 1: 10 VMAF under target and feasible; level 2: 5 over and 20% past the estimate
  const auto m = cbr({1000, 1200}, 10, {70, 85});
  const auto c = ctx_for(m, 0, 60.0, 1000);
  QuadParams p;
  const auto t1 = quad_terms(p, c, 1.0, 1);
  const auto t2 = quad_terms(p, c, 1.0, 2);
  EXPECT_DOUBLE_EQ(t1.overshoot, 0.0);
  EXPECT_DOUBLE_EQ(t1.target, (10.0 / 80) * (10.0 / 80));
  EXPECT_NEAR(t2.overshoot, 0.2 * 0.2, 1e-15);
  EXPECT_DOUBLE_EQ(t2.target, (5.0 / 80) * (5.0 / 80));
  const double j1 = 0.015625, j2 = 0.04 + 0.00390625;
  EXPECT_LT(j1, j2);
  QuadScheme s;
  EXPECT_EQ(s.decide(c).level, 1);
}

TEST(Quad, MissingQualityIsConfigError) {
  const auto m = cbr({500, 1000});
  QuadScheme s;
  EXPECT_THROW(s.decide(ctx_for(m, 0, 60, 1000)), ConfigError);
}

TEST(Quad, ArgminInvariantUnderScaling) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> buf(8.0, 100.0), est(200, 9000), u01(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = testutil::random_quality_manifest(trial, 5, 12);
    const std::size_t i = static_cast<std::size_t>(trial % 12);
    const auto c = ctx_for(m, i, buf(rng), est(rng), i > 0 ? std::optional<int>(1 + trial % 5) : std::nullopt);
    QuadParams p;
    p.alpha = 0.1 + 2 * u01(rng);
    p.eta = 2 * u01(rng);
    QuadScheme s(p);
    const auto d = s.decide(c);
    for (double k : {0.5, 3.0, 1000.0}) {
      const int lvl = argmin_level(5, [&](int l) {
        const auto t = quad_terms(p, c, *d.u, l);
        return k * t.overshoot + k * p.alpha * t.target + k * p.eta * t.change;
      });
      EXPECT_EQ(lvl, d.level);
    }
  }
}

// ---- filters ----

TEST(Filters, CbfExamples) {
  const auto m = cbr({300, 600, 1000, 2000, 3000, 5000}, 4, {40, 60, 78, 86, 92, 96});
  EXPECT_EQ(cbf_filter(m, 80), LevelCaps(4, 3));
  EXPECT_EQ(cbf_filter(m, 100), LevelCaps(4, 6));
  const auto two = cbr({500, 1000}, 4, {70, 90});
  EXPECT_EQ(cbf_filter(two, 80), LevelCaps(4, 1));
  EXPECT_THROW(cbf_filter(cbr({500, 1000}), 80), ConfigError);
}

TEST(Filters, TbfExamples) {
  const auto m = cbr({300, 600, 1000, 2000, 3000, 5000}, 4, {50, 65, 79, 86, 93, 97});
  EXPECT_EQ(tbf_filter(m, 80, TbfVariant::minus), 3);
  EXPECT_EQ(tbf_filter(m, 80, TbfVariant::plus), 4);
  EXPECT_EQ(apply_filter(m, {FilterSpec::Kind::tbf_plus, 80}), LevelCaps(4, 4));
  const auto high = cbr({500, 1000}, 4, {85, 95});
  EXPECT_EQ(tbf_filter(high, 80, TbfVariant::minus), 1);
  const auto low = cbr({500, 1000}, 4, {50, 60});
  EXPECT_EQ(tbf_filter(low, 80, TbfVariant::plus), 2);
}

TEST(Filters, CbfDominatesTbfEverywhere) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto m = testutil::random_quality_manifest(1000 + seed, 6, 40);
    for (double qr : {60.0, 70.0, 80.0}) {
      const auto cbf = cbf_filter(m, qr);
      const int minus = tbf_filter(m, qr, TbfVariant::minus);
      const int plus = tbf_filter(m, qr, TbfVariant::plus);
      for (std::size_t i = 0; i < m.num_chunks(); ++i) {
        const double d = std::abs(m.quality(cbf[i], i) - qr);
        EXPECT_LE(d, std::abs(m.quality(minus, i) - qr));
        EXPECT_LE(d, std::abs(m.quality(plus, i) - qr));
      }
    }
  }
}

TEST(Filters, KindStrings) {
  for (const char* s : {"none", "cbf", "tbf-", "tbf+"}) EXPECT_EQ(to_string(filter_kind_from_string(s)), s);
  EXPECT_THROW(filter_kind_from_string("tbf"), ConfigError);
}

TEST(Schemes, DecisionsStayInsideCaps) {
  const auto m = make_vbr_manifest(8, {300, 750, 1200, 1850, 2850, 4300}, 2.0, 80);
  const auto caps = cbf_filter(m, 70);
  const auto t = random_trace(2, 400, 2500, 0.5);
  for (const auto& name : scheme_names()) {
    auto s = make_scheme(name, {}, 70.0);
    const auto log = simulate_session(*s, t, m, SimConfig{}, caps);
    for (const auto& d : log.decisions) {
      EXPECT_LE(d.level, caps[d.chunk]) << name;
      EXPECT_EQ(d.allowed_top, caps[d.chunk]);
    }
  }
}

// ---- registry ----

TEST(Registry, UnknownScheme) {
  try {
    make_scheme("pandacq");
    FAIL();
  } catch (const UnknownSchemeError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown scheme"), std::string::npos);
  }
}

TEST(Registry, ParametersApplied) {
  for (const auto& n : scheme_names()) EXPECT_EQ(make_scheme(n)->name(), n);
  EXPECT_THROW(make_scheme("pia", {{"horizn", 3}}), ConfigError);
  EXPECT_THROW(make_scheme("pia", {{"pid", {{"kd", 1}}}}), ConfigError);
  EXPECT_THROW(make_scheme("piae", {{"pid", {{"beta", 0.5}}}}), ConfigError);
  EXPECT_THROW(make_scheme("rb", {{"x", 1}}), ConfigError);
  EXPECT_THROW(make_scheme("mpc", {{"horizon", "five"}}), ConfigError);
  auto p = make_scheme("pia", {{"horizon", 3}});
  const auto m = cbr(kLadder);
  p->decide(ctx_for(m, 1, 10, 1500, 2));
  EXPECT_EQ(p->evaluations(), 18u);
}
