#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "abrsim/control.hpp"

using namespace abrsim;

namespace {

PidParams gains(double kp, double ki, double beta) {
  PidParams p;
  p.kp = kp;
  p.ki = ki;
  p.beta = beta;
  return p;
}

}  // namespace

TEST(PidOutput, Examples) {
  EXPECT_EQ(pid_output(gains(8.8e-3, 3.6e-5, 1.0), 60.0, 0.0, 60.0, 1), 1.0);
  EXPECT_DOUBLE_EQ(pid_output(gains(8.8e-3, 3.6e-5, 1.0), 0.0, 0.0, 60.0, 0), 8.8e-3 * 60.0);
  EXPECT_NEAR(pid_output(gains(8.8e-3, 3.6e-5, 1.0), 0.0, 0.0, 60.0, 0), 0.528, 1e-12);
  EXPECT_NEAR(pid_output(gains(8.8e-3, 3.6e-5, 0.2), 0.0, 0.0, 60.0, 0), 0.1056, 1e-12);
  EXPECT_DOUBLE_EQ(pid_output(gains(1.0, 0.5, 1.0), 0.0, 4.0, 0.0, 0), 2.0);
}

TEST(BitrateFromU, Examples) {
  const std::vector<double> levels{350, 600, 1000, 2000, 3000, 5000};
  EXPECT_EQ(bitrate_from_u(1.0, 3000, levels), 5);
  EXPECT_EQ(bitrate_from_u(10.0, 3000, levels), 1);
  EXPECT_EQ(bitrate_from_u(0.5, 3000, levels), 6);
}

TEST(AntiWindup, Examples) {
  const PidParams p;
  const auto neg = anti_windup(-0.5, p);
  EXPECT_EQ(neg.u, 1e-10);
  EXPECT_TRUE(neg.freeze_integral);
  EXPECT_TRUE(neg.force_max);
  const auto pass = anti_windup(0.7, p);
  EXPECT_EQ(pass.u, 0.7);
  EXPECT_FALSE(pass.freeze_integral);
  EXPECT_FALSE(pass.force_max);
  const auto edge = anti_windup(1e-10, p);
  EXPECT_TRUE(edge.force_max);
}

TEST(Damping, Examples) {
  EXPECT_EQ(damping_ratio(2, 1), 1.0);
  EXPECT_EQ(natural_frequency(1), 1.0);
  EXPECT_NEAR(damping_ratio(8.8e-3, 3.6e-5), 8.8e-3 / (2 * std::sqrt(3.6e-5)), 1e-15);
  EXPECT_NEAR(damping_ratio(8.8e-3, 3.6e-5), 0.7333, 1e-4);
  EXPECT_NEAR(natural_frequency(3.6e-5), 6e-3, 1e-15);
  EXPECT_NEAR(damping_ratio(1e-3, 6e-5), 1e-3 / (2 * std::sqrt(6e-5)), 1e-15);
  EXPECT_NEAR(damping_ratio(1e-3, 6e-5), 0.0645, 1e-4);
  EXPECT_FALSE(is_valid_gain_pair(1e-3, 6e-5));
  EXPECT_THROW(damping_ratio(1, 0), DomainError);
  EXPECT_THROW(natural_frequency(-1), DomainError);
}

TEST(ValidGainPair, Examples) {
  EXPECT_TRUE(is_valid_gain_pair(8.8e-3, 3.6e-5));
  EXPECT_FALSE(is_valid_gain_pair(2, 1));
  EXPECT_EQ(damping_ratio(1.2e-3, 1e-6), 0.6);
  EXPECT_TRUE(is_valid_gain_pair(1.2e-3, 1e-6));
  EXPECT_FALSE(is_valid_gain_pair(0.0, 1e-6));
}

TEST(Ramp, KpExamples) {
  RampSchedule s;
  s.base_kp = 8.8e-3;
  EXPECT_NEAR(ramp_kp(s, 0), 0.0352, 1e-15);
  EXPECT_NEAR(ramp_kp(s, 300), 8.8e-3, 1e-15);
  EXPECT_NEAR(ramp_kp(s, 150), 0.022, 1e-15);
  EXPECT_EQ(ramp_kp(s, 301), 8.8e-3);
}

TEST(Ramp, TargetExamples) {
  RampSchedule s;
  EXPECT_EQ(ramp_xr(s, 0), 4.0);
  EXPECT_EQ(ramp_xr(s, 20), 4.0);
  EXPECT_EQ(ramp_xr(s, 300), 60.0);
  EXPECT_EQ(ramp_xr(s, 150), 30.0);
  EXPECT_EQ(ramp_xr(s, 1000), 60.0);
}

TEST(Ramp, Validation) {
  RampSchedule s;
  s.alpha = 1.0;
  EXPECT_THROW(s.validate(), ConfigError);
  RampSchedule t;
  t.tau = 0.0;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(VelocityConstant, Examples) {
  EXPECT_EQ(velocity_constant(gains(8.8e-3, 3.6e-5, 1.0)), 0.0);
  EXPECT_NEAR(velocity_constant(gains(8.8e-3, 3.6e-5, 0.2)), 8.8e-3 * 0.8 / 3.6e-5, 1e-9);
  EXPECT_NEAR(velocity_constant(gains(8.8e-3, 3.6e-5, 0.2)), 195.6, 0.05);
  EXPECT_EQ(velocity_constant(gains(1, 1, 0.5)), 0.5);
}

TEST(PidParams, Validation) {
  EXPECT_THROW(gains(0, 1, 1).validate(), ConfigError);
  EXPECT_THROW(gains(1, 0, 1).validate(), ConfigError);
  EXPECT_THROW(gains(1, 1, 1.5).validate(), ConfigError);
  PidParams p;
  p.kd = 0.1;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(IntegrateError, LeftEndpointAndFreeze) {
  PidState s;
  const std::vector<BufferSample> traj{{0.0, 1.0, 10.0}, {1.0, 0.5, 20.0}};
  integrate_error(s, std::span<const BufferSample>(traj), [](double) { return 60.0; });
  EXPECT_DOUBLE_EQ(s.integral, 50.0 * 1.0 + 40.0 * 0.5);
  s.frozen = true;
  integrate_error(s, std::span<const BufferSample>(traj), [](double) { return 60.0; });
  EXPECT_DOUBLE_EQ(s.integral, 70.0);
  EXPECT_FALSE(s.frozen);
}

// While playing, x' = C/R - 1 = u - 1. Integrated with small steps, x settles
// on the target within 10 / wn for valid gain pairs.
TEST(ClosedLoop, SteadyStateTrackingForValidGains) {
  const std::vector<std::pair<double, double>> pairs{{8.8e-3, 3.6e-5}, {1.2e-3, 1e-6}, {14e-3, 1e-4}, {6e-3, 1.6e-5}};
  for (auto [kp, ki] : pairs) {
    if (!is_valid_gain_pair(kp, ki)) continue;
    const PidParams p = gains(kp, ki, 1.0);
    const double settle = 10.0 / natural_frequency(ki);
    double x = 10.0, integral = 0.0;
    const double dt = 0.05;
    for (double t = 0.0; t < settle; t += dt) {
      const double u = pid_output(p, x, integral, 60.0, 1);
      integral += (60.0 - x) * dt;
      x += (u - 1.0) * dt;
    }
    EXPECT_LT(std::abs(x - 60.0), 0.01 * 60.0) << kp << "," << ki;
  }
}
