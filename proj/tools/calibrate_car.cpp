// Picks the velocity gain of the car controller so the nominal run (all
// sensor readings at the obstacle) clears it by a small margin.
//
//   calibrate_car [position_gain] [target_margin]
//
// Prints the gains as a JSON fragment for configs/car.json.

#include <cstdio>
#include <cstdlib>
#include <string>

#include <Eigen/Dense>

#include "adtest/envs.hpp"

namespace {

double nominal_margin(double k1, double k2) {
  adtest::CarParams p;
  p.position_gain = k1;
  p.velocity_gain = k2;
  const auto traj = adtest::simulate_car(Eigen::VectorXd::Constant(p.steps, p.x_obstacle), p);
  double m = 1e300;
  for (double x : traj.channel("x")) m = std::min(m, p.x_obstacle - x);
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  const double k1 = argc > 1 ? std::strtod(argv[1], nullptr) : -1.0;
  const double target = argc > 2 ? std::strtod(argv[2], nullptr) : 0.09;

  // Margin grows with braking strength (more negative k2); bracket and bisect.
  double weak = -0.5, strong = -8.0;
  if (!(nominal_margin(k1, weak) < target && nominal_margin(k1, strong) > target)) {
    std::fprintf(stderr, "target margin %.4g not bracketed for position gain %.4g\n", target, k1);
    return 1;
  }
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (weak + strong);
    (nominal_margin(k1, mid) < target ? weak : strong) = mid;
  }
  // Round outward to 4 decimals so the committed value keeps the margin.
  const double k2 = std::floor(strong * 1e4) / 1e4;
  std::printf("{\"position_gain\": %.4f, \"velocity_gain\": %.4f}  # nominal margin %.6f\n", k1, k2,
              nominal_margin(k1, k2));
  return 0;
}
