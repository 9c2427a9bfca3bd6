// Mean concurrence under optimal homodyne detection against the closed form.
#include <cstdio>

#include "qtraj/ensemble.hpp"

int main() {
  using namespace qtraj;
  MeasurementConfig cfg;
  cfg.scheme = Scheme::homodyne;
  cfg.theta = 0.0;
  cfg.vartheta = std::numbers::pi / 2;
  cfg.dt = 1e-3;
  const auto stats = run_ensemble(PureTwoQubitState::excited(), cfg, 3.0, 400, 2024);
  std::printf("%6s %10s %10s %10s\n", "t", "mean", "std", "closed");
  for (std::size_t k = 0; k < stats.t.size(); k += 250) {
    std::printf("%6.3f %10.4f %10.4f %10.4f\n", stats.t[k], stats.mean_concurrence[k],
                stats.std_concurrence[k], analytic_mean_concurrence(stats.t[k], cfg.gamma));
  }
}
