#include "csrl/state.hpp"

#include <algorithm>
#include <stdexcept>

namespace csrl {

namespace {

int level_of(const std::vector<double>& cuts, double x) {
  return static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), x) - cuts.begin());
}

void check_cuts(const std::vector<double>& cuts, std::size_t expected, double hi,
                const char* name) {
  if (cuts.size() != expected)
    throw ConfigError(std::string(name) + " needs " + std::to_string(expected) + " cut points");
  double prev = 0.0;
  for (double c : cuts) {
    if (!(c > prev) || !(c < hi))
      throw ConfigError(std::string(name) + " cut points must increase strictly inside the domain");
    prev = c;
  }
}

}  // namespace

void Discretization::validate() const {
  check_cuts(ratio_cuts, kNumRatioLevels - 1, 0.5, "state.ratio_bins");
  check_cuts(detector_cuts, kNumDetectorLevels - 1, 1.0, "state.detector_bins");
}

int Discretization::ratio_level(double ratio) const { return level_of(ratio_cuts, ratio); }

int Discretization::detector_level(double f) const { return level_of(detector_cuts, f); }

double estimate_compromised_ratio(const Observation& obs, double delta_d) {
  if (obs.device_risk.empty()) return 0.0;
  int above = 0;
  for (const auto& risk : obs.device_risk)
    if (risk && *risk >= delta_d) ++above;
  return static_cast<double>(above) / static_cast<double>(obs.device_risk.size());
}

int characterize(double ratio, double f, Terminal terminal, const Discretization& bins) {
  if (terminal == Terminal::AttackEnd) return kAttackEndState;
  if (terminal == Terminal::AttackGoal) return kAttackGoalState;
  return bins.ratio_level(ratio) * kNumDetectorLevels + bins.detector_level(f);
}

std::array<double, kNumStates> state_features(int state) {
  if (state < 0 || state >= kNumStates) throw std::out_of_range("state index");
  std::array<double, kNumStates> x{};
  x[state] = 1.0;
  return x;
}

}  // namespace csrl
