#pragma once

#include <array>
#include <vector>

#include "csrl/env.hpp"

namespace csrl {

inline constexpr int kNumRatioLevels = 6;
inline constexpr int kNumDetectorLevels = 3;
inline constexpr int kNumStates = kNumRatioLevels * kNumDetectorLevels + 2;
inline constexpr int kAttackEndState = 18;
inline constexpr int kAttackGoalState = 19;

// Interior cut points. Ratio levels partition [0, 0.5); detector levels
// partition [0, 1]. A value equal to a cut belongs to the upper bin.
struct Discretization {
  std::vector<double> ratio_cuts{0.05, 0.1, 0.2, 0.3, 0.4};
  std::vector<double> detector_cuts{1.0 / 3.0, 2.0 / 3.0};

  void validate() const;
  int ratio_level(double ratio) const;
  int detector_level(double f) const;
};

// Fraction of devices whose observed risk is >= delta_d. Devices with no
// enabled incident detector count as below threshold.
double estimate_compromised_ratio(const Observation& obs, double delta_d);

// Composite index ratio_level * 3 + detector_level while running; 18 and 19
// for the two terminal states. Ratios >= 0.5 clamp to the top level.
int characterize(double ratio, double f, Terminal terminal, const Discretization& bins = {});

std::array<double, kNumStates> state_features(int state);

}  // namespace csrl
