#pragma once

#include <array>

namespace csrl {

// 0-5: threshold moves {decrease, increase} x {low, med, high} on delta_d,
//      each followed by reimaging at the new threshold
// 6-11: same moves on the enabled-detector ratio f
// 12: reimage at the current threshold
// 13: do nothing
inline constexpr int kNumActions = 14;
inline constexpr int kReimageAction = 12;
inline constexpr int kDoNothingAction = 13;

enum class ActionClass { Threshold, Ratio, Reimage, DoNothing };

struct ActionSteps {
  std::array<double, 3> threshold{0.02, 0.05, 0.10};
  std::array<double, 3> ratio{1.0 / 12.0, 2.0 / 12.0, 3.0 / 12.0};
};

ActionClass action_class(int action);

// Clamped to [0, 1]. Actions of another class return the input unchanged.
double threshold_after(int action, double delta_d, const ActionSteps& steps);
double ratio_after(int action, double f, const ActionSteps& steps);

bool reimages(int action);

const char* action_name(int action);

}  // namespace csrl
