#include "csrl/actions.hpp"

#include <algorithm>
#include <stdexcept>

namespace csrl {

namespace {

double signed_step(int offset, const std::array<double, 3>& steps) {
  const double step = steps[offset % 3];
  return offset < 3 ? -step : step;
}

}  // namespace

ActionClass action_class(int action) {
  if (action < 0 || action >= kNumActions) throw std::out_of_range("action index");
  if (action < 6) return ActionClass::Threshold;
  if (action < 12) return ActionClass::Ratio;
  return action == kReimageAction ? ActionClass::Reimage : ActionClass::DoNothing;
}

double threshold_after(int action, double delta_d, const ActionSteps& steps) {
  if (action_class(action) != ActionClass::Threshold) return delta_d;
  return std::clamp(delta_d + signed_step(action, steps.threshold), 0.0, 1.0);
}

double ratio_after(int action, double f, const ActionSteps& steps) {
  if (action_class(action) != ActionClass::Ratio) return f;
  return std::clamp(f + signed_step(action - 6, steps.ratio), 0.0, 1.0);
}

bool reimages(int action) {
  const ActionClass c = action_class(action);
  return c == ActionClass::Threshold || c == ActionClass::Reimage;
}

const char* action_name(int action) {
  static const char* const kNames[kNumActions] = {
      "threshold_dec_low", "threshold_dec_med", "threshold_dec_high", "threshold_inc_low",
      "threshold_inc_med", "threshold_inc_high", "ratio_dec_low",     "ratio_dec_med",
      "ratio_dec_high",    "ratio_inc_low",     "ratio_inc_med",      "ratio_inc_high",
      "reimage",           "do_nothing"};
  if (action < 0 || action >= kNumActions) throw std::out_of_range("action index");
  return kNames[action];
}

}  // namespace csrl
