#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "csrl/actions.hpp"
#include "csrl/env.hpp"
#include "csrl/reward.hpp"

namespace csrl {

class ConstraintError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Sense { LessEqual, GreaterEqual };

// Boolean variable index == detector id.
struct Term {
  double coef;
  int var;
};

struct LinearConstraint {
  std::string id;
  std::vector<Term> terms;
  Sense sense = Sense::LessEqual;
  double bound = 0.0;

  double activity(std::span<const std::uint8_t> x) const;
  bool holds(std::span<const std::uint8_t> x) const;
};

enum class RuleOrigin { UserGiven, Learned };

struct ExclusionRule {
  int state = 0;
  int action = 0;
  RuleOrigin origin = RuleOrigin::UserGiven;

  std::string id() const;
};

inline const char* const kPostEnergyId = "post:energy";
inline const char* const kPostReimageLossId = "post:reimage_loss";
inline const char* const kCountWindowMinId = "count_window:min";
inline const char* const kCountWindowMaxId = "count_window:max";
inline const char* const kSolverUnknownId = "solver:unknown";

struct PostBounds {
  double e_max = 0.0;
  double reimage_loss_max = 0.0;
};

struct ConstraintSet {
  int n_detectors = 0;
  std::vector<LinearConstraint> pre;
  std::vector<ExclusionRule> rules;
  PostBounds post;
  double count_slack = 0.05;  // count window half-width as a fraction of D
  std::uint64_t revision = 0;  // bumped on every edit; keys solver caches

  bool excludes(int state, int action) const;
  const LinearConstraint* find(const std::string& id) const;
};

// Order-insensitive comparison by content; ignores revision.
bool equivalent(const ConstraintSet& lhs, const ConstraintSet& rhs);

struct FormulationParams {
  double e_budget = 0.0;
  double e_max = 0.0;
  int l_min = 1;
  double reimage_loss_max = 0.0;
  double count_slack = 0.05;
};

FormulationParams formulation_params(const Topology& topology, const EnvConfig& env);

// energy <= e_budget, one cover constraint per device, and the post bounds.
// Throws ConstraintError if some device has fewer than l_min incident links.
ConstraintSet formulate_initial(const Topology& topology, const FormulationParams& params);

// round(f * D) +/- count_slack * D, clipped to [0, D].
std::pair<int, int> count_window(double target_f, int n_detectors, double count_slack);
std::vector<LinearConstraint> count_window_constraints(double target_f, int n_detectors,
                                                       double count_slack);

enum class SolveStatus { Sat, Unsat, Unknown };

struct SolveOptions {
  std::int64_t node_budget = 1'000'000;
  bool greedy_first = true;
};

struct SatResult {
  SolveStatus status = SolveStatus::Unsat;
  std::vector<std::uint8_t> assignment;  // Sat only
  std::vector<std::string> violated_ids;  // Unsat/Unknown: constraints that caused refutations
  std::int64_t nodes = 0;

  bool sat() const { return status == SolveStatus::Sat; }
};

// Complete 0-1 feasibility search: bound propagation on every constraint,
// knapsack/cardinality pair bounds, branching on the cheapest undecided
// variable. Every Sat witness is re-evaluated before it is returned.
SatResult solve(std::span<const LinearConstraint> constraints, int n_vars,
                const SolveOptions& options = {});

SatResult solve_pre(const ConstraintSet& cs, double target_f, const SolveOptions& options = {});

// Memoizes solve_pre by count window. Entries survive revisions that only
// touch exclusion rules.
class SolveCache {
 public:
  const SatResult& solve(const ConstraintSet& cs, double target_f, const SolveOptions& options);
  std::size_t solver_calls() const { return solver_calls_; }

 private:
  std::uint64_t revision_ = UINT64_MAX;
  std::vector<LinearConstraint> pre_;
  int n_detectors_ = -1;
  double count_slack_ = 0.0;
  std::map<std::pair<int, int>, SatResult> entries_;
  std::size_t solver_calls_ = 0;
};

struct PreCheck {
  bool satisfied = false;
  std::vector<std::uint8_t> assignment;  // detector assignment to execute
  std::vector<std::string> violated_ids;
  bool unknown = false;                  // solver hit its node budget
  bool solver_called = false;
};

// Exclusion rules first (no solver call); ratio actions then need a witness
// for their target f. Other actions keep the current assignment. Do-nothing is
// always satisfied.
PreCheck check_pre(int action, int state, const EnvState& env, const ConstraintSet& cs,
                   const ActionSteps& steps, SolveCache* cache = nullptr,
                   const SolveOptions& options = {});

struct PostCheck {
  bool satisfied = true;
  std::vector<std::string> violated_ids;
  double severity = 0.0;  // max relative overshoot over violated bounds
};

PostCheck check_post(const Observation& obs, const ConstraintSet& cs, const RewardParams& params);

using ConstraintItem = std::variant<LinearConstraint, ExclusionRule>;

// Removals are applied before additions. Throws ConstraintError on a
// duplicate id, an unknown id, or a rule that would exclude do-nothing.
ConstraintSet update_set(const ConstraintSet& cs, const std::vector<ConstraintItem>& add,
                         const std::vector<std::string>& remove);

// Line-oriented audit form, e.g. "pre energy <= 40", "pre cover device:7 >= 1",
// "exclude state:4 action:9 origin=learned", "post energy_actual <= 44".
void dump_constraints(std::ostream& out, const ConstraintSet& cs);

}  // namespace csrl
