#include "csrl/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <ostream>
#include <optional>
#include <set>
#include <tuple>

#include "csrl/state.hpp"

namespace csrl {

namespace {

double tolerance(double bound) { return 1e-9 * std::max(1.0, std::abs(bound)); }

std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

// Merges repeated variables and validates one constraint against n_vars.
LinearConstraint normalized(const LinearConstraint& c, int n_vars) {
  if (c.terms.empty()) throw ConstraintError("constraint '" + c.id + "' has no terms");
  if (!std::isfinite(c.bound)) throw ConstraintError("constraint '" + c.id + "' bound not finite");
  std::map<int, double> merged;
  for (const Term& t : c.terms) {
    if (t.var < 0 || t.var >= n_vars)
      throw ConstraintError("constraint '" + c.id + "' references unknown variable");
    if (!std::isfinite(t.coef))
      throw ConstraintError("constraint '" + c.id + "' has a non-finite coefficient");
    merged[t.var] += t.coef;
  }
  LinearConstraint out{c.id, {}, c.sense, c.bound};
  for (const auto& [var, coef] : merged)
    if (coef != 0.0) out.terms.push_back({coef, var});
  return out;
}

class Search {
 public:
  Search(std::span<const LinearConstraint> constraints, int n_vars, const SolveOptions& options)
      : n_(n_vars), options_(options), occ_(n_vars), val_(n_vars, -1), cost_(n_vars, 0.0) {
    rows_.reserve(constraints.size());
    for (const LinearConstraint& c : constraints) {
      Row row;
      row.c = normalized(c, n_vars);
      row.tol = tolerance(c.bound);
      row.unit_ge = row.c.sense == Sense::GreaterEqual;
      row.nonneg_le = row.c.sense == Sense::LessEqual;
      for (const Term& t : row.c.terms) {
        if (t.coef > 0) row.free_pos += t.coef; else row.free_neg += t.coef;
        if (t.coef != 1.0) row.unit_ge = false;
        if (t.coef < 0) row.nonneg_le = false;
      }
      row.unit_le = row.c.sense == Sense::LessEqual &&
                    std::all_of(row.c.terms.begin(), row.c.terms.end(),
                                [](const Term& t) { return t.coef == 1.0; });
      rows_.push_back(std::move(row));
    }
    for (int r = 0; r < static_cast<int>(rows_.size()); ++r) {
      for (const Term& t : rows_[r].c.terms) {
        occ_[t.var].push_back({r, t.coef});
        if (rows_[r].c.sense == Sense::LessEqual && t.coef > 0) cost_[t.var] += t.coef;
      }
    }
    order_.resize(n_);
    for (int v = 0; v < n_; ++v) order_[v] = v;
    std::stable_sort(order_.begin(), order_.end(),
                     [&](int a, int b) { return cost_[a] < cost_[b]; });

    // knapsack (nonnegative <=) x cardinality (unit >=) pair bounds
    for (int le = 0; le < static_cast<int>(rows_.size()); ++le) {
      if (!rows_[le].nonneg_le) continue;
      std::map<int, double> weight;
      for (const Term& t : rows_[le].c.terms) weight[t.var] = t.coef;
      for (int ge = 0; ge < static_cast<int>(rows_.size()); ++ge) {
        if (!rows_[ge].unit_ge) continue;
        PairBound pb{le, ge, {}};
        bool touches = false;
        for (const Term& t : rows_[ge].c.terms) {
          auto it = weight.find(t.var);
          const double w = it == weight.end() ? 0.0 : it->second;
          touches = touches || w > 0.0;
          pb.sorted.emplace_back(w, t.var);
        }
        if (!touches) continue;
        std::sort(pb.sorted.begin(), pb.sorted.end());
        pairs_.push_back(std::move(pb));
      }
    }

    // Covering families: all unit >= rows, and separately the narrow ones
    // (a global cardinality row would otherwise dilute the local bound).
    std::vector<int> all_ge, narrow_ge;
    for (int r = 0; r < static_cast<int>(rows_.size()); ++r) {
      if (!rows_[r].unit_ge) continue;
      all_ge.push_back(r);
      if (2 * static_cast<int>(rows_[r].c.terms.size()) <= n_) narrow_ge.push_back(r);
    }
    if (all_ge.size() > 1) families_.push_back(all_ge);
    if (narrow_ge.size() > 1 && narrow_ge.size() < all_ge.size()) families_.push_back(narrow_ge);
    for (int r = 0; r < static_cast<int>(rows_.size()); ++r) {
      if (!rows_[r].nonneg_le) continue;
      knapsacks_.push_back(r);
      std::vector<std::uint8_t> mask(n_, 0);
      for (const Term& t : rows_[r].c.terms) mask[t.var] = 1;
      in_row_.emplace(r, std::move(mask));
    }
    gain_.assign(n_, 0.0);
  }

  SatResult run() {
    SatResult result;
    if (options_.greedy_first) {
      if (auto witness = greedy()) {
        result.status = SolveStatus::Sat;
        result.assignment = std::move(*witness);
        return result;
      }
    }

    std::vector<int> all(rows_.size());
    for (int r = 0; r < static_cast<int>(rows_.size()); ++r) all[r] = r;
    if (!propagate(all)) return refuted(result, SolveStatus::Unsat);

    struct Frame {
      int var;
      std::size_t mark;
      std::uint8_t first;
      bool flipped;
    };
    std::vector<Frame> stack;
    while (true) {
      const int v = pick_variable();
      if (v < 0) {
        result.status = SolveStatus::Sat;
        result.assignment.resize(n_);
        for (int i = 0; i < n_; ++i) result.assignment[i] = static_cast<std::uint8_t>(val_[i]);
        return result;
      }
      const std::uint8_t first = preferred_value(v);
      stack.push_back({v, trail_.size(), first, false});
      if (++result.nodes > options_.node_budget) return refuted(result, SolveStatus::Unknown);
      assign(v, first);
      if (propagate(occ_rows(v))) continue;

      // backtrack to the deepest frame with an untried value
      bool resumed = false;
      while (!stack.empty() && !resumed) {
        Frame& top = stack.back();
        undo_to(top.mark);
        if (top.flipped) {
          stack.pop_back();
          continue;
        }
        top.flipped = true;
        if (++result.nodes > options_.node_budget) return refuted(result, SolveStatus::Unknown);
        assign(top.var, static_cast<std::uint8_t>(1 - top.first));
        resumed = propagate(occ_rows(top.var));
      }
      if (!resumed) return refuted(result, SolveStatus::Unsat);
    }
  }

 private:
  struct Row {
    LinearConstraint c;
    double tol = 0.0;
    double fixed = 0.0;
    double free_pos = 0.0;
    double free_neg = 0.0;
    bool unit_ge = false;
    bool nonneg_le = false;
    bool unit_le = false;
  };
  struct Occ {
    int row;
    double coef;
  };
  struct PairBound {
    int le;
    int ge;
    std::vector<std::pair<double, int>> sorted;  // (weight in le, var)
  };

  std::optional<std::vector<std::uint8_t>> greedy() const {
    if (auto x = greedy_cheapest()) return x;
    return greedy_cover();
  }

  bool holds_all(const std::vector<std::uint8_t>& x) const {
    return std::all_of(rows_.begin(), rows_.end(), [&](const Row& row) { return row.c.holds(x); });
  }

  // Minimum-options-first covering: serve the unsatisfied >= row with the
  // fewest variables that also help another unsatisfied row, using its
  // highest-gain variable. Finds near-minimum covers on sparse graphs where
  // cost-first selection overshoots tight count windows.
  std::optional<std::vector<std::uint8_t>> greedy_cover() const {
    std::vector<std::uint8_t> x(n_, 0);
    std::vector<double> residual(rows_.size(), 0.0);
    for (int r = 0; r < static_cast<int>(rows_.size()); ++r)
      if (rows_[r].c.sense == Sense::GreaterEqual) residual[r] = rows_[r].c.bound;
    auto open = [&](int r) {
      return rows_[r].c.sense == Sense::GreaterEqual && residual[r] > rows_[r].tol;
    };
    auto gain = [&](int v) {
      double g = 0.0;
      for (const Occ& o : occ_[v])
        if (o.coef > 0 && open(o.row)) g += std::min(o.coef, residual[o.row]);
      return g;
    };
    const int n_rows = static_cast<int>(rows_.size());
    std::vector<int> options(n_rows, 0);
    while (true) {
      int best_row = -1;
      for (int r = 0; r < n_rows; ++r) {
        options[r] = 0;
        if (!open(r)) continue;
        int usable = 0;
        for (const Term& t : rows_[r].c.terms) {
          if (t.coef <= 0 || x[t.var]) continue;
          ++usable;
          if (gain(t.var) > std::min(t.coef, residual[r]) + 1e-12) ++options[r];
        }
        if (usable == 0) return std::nullopt;
        if (options[r] == 0) options[r] = n_ + 1;
        if (best_row < 0 || options[r] < options[best_row]) best_row = r;
      }
      if (best_row < 0) break;
      // highest gain, then the partner row with the fewest options, then cost
      int pick = -1;
      double pick_gain = 0.0;
      int pick_partner = 0;
      for (const Term& t : rows_[best_row].c.terms) {
        if (t.coef <= 0 || x[t.var]) continue;
        const double g = gain(t.var);
        int partner = n_ + 2;
        for (const Occ& o : occ_[t.var])
          if (o.row != best_row && o.coef > 0 && open(o.row))
            partner = std::min(partner, options[o.row]);
        const bool better =
            pick < 0 || g > pick_gain + 1e-12 ||
            (std::abs(g - pick_gain) <= 1e-12 &&
             (partner < pick_partner || (partner == pick_partner && cost_[t.var] < cost_[pick])));
        if (better) {
          pick = t.var;
          pick_gain = g;
          pick_partner = partner;
        }
      }
      x[pick] = 1;
      for (const Occ& o : occ_[pick])
        if (rows_[o.row].c.sense == Sense::GreaterEqual) residual[o.row] -= o.coef;
    }
    // drop variables no >= row needs, most expensive first
    std::vector<int> chosen;
    for (int v = 0; v < n_; ++v)
      if (x[v]) chosen.push_back(v);
    std::stable_sort(chosen.begin(), chosen.end(),
                     [&](int a, int b) { return cost_[a] > cost_[b]; });
    for (int v : chosen) {
      bool needed = false;
      for (const Occ& o : occ_[v]) {
        const Row& row = rows_[o.row];
        if (row.c.sense == Sense::GreaterEqual && o.coef > 0 &&
            residual[o.row] + o.coef > row.tol)
          needed = true;
      }
      if (needed) continue;
      x[v] = 0;
      for (const Occ& o : occ_[v])
        if (rows_[o.row].c.sense == Sense::GreaterEqual) residual[o.row] += o.coef;
    }
    if (!holds_all(x)) return std::nullopt;
    return x;
  }

  std::optional<std::vector<std::uint8_t>> greedy_cheapest() const {
    std::vector<std::uint8_t> x(n_, 0);
    std::vector<int> ge_rows;
    for (int r = 0; r < static_cast<int>(rows_.size()); ++r)
      if (rows_[r].c.sense == Sense::GreaterEqual) ge_rows.push_back(r);
    std::stable_sort(ge_rows.begin(), ge_rows.end(), [&](int a, int b) {
      return rows_[a].c.terms.size() < rows_[b].c.terms.size();
    });
    for (int r : ge_rows) {
      const LinearConstraint& c = rows_[r].c;
      double act = c.activity(x);
      while (act < c.bound - rows_[r].tol) {
        int best = -1;
        double best_coef = 0.0;
        for (const Term& t : c.terms) {
          if (t.coef <= 0 || x[t.var]) continue;
          if (best < 0 || cost_[t.var] < cost_[best] ||
              (cost_[t.var] == cost_[best] && t.var < best)) {
            best = t.var;
            best_coef = t.coef;
          }
        }
        if (best < 0) return std::nullopt;
        x[best] = 1;
        act += best_coef;
      }
    }
    if (!holds_all(x)) return std::nullopt;
    return x;
  }

  std::vector<int> occ_rows(int v) const {
    std::vector<int> out;
    out.reserve(occ_[v].size());
    for (const Occ& o : occ_[v]) out.push_back(o.row);
    return out;
  }

  void assign(int v, std::uint8_t b) {
    val_[v] = static_cast<std::int8_t>(b);
    trail_.push_back(v);
    for (const Occ& o : occ_[v]) {
      Row& row = rows_[o.row];
      if (o.coef > 0) row.free_pos -= o.coef; else row.free_neg -= o.coef;
      if (b) row.fixed += o.coef;
    }
  }

  void undo_to(std::size_t mark) {
    while (trail_.size() > mark) {
      const int v = trail_.back();
      trail_.pop_back();
      for (const Occ& o : occ_[v]) {
        Row& row = rows_[o.row];
        if (o.coef > 0) row.free_pos += o.coef; else row.free_neg += o.coef;
        if (val_[v]) row.fixed -= o.coef;
      }
      val_[v] = -1;
    }
  }

  bool conflict(int row) {
    blamed_.insert(row);
    return false;
  }

  // Bound propagation to fixpoint, then the pair bounds.
  bool propagate(const std::vector<int>& seed) {
    std::deque<int> queue(seed.begin(), seed.end());
    std::vector<std::uint8_t> queued(rows_.size(), 0);
    for (int r : seed) queued[r] = 1;
    while (!queue.empty()) {
      const int r = queue.front();
      queue.pop_front();
      queued[r] = 0;
      const Row& row = rows_[r];
      const double bound = row.c.bound;
      const double min_act = row.fixed + row.free_neg;
      const double max_act = row.fixed + row.free_pos;
      std::vector<std::pair<int, std::uint8_t>> implied;
      if (row.c.sense == Sense::LessEqual) {
        if (min_act > bound + row.tol) return conflict(r);
        for (const Term& t : row.c.terms) {
          if (val_[t.var] >= 0) continue;
          if (t.coef > 0 && min_act + t.coef > bound + row.tol) implied.emplace_back(t.var, 0);
          if (t.coef < 0 && min_act - t.coef > bound + row.tol) implied.emplace_back(t.var, 1);
        }
      } else {
        if (max_act < bound - row.tol) return conflict(r);
        for (const Term& t : row.c.terms) {
          if (val_[t.var] >= 0) continue;
          if (t.coef > 0 && max_act - t.coef < bound - row.tol) implied.emplace_back(t.var, 1);
          if (t.coef < 0 && max_act + t.coef < bound - row.tol) implied.emplace_back(t.var, 0);
        }
      }
      for (const auto& [var, b] : implied) {
        if (val_[var] >= 0) continue;
        assign(var, b);
        for (const Occ& o : occ_[var]) {
          if (!queued[o.row]) {
            queued[o.row] = 1;
            queue.push_back(o.row);
          }
        }
      }
    }
    for (const PairBound& pb : pairs_) {
      const Row& ge = rows_[pb.ge];
      const Row& le = rows_[pb.le];
      const double need = std::ceil(ge.c.bound - ge.fixed - ge.tol);
      if (need <= 0) continue;
      double extra = 0.0;
      int taken = 0;
      for (const auto& [w, var] : pb.sorted) {
        if (taken >= need) break;
        if (val_[var] >= 0) continue;
        extra += w;
        ++taken;
      }
      if (taken < need) return conflict(pb.ge);
      if (le.fixed + extra > le.c.bound + le.tol) return conflict(pb.le);
    }
    for (const auto& family : families_)
      if (!covering_bound(family)) return false;
    return true;
  }

  // Jointly over a family of unit >= rows: each free variable closes at most
  // gain_j units of the total residual need, so any nonnegative <= row must
  // afford the fractional-knapsack minimum of closing all of it.
  bool covering_bound(const std::vector<int>& family) {
    double need = 0.0;
    std::fill(gain_.begin(), gain_.end(), 0.0);
    for (int r : family) {
      const Row& row = rows_[r];
      const double residual = std::ceil(row.c.bound - row.fixed - row.tol);
      if (residual <= 0) continue;
      need += residual;
      for (const Term& t : row.c.terms)
        if (val_[t.var] < 0) gain_[t.var] += 1.0;
    }
    if (need <= 0) return true;
    double total_gain = 0.0;
    for (int v = 0; v < n_; ++v) total_gain += gain_[v];
    if (total_gain < need - 1e-9) {
      for (int r : family) blamed_.insert(r);
      return false;
    }
    for (int le : knapsacks_) {
      const Row& row = rows_[le];
      ratio_buf_.clear();
      for (const Term& t : row.c.terms)
        if (val_[t.var] < 0 && gain_[t.var] > 0) ratio_buf_.emplace_back(t.coef / gain_[t.var], t.var);
      std::sort(ratio_buf_.begin(), ratio_buf_.end());
      double left = need, spend = 0.0;
      for (int v = 0; v < n_ && left > 0; ++v)  // variables absent from the row are free
        if (val_[v] < 0 && gain_[v] > 0 && !in_row_[le][v]) left -= gain_[v];
      for (const auto& [ratio, v] : ratio_buf_) {
        if (left <= 0) break;
        const double take = std::min(gain_[v], left);
        spend += ratio * take;
        left -= take;
      }
      if (left > 1e-9) continue;
      if (row.unit_le) spend = std::ceil(spend - 1e-9);
      if (row.fixed + spend > row.c.bound + row.tol) {
        blamed_.insert(le);
        for (int r : family) blamed_.insert(r);
        return false;
      }
    }
    return true;
  }

  int pick_variable() const {
    for (int v : order_)
      if (val_[v] < 0) return v;
    return -1;
  }

  std::uint8_t preferred_value(int v) const {
    for (const Occ& o : occ_[v]) {
      const Row& row = rows_[o.row];
      if (row.c.sense == Sense::GreaterEqual && o.coef > 0 && row.fixed < row.c.bound - row.tol)
        return 1;
    }
    return 0;
  }

  SatResult& refuted(SatResult& result, SolveStatus status) const {
    result.status = status;
    result.assignment.clear();
    std::set<std::string> ids;
    for (int r : blamed_) ids.insert(rows_[r].c.id);
    if (status == SolveStatus::Unknown) ids.insert(kSolverUnknownId);
    result.violated_ids.assign(ids.begin(), ids.end());
    return result;
  }

  int n_;
  SolveOptions options_;
  std::vector<Row> rows_;
  std::vector<std::vector<Occ>> occ_;
  std::vector<std::int8_t> val_;
  std::vector<double> cost_;
  std::vector<int> order_;
  std::vector<int> trail_;
  std::vector<PairBound> pairs_;
  std::vector<std::vector<int>> families_;
  std::vector<int> knapsacks_;
  std::map<int, std::vector<std::uint8_t>> in_row_;
  std::vector<double> gain_;
  std::vector<std::pair<double, int>> ratio_buf_;
  std::set<int> blamed_;
};

}  // namespace

double LinearConstraint::activity(std::span<const std::uint8_t> x) const {
  double act = 0.0;
  for (const Term& t : terms)
    if (x[t.var]) act += t.coef;
  return act;
}

bool LinearConstraint::holds(std::span<const std::uint8_t> x) const {
  const double act = activity(x);
  return sense == Sense::LessEqual ? act <= bound + tolerance(bound)
                                   : act >= bound - tolerance(bound);
}

std::string ExclusionRule::id() const {
  return "exclude:state:" + std::to_string(state) + ":action:" + std::to_string(action);
}

bool ConstraintSet::excludes(int state, int action) const {
  if (action == kDoNothingAction) return false;
  return std::any_of(rules.begin(), rules.end(),
                     [&](const ExclusionRule& r) { return r.state == state && r.action == action; });
}

const LinearConstraint* ConstraintSet::find(const std::string& id) const {
  for (const LinearConstraint& c : pre)
    if (c.id == id) return &c;
  return nullptr;
}

bool equivalent(const ConstraintSet& lhs, const ConstraintSet& rhs) {
  if (lhs.n_detectors != rhs.n_detectors || lhs.count_slack != rhs.count_slack ||
      lhs.post.e_max != rhs.post.e_max ||
      lhs.post.reimage_loss_max != rhs.post.reimage_loss_max ||
      lhs.pre.size() != rhs.pre.size() || lhs.rules.size() != rhs.rules.size())
    return false;
  for (const LinearConstraint& c : lhs.pre) {
    const LinearConstraint* o = rhs.find(c.id);
    if (!o || o->sense != c.sense || o->bound != c.bound || o->terms.size() != c.terms.size())
      return false;
    for (std::size_t i = 0; i < c.terms.size(); ++i)
      if (c.terms[i].var != o->terms[i].var || c.terms[i].coef != o->terms[i].coef) return false;
  }
  for (const ExclusionRule& r : lhs.rules) {
    const bool found = std::any_of(rhs.rules.begin(), rhs.rules.end(), [&](const ExclusionRule& o) {
      return o.state == r.state && o.action == r.action && o.origin == r.origin;
    });
    if (!found) return false;
  }
  return true;
}

FormulationParams formulation_params(const Topology& topology, const EnvConfig& env) {
  FormulationParams p;
  p.e_budget = env.budget_fraction * topology.total_cost();
  p.e_max = env.e_max_factor * p.e_budget;
  p.l_min = env.l_min;
  p.reimage_loss_max = env.reimage_loss_max;
  return p;
}

ConstraintSet formulate_initial(const Topology& topology, const FormulationParams& params) {
  ConstraintSet cs;
  cs.n_detectors = topology.n_detectors();
  cs.count_slack = params.count_slack;
  cs.post = {params.e_max, params.reimage_loss_max};
  if (cs.n_detectors == 0) throw ConstraintError("topology has no detectors");

  LinearConstraint energy{"energy", {}, Sense::LessEqual, params.e_budget};
  for (int d = 0; d < cs.n_detectors; ++d)
    energy.terms.push_back({topology.connection(d).energy_cost, d});
  cs.pre.push_back(std::move(energy));

  for (int v = 0; v < topology.n_devices(); ++v) {
    if (topology.degree(v) < params.l_min)
      throw ConstraintError("device " + std::to_string(v) + " has degree " +
                            std::to_string(topology.degree(v)) + " < l_min " +
                            std::to_string(params.l_min));
    if (params.l_min <= 0) continue;
    LinearConstraint cover{"cover:device:" + std::to_string(v), {}, Sense::GreaterEqual,
                           static_cast<double>(params.l_min)};
    for (const Incidence& inc : topology.incident(v)) cover.terms.push_back({1.0, inc.detector});
    cs.pre.push_back(std::move(cover));
  }
  return cs;
}

std::pair<int, int> count_window(double target_f, int n_detectors, double count_slack) {
  const double center = std::round(target_f * n_detectors);
  const double slack = count_slack * n_detectors;
  const int lo = static_cast<int>(std::max(0.0, std::ceil(center - slack - 1e-9)));
  const int hi = static_cast<int>(std::min<double>(n_detectors, std::floor(center + slack + 1e-9)));
  return {lo, hi};
}

std::vector<LinearConstraint> count_window_constraints(double target_f, int n_detectors,
                                                       double count_slack) {
  const auto [lo, hi] = count_window(target_f, n_detectors, count_slack);
  LinearConstraint min_c{kCountWindowMinId, {}, Sense::GreaterEqual, static_cast<double>(lo)};
  LinearConstraint max_c{kCountWindowMaxId, {}, Sense::LessEqual, static_cast<double>(hi)};
  for (int d = 0; d < n_detectors; ++d) {
    min_c.terms.push_back({1.0, d});
    max_c.terms.push_back({1.0, d});
  }
  return {std::move(min_c), std::move(max_c)};
}

SatResult solve(std::span<const LinearConstraint> constraints, int n_vars,
                const SolveOptions& options) {
  if (n_vars < 0) throw ConstraintError("negative variable count");
  Search search(constraints, n_vars, options);
  SatResult result = search.run();
  if (result.sat()) {
    for (const LinearConstraint& c : constraints)
      if (!c.holds(result.assignment))
        throw std::logic_error("solver witness violates constraint '" + c.id + "'");
  }
  return result;
}

SatResult solve_pre(const ConstraintSet& cs, double target_f, const SolveOptions& options) {
  std::vector<LinearConstraint> problem = cs.pre;
  for (LinearConstraint& c : count_window_constraints(target_f, cs.n_detectors, cs.count_slack))
    problem.push_back(std::move(c));
  return solve(problem, cs.n_detectors, options);
}

const SatResult& SolveCache::solve(const ConstraintSet& cs, double target_f,
                                   const SolveOptions& options) {
  if (cs.revision != revision_) {
    // exclusion-rule edits leave every cached solve valid
    const bool same = cs.n_detectors == n_detectors_ && cs.count_slack == count_slack_ &&
                      cs.pre.size() == pre_.size() &&
                      std::equal(cs.pre.begin(), cs.pre.end(), pre_.begin(),
                                 [](const LinearConstraint& a, const LinearConstraint& b) {
                                   return a.id == b.id && a.sense == b.sense &&
                                          a.bound == b.bound && a.terms.size() == b.terms.size() &&
                                          std::equal(a.terms.begin(), a.terms.end(),
                                                     b.terms.begin(), [](Term x, Term y) {
                                                       return x.var == y.var && x.coef == y.coef;
                                                     });
                                 });
    if (!same) {
      entries_.clear();
      pre_ = cs.pre;
      n_detectors_ = cs.n_detectors;
      count_slack_ = cs.count_slack;
    }
    revision_ = cs.revision;
  }
  const auto key = count_window(target_f, cs.n_detectors, cs.count_slack);
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    ++solver_calls_;
    it = entries_.emplace(key, solve_pre(cs, target_f, options)).first;
  }
  return it->second;
}

PreCheck check_pre(int action, int state, const EnvState& env, const ConstraintSet& cs,
                   const ActionSteps& steps, SolveCache* cache, const SolveOptions& options) {
  PreCheck out;
  const ActionClass kind = action_class(action);
  if (kind == ActionClass::DoNothing) {
    out.satisfied = true;
    out.assignment = env.enabled;
    return out;
  }
  for (const ExclusionRule& rule : cs.rules) {
    if (rule.state == state && rule.action == action) {
      out.violated_ids = {rule.id()};
      return out;
    }
  }
  if (kind != ActionClass::Ratio) {
    out.satisfied = true;
    out.assignment = env.enabled;
    return out;
  }
  const double target = ratio_after(action, env.f, steps);
  out.solver_called = true;
  SatResult local;
  const SatResult* result;
  if (cache) {
    result = &cache->solve(cs, target, options);
  } else {
    local = solve_pre(cs, target, options);
    result = &local;
  }
  out.satisfied = result->sat();
  out.unknown = result->status == SolveStatus::Unknown;
  if (out.satisfied) out.assignment = result->assignment;
  else out.violated_ids = result->violated_ids;
  return out;
}

PostCheck check_post(const Observation& obs, const ConstraintSet& cs, const RewardParams& params) {
  PostCheck out;
  auto overshoot = [&](double observed, double bound, const char* id) {
    if (observed <= bound) return;
    out.satisfied = false;
    out.violated_ids.emplace_back(id);
    out.severity = std::max(out.severity, (observed - bound) / std::max(bound, 1.0));
  };
  overshoot(obs.energy_actual, cs.post.e_max, kPostEnergyId);
  overshoot(obs.b_r * params.c_r, cs.post.reimage_loss_max, kPostReimageLossId);
  return out;
}

ConstraintSet update_set(const ConstraintSet& cs, const std::vector<ConstraintItem>& add,
                         const std::vector<std::string>& remove) {
  ConstraintSet next = cs;
  ++next.revision;
  for (const std::string& id : remove) {
    auto lin = std::find_if(next.pre.begin(), next.pre.end(),
                            [&](const LinearConstraint& c) { return c.id == id; });
    if (lin != next.pre.end()) {
      next.pre.erase(lin);
      continue;
    }
    auto rule = std::find_if(next.rules.begin(), next.rules.end(),
                             [&](const ExclusionRule& r) { return r.id() == id; });
    if (rule != next.rules.end()) {
      next.rules.erase(rule);
      continue;
    }
    throw ConstraintError("cannot remove unknown constraint '" + id + "'");
  }

  std::set<std::string> ids{kPostEnergyId, kPostReimageLossId};
  for (const LinearConstraint& c : next.pre) ids.insert(c.id);
  for (const ExclusionRule& r : next.rules) ids.insert(r.id());

  for (const ConstraintItem& item : add) {
    if (const auto* c = std::get_if<LinearConstraint>(&item)) {
      if (!ids.insert(c->id).second) throw ConstraintError("duplicate constraint id '" + c->id + "'");
      next.pre.push_back(normalized(*c, next.n_detectors));
    } else {
      const ExclusionRule& r = std::get<ExclusionRule>(item);
      if (r.state < 0 || r.state >= kNumStates || r.action < 0 || r.action >= kNumActions)
        throw ConstraintError("exclusion rule index out of range");
      if (r.action == kDoNothingAction)
        throw ConstraintError("do-nothing cannot be excluded");
      if (!ids.insert(r.id()).second)
        throw ConstraintError("duplicate constraint id '" + r.id() + "'");
      auto pos = std::lower_bound(next.rules.begin(), next.rules.end(), r,
                                  [](const ExclusionRule& a, const ExclusionRule& b) {
                                    return std::tie(a.state, a.action) < std::tie(b.state, b.action);
                                  });
      next.rules.insert(pos, r);
    }
  }
  return next;
}

void dump_constraints(std::ostream& out, const ConstraintSet& cs) {
  for (const LinearConstraint& c : cs.pre) {
    std::string name = c.id;
    if (auto colon = name.find(':'); colon != std::string::npos) name[colon] = ' ';
    out << "pre " << name << (c.sense == Sense::LessEqual ? " <= " : " >= ")
        << format_number(c.bound) << '\n';
  }
  for (const ExclusionRule& r : cs.rules) {
    out << "exclude state:" << r.state << " action:" << r.action;
    if (r.origin == RuleOrigin::Learned) out << " origin=learned";
    out << '\n';
  }
  out << "post energy_actual <= " << format_number(cs.post.e_max) << '\n';
  out << "post reimage_loss <= " << format_number(cs.post.reimage_loss_max) << '\n';
}

}  // namespace csrl
