#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "recon/complex.hpp"
#include "recon/lp.hpp"
#include "recon/priors.hpp"

namespace recon {

/// Hard constraint added by the user on one cell.
struct UserConstraint {
  enum class Kind { force_room, force_outside, force_wall, forbid_wall };
  int id = -1;
  Kind kind = Kind::force_outside;
  int cell = -1;
  int room = -1;  // force_room: -1 means "any room"
  int wall = -1;  // force_wall / forbid_wall
  bool active = true;
};

const char* kind_name(UserConstraint::Kind k);
std::optional<UserConstraint::Kind> parse_kind(const std::string& s);

enum class RowKind { one_label = 1, room_side = 2, wall_outside = 3, wall_boundary = 4,
                     wall_inner = 5, wall_end = 6, box_outside = 7, redundant = 11, user = 100 };

/// Row with integer coefficients: sum coef * x (sense) rhs.
struct IlpRow {
  std::vector<std::pair<int, int>> terms;
  Sense sense = Sense::ge;
  int rhs = 0;
  RowKind kind = RowKind::one_label;
  int ref = -1;  // cell, face, or user constraint id
};

struct ModelOptions {
  bool prune_room_variables = true;
  bool redundant_outside_constraint = true;
  /// Cells touching the bounding box are outside (x_{c,o} = 1).
  bool boundary_outside = false;
};

/// Labels: rooms 0..rooms-1, outside = rooms, wall w = rooms + 1 + w.
struct IlpModel {
  int rooms = 0;
  int walls = 0;
  int cells = 0;
  double alpha = 0.04;
  bool boundary_outside = false;
  std::vector<std::pair<int, int>> vars;  // (cell, label)
  std::vector<double> cost;
  std::vector<IlpRow> rows;
  std::vector<std::vector<std::pair<int, int>>> cell_vars;  // cell -> sorted (label, var)

  int outside_label() const { return rooms; }
  int wall_label(int w) const { return rooms + 1 + w; }
  int var(int cell, int label) const;
  std::string var_name(int v) const;
  std::size_t count(RowKind k) const;
};

/// Emits the constraint rows and objective for the complex. Throws ModelError
/// when a user constraint names a cell, room or wall that has no variable.
IlpModel build_model(const CellComplex& cx, const Priors& priors, double alpha,
                     const std::vector<UserConstraint>& forced = {},
                     const ModelOptions& options = {});

struct Labeling {
  enum class Status { optimal, infeasible, gap_limit };
  Status status = Status::optimal;
  std::vector<std::uint8_t> x;
  double objective = 0;
  double bound = 0;
  double gap = 0;
  long nodes = 0;
  long lp_iterations = 0;
  std::vector<int> conflict_hint;  // user constraint ids, best effort

  bool has(int v) const { return v >= 0 && x[v] != 0; }
};

const char* status_name(Labeling::Status s);

struct SolveParams {
  double gap_tolerance = 1e-6;
  double time_limit = 600.0;
  Exec exec = Exec::serial;
};

/// Branch-and-bound over the LP relaxation. Best-first, most-fractional
/// branching; incumbents are checked row by row in integer arithmetic.
Labeling solve(const IlpModel& model, const SolveParams& params = {});

/// True when the 0-1 vector satisfies every row exactly.
bool satisfies(const IlpModel& model, const std::vector<std::uint8_t>& x);

/// Objective of a 0-1 vector under the model's cost vector.
double model_objective(const IlpModel& model, const std::vector<std::uint8_t>& x);

std::string export_lp(const IlpModel& model);

/// Per-cell reading of a labeling.
struct CellLabels {
  std::vector<int> room;                // -1 outside, -2 when no R_o label is set, -3 several
  std::vector<std::vector<int>> walls;  // active wall ids
};
CellLabels cell_labels(const IlpModel& model, const Labeling& lab);

struct Violation {
  int constraint = 0;  // 1..6
  int cell = -1;
  int face = -1;
  std::string message;
};

/// Re-checks Constraints 1-6 directly on the complex, without the model rows,
/// and, when the model has it, the outside rule on box cells (reported as 7).
std::vector<Violation> validate(const Labeling& lab, const IlpModel& model, const CellComplex& cx);

/// F_C recomputed from the labeling, priors and complex.
double recompute_objective(const Labeling& lab, const IlpModel& model, const CellComplex& cx,
                           const Priors& priors);

}  // namespace recon
