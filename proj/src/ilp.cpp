#include "recon/ilp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <queue>
#include <set>
#include <sstream>

namespace recon {

const char* kind_name(UserConstraint::Kind k) {
  switch (k) {
    case UserConstraint::Kind::force_room: return "force_room";
    case UserConstraint::Kind::force_outside: return "force_outside";
    case UserConstraint::Kind::force_wall: return "force_wall";
    case UserConstraint::Kind::forbid_wall: return "forbid_wall";
  }
  return "?";
}

std::optional<UserConstraint::Kind> parse_kind(const std::string& s) {
  for (auto k : {UserConstraint::Kind::force_room, UserConstraint::Kind::force_outside,
                 UserConstraint::Kind::force_wall, UserConstraint::Kind::forbid_wall})
    if (s == kind_name(k)) return k;
  return std::nullopt;
}

const char* status_name(Labeling::Status s) {
  switch (s) {
    case Labeling::Status::optimal: return "optimal";
    case Labeling::Status::infeasible: return "infeasible";
    case Labeling::Status::gap_limit: return "gap-limit";
  }
  return "?";
}

int IlpModel::var(int cell, int label) const {
  if (cell < 0 || cell >= static_cast<int>(cell_vars.size())) return -1;
  const auto& cv = cell_vars[cell];
  auto it = std::lower_bound(cv.begin(), cv.end(), std::make_pair(label, -1));
  return it != cv.end() && it->first == label ? it->second : -1;
}

std::string IlpModel::var_name(int v) const {
  return "x_c" + std::to_string(vars[v].first) + "_l" + std::to_string(vars[v].second);
}

std::size_t IlpModel::count(RowKind k) const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [&](const IlpRow& r) { return r.kind == k; }));
}

IlpModel build_model(const CellComplex& cx, const Priors& priors, double alpha,
                     const std::vector<UserConstraint>& forced, const ModelOptions& options) {
  if (!(alpha >= 0)) throw ConfigError("alpha must be non-negative");
  const int nc = static_cast<int>(cx.cells.size());
  if (static_cast<int>(priors.cell.size()) != nc || priors.face.size() != cx.faces.size())
    throw ModelError("priors do not match the complex");
  IlpModel m;
  m.rooms = priors.labels;
  m.walls = static_cast<int>(cx.wall_count());
  m.cells = nc;
  m.alpha = alpha;
  m.boundary_outside = options.boundary_outside;

  std::set<std::pair<int, int>> referenced;
  for (const auto& u : forced) {
    if (!u.active) continue;
    if (u.cell < 0 || u.cell >= nc)
      throw ModelError("constraint " + std::to_string(u.id) + " names unknown cell " + std::to_string(u.cell));
    if (u.kind == UserConstraint::Kind::force_room && u.room >= 0) {
      if (u.room >= m.rooms)
        throw ModelError("cell " + std::to_string(u.cell) + ": unknown room label " + std::to_string(u.room));
      referenced.emplace(u.cell, u.room);
    }
    if (u.kind == UserConstraint::Kind::force_wall || u.kind == UserConstraint::Kind::forbid_wall) {
      const auto& wc = cx.cells[u.cell].walls;
      if (!std::binary_search(wc.begin(), wc.end(), u.wall))
        throw ModelError("cell " + std::to_string(u.cell) + " is not in wall candidate " +
                         std::to_string(u.wall));
    }
  }

  m.cell_vars.resize(nc);
  auto add = [&](int c, int label, double cost) {
    const int v = static_cast<int>(m.vars.size());
    m.vars.emplace_back(c, label);
    m.cost.push_back(cost);
    m.cell_vars[c].emplace_back(label, v);
  };
  for (int c = 0; c < nc; ++c) {
    const auto& pc = priors.cell[c];
    const double vol = cx.cells[c].volume;
    for (int r = 0; r < m.rooms; ++r)
      if (!options.prune_room_variables || pc[r] > 0 || referenced.count({c, r}))
        add(c, r, -pc[r] * vol);
    add(c, m.outside_label(), -pc[m.rooms] * vol);
    for (int w : cx.cells[c].walls) add(c, m.wall_label(w), 0.0);
  }

  // Constraint 1 and 3.
  for (int c = 0; c < nc; ++c) {
    IlpRow row{{}, Sense::eq, 1, RowKind::one_label, c};
    for (int r = 0; r <= m.rooms; ++r)
      if (int v = m.var(c, r); v >= 0) row.terms.emplace_back(v, 1);
    m.rows.push_back(std::move(row));
    const int xo = m.var(c, m.outside_label());
    for (int w : cx.cells[c].walls)
      m.rows.push_back({{{m.var(c, m.wall_label(w)), 1}, {xo, -1}}, Sense::le, 0, RowKind::wall_outside, c});
  }

  if (options.boundary_outside)
    for (int c = 0; c < nc; ++c)
      if (on_box_boundary(cx, c))
        m.rows.push_back({{{m.var(c, m.outside_label()), 1}}, Sense::eq, 1, RowKind::box_outside, c});

  for (const auto& f : cx.faces) {
    const int ca = f.ca, cb = f.cb;
    const double wcost = alpha * (1.0 - priors.face[f.id]) * f.area;
    // Constraint 2: room r in cb requires r in ca; a pruned x_{ca,r} is zero.
    for (int r = 0; r < m.rooms; ++r) {
      const int vb = m.var(cb, r);
      if (vb < 0) continue;
      IlpRow row{{}, Sense::ge, 0, RowKind::room_side, f.id};
      if (int va = m.var(ca, r); va >= 0) row.terms.emplace_back(va, 1);
      row.terms.emplace_back(vb, -1);
      m.rows.push_back(std::move(row));
    }
    const int oa = m.var(ca, m.outside_label()), ob = m.var(cb, m.outside_label());
    // Constraint 4 (with an empty wall set this bans the inside-to-outside step).
    {
      IlpRow row{{}, Sense::ge, 0, RowKind::wall_boundary, f.id};
      for (int w : f.boundary_walls) row.terms.emplace_back(m.var(cb, m.wall_label(w)), 1);
      row.terms.emplace_back(ob, -1);
      row.terms.emplace_back(oa, 1);
      m.rows.push_back(std::move(row));
    }
    for (int w : f.boundary_walls) m.cost[m.var(cb, m.wall_label(w))] += wcost;
    for (int w : f.inner_walls) {
      const int wa = m.var(ca, m.wall_label(w)), wb = m.var(cb, m.wall_label(w));
      m.rows.push_back({{{wb, 1}, {wa, -1}}, Sense::ge, 0, RowKind::wall_inner, f.id});
      IlpRow row{{}, Sense::ge, 0, RowKind::wall_end, f.id};
      for (int w2 : f.boundary_walls) row.terms.emplace_back(m.var(cb, m.wall_label(w2)), 1);
      row.terms.emplace_back(wb, -1);
      row.terms.emplace_back(wa, 1);
      m.rows.push_back(std::move(row));
      m.cost[wb] += wcost;
      m.cost[wa] -= wcost;
    }
    if (options.redundant_outside_constraint)
      m.rows.push_back({{{oa, 1}, {ob, -1}}, Sense::le, 0, RowKind::redundant, f.id});
  }

  for (const auto& u : forced) {
    if (!u.active) continue;
    IlpRow row{{}, Sense::eq, 1, RowKind::user, u.id};
    switch (u.kind) {
      case UserConstraint::Kind::force_room:
        if (u.room >= 0) {
          row.terms.emplace_back(m.var(u.cell, u.room), 1);
        } else {
          row.terms.emplace_back(m.var(u.cell, m.outside_label()), 1);
          row.rhs = 0;
        }
        break;
      case UserConstraint::Kind::force_outside:
        row.terms.emplace_back(m.var(u.cell, m.outside_label()), 1);
        break;
      case UserConstraint::Kind::force_wall:
        row.terms.emplace_back(m.var(u.cell, m.wall_label(u.wall)), 1);
        break;
      case UserConstraint::Kind::forbid_wall:
        row.terms.emplace_back(m.var(u.cell, m.wall_label(u.wall)), 1);
        row.rhs = 0;
        break;
    }
    m.rows.push_back(std::move(row));
  }
  return m;
}

bool satisfies(const IlpModel& model, const std::vector<std::uint8_t>& x) {
  for (const auto& row : model.rows) {
    long s = 0;
    for (const auto& [v, a] : row.terms) s += static_cast<long>(a) * x[v];
    const bool ok = row.sense == Sense::eq ? s == row.rhs : row.sense == Sense::ge ? s >= row.rhs : s <= row.rhs;
    if (!ok) return false;
  }
  return true;
}

double model_objective(const IlpModel& model, const std::vector<std::uint8_t>& x) {
  double z = 0;
  for (std::size_t v = 0; v < x.size(); ++v)
    if (x[v]) z += model.cost[v];
  return z;
}

namespace {

DualSimplex make_lp(const IlpModel& model, Exec exec, int skip_user_id = -1) {
  std::vector<LpEntry> entries;
  std::vector<double> rhs;
  std::vector<Sense> sense;
  int r = 0;
  for (const auto& row : model.rows) {
    if (row.kind == RowKind::user && row.ref == skip_user_id) continue;
    for (const auto& [v, a] : row.terms) entries.push_back({r, v, static_cast<double>(a)});
    rhs.push_back(row.rhs);
    sense.push_back(row.sense);
    ++r;
  }
  return DualSimplex(r, static_cast<int>(model.vars.size()), entries, rhs, sense, model.cost, exec);
}

// For each cell take the R_o label with the largest LP value and the walls above 1/2.
std::vector<std::uint8_t> round_lp(const IlpModel& model, const std::vector<double>& lp) {
  std::vector<std::uint8_t> x(model.vars.size(), 0);
  for (int c = 0; c < model.cells; ++c) {
    int best = -1;
    for (const auto& [label, v] : model.cell_vars[c])
      if (label <= model.rooms && (best < 0 || lp[v] > lp[best])) best = v;
    if (best >= 0) x[best] = 1;
    const bool outside = model.vars[best].second == model.outside_label();
    for (const auto& [label, v] : model.cell_vars[c])
      if (label > model.rooms && outside && lp[v] > 0.5) x[v] = 1;
  }
  return x;
}

struct Node {
  double bound;
  long id;
  std::vector<std::pair<int, std::uint8_t>> fix;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    return a.bound != b.bound ? a.bound > b.bound : a.id > b.id;
  }
};

}  // namespace

Labeling solve(const IlpModel& model, const SolveParams& params) {
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  const int n = static_cast<int>(model.vars.size());
  Labeling best;
  best.x.assign(n, 0);
  bool have = false;
  double inc = std::numeric_limits<double>::infinity();
  auto offer = [&](const std::vector<std::uint8_t>& x) {
    if (!satisfies(model, x)) return;
    const double z = model_objective(model, x);
    if (!have || z < inc) {
      have = true;
      inc = z;
      best.x = x;
    }
  };
  {
    std::vector<std::uint8_t> x(n, 0);
    for (int c = 0; c < model.cells; ++c)
      if (int v = model.var(c, model.outside_label()); v >= 0) x[v] = 1;
    offer(x);
  }
  auto eps = [&] { return have ? std::max(params.gap_tolerance * std::abs(inc), 1e-9) : 0.0; };

  DualSimplex lp = make_lp(model, params.exec);
  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  open.push({-std::numeric_limits<double>::infinity(), 0, {}});
  long next_id = 1;
  bool root = true;
  bool timed_out = false;
  double open_bound = std::numeric_limits<double>::infinity();
  while (!open.empty()) {
    if (elapsed() > params.time_limit) {
      timed_out = true;
      open_bound = open.top().bound;
      break;
    }
    Node node = open.top();
    open.pop();
    if (have && node.bound >= inc - eps()) continue;
    for (int j = 0; j < n; ++j) lp.set_bounds(j, 0.0, 1.0);
    for (const auto& [j, v] : node.fix) lp.set_bounds(j, v, v);
    ++best.nodes;
    const auto st = lp.solve(have ? inc - eps() : std::numeric_limits<double>::infinity());
    if (st == DualSimplex::Status::iteration_limit) throw Error("LP relaxation hit the iteration limit");
    if (st == DualSimplex::Status::infeasible && root) {
      best.status = Labeling::Status::infeasible;
      best.lp_iterations = lp.iterations();
      std::set<int> ids;
      for (const auto& row : model.rows)
        if (row.kind == RowKind::user) ids.insert(row.ref);
      for (int id : ids) {
        DualSimplex relaxed = make_lp(model, params.exec, id);
        if (relaxed.solve() != DualSimplex::Status::infeasible) best.conflict_hint.push_back(id);
      }
      if (best.conflict_hint.empty()) best.conflict_hint.assign(ids.begin(), ids.end());
      return best;
    }
    root = false;
    if (st != DualSimplex::Status::optimal) continue;
    const double z = lp.objective();
    if (have && z >= inc - eps()) continue;
    const auto sol = lp.solution();
    offer(round_lp(model, sol));
    int pick = -1;
    double pick_frac = 0;
    for (int j = 0; j < n; ++j) {
      if (lp.lower(j) == lp.upper(j)) continue;
      const double f = std::min(sol[j] - std::floor(sol[j]), std::ceil(sol[j]) - sol[j]);
      if (f <= 1e-6) continue;
      if (pick < 0 || f > pick_frac + 1e-9 ||
          (f > pick_frac - 1e-9 && std::abs(model.cost[j]) > std::abs(model.cost[pick]))) {
        pick = j;
        pick_frac = f;
      }
    }
    if (pick < 0) {
      std::vector<std::uint8_t> x(n);
      for (int j = 0; j < n; ++j) x[j] = sol[j] > 0.5 ? 1 : 0;
      offer(x);
      continue;
    }
    for (std::uint8_t v : {std::uint8_t{1}, std::uint8_t{0}}) {
      Node child{z, next_id++, node.fix};
      child.fix.emplace_back(pick, v);
      open.push(std::move(child));
    }
  }
  best.lp_iterations = lp.iterations();
  if (!have) {
    if (timed_out) throw Error("time limit reached without a feasible labeling");
    best.status = Labeling::Status::infeasible;
    return best;
  }
  best.objective = model_objective(model, best.x);
  if (timed_out) {
    best.status = Labeling::Status::gap_limit;
    best.bound = std::min(open_bound, best.objective);
  } else {
    best.status = Labeling::Status::optimal;
    best.bound = best.objective;
  }
  best.gap = (best.objective - best.bound) / std::max(1e-10, std::abs(best.objective));
  return best;
}

std::string export_lp(const IlpModel& model) {
  if (model.vars.empty()) throw ModelError("no variables");
  std::ostringstream os;
  char buf[64];
  auto term = [&](double a, int v, bool first) {
    std::snprintf(buf, sizeof buf, "%.17g", std::abs(a));
    os << (a < 0 ? " - " : (first ? " " : " + ")) << buf << ' ' << model.var_name(v);
  };
  os << "Minimize\n obj:";
  bool first = true;
  int on_line = 0;
  for (std::size_t v = 0; v < model.vars.size(); ++v) {
    if (model.cost[v] == 0) continue;
    term(model.cost[v], static_cast<int>(v), first);
    first = false;
    if (++on_line % 6 == 0) os << "\n";
  }
  if (first) os << " 0 " << model.var_name(0);
  os << "\nSubject To\n";
  for (std::size_t r = 0; r < model.rows.size(); ++r) {
    const auto& row = model.rows[r];
    os << " r" << r << ":";
    bool f = true;
    for (const auto& [v, a] : row.terms) {
      os << (a < 0 ? " - " : (f ? " " : " + "));
      if (std::abs(a) != 1) os << std::abs(a) << ' ';
      os << model.var_name(v);
      f = false;
    }
    os << (row.sense == Sense::eq ? " = " : row.sense == Sense::ge ? " >= " : " <= ") << row.rhs << "\n";
  }
  os << "Binaries\n";
  for (std::size_t v = 0; v < model.vars.size(); ++v) os << " " << model.var_name(static_cast<int>(v)) << "\n";
  os << "End\n";
  return os.str();
}

CellLabels cell_labels(const IlpModel& model, const Labeling& lab) {
  CellLabels out;
  out.room.assign(model.cells, -2);
  out.walls.resize(model.cells);
  for (int c = 0; c < model.cells; ++c) {
    int count = 0;
    for (const auto& [label, v] : model.cell_vars[c]) {
      if (!lab.has(v)) continue;
      if (label <= model.rooms) {
        ++count;
        out.room[c] = label == model.outside_label() ? -1 : label;
      } else {
        out.walls[c].push_back(label - model.rooms - 1);
      }
    }
    if (count > 1) out.room[c] = -3;
  }
  return out;
}

std::vector<Violation> validate(const Labeling& lab, const IlpModel& model, const CellComplex& cx) {
  std::vector<Violation> out;
  auto labels = cell_labels(model, lab);
  auto active = [&](int c, int w) {
    return std::find(labels.walls[c].begin(), labels.walls[c].end(), w) != labels.walls[c].end();
  };
  for (int c = 0; c < static_cast<int>(cx.cells.size()); ++c) {
    if (labels.room[c] < -1)
      out.push_back({1, c, -1, "cell " + std::to_string(c) + " does not carry exactly one room/outside label"});
    for (int w : labels.walls[c]) {
      if (labels.room[c] != -1)
        out.push_back({3, c, -1, "wall " + std::to_string(w) + " on non-outside cell " + std::to_string(c)});
      if (!std::binary_search(cx.cells[c].walls.begin(), cx.cells[c].walls.end(), w))
        out.push_back({3, c, -1, "wall " + std::to_string(w) + " outside its candidate region at cell " + std::to_string(c)});
    }
    if (model.boundary_outside && labels.room[c] >= 0 && on_box_boundary(cx, c))
      out.push_back({7, c, -1, "room " + std::to_string(labels.room[c]) + " reaches the bounding box at cell " + std::to_string(c)});
  }
  for (const auto& f : cx.faces) {
    const int ca = f.ca, cb = f.cb;
    const int ra = labels.room[ca], rb = labels.room[cb];
    if (rb >= 0 && ra != rb)
      out.push_back({2, cb, f.id, "room " + std::to_string(rb) + " on the negative side of face " +
                                      std::to_string(f.id) + " without the same room opposite"});
    const auto& wa = cx.cells[ca].walls;
    const auto& wb = cx.cells[cb].walls;
    std::vector<int> only_b, both;
    std::set_difference(wb.begin(), wb.end(), wa.begin(), wa.end(), std::back_inserter(only_b));
    std::set_intersection(wa.begin(), wa.end(), wb.begin(), wb.end(), std::back_inserter(both));
    bool covered = false;
    for (int w : only_b) covered = covered || active(cb, w);
    if (ra >= 0 && rb == -1 && !covered)
      out.push_back({4, cb, f.id, "room/outside transition at face " + std::to_string(f.id) + " without an active wall"});
    for (int w : both) {
      if (active(ca, w) && !active(cb, w))
        out.push_back({5, ca, f.id, "wall " + std::to_string(w) + " leaves through the negative side of face " + std::to_string(f.id)});
      if (active(cb, w) && !active(ca, w) && !covered)
        out.push_back({6, cb, f.id, "wall " + std::to_string(w) + " ends at face " + std::to_string(f.id) + " without another wall"});
    }
  }
  return out;
}

double recompute_objective(const Labeling& lab, const IlpModel& model, const CellComplex& cx,
                           const Priors& priors) {
  auto labels = cell_labels(model, lab);
  auto active = [&](int c, int w) {
    return std::find(labels.walls[c].begin(), labels.walls[c].end(), w) != labels.walls[c].end() ? 1.0 : 0.0;
  };
  double rooms = 0;
  for (int c = 0; c < static_cast<int>(cx.cells.size()); ++c) {
    const int r = labels.room[c];
    if (r >= -1) rooms += priors.cell[c][r == -1 ? priors.labels : r] * cx.cells[c].volume;
  }
  double boundary = 0, inner = 0;
  for (const auto& f : cx.faces) {
    const double k = (1.0 - priors.face[f.id]) * f.area;
    for (int w : f.boundary_walls) boundary += active(f.cb, w) * k;
    for (int w : f.inner_walls) inner += (active(f.cb, w) - active(f.ca, w)) * k;
  }
  return -rooms + model.alpha * (boundary + inner);
}

}  // namespace recon
