#include "recon/lp.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace recon {

namespace {

constexpr double kPrimalTol = 1e-9;
constexpr double kDualTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxEtas = 64;

}  // namespace

DualSimplex::DualSimplex(int rows, int cols, const std::vector<LpEntry>& entries,
                         const std::vector<double>& rhs, const std::vector<Sense>& sense,
                         const std::vector<double>& cost, Exec exec)
    : m_(rows), n_(cols), exec_(exec) {
  if (static_cast<int>(rhs.size()) != m_ || static_cast<int>(sense.size()) != m_ ||
      static_cast<int>(cost.size()) != n_)
    throw PreconditionError("LP dimensions disagree");
  std::map<std::pair<int, int>, double> merged;
  for (const auto& e : entries) {
    if (e.row < 0 || e.row >= m_ || e.col < 0 || e.col >= n_) throw PreconditionError("LP entry out of range");
    merged[{e.col, e.row}] += e.value;
  }
  col_start_.assign(n_ + 1, 0);
  row_start_.assign(m_ + 1, 0);
  for (const auto& [k, v] : merged) {
    if (v == 0) continue;
    ++col_start_[k.first + 1];
    ++row_start_[k.second + 1];
  }
  for (int j = 0; j < n_; ++j) col_start_[j + 1] += col_start_[j];
  for (int i = 0; i < m_; ++i) row_start_[i + 1] += row_start_[i];
  col_row_.resize(col_start_[n_]);
  col_val_.resize(col_start_[n_]);
  row_col_.resize(row_start_[m_]);
  row_val_.resize(row_start_[m_]);
  std::vector<int> cfill(col_start_.begin(), col_start_.end() - 1);
  std::vector<int> rfill(row_start_.begin(), row_start_.end() - 1);
  for (const auto& [k, v] : merged) {
    if (v == 0) continue;
    col_row_[cfill[k.first]] = k.second;
    col_val_[cfill[k.first]++] = v;
    row_col_[rfill[k.second]] = k.first;
    row_val_[rfill[k.second]++] = v;
  }
  b_ = rhs;
  c_ = cost;
  c_.resize(n_ + m_, 0.0);
  lo_.assign(n_ + m_, 0.0);
  hi_.assign(n_ + m_, 1.0);
  for (int i = 0; i < m_; ++i) {
    lo_[n_ + i] = sense[i] == Sense::ge ? -kInf : 0.0;
    hi_[n_ + i] = sense[i] == Sense::le ? kInf : 0.0;
  }
  x_.assign(n_ + m_, 0.0);
  basic_.resize(m_);
  where_.assign(n_ + m_, -1);
  for (int i = 0; i < m_; ++i) {
    basic_[i] = n_ + i;
    where_[n_ + i] = i;
  }
  d_ = c_;
  refactor();
}

void DualSimplex::set_bounds(int j, double lo, double hi) {
  if (j < 0 || j >= n_) throw PreconditionError("bound index out of range");
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) throw PreconditionError("invalid bounds");
  lo_[j] = lo;
  hi_[j] = hi;
}

double DualSimplex::objective() const {
  double z = 0;
  for (int j = 0; j < n_; ++j) z += c_[j] * x_[j];
  return z;
}

double DualSimplex::column_dot(int j, const Eigen::VectorXd& y) const {
  if (j >= n_) return y[j - n_];
  double s = 0;
  for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) s += col_val_[k] * y[col_row_[k]];
  return s;
}

void DualSimplex::refactor() {
  etas_.clear();
  if (m_ == 0) return;
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < m_; ++i) {
    const int j = basic_[i];
    if (j >= n_) {
      trip.emplace_back(j - n_, i, 1.0);
    } else {
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) trip.emplace_back(col_row_[k], i, col_val_[k]);
    }
  }
  Eigen::SparseMatrix<double> bm(m_, m_);
  bm.setFromTriplets(trip.begin(), trip.end());
  bm.makeCompressed();
  lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>>>();
  lu_->analyzePattern(bm);
  lu_->factorize(bm);
  if (lu_->info() != Eigen::Success) throw Error("simplex basis became singular");
}

void DualSimplex::ftran(Eigen::VectorXd& v) const {
  if (m_ == 0) return;
  v = lu_->solve(v);
  for (const auto& e : etas_) {
    const double xr = v[e.row] / e.pivot;
    if (xr != 0.0)
      for (const auto& [i, a] : e.col)
        if (i != e.row) v[i] -= a * xr;
    v[e.row] = xr;
  }
}

void DualSimplex::btran(Eigen::VectorXd& v) const {
  if (m_ == 0) return;
  for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
    double s = v[it->row];
    for (const auto& [i, a] : it->col)
      if (i != it->row) s -= v[i] * a;
    v[it->row] = s / it->pivot;
  }
  v = lu_->transpose().solve(v);
}

void DualSimplex::place_nonbasic() {
  for (int j = 0; j < n_ + m_; ++j) {
    if (where_[j] >= 0) continue;
    if (lo_[j] == hi_[j]) {
      x_[j] = lo_[j];
    } else if (!std::isfinite(lo_[j])) {
      x_[j] = hi_[j];
    } else if (!std::isfinite(hi_[j])) {
      x_[j] = lo_[j];
    } else if (d_[j] > kDualTol) {
      x_[j] = lo_[j];
    } else if (d_[j] < -kDualTol) {
      x_[j] = hi_[j];
    } else {
      // Keep the current side when the reduced cost is zero.
      x_[j] = x_[j] >= 0.5 * (lo_[j] + hi_[j]) ? hi_[j] : lo_[j];
    }
  }
}

void DualSimplex::recompute_primal() {
  if (m_ == 0) return;
  Eigen::VectorXd v(m_);
  for (int i = 0; i < m_; ++i) v[i] = b_[i];
  for (int j = 0; j < n_ + m_; ++j) {
    if (where_[j] >= 0 || x_[j] == 0.0) continue;
    if (j >= n_) {
      v[j - n_] -= x_[j];
    } else {
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) v[col_row_[k]] -= col_val_[k] * x_[j];
    }
  }
  ftran(v);
  for (int i = 0; i < m_; ++i) x_[basic_[i]] = v[i];
}

void DualSimplex::recompute_duals() {
  if (m_ == 0) {
    d_ = c_;
    return;
  }
  Eigen::VectorXd y(m_);
  for (int i = 0; i < m_; ++i) y[i] = c_[basic_[i]];
  btran(y);
  for (int j = 0; j < n_ + m_; ++j) d_[j] = where_[j] >= 0 ? 0.0 : c_[j] - column_dot(j, y);
}

int DualSimplex::choose_leaving(bool bland) const {
  auto infeas = [&](int i) {
    const int j = basic_[i];
    if (x_[j] < lo_[j] - kPrimalTol) return lo_[j] - x_[j];
    if (x_[j] > hi_[j] + kPrimalTol) return x_[j] - hi_[j];
    return 0.0;
  };
  int best = -1;
  double best_v = 0;
  if (bland) {
    for (int i = 0; i < m_; ++i)
      if (infeas(i) > 0 && (best < 0 || basic_[i] < basic_[best])) best = i;
    return best;
  }
  if (exec_ == Exec::parallel) {
#pragma omp parallel
    {
      int lb = -1;
      double lv = 0;
#pragma omp for nowait
      for (int i = 0; i < m_; ++i) {
        double v = infeas(i);
        if (v > lv) {
          lv = v;
          lb = i;
        }
      }
#pragma omp critical
      if (lb >= 0 && (lv > best_v || (lv == best_v && lb < best))) {
        best_v = lv;
        best = lb;
      }
    }
    return best;
  }
  for (int i = 0; i < m_; ++i) {
    double v = infeas(i);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  return best;
}

DualSimplex::Status DualSimplex::solve(double cutoff) {
  infeasible_row_ = -1;
  place_nonbasic();
  recompute_primal();
  const int total = n_ + m_;
  const long limit = 50L * total + 10000;
  bool bland = false;
  double best_obj = -kInf;
  long stall = 0;
  Eigen::VectorXd rho(m_), col(m_);
  std::vector<double> alpha(total, 0.0);
  std::vector<int> touched;
  for (long it = 0;; ++it) {
    if (it > limit) return Status::iteration_limit;
    const double obj = objective();
    if (obj > cutoff) return Status::cutoff;
    if (obj > best_obj + 1e-10) {
      best_obj = obj;
      stall = 0;
    } else if (++stall > 200) {
      bland = true;
    }
    const int r = choose_leaving(bland);
    if (r < 0) return Status::optimal;
    const int p = basic_[r];
    const bool below = x_[p] < lo_[p];
    const double target = below ? lo_[p] : hi_[p];
    const double dir = below ? 1.0 : -1.0;

    rho.setZero();
    rho[r] = 1.0;
    btran(rho);
    for (int j : touched) alpha[j] = 0.0;
    touched.clear();
    for (int i = 0; i < m_; ++i) {
      const double ri = rho[i];
      if (std::abs(ri) < 1e-13) continue;
      alpha[n_ + i] = ri;
      touched.push_back(n_ + i);
      for (int k = row_start_[i]; k < row_start_[i + 1]; ++k) {
        const int j = row_col_[k];
        if (alpha[j] == 0.0) touched.push_back(j);
        alpha[j] += ri * row_val_[k];
      }
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());

    // Ratio test over nonbasic, non-fixed candidates.
    auto candidate = [&](int j) {
      if (where_[j] >= 0 || lo_[j] == hi_[j]) return false;
      const double s = x_[j] <= lo_[j] ? 1.0 : -1.0;
      return dir * alpha[j] * s < -kPivotTol;
    };
    int q = -1;
    if (bland) {
      double best = kInf;
      for (int j : touched) {
        if (!candidate(j)) continue;
        const double ratio = std::abs(d_[j]) / std::abs(alpha[j]);
        if (ratio < best - 1e-12) {
          best = ratio;
          q = j;
        }
      }
    } else {
      double theta_max = kInf;
      for (int j : touched)
        if (candidate(j)) theta_max = std::min(theta_max, (std::abs(d_[j]) + kDualTol) / std::abs(alpha[j]));
      double best_a = 0;
      for (int j : touched) {
        if (!candidate(j)) continue;
        if (std::abs(d_[j]) / std::abs(alpha[j]) <= theta_max && std::abs(alpha[j]) > best_a) {
          best_a = std::abs(alpha[j]);
          q = j;
        }
      }
    }
    if (q < 0) {
      infeasible_row_ = r;
      return Status::infeasible;
    }

    col.setZero();
    if (q >= n_) {
      col[q - n_] = 1.0;
    } else {
      for (int k = col_start_[q]; k < col_start_[q + 1]; ++k) col[col_row_[k]] = col_val_[k];
    }
    ftran(col);
    const double pivot = col[r];
    if (std::abs(pivot - alpha[q]) > 1e-7 * (1.0 + std::abs(pivot)) || std::abs(pivot) < kPivotTol) {
      // Drift between the row and column views; start over from a fresh factorization.
      if (etas_.empty()) throw Error("simplex lost numerical accuracy");
      refactor();
      recompute_primal();
      recompute_duals();
      continue;
    }

    const double theta_d = d_[q] / pivot;
    auto update = [&](int j) {
      if (where_[j] < 0) d_[j] -= theta_d * alpha[j];
    };
    if (exec_ == Exec::parallel) {
      const auto nt = static_cast<std::int64_t>(touched.size());
#pragma omp parallel for schedule(static)
      for (std::int64_t k = 0; k < nt; ++k) update(touched[k]);
    } else {
      for (int j : touched) update(j);
    }
    d_[p] = -theta_d;
    d_[q] = 0.0;

    const double delta = (x_[p] - target) / pivot;
    for (int i = 0; i < m_; ++i)
      if (col[i] != 0.0) x_[basic_[i]] -= col[i] * delta;
    x_[q] += delta;
    x_[p] = target;
    basic_[r] = q;
    where_[q] = r;
    where_[p] = -1;

    Eta e;
    e.row = r;
    e.pivot = pivot;
    for (int i = 0; i < m_; ++i)
      if (std::abs(col[i]) > 1e-14) e.col.emplace_back(i, col[i]);
    etas_.push_back(std::move(e));
    ++iterations_;
    if (etas_.size() >= kMaxEtas) {
      refactor();
      recompute_primal();
      recompute_duals();
    }
  }
}

}  // namespace recon
