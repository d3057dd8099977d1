#include "ipm.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace vaopf::conic::detail {

namespace {

constexpr double kInfStep = std::numeric_limits<double>::infinity();

using Triplets = std::vector<Eigen::Triplet<double>>;

Eigen::VectorXd cone_identity(const ConeLayout& cones) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(cones.total());
  e.head(cones.lp_dim).setOnes();
  int o = cones.lp_dim;
  for (int d : cones.soc_dims) {
    e[o] = 1.0;
    o += d;
  }
  return e;
}

// t^2 - ||y||^2 without the cancellation of the direct form.
double soc_residual(double t, double ynorm) { return (t - ynorm) * (t + ynorm); }

}  // namespace

int ConeLayout::total() const {
  int t = lp_dim;
  for (int d : soc_dims) t += d;
  return t;
}

double min_eigenvalue(const Eigen::VectorXd& v, const ConeLayout& cones) {
  double m = kInfStep;
  if (cones.lp_dim > 0) m = v.head(cones.lp_dim).minCoeff();
  int o = cones.lp_dim;
  for (int d : cones.soc_dims) {
    m = std::min(m, v[o] - v.segment(o + 1, d - 1).norm());
    o += d;
  }
  return m;
}

Eigen::VectorXd jordan_product(const Eigen::VectorXd& u, const Eigen::VectorXd& v, const ConeLayout& cones) {
  Eigen::VectorXd w(u.size());
  w.head(cones.lp_dim) = u.head(cones.lp_dim).cwiseProduct(v.head(cones.lp_dim));
  int o = cones.lp_dim;
  for (int d : cones.soc_dims) {
    w[o] = u.segment(o, d).dot(v.segment(o, d));
    w.segment(o + 1, d - 1) = u[o] * v.segment(o + 1, d - 1) + v[o] * u.segment(o + 1, d - 1);
    o += d;
  }
  return w;
}

Eigen::VectorXd jordan_divide(const Eigen::VectorXd& lambda, const Eigen::VectorXd& r, const ConeLayout& cones) {
  Eigen::VectorXd x(r.size());
  x.head(cones.lp_dim) = r.head(cones.lp_dim).cwiseQuotient(lambda.head(cones.lp_dim));
  int o = cones.lp_dim;
  for (int d : cones.soc_dims) {
    const double l0 = lambda[o];
    const auto l1 = lambda.segment(o + 1, d - 1);
    const auto r1 = r.segment(o + 1, d - 1);
    const double det = soc_residual(l0, l1.norm());
    const double x0 = (l0 * r[o] - l1.dot(r1)) / det;
    x[o] = x0;
    x.segment(o + 1, d - 1) = (r1 - x0 * l1) / l0;
    o += d;
  }
  return x;
}

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, const ConeLayout& cones) {
  double alpha = kInfStep;
  for (int i = 0; i < cones.lp_dim; ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  int o = cones.lp_dim;
  for (int d : cones.soc_dims) {
    const double v0 = v[o], d0 = dv[o];
    const auto v1 = v.segment(o + 1, d - 1);
    const auto d1 = dv.segment(o + 1, d - 1);
    // q(a) = qa a^2 + 2 qb a + qc, positive at 0; first positive root leaves the cone.
    const double qa = d0 * d0 - d1.squaredNorm();
    const double qb = v0 * d0 - v1.dot(d1);
    const double qc = std::max(soc_residual(v0, v1.norm()), 0.0);
    double root = kInfStep;
    if (std::abs(qa) <= 1e-300) {
      if (qb < 0.0) root = -qc / (2.0 * qb);
    } else {
      const double disc = qb * qb - qa * qc;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double qq = -(qb + (qb >= 0.0 ? sq : -sq));
        for (double r : {qq / qa, qq != 0.0 ? qc / qq : kInfStep})
          if (r > 0.0) root = std::min(root, r);
      }
    }
    if (d0 < 0.0) root = std::min(root, -v0 / d0);
    alpha = std::min(alpha, root);
    o += d;
  }
  return alpha;
}

bool NtScaling::compute(const Eigen::VectorXd& s, const Eigen::VectorXd& z, const ConeLayout& cones) {
  cones_ = cones;
  lp_w_.resize(cones.lp_dim);
  for (int i = 0; i < cones.lp_dim; ++i) {
    if (!(s[i] > 0.0) || !(z[i] > 0.0)) return false;
    lp_w_[i] = std::sqrt(s[i] / z[i]);
  }
  const std::size_t nsoc = cones.soc_dims.size();
  beta_.resize(nsoc);
  wbar_.resize(nsoc);
  soc_w2_.resize(nsoc);
  soc_winv_.resize(nsoc);
  int o = cones.lp_dim;
  for (std::size_t k = 0; k < nsoc; ++k) {
    const int d = cones.soc_dims[k];
    const auto sk = s.segment(o, d);
    const auto zk = z.segment(o, d);
    const double sres = soc_residual(sk[0], sk.tail(d - 1).norm());
    const double zres = soc_residual(zk[0], zk.tail(d - 1).norm());
    if (!(sres > 0.0) || !(zres > 0.0) || sk[0] <= 0.0 || zk[0] <= 0.0) return false;
    const double sn = std::sqrt(sres);
    const double zn = std::sqrt(zres);
    const Eigen::VectorXd sbar = sk / sn;
    Eigen::VectorXd jzbar = zk / zn;
    jzbar.tail(d - 1) *= -1.0;
    // sbar'zbar = sbar'J(J zbar); recompute directly from the unflipped vector.
    const double dot = sbar[0] * jzbar[0] - sbar.tail(d - 1).dot(jzbar.tail(d - 1));
    const double gamma = std::sqrt(0.5 * (1.0 + dot));
    Eigen::VectorXd w = (sbar + jzbar) / (2.0 * gamma);
    // Re-normalize so that w'Jw = 1 exactly.
    const double wres = soc_residual(w[0], w.tail(d - 1).norm());
    if (!(wres > 0.0)) return false;
    w /= std::sqrt(wres);
    beta_[k] = std::sqrt(sn / zn);
    wbar_[k] = w;

    Eigen::MatrixXd wm(d, d);
    wm(0, 0) = w[0];
    wm.block(0, 1, 1, d - 1) = w.tail(d - 1).transpose();
    wm.block(1, 0, d - 1, 1) = w.tail(d - 1);
    wm.block(1, 1, d - 1, d - 1) =
        Eigen::MatrixXd::Identity(d - 1, d - 1) + w.tail(d - 1) * w.tail(d - 1).transpose() / (1.0 + w[0]);
    Eigen::MatrixXd wi = wm;
    wi.block(0, 1, 1, d - 1) *= -1.0;
    wi.block(1, 0, d - 1, 1) *= -1.0;
    soc_winv_[k] = wi / beta_[k];
    wm *= beta_[k];
    soc_w2_[k] = wm * wm;
    o += d;
  }
  return true;
}

Eigen::VectorXd NtScaling::apply(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(v.size());
  out.head(cones_.lp_dim) = lp_w_.cwiseProduct(v.head(cones_.lp_dim));
  int o = cones_.lp_dim;
  for (std::size_t k = 0; k < cones_.soc_dims.size(); ++k) {
    const int d = cones_.soc_dims[k];
    const Eigen::VectorXd& w = wbar_[k];
    const double v0 = v[o];
    const auto v1 = v.segment(o + 1, d - 1);
    const double wv = w.tail(d - 1).dot(v1);
    out[o] = beta_[k] * (w[0] * v0 + wv);
    out.segment(o + 1, d - 1) = beta_[k] * (v1 + (v0 + wv / (1.0 + w[0])) * w.tail(d - 1));
    o += d;
  }
  return out;
}

Eigen::VectorXd NtScaling::apply_inverse(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(v.size());
  out.head(cones_.lp_dim) = v.head(cones_.lp_dim).cwiseQuotient(lp_w_);
  int o = cones_.lp_dim;
  for (std::size_t k = 0; k < cones_.soc_dims.size(); ++k) {
    const int d = cones_.soc_dims[k];
    const Eigen::VectorXd& w = wbar_[k];
    const double v0 = v[o];
    const auto v1 = v.segment(o + 1, d - 1);
    const double wv = w.tail(d - 1).dot(v1);
    out[o] = (w[0] * v0 - wv) / beta_[k];
    out.segment(o + 1, d - 1) = (v1 + (-v0 + wv / (1.0 + w[0])) * w.tail(d - 1)) / beta_[k];
    o += d;
  }
  return out;
}

StandardForm lower_program(const ConicProgram& program) {
  StandardForm f;
  const int n = program.num_variables();
  f.n = n;
  f.objective_constant = program.objective_constant();

  Triplets p_trip;
  for (const auto& qt : program.quadratic_terms()) {
    if (qt.i == qt.j) {
      p_trip.emplace_back(qt.i, qt.i, 2.0 * qt.v);
    } else {
      p_trip.emplace_back(qt.i, qt.j, qt.v);
      p_trip.emplace_back(qt.j, qt.i, qt.v);
    }
  }
  f.P.resize(n, n);
  f.P.setFromTriplets(p_trip.begin(), p_trip.end());
  f.q = Eigen::Map<const Eigen::VectorXd>(program.linear_objective().data(), n);

  Triplets a_trip, g_trip;
  std::vector<double> b_vals, h_vals;
  auto add_row = [](Triplets& trip, std::vector<double>& rhs, const LinearExpr& e, double sign, double value) {
    const int r = static_cast<int>(rhs.size());
    for (const auto& t : e.terms()) trip.emplace_back(r, t.var, sign * t.coef);
    rhs.push_back(value);
    return r;
  };

  f.linear_rows.resize(program.linear_constraints().size());
  for (std::size_t k = 0; k < program.linear_constraints().size(); ++k) {
    const auto& row = program.linear_constraints()[k];
    const double rhs = row.rhs - row.expr.constant();
    auto& ref = f.linear_rows[k];
    switch (row.sense) {
      case Sense::kEqual:
        ref = {true, add_row(a_trip, b_vals, row.expr, 1.0, rhs), 1.0};
        break;
      case Sense::kLessEqual:
        ref = {false, add_row(g_trip, h_vals, row.expr, 1.0, rhs), 1.0};
        break;
      case Sense::kGreaterEqual:
        ref = {false, add_row(g_trip, h_vals, row.expr, -1.0, -rhs), -1.0};
        break;
    }
  }
  for (int j = 0; j < n; ++j) {
    const double lo = program.lower()[j], hi = program.upper()[j];
    if (lo == hi) {
      add_row(a_trip, b_vals, LinearExpr::var(j), 1.0, lo);
      continue;
    }
    if (std::isfinite(lo)) add_row(g_trip, h_vals, LinearExpr::var(j), -1.0, -lo);
    if (std::isfinite(hi)) add_row(g_trip, h_vals, LinearExpr::var(j), 1.0, hi);
  }
  // Cones with an empty y degenerate to t >= 0 and join the orthant.
  for (const auto& cone : program.soc_constraints())
    if (cone.y.empty()) add_row(g_trip, h_vals, cone.t, -1.0, cone.t.constant());
  f.cones.lp_dim = static_cast<int>(h_vals.size());
  for (const auto& cone : program.soc_constraints()) {
    if (cone.y.empty()) continue;
    add_row(g_trip, h_vals, cone.t, -1.0, cone.t.constant());
    for (const auto& y : cone.y) add_row(g_trip, h_vals, y, -1.0, y.constant());
    f.cones.soc_dims.push_back(static_cast<int>(cone.y.size()) + 1);
  }

  f.A.resize(static_cast<int>(b_vals.size()), n);
  f.A.setFromTriplets(a_trip.begin(), a_trip.end());
  f.b = Eigen::Map<Eigen::VectorXd>(b_vals.data(), static_cast<int>(b_vals.size()));
  f.G.resize(static_cast<int>(h_vals.size()), n);
  f.G.setFromTriplets(g_trip.begin(), g_trip.end());
  f.h = Eigen::Map<Eigen::VectorXd>(h_vals.data(), static_cast<int>(h_vals.size()));
  return f;
}

namespace {

/// Scaled quasi-definite KKT system, with u = W dz:
///   [P + d I   A'     (W^-1 G)'  ]
///   [A        -d I    0          ]
///   [W^-1 G    0     -(1 + d) I  ]
/// factored by sparse LDL' and polished by iterative refinement against d = 0.
/// Keeping -I in the last block avoids the dense, badly conditioned W^2
/// blocks near the cone boundary.
class KktSystem {
 public:
  KktSystem(const StandardForm& f, double reg) : f_(f), base_reg_(reg), reg_(reg), Gs_(f.G) {
    At_ = f.A.transpose();
    Gt_ = f.G.transpose();
  }

  // Retries with a growing shift while a pivot has the wrong sign for the
  // quasi-definite pattern, else keeps the base shift and relies on refinement.
  bool factor(const NtScaling* w) {
    w_ = w;
    Gs_ = w ? scaled_G(*w) : f_.G;
    for (double reg = base_reg_; reg <= 1e-3; reg *= 100.0) {
      if (!factor_with(reg)) continue;
      if (pivots_ok()) return true;
    }
    return factor_with(base_reg_) && ldlt_.vectorD().allFinite();
  }

  double last_residual() const { return last_residual_; }

  /// Solves the unscaled system [P A' G'; A 0 0; G 0 -W^2] d = rhs, refining
  /// against that system with corrections from the scaled factor.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) {
    Eigen::VectorXd sol = refined(rhs);
    if (!(last_residual_ <= 1e-9)) {
      const double start_reg = reg_;
      double best = last_residual_;
      for (double reg = reg_ * 100.0; reg <= 1e-3 && best > 1e-9; reg *= 100.0) {
        if (!factor_with(reg)) continue;
        Eigen::VectorXd trial = refined(rhs);
        if (last_residual_ < best) {
          best = last_residual_;
          sol = trial;
        }
      }
      if (reg_ != start_reg) factor_with(start_reg);
      last_residual_ = best;
    }
    return sol;
  }

 private:
  SpMat scaled_G(const NtScaling& w) const {
    const ConeLayout& cones = f_.cones;
    const int m = static_cast<int>(f_.G.rows());
    Triplets trip;
    for (int i = 0; i < cones.lp_dim; ++i) trip.emplace_back(i, i, 1.0 / std::sqrt(w.lp_square(i)));
    int o = cones.lp_dim;
    for (std::size_t k = 0; k < cones.soc_dims.size(); ++k) {
      const int d = cones.soc_dims[k];
      const Eigen::MatrixXd& wi = w.soc_inverse(static_cast<int>(k));
      for (int c = 0; c < d; ++c)
        for (int r = 0; r < d; ++r) trip.emplace_back(o + r, o + c, wi(r, c));
      o += d;
    }
    SpMat winv(m, m);
    winv.setFromTriplets(trip.begin(), trip.end());
    SpMat out = (winv * f_.G).pruned();
    out.makeCompressed();
    return out;
  }

  bool pivots_ok() const {
    const int n = f_.n;
    const auto& perm = ldlt_.permutationP().indices();
    const Eigen::VectorXd& d = ldlt_.vectorD();
    for (int i = 0; i < d.size(); ++i) {
      const double v = d[perm[i]];
      if (!std::isfinite(v)) return false;
      if ((i < n) != (v > 0.0)) return false;
    }
    return true;
  }

  bool factor_with(double reg) {
    reg_ = reg;
    const int n = f_.n, p = static_cast<int>(f_.A.rows()), m = static_cast<int>(f_.G.rows());
    Triplets trip;
    trip.reserve(f_.P.nonZeros() + f_.A.nonZeros() + Gs_.nonZeros() + n + p + m);
    for (int c = 0; c < f_.P.outerSize(); ++c)
      for (SpMat::InnerIterator it(f_.P, c); it; ++it)
        if (it.row() >= it.col()) trip.emplace_back(it.row(), it.col(), it.value());
    for (int j = 0; j < n; ++j) trip.emplace_back(j, j, reg);
    for (int c = 0; c < f_.A.outerSize(); ++c)
      for (SpMat::InnerIterator it(f_.A, c); it; ++it) trip.emplace_back(n + it.row(), it.col(), it.value());
    for (int r = 0; r < p; ++r) trip.emplace_back(n + r, n + r, -reg);
    for (int c = 0; c < Gs_.outerSize(); ++c)
      for (SpMat::InnerIterator it(Gs_, c); it; ++it) trip.emplace_back(n + p + it.row(), it.col(), it.value());
    for (int r = 0; r < m; ++r) trip.emplace_back(n + p + r, n + p + r, -1.0 - reg);
    const int dim = n + p + m;
    SpMat kkt(dim, dim);
    kkt.setFromTriplets(trip.begin(), trip.end());
    // the pattern of W^-1 G can change between iterations, so analyze each time
    ldlt_.analyzePattern(kkt);
    ldlt_.factorize(kkt);
    return ldlt_.info() == Eigen::Success;
  }

  Eigen::VectorXd scaled_solve(const Eigen::VectorXd& rhs) const {
    const int m = static_cast<int>(f_.G.rows());
    Eigen::VectorXd r = rhs;
    if (w_) r.tail(m) = w_->apply_inverse(rhs.tail(m));
    Eigen::VectorXd sol = ldlt_.solve(r);
    if (w_) sol.tail(m) = w_->apply_inverse(Eigen::VectorXd(sol.tail(m)));
    return sol;
  }

  Eigen::VectorXd multiply(const Eigen::VectorXd& v) const {
    const int n = f_.n, p = static_cast<int>(f_.A.rows()), m = static_cast<int>(f_.G.rows());
    const auto vx = v.head(n);
    const auto vy = v.segment(n, p);
    const Eigen::VectorXd vz = v.tail(m);
    Eigen::VectorXd out(v.size());
    out.head(n) = f_.P * vx + At_ * vy + Gt_ * vz;
    out.segment(n, p) = f_.A * vx;
    out.tail(m) = f_.G * vx - (w_ ? w_->apply(w_->apply(vz)) : vz);
    return out;
  }

  Eigen::VectorXd refined(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd sol = scaled_solve(rhs);
    const double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
    for (int it = 0; it < 10; ++it) {
      const Eigen::VectorXd res = rhs - multiply(sol);
      last_residual_ = res.lpNorm<Eigen::Infinity>() / scale;
      if (last_residual_ <= 1e-14) break;
      sol += scaled_solve(res);
    }
    last_residual_ = (rhs - multiply(sol)).lpNorm<Eigen::Infinity>() / scale;
    if (!sol.allFinite()) last_residual_ = kInfStep;
    return sol;
  }

  const StandardForm& f_;
  double base_reg_;
  double reg_;
  SpMat At_, Gt_;
  SpMat Gs_;
  const NtScaling* w_ = nullptr;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  mutable double last_residual_ = 0.0;
};

struct Residuals {
  Eigen::VectorXd rx, ry, rz;
  double pres = 0, dres = 0, gap = 0, pcost = 0, relgap = 0;
};

Residuals residuals(const StandardForm& f, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& z, const Eigen::VectorXd& s) {
  Residuals r;
  const Eigen::VectorXd px = f.P * x;
  const Eigen::VectorXd aty = f.A.transpose() * y;
  const Eigen::VectorXd gtz = f.G.transpose() * z;
  const Eigen::VectorXd ax = f.A * x;
  const Eigen::VectorXd gx = f.G * x;
  r.rx = px + f.q + aty + gtz;
  r.ry = ax - f.b;
  r.rz = gx + s - f.h;
  const double dscale = 1.0 + std::max({px.norm(), f.q.norm(), aty.norm(), gtz.norm()});
  r.dres = r.rx.norm() / dscale;
  const double py = r.ry.size() ? r.ry.norm() / (1.0 + std::max(ax.norm(), f.b.norm())) : 0.0;
  const double pz = r.rz.size() ? r.rz.norm() / (1.0 + std::max({gx.norm(), f.h.norm(), s.norm()})) : 0.0;
  r.pres = std::max(py, pz);
  r.gap = s.dot(z);
  r.pcost = 0.5 * x.dot(px) + f.q.dot(x);
  r.relgap = r.gap / std::max(1.0, std::abs(r.pcost));
  return r;
}

}  // namespace

IpmResult solve_standard(const StandardForm& f, const SolveOptions& options) {
  IpmResult out;
  const int n = f.n, p = static_cast<int>(f.A.rows()), m = static_cast<int>(f.G.rows());
  const ConeLayout& cones = f.cones;
  const Eigen::VectorXd e = cone_identity(cones);

  KktSystem kkt(f, 1e-9);
  if (!kkt.factor(nullptr)) {
    out.message = "initial KKT factorization failed";
    return out;
  }
  Eigen::VectorXd rhs(n + p + m);
  rhs << -f.q, f.b, f.h;
  Eigen::VectorXd sol = kkt.solve(rhs);
  Eigen::VectorXd x = sol.head(n), y = sol.segment(n, p), z = sol.tail(m);
  Eigen::VectorXd s = -z;

  if (m == 0) {
    const Residuals r = residuals(f, x, y, z, s);
    out.x = x;
    out.y = y;
    out.z = z;
    out.s = s;
    out.primal_objective = r.pcost;
    out.primal_residual = r.pres;
    out.dual_residual = r.dres;
    out.iterations = 1;
    out.status = (r.pres <= options.feasibility_tol && r.dres <= options.feasibility_tol) ? SolveStatus::kOptimal
                                                                                          : SolveStatus::kNumericFailure;
    return out;
  }

  const double ts = -min_eigenvalue(s, cones);
  const double tz = -min_eigenvalue(z, cones);
  const double floor_s = 1e-8 * std::max(1.0, s.norm());
  const double floor_z = 1e-8 * std::max(1.0, z.norm());
  if (ts >= -floor_s) s += (1.0 + ts) * e;
  if (tz >= -floor_z) z += (1.0 + tz) * e;

  NtScaling scaling;
  const double deg = cones.degree();
  double best_merit = std::numeric_limits<double>::infinity();
  int best_iter = 0;
  Residuals best_res;
  Eigen::VectorXd bx = x, by = y, bz = z, bs = s;
  int small_steps = 0;

  int iter = 0;
  for (; iter <= options.max_iterations; ++iter) {
    const Residuals r = residuals(f, x, y, z, s);
    const double merit = std::max({r.pres, r.dres, std::min(r.relgap, r.gap)});
    if (merit < best_merit) {
      best_merit = merit;
      best_iter = iter;
      best_res = r;
      bx = x;
      by = y;
      bz = z;
      bs = s;
    }
    if (options.verbose)
      std::cerr << "ipm " << iter << " pcost " << r.pcost << " pres " << r.pres << " dres " << r.dres << " gap " << r.gap
                << '\n';
    if (r.pres <= options.feasibility_tol && r.dres <= options.feasibility_tol &&
        (r.gap <= options.absolute_gap_tol || r.relgap <= options.relative_gap_tol)) {
      out.status = SolveStatus::kOptimal;
      break;
    }
    if (iter == options.max_iterations) break;
    if (iter - best_iter > 30 || small_steps >= 4) break;

    if (!scaling.compute(s, z, cones)) {
      out.message = "iterate left the cone interior";
      break;
    }
    if (!kkt.factor(&scaling)) {
      out.message = "KKT factorization failed";
      break;
    }
    const Eigen::VectorXd lambda = scaling.apply(z);
    const double mu = s.dot(z) / deg;
    const Eigen::VectorXd lsq = jordan_product(lambda, lambda, cones);

    auto newton = [&](const Eigen::VectorXd& rc, Eigen::VectorXd& dx, Eigen::VectorXd& dy, Eigen::VectorXd& dz,
                      Eigen::VectorXd& ds) {
      const Eigen::VectorXd wu = scaling.apply(jordan_divide(lambda, rc, cones));
      Eigen::VectorXd b(n + p + m);
      b << -r.rx, -r.ry, -r.rz - wu;
      const Eigen::VectorXd d = kkt.solve(b);
      dx = d.head(n);
      dy = d.segment(n, p);
      dz = d.tail(m);
      ds = wu - scaling.apply(scaling.apply(dz));
    };

    Eigen::VectorXd dxa, dya, dza, dsa;
    newton(-lsq, dxa, dya, dza, dsa);
    const double alpha_aff = std::min({1.0, max_step(s, dsa, cones), max_step(z, dza, cones)});
    const double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);

    const Eigen::VectorXd dst = scaling.apply_inverse(dsa);
    const Eigen::VectorXd dzt = scaling.apply(dza);
    const Eigen::VectorXd rc = -lsq - jordan_product(dst, dzt, cones) + sigma * mu * e;
    Eigen::VectorXd dx, dy, dz, ds;
    newton(rc, dx, dy, dz, ds);
    double alpha = std::min(1.0, 0.99 * std::min(max_step(s, ds, cones), max_step(z, dz, cones)));
    NtScaling probe;
    while (alpha > 1e-10 && !probe.compute(s + alpha * ds, z + alpha * dz, cones)) alpha *= 0.5;
    if (!(alpha > 1e-10)) {
      ++small_steps;
      if (!(alpha > 0.0)) break;
    } else {
      small_steps = 0;
    }
    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
  }

  out.iterations = iter;
  if (out.status != SolveStatus::kOptimal) {
    // Accept the best iterate at reduced accuracy.
    if (best_res.pres <= 1e-6 && best_res.dres <= 1e-6 && (best_res.relgap <= 1e-6 || best_res.gap <= 1e-6)) {
      out.status = SolveStatus::kOptimal;
      out.message = "reduced accuracy";
    } else {
      out.status = iter >= options.max_iterations ? SolveStatus::kIterationLimit : SolveStatus::kNumericFailure;
      if (out.message.empty()) out.message = "interior-point method did not converge";
    }
    x = bx;
    y = by;
    z = bz;
    s = bs;
  }
  const Residuals r = residuals(f, x, y, z, s);
  out.x = x;
  out.y = y;
  out.z = z;
  out.s = s;
  out.primal_objective = r.pcost;
  out.primal_residual = r.pres;
  out.dual_residual = r.dres;
  out.gap = r.gap;
  return out;
}

}  // namespace vaopf::conic::detail
