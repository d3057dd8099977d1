#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <sstream>

#include "vaopf/stochastic.hpp"

namespace vaopf {

double ParticipationMatrix::at(int participant_bus, int source_bus) const {
  int r = -1, c = -1;
  for (std::size_t k = 0; k < participants.size(); ++k)
    if (participants[k] == participant_bus) r = static_cast<int>(k);
  for (std::size_t k = 0; k < sources.size(); ++k)
    if (sources[k] == source_bus) c = static_cast<int>(k);
  return r < 0 || c < 0 ? 0.0 : alpha(r, c);
}

Eigen::VectorXd ParticipationMatrix::row_for_bus(int bus) const {
  for (std::size_t k = 0; k < participants.size(); ++k)
    if (participants[k] == bus) return alpha.row(static_cast<int>(k)).transpose();
  return Eigen::VectorXd::Zero(static_cast<int>(sources.size()));
}

Eigen::MatrixXd ParticipationMatrix::dense(int num_buses) const {
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(num_buses, num_buses);
  for (std::size_t r = 0; r < participants.size(); ++r)
    for (std::size_t c = 0; c < sources.size(); ++c)
      full(participants[r], sources[c]) = alpha(static_cast<int>(r), static_cast<int>(c));
  return full;
}

ParticipationMatrix ParticipationMatrix::uniform(const StochasticModel& model) {
  ParticipationMatrix a = zeros(model);
  if (model.num_participants() > 0) a.alpha.setConstant(1.0 / model.num_participants());
  return a;
}

ParticipationMatrix ParticipationMatrix::zeros(const StochasticModel& model) {
  return {model.participants, model.sources, Eigen::MatrixXd::Zero(model.num_participants(), model.num_sources())};
}

ParticipationMatrix blend(const ParticipationMatrix& a, const ParticipationMatrix& b, double t) {
  if (a.participants != b.participants || a.sources != b.sources)
    throw std::invalid_argument("participation matrices have different patterns");
  return {a.participants, a.sources, (1.0 - t) * a.alpha + t * b.alpha};
}

ParticipationReport validate_participation(const ParticipationMatrix& A, const PatternK& pattern, double tol) {
  ParticipationReport rep;
  auto flag = [&rep](std::string msg) { rep.violations.push_back(std::move(msg)); };
  const int r = static_cast<int>(A.participants.size());
  const int s = static_cast<int>(A.sources.size());
  if (A.alpha.rows() != r || A.alpha.cols() != s) {
    flag("entries do not match the R x S pattern");
    rep.ok = false;
    return rep;
  }
  for (int j = 0; j < s; ++j) {
    const double sum = A.alpha.col(j).sum();
    if (std::abs(sum - 1.0) > tol) {
      std::ostringstream msg;
      msg << "column sum " << sum << " for source bus " << A.sources[j];
      flag(msg.str());
    }
  }
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < s; ++j) {
      const double a = A.alpha(i, j);
      std::ostringstream where;
      where << " at (" << A.participants[i] << ", " << A.sources[j] << ")";
      if (pattern.nonnegative && a < -tol) flag("negative entry" + where.str());
      if (pattern.lower && a < *pattern.lower - tol) flag("entry below lower bound" + where.str());
      if (pattern.upper && a > *pattern.upper + tol) flag("entry above upper bound" + where.str());
    }
  if (pattern.policy == ParticipationPolicy::kGlobal)
    for (int i = 0; i < r; ++i)
      for (int j = 1; j < s; ++j)
        if (std::abs(A.alpha(i, j) - A.alpha(i, 0)) > tol) {
          flag("global policy broken at participant bus " + std::to_string(A.participants[i]));
          break;
        }
  rep.ok = rep.violations.empty();
  return rep;
}

GammaMatrices gamma_matrix(const SusceptanceSystem& sys, const ParticipationMatrix& A) {
  const int n = sys.size();
  const int m = sys.num_lines();
  const int s = static_cast<int>(A.sources.size());
  GammaMatrices out{Eigen::MatrixXd::Zero(n, s), Eigen::MatrixXd::Zero(m, s)};
  for (int k = 0; k < s; ++k) {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < A.participants.size(); ++i) col[A.participants[i]] = A.alpha(static_cast<int>(i), k);
    out.D.col(k) = sys.solve(col);
    const Eigen::VectorXd breve_src = sys.breve_row(A.sources[k]);
    for (int l = 0; l < m; ++l) {
      const auto& ln = sys.lines()[l];
      out.gamma(l, k) = breve_src[ln.from_bus] - breve_src[ln.to_bus] - out.D(ln.from_bus, k) + out.D(ln.to_bus, k);
    }
  }
  return out;
}

Eigen::VectorXd line_variances(const SusceptanceSystem& sys, const ParticipationMatrix& A, const Eigen::MatrixXd& omega,
                               VarianceMethod method) {
  const int m = sys.num_lines();
  Eigen::VectorXd v(m);
  if (method == VarianceMethod::kGammaForm) {
    const GammaMatrices g = gamma_matrix(sys, A);
    for (int l = 0; l < m; ++l) {
      const double b = sys.lines()[l].susceptance();
      v[l] = b * b * g.gamma.row(l).dot(omega * g.gamma.row(l).transpose());
    }
  } else {
    const int n = sys.size();
    const Eigen::MatrixXd Af = A.dense(n);
    Eigen::MatrixXd Of = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < A.sources.size(); ++i)
      for (std::size_t j = 0; j < A.sources.size(); ++j)
        Of(A.sources[i], A.sources[j]) = omega(static_cast<int>(i), static_cast<int>(j));
    const Eigen::MatrixXd IA = Eigen::MatrixXd::Identity(n, n) - Af;
    for (int l = 0; l < m; ++l) {
      const double b = sys.lines()[l].susceptance();
      const Eigen::VectorXd pi = sys.line_factor(l);
      v[l] = b * b * pi.dot(IA * Of * IA.transpose() * pi);
    }
  }
  const double scale = 1.0 + omega.cwiseAbs().maxCoeff();
  for (int l = 0; l < m; ++l) {
    if (v[l] < -1e-9 * scale) throw VarianceError("negative variance " + std::to_string(v[l]) + " on line " + std::to_string(l));
    v[l] = std::max(v[l], 0.0);
  }
  return v;
}

GenerationStats generation_stats(const Eigen::VectorXd& alpha_row, const Eigen::MatrixXd& omega, const Generator& gen,
                                 double p_bar) {
  GenerationStats st;
  st.variance = alpha_row.size() ? std::max(alpha_row.dot(omega * alpha_row), 0.0) : 0.0;
  st.expected_cost = gen.cost_c0 * (p_bar * p_bar + st.variance) + gen.cost_c1 * p_bar + gen.cost_c2;
  return st;
}

double nu_from_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::domain_error("epsilon must lie in (0, 1)");
  // quantile of the complement keeps full accuracy in the far tail
  return boost::math::quantile(boost::math::complement(boost::math::normal_distribution<double>(), epsilon));
}

}  // namespace vaopf
