#include "sgcrl/theory.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "sgcrl/io_util.hpp"

namespace sgcrl {

namespace {

Vector random_unit(int d, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(d);
  for (int k = 0; k < d; ++k) v[k] = gauss(rng);
  return v / v.norm();
}

// Gaussian rows projected off z, scaled to `norm`.
Matrix residual_rows(int n, int d, const Vector& z, double norm, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix rows(n, d);
  for (int i = 0; i < n; ++i) {
    Vector v(d);
    for (int k = 0; k < d; ++k) v[k] = gauss(rng);
    v -= v.dot(z) * z;
    rows.row(i) = (norm / v.norm()) * v.transpose();
  }
  return rows;
}

Matrix gather_anchors(const DynamicsState& st) {
  Matrix out(st.num_pairs(), st.dim());
  for (int i = 0; i < st.num_pairs(); ++i) out.row(i) = st.U.row(st.anchor_of[i]);
  return out;
}

void normalize_rows(Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("degenerate row in dynamics");
    m.row(i) /= n;
  }
}

}  // namespace

DynamicsState init_theorem3(int n, int d, double c, std::uint64_t seed) {
  if (!(std::abs(c) < 1.0)) throw ConfigError("|c| must be < 1");
  if (n < 2 || d < 2) throw ConfigError("need at least two pairs and two dimensions");
  Rng rng = make_rng(seed, 0x7e03);
  DynamicsState st;
  st.z = random_unit(d, rng);
  const double rn = std::sqrt(1.0 - c * c);
  st.U = residual_rows(n, d, st.z, rn, rng);
  st.V = residual_rows(n, d, st.z, rn, rng);
  st.U.rowwise() += c * st.z.transpose();
  st.V.rowwise() += c * st.z.transpose();
  st.anchor_of.resize(n);
  for (int i = 0; i < n; ++i) st.anchor_of[i] = i;
  return st;
}

DynamicsState init_lemma1(int n, int d, int k, std::uint64_t seed) {
  if (k != 1 && k != 2) throw ConfigError("positives per anchor must be 1 or 2");
  if (n < 2 || d < 2) throw ConfigError("need at least two pairs and two dimensions");
  if (n % k != 0) throw ConfigError("pair count must be a multiple of the bundle size");
  Rng rng = make_rng(seed, 0x1e1);
  DynamicsState st;
  st.bundle = k;
  st.z = random_unit(d, rng);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto gaussian_rows = [&](int rows) {
    Matrix m(rows, d);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = gauss(rng);
    normalize_rows(m);
    return m;
  };
  st.U = gaussian_rows(n / k);
  st.V = gaussian_rows(n);
  st.anchor_of.resize(n);
  for (int i = 0; i < n; ++i) st.anchor_of[i] = i / k;
  return st;
}

DynamicsStats compute_stats(const DynamicsState& st) {
  DynamicsStats s;
  s.step = st.step;
  const Vector cu = st.U * st.z;
  const Vector cv = st.V * st.z;
  const double lo = std::min(cu.minCoeff(), cv.minCoeff());
  const double hi = std::max(cu.maxCoeff(), cv.maxCoeff());
  s.c_mean = (cu.sum() + cv.sum()) / static_cast<double>(cu.size() + cv.size());
  s.c_max = std::max(cu.cwiseAbs().maxCoeff(), cv.cwiseAbs().maxCoeff());
  s.c_spread = hi - lo;

  // Residuals: rows with their z component removed.
  const Matrix ru = st.U - cu * st.z.transpose();
  const Matrix rv = st.V - cv * st.z.transpose();
  const Matrix cross = ru * rv.transpose();  // anchors x futures
  const Matrix full = st.U * st.V.transpose();

  const int n = st.num_pairs();
  double alpha = 0.0, align = 0.0, align_min = 1.0, lambda = 0.0, lambda_res = 0.0;
  for (int i = 0; i < n; ++i) {
    alpha += cross(st.anchor_of[i], i);
    const double a = full(st.anchor_of[i], i);
    align += a;
    align_min = std::min(align_min, a);
  }
  for (Eigen::Index a = 0; a < cross.rows(); ++a)
    for (int j = 0; j < n; ++j)
      if (st.anchor_of[j] != a) {
        lambda = std::max(lambda, std::abs(full(a, j)));
        lambda_res = std::max(lambda_res, std::abs(cross(a, j)));
      }
  s.alpha = alpha / n;
  s.alignment = align / n;
  s.alignment_min = align_min;
  s.lambda_max = lambda;
  s.lambda_residual_max = lambda_res;
  s.r = (ru.rowwise().squaredNorm().sum() + rv.rowwise().squaredNorm().sum()) /
        static_cast<double>(ru.rows() + rv.rows());

  if (st.bundle == 2) {
    double beta = 0.0;
    int pairs = 0;
    for (int i = 0; i + 1 < n; i += 2) {
      beta += rv.row(i).dot(rv.row(i + 1));
      ++pairs;
    }
    s.beta = beta / pairs;
  }

  double dev = 0.0;
  for (Eigen::Index i = 0; i < st.U.rows(); ++i) dev = std::max(dev, std::abs(st.U.row(i).norm() - 1.0));
  for (Eigen::Index i = 0; i < st.V.rows(); ++i) dev = std::max(dev, std::abs(st.V.row(i).norm() - 1.0));
  s.max_norm_deviation = dev;
  return s;
}

void DynamicsConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (!(tol > 0.0)) throw ConfigError("tol must be > 0");
  if (record_every < 1) throw ConfigError("record_every must be >= 1");
}

double dynamics_step(DynamicsState& st, double learning_rate, LossDirection direction) {
  const Matrix a = gather_anchors(st);
  Matrix residual = -prob_matrix(a, st.V, direction);
  residual.diagonal().array() += 1.0;

  Matrix new_v = st.V + learning_rate * (residual.transpose() * a);
  const Matrix slot_grad = residual * st.V;
  Matrix new_u = st.U;
  for (int i = 0; i < st.num_pairs(); ++i)
    new_u.row(st.anchor_of[i]) += learning_rate * slot_grad.row(i);
  normalize_rows(new_u);
  normalize_rows(new_v);

  const double move = std::max((new_u - st.U).rowwise().norm().maxCoeff(),
                               (new_v - st.V).rowwise().norm().maxCoeff());
  if (!std::isfinite(move)) throw NumericalError("non-finite dynamics update");
  st.U = std::move(new_u);
  st.V = std::move(new_v);
  ++st.step;
  return move;
}

namespace {

double projection_spread(const DynamicsState& st) {
  const Vector cu = st.U * st.z;
  const Vector cv = st.V * st.z;
  return std::max(cu.maxCoeff(), cv.maxCoeff()) - std::min(cu.minCoeff(), cv.minCoeff());
}

}  // namespace

DynamicsRun run_dynamics(DynamicsState& state, const DynamicsConfig& cfg) {
  cfg.validate();
  DynamicsRun run;
  run.series.push_back(compute_stats(state));
  run.max_c_spread = run.series.back().c_spread;
  for (long t = 1; t <= cfg.max_steps; ++t) {
    const double move = dynamics_step(state, cfg.learning_rate, cfg.direction);
    run.max_c_spread = std::max(run.max_c_spread, projection_spread(state));
    run.converged = move < cfg.tol;
    if (run.converged || t == cfg.max_steps || t % cfg.record_every == 0)
      run.series.push_back(compute_stats(state));
    if (run.converged) break;
  }
  return run;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass:
      return "pass";
    case Verdict::Fail:
      return "fail";
    case Verdict::NotConverged:
      return "not-converged";
  }
  return "?";
}

EquilibriumReport equilibrium_report(const DynamicsRun& run, const EquilibriumTolerances& tol) {
  if (run.series.empty()) throw ConfigError("dynamics series is empty");
  EquilibriumReport rep;
  rep.terminal = run.series.back();
  rep.steps = rep.terminal.step;
  rep.converged = run.converged;
  rep.max_c_spread = run.max_c_spread;
  for (const auto& s : run.series) rep.max_c_spread = std::max(rep.max_c_spread, s.c_spread);
  const bool has_beta = rep.terminal.beta.has_value();
  if (has_beta) rep.lemma_beta = Verdict::NotConverged;
  if (rep.steps == 0) return rep;

  auto verdict = [](bool ok) { return ok ? Verdict::Pass : Verdict::Fail; };
  const auto& t = rep.terminal;
  rep.equal_projection = verdict(rep.max_c_spread < tol.c_equal);
  rep.aligned = verdict(t.alignment_min > tol.alignment && t.lambda_max < tol.cross);
  rep.decayed = verdict(t.c_max < tol.c_terminal);
  rep.lemma_alpha = verdict(t.alpha > tol.alpha);
  if (has_beta) rep.lemma_beta = verdict(*t.beta > tol.beta);
  return rep;
}

void write_dynamics(const DynamicsRun& run, const EquilibriumReport& report,
                    const std::map<std::string, std::string>& params, const std::string& stem) {
  std::string csv = "step,c_mean,c_max,alpha,beta,lambda_max,r,alignment\n";
  for (const auto& s : run.series) {
    csv += std::to_string(s.step);
    for (double x : {s.c_mean, s.c_max, s.alpha, s.beta.value_or(std::nan("")), s.lambda_max,
                     s.r, s.alignment}) {
      csv += ',';
      csv += io::format_double(x);
    }
    csv += '\n';
  }
  io::write_file(stem + ".csv", csv);

  nlohmann::json j;
  j["params"] = params;
  j["steps"] = report.steps;
  j["converged"] = report.converged;
  j["max_c_spread"] = report.max_c_spread;
  j["terminal"] = {{"c_max", report.terminal.c_max},
                   {"alpha", report.terminal.alpha},
                   {"lambda_max", report.terminal.lambda_max},
                   {"lambda_residual_max", report.terminal.lambda_residual_max},
                   {"alignment", report.terminal.alignment},
                   {"alignment_min", report.terminal.alignment_min}};
  if (report.terminal.beta) j["terminal"]["beta"] = *report.terminal.beta;
  j["claims"] = {{"equal_projection", verdict_name(report.equal_projection)},
                 {"aligned", verdict_name(report.aligned)},
                 {"decayed", verdict_name(report.decayed)},
                 {"lemma_alpha", verdict_name(report.lemma_alpha)}};
  if (report.lemma_beta) j["claims"]["lemma_beta"] = verdict_name(*report.lemma_beta);
  io::write_file(stem + ".json", j.dump(2) + "\n");
}

}  // namespace sgcrl
