#include "sgcrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sgcrl {

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ConfigError("pearson: length mismatch");
  if (x.size() < 2) throw ConfigError("pearson: need at least two samples");
  // Checked exactly: a rounded mean leaves constant inputs with nonzero spread.
  auto constant = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
  };
  if (constant(x) || constant(y)) return std::nullopt;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationRecord visitation_similarity_correlation(const std::vector<long>& visitation,
                                                    const std::vector<double>& psi_sim,
                                                    bool exclude_unvisited) {
  if (visitation.size() != psi_sim.size())
    throw ConfigError("visitation and psi_sim differ in length");
  std::vector<double> x, y;
  for (std::size_t s = 0; s < visitation.size(); ++s) {
    if (exclude_unvisited && visitation[s] == 0) continue;
    x.push_back(static_cast<double>(visitation[s]));
    y.push_back(psi_sim[s]);
  }
  CorrelationRecord rec;
  rec.n_states = static_cast<int>(x.size());
  if (x.size() >= 2) rec.pearson_r = pearson(x, y);
  return rec;
}

double coverage(const std::vector<long>& visitation, int num_states) {
  if (num_states <= 0) return 0.0;
  const auto visited = std::count_if(visitation.begin(), visitation.end(),
                                     [](long c) { return c > 0; });
  return static_cast<double>(visited) / num_states;
}

int majority_threshold(int n) { return n / 2 + 1; }

std::vector<const Checkpoint*> terminal_window(const RunArtifact& artifact, double fraction) {
  std::vector<const Checkpoint*> out;
  const auto& cps = artifact.checkpoints;
  if (cps.empty()) return out;
  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(cps.size()))));
  for (std::size_t i = cps.size() - std::min(count, cps.size()); i < cps.size(); ++i)
    out.push_back(&cps[i]);
  return out;
}

SuccessSummary success_summary(const RunArtifact& artifact) {
  SuccessSummary summary;
  for (const auto& cp : artifact.checkpoints) {
    if (cp.eval_success_n == 0) continue;
    if (!summary.first_success && cp.eval_success_k >= 1) summary.first_success = cp.episode;
    if (!summary.first_majority_success &&
        cp.eval_success_k >= majority_threshold(cp.eval_success_n))
      summary.first_majority_success = cp.episode;
  }
  long k = 0, n = 0;
  for (const Checkpoint* cp : terminal_window(artifact)) {
    k += cp->eval_success_k;
    n += cp->eval_success_n;
  }
  summary.terminal_rate = n > 0 ? static_cast<double>(k) / static_cast<double>(n) : 0.0;
  return summary;
}

std::vector<CorrelationRecord> correlation_series(const RunArtifact& artifact, VisitWindow window,
                                                  bool exclude_unvisited) {
  std::vector<CorrelationRecord> out;
  const std::vector<long>* prev = nullptr;
  for (const auto& cp : artifact.checkpoints) {
    std::vector<long> visits = cp.visitation;
    if (window == VisitWindow::PerCheckpoint && prev) {
      if (prev->size() != visits.size()) throw ConfigError("checkpoints differ in state count");
      for (std::size_t s = 0; s < visits.size(); ++s) visits[s] -= (*prev)[s];
    }
    prev = &cp.visitation;
    auto rec = visitation_similarity_correlation(visits, cp.psi_sim, exclude_unvisited);
    rec.episode = cp.episode;
    out.push_back(rec);
  }
  return out;
}

double visitation_share(const std::vector<long>& visitation, const std::vector<StateId>& states) {
  const double total = static_cast<double>(std::accumulate(visitation.begin(), visitation.end(), 0L));
  if (total <= 0.0) return 0.0;
  double in = 0.0;
  for (StateId s : states) in += static_cast<double>(visitation.at(s));
  return in / total;
}

std::optional<double> mean_similarity_of_visited(const Checkpoint& cp) {
  double sum = 0.0;
  int n = 0;
  for (std::size_t s = 0; s < cp.visitation.size(); ++s) {
    if (cp.visitation[s] > 0) {
      sum += cp.psi_sim[s];
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

MeanSe mean_se(const std::vector<double>& values) {
  MeanSe out;
  out.n = static_cast<int>(values.size());
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / out.n;
  if (out.n < 2) return out;
  double ss = 0.0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.se = std::sqrt(ss / (out.n - 1)) / std::sqrt(static_cast<double>(out.n));
  return out;
}

}  // namespace sgcrl
