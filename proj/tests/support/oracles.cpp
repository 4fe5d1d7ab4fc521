#include "oracles.hpp"

#include <cmath>
#include <string>

namespace oracle {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

double infonce_loss(const Mat& table, const std::vector<int>& anchors,
                    const std::vector<int>& futures) {
  const std::size_t n = anchors.size();
  double loss = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k) denom += std::exp(dot(table[anchors[k]], table[futures[j]]));
    loss -= dot(table[anchors[j]], table[futures[j]]) - std::log(denom);
  }
  return loss;
}

Mat infonce_fd_gradient(const Mat& table, const std::vector<int>& anchors,
                        const std::vector<int>& futures, double h) {
  Mat grad(table.size(), std::vector<double>(table[0].size(), 0.0));
  Mat work = table;
  for (std::size_t r = 0; r < table.size(); ++r)
    for (std::size_t c = 0; c < table[r].size(); ++c) {
      work[r][c] = table[r][c] + h;
      const double up = infonce_loss(work, anchors, futures);
      work[r][c] = table[r][c] - h;
      const double down = infonce_loss(work, anchors, futures);
      work[r][c] = table[r][c];
      grad[r][c] = (up - down) / (2.0 * h);
    }
  return grad;
}

double scalar_loss(const Mat& logits, const std::vector<int>& anchors,
                   const std::vector<int>& futures) {
  const std::size_t n = anchors.size();
  double loss = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k) denom += std::exp(logits[anchors[k]][futures[j]]);
    loss -= logits[anchors[j]][futures[j]] - std::log(denom);
  }
  return loss;
}

Mat scalar_fd_gradient(const Mat& logits, const std::vector<int>& anchors,
                       const std::vector<int>& futures, double h) {
  Mat grad(logits.size(), std::vector<double>(logits[0].size(), 0.0));
  Mat work = logits;
  for (std::size_t r = 0; r < logits.size(); ++r)
    for (std::size_t c = 0; c < logits[r].size(); ++c) {
      work[r][c] = logits[r][c] + h;
      const double up = scalar_loss(work, anchors, futures);
      work[r][c] = logits[r][c] - h;
      const double down = scalar_loss(work, anchors, futures);
      work[r][c] = logits[r][c];
      grad[r][c] = (up - down) / (2.0 * h);
    }
  return grad;
}

Mat prob_matrix(const Mat& anchors, const Mat& futures) {
  const std::size_t n = anchors.size();
  Mat p(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k) denom += std::exp(dot(anchors[k], futures[j]));
    for (std::size_t i = 0; i < n; ++i) p[i][j] = std::exp(dot(anchors[i], futures[j])) / denom;
  }
  return p;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> brute_force_values(const std::vector<std::vector<int>>& next,
                                       const std::vector<std::vector<double>>& reward,
                                       double gamma) {
  const std::size_t S = next.size();
  const std::size_t A = next[0].size();
  std::vector<double> best(S, -1e300);
  std::vector<std::size_t> policy(S, 0);
  while (true) {
    // Deterministic policy + deterministic dynamics: the value is a discounted
    // sum along a path that eventually cycles; unroll far enough.
    for (std::size_t s0 = 0; s0 < S; ++s0) {
      double v = 0.0, disc = 1.0;
      std::size_t s = s0;
      for (int t = 0; t < 5000; ++t) {
        v += disc * reward[s][policy[s]];
        disc *= gamma;
        s = static_cast<std::size_t>(next[s][policy[s]]);
      }
      best[s0] = std::max(best[s0], v);
    }
    std::size_t i = 0;
    while (i < S && ++policy[i] == A) policy[i++] = 0;
    if (i == S) break;
  }
  return best;
}

int fourrooms11_free_cells() {
  const char* rows[] = {
      ".....#.....",  //
      ".....#.....",  //
      "...........",  // doorway (2, 5)
      ".....#.....",  //
      ".....#.....",  //
      "##.#####.##",  // doorways (5, 2) and (5, 8)
      ".....#.....",  //
      ".....#.....",  //
      "...........",  // doorway (8, 5)
      ".....#.....",  //
      ".....#.....",  //
  };
  int free = 0;
  for (const char* r : rows)
    for (const char* c = r; *c; ++c)
      if (*c == '.') ++free;
  return free;
}

double chi_square(const std::vector<double>& observed, const std::vector<double>& expected) {
  double x = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double d = observed[i] - expected[i];
    x += d * d / expected[i];
  }
  return x;
}

}  // namespace oracle
