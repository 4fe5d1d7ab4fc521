// Acceptance report: one PASS/FAIL line per headline criterion, followed by
// indented per-seed detail. Groups can be selected on the command line so
// ctest can run them as separate entries.
//
// The process exits 0 whenever the report was produced; a criterion that
// fails is reported, never hidden. Exit 2 means the harness itself broke.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "implicit_reward.hpp"
#include "oracles.hpp"
#include "sgcrl/experiments.hpp"
#include "sgcrl/repr.hpp"

namespace {

using namespace sgcrl;

constexpr int kSeeds = 8;

struct Line {
  std::string name;
  bool pass = false;
  std::string summary;
  std::vector<std::string> detail;
};

std::vector<Line> g_lines;

void report(Line line) {
  std::cout << (line.pass ? "PASS" : "FAIL") << "  " << line.name << ": " << line.summary << '\n';
  for (const auto& d : line.detail) std::cout << "      " << d << '\n';
  std::cout.flush();
  g_lines.push_back(std::move(line));
}

std::string fmt(double v, int prec = 3) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

std::string count(int k, int n) { return std::to_string(k) + "/" + std::to_string(n); }

double scalar(const RunArtifact& art, const std::string& key) {
  const auto it = art.manifest.scalars.find(key);
  return it == art.manifest.scalars.end() ? std::nan("") : it->second;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Sweeps are cached by (recipe, overrides) so groups in one process share runs.
std::map<std::string, std::vector<RunArtifact>> g_cache;

const std::vector<RunArtifact>& sweep(const std::string& recipe, const ConfigMap& overrides = {},
                                      std::uint64_t first_seed = 0) {
  std::string key = recipe + "@" + std::to_string(first_seed);
  for (const auto& [k, v] : overrides) key += ";" + k + "=" + v;
  auto it = g_cache.find(key);
  if (it != g_cache.end()) return it->second;
  const ConfigMap cfg = resolve_config(recipe, overrides);
  std::vector<RunArtifact> runs;
  for (int s = 0; s < kSeeds; ++s) runs.push_back(run_recipe(recipe, cfg, first_seed + s));
  std::cerr << "  ran " << key << '\n';
  return g_cache.emplace(key, std::move(runs)).first->second;
}

// ---------------------------------------------------------------- theory

void equilibrium() {
  Line line{"common-component equilibrium (c0 in {0.3, 0.6, 0.9}, N=d=128)"};
  line.pass = true;
  std::vector<std::string> parts;
  for (const char* c : {"0.3", "0.6", "0.9"}) {
    const ConfigMap cfg = resolve_config("theorem3", {{"c", c}, {"record_every", "100"}});
    int decayed = 0, aligned = 0, equal = 0, all = 0;
    for (int s = 0; s < kSeeds; ++s) {
      const auto run = run_theory("theorem3", cfg, s);
      const auto& r = run.report;
      decayed += r.decayed == Verdict::Pass;
      aligned += r.aligned == Verdict::Pass;
      equal += r.equal_projection == Verdict::Pass;
      all += theory_claims_pass("theorem3", r);
      line.detail.push_back(std::string("c0=") + c + " seed " + std::to_string(s) +
                            ": steps " + std::to_string(r.steps) +
                            (r.converged ? "" : " (not converged)") + ", |c| " +
                            fmt(r.terminal.c_max) + ", alignment " +
                            fmt(r.terminal.alignment_min, 4) + ", cross " +
                            fmt(r.terminal.lambda_max) + ", max c spread " +
                            fmt(r.max_c_spread));
    }
    if (all < 7) line.pass = false;
    parts.push_back(std::string("c0=") + c + " all claims " + count(all, kSeeds) + " (|c|<1e-2 " +
                    count(decayed, kSeeds) + ", aligned+cross " + count(aligned, kSeeds) +
                    ", equal c " + count(equal, kSeeds) + ")");
  }
  for (std::size_t i = 0; i < parts.size(); ++i) line.summary += (i ? "; " : "") + parts[i];
  line.summary += "; need >=7/8 each";
  report(line);
}

void alignment() {
  Line line{"positive-pair alignment (K in {1, 2}, N=d=128)"};
  line.pass = true;
  for (const char* k : {"1", "2"}) {
    const ConfigMap cfg = resolve_config("lemma1", {{"k", k}, {"record_every", "100"}});
    int ok = 0;
    for (int s = 0; s < kSeeds; ++s) {
      const auto run = run_theory("lemma1", cfg, s);
      ok += theory_claims_pass("lemma1", run.report);
      const auto& t = run.report.terminal;
      line.detail.push_back(std::string("K=") + k + " seed " + std::to_string(s) + ": alpha " +
                            fmt(t.alpha, 5) + (t.beta ? ", beta " + fmt(*t.beta, 5) : "") +
                            ", steps " + std::to_string(run.report.steps));
    }
    if (ok < 7) line.pass = false;
    line.summary += std::string(line.summary.empty() ? "" : "; ") + "K=" + k + " " +
                    count(ok, kSeeds);
  }
  line.summary += "; need >=7/8 each";
  report(line);
}

void gradient() {
  Line line{"gradient oracle (100 instances, N,d <= 8)"};
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> size(2, 8);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int num_states = size(rng);
    const int dim = size(rng);
    const int n = size(rng);
    const auto table = init_table(num_states, dim, 0.5, 1.0, 100 + trial);
    std::uniform_int_distribution<int> pick(0, num_states - 1);
    TripletBatch b;
    std::vector<int> anchors, futures;
    for (int i = 0; i < n; ++i) {
      b.anchors.push_back(pick(rng));
      b.futures.push_back(pick(rng));
      anchors.push_back(b.anchors.back());
      futures.push_back(b.futures.back());
    }
    oracle::Mat t(num_states, std::vector<double>(dim));
    for (int s = 0; s < num_states; ++s)
      for (int k = 0; k < dim; ++k) t[s][k] = table.vectors()(s, k);
    const Matrix dir = infonce_descent_direction(table, b, UpdateConfig{});
    const auto fd = oracle::infonce_fd_gradient(t, anchors, futures);
    double num = 0.0, den = 0.0;
    for (int s = 0; s < num_states; ++s)
      for (int k = 0; k < dim; ++k) {
        num = std::max(num, std::abs(dir(s, k) + fd[s][k]));
        den = std::max(den, std::abs(fd[s][k]));
      }
    worst = std::max(worst, num / std::max(den, 1e-3));
  }
  line.pass = worst < 1e-4;
  line.summary = "worst relative error " + fmt(worst) + " (need < 1e-4)";
  report(line);
}

void implicit_reward() {
  Line line{"implicit-reward identity (20-state chain, 1e4 rollouts, 20 pairs)"};
  const auto samples = check::implicit_reward_identity(20, 20, 10000, 0.9, 2025);
  int within = 0;
  double worst = 0.0;
  for (const auto& s : samples) {
    const double z = std::abs(s.critic - s.mc_mean) / s.mc_se;
    worst = std::max(worst, z);
    within += z <= 3.0;
    line.detail.push_back("s=" + std::to_string(s.state) + " a=" + std::to_string(s.action) +
                          ": critic " + fmt(s.critic, 6) + ", MC " + fmt(s.mc_mean, 6) + " +- " +
                          fmt(s.mc_se, 2) + " (" + fmt(z, 2) + " SE)");
  }
  line.pass = within == static_cast<int>(samples.size());
  line.summary = count(within, static_cast<int>(samples.size())) +
                 " pairs within 3 SE, worst " + fmt(worst, 3) + " SE";
  report(line);
}

// ---------------------------------------------------------------- environments

void phase_transition() {
  Line line{"phase transition (Hanoi-3 and FourRooms-11)"};
  line.pass = true;
  const std::vector<std::pair<std::string, ConfigMap>> envs = {
      {"hanoi3", {{"env", "hanoi"}, {"disks", "3"}}}, {"fourrooms11", {}}};
  for (const auto& [name, overrides] : envs) {
    const auto& runs = sweep("sgcrl", overrides);
    int majority = 0, pre = 0, fin = 0;
    for (std::size_t s = 0; s < runs.size(); ++s) {
      const double fm = scalar(runs[s], "first_majority_episode");
      const double rp = scalar(runs[s], "pearson_pre");
      const double rf = scalar(runs[s], "pearson_final");
      majority += !std::isnan(fm) && fm <= 5000;
      pre += rp < 0.0;
      fin += rf > 0.0;
      line.detail.push_back(name + " seed " + std::to_string(s) + ": first majority " + fmt(fm) +
                            ", r pre " + fmt(rp) + ", r final " + fmt(rf));
    }
    const int n = static_cast<int>(runs.size());
    if (majority < n || pre < 6 || fin < 6) line.pass = false;
    line.summary += (line.summary.empty() ? "" : "; ") + name + " majority success " +
                    count(majority, n) + ", r<0 pre " + count(pre, n) + ", r>0 final " +
                    count(fin, n);
  }
  line.summary += "; need all seeds, >=6/8, >=6/8";
  report(line);
}

// First-success transitions; a run that never succeeds is censored at its
// total transition count, which understates its cost.
double success_cost(const RunArtifact& art) {
  const double t = scalar(art, "first_success_transitions");
  return std::isnan(t) ? static_cast<double>(art.checkpoints.back().transitions) : t;
}

void ablation() {
  Line line{"scalar-table ablation gap (FourRooms-11)"};
  const auto& vec = sweep("sgcrl");
  const auto& sca = sweep("ablation_scalar");
  std::vector<double> cv, cs, tv, ts;
  for (int s = 0; s < kSeeds; ++s) {
    cv.push_back(success_cost(vec[s]));
    cs.push_back(success_cost(sca[s]));
    tv.push_back(scalar(vec[s], "terminal_rate"));
    ts.push_back(scalar(sca[s], "terminal_rate"));
    line.detail.push_back("seed " + std::to_string(s) + ": first-success transitions vector " +
                          fmt(cv.back(), 6) + ", scalar " + fmt(cs.back(), 6) +
                          "; terminal vector " + fmt(tv.back()) + ", scalar " + fmt(ts.back()));
  }
  const double ratio = median(cs) / median(cv);
  double mean_v = 0.0, mean_s = 0.0;
  for (int s = 0; s < kSeeds; ++s) {
    mean_v += tv[s] / kSeeds;
    mean_s += ts[s] / kSeeds;
  }
  line.pass = ratio >= 10.0 && mean_s < mean_v;
  line.summary = "median transitions ratio " + fmt(ratio) + " (need >= 10), terminal rate scalar " +
                 fmt(mean_s) + " vs vector " + fmt(mean_v) + " (need lower)";
  report(line);
}

void interventions() {
  Line line{"interventions (goal patch attraction, negative-goal safety)"};
  const auto& ctrl = sweep("sgcrl");
  const auto& pin = sweep("sgcrl_pinned_patch");
  const auto& safe = sweep("sgcrl_safety");
  int attract = 0, avoid = 0;
  for (int s = 0; s < kSeeds; ++s) {
    const double c1 = scalar(ctrl[s], "share_room1");
    const double p1 = scalar(pin[s], "share_room1");
    const double s0 = scalar(safe[s], "share_room0");
    const double tc = scalar(ctrl[s], "terminal_rate");
    const double ts = scalar(safe[s], "terminal_rate");
    const bool a = p1 >= 2.0 * c1;
    const bool v = s0 < 0.02 && ts >= 0.8 * tc;
    attract += a;
    avoid += v;
    line.detail.push_back("seed " + std::to_string(s) + ": patch room share " + fmt(p1) +
                          " vs control " + fmt(c1) + "; safety room share " + fmt(s0) +
                          ", terminal " + fmt(ts) + " vs control " + fmt(tc));
  }
  const int need = majority_threshold(kSeeds);
  line.pass = attract >= need && avoid >= need;
  line.summary = "patch room share >= 2x control in " + count(attract, kSeeds) +
                 ", safety share < 2% with terminal >= 0.8x control in " +
                 count(avoid, kSeeds) + " (need " + std::to_string(need) + " each)";
  report(line);
}

void multigoal() {
  Line line{"multi-goal reach (two equal-weight goals, top-right room)"};
  const auto& runs = sweep("sgcrl_multi_goal");
  int ok = 0;
  for (int s = 0; s < kSeeds; ++s) {
    const double r0 = scalar(runs[s], "goal_reach_rate_0");
    const double r1 = scalar(runs[s], "goal_reach_rate_1");
    const bool pass = std::abs(r0 - r1) < 0.2 && r0 > 0.5 && r1 > 0.5;
    ok += pass;
    line.detail.push_back("seed " + std::to_string(s) + ": reach rates " + fmt(r0) + ", " +
                          fmt(r1));
  }
  const int need = majority_threshold(kSeeds);
  line.pass = ok >= need;
  line.summary = "balanced reach above 0.5 in " + count(ok, kSeeds) + " (need " +
                 std::to_string(need) + ")";
  report(line);
}

void data_collection() {
  Line line{"data collection under an imaginary goal (single vs random goal)"};
  const auto& single = sweep("sgcrl_imaginary_goal");
  const auto& random = sweep("sgcrl_random_goal");
  int ok = 0;
  for (int s = 0; s < kSeeds; ++s) {
    const double i0 = scalar(single[s], "sim_visited_initial");
    const double i1 = scalar(single[s], "sim_visited_final");
    const double r1 = scalar(random[s], "sim_visited_final");
    const bool pass = i1 < 0.2 * i0 && r1 >= 2.0 * i1;
    ok += pass;
    line.detail.push_back("seed " + std::to_string(s) + ": single-goal visited similarity " +
                          fmt(i0) + " -> " + fmt(i1) + ", random-goal final " + fmt(r1));
  }
  const int need = majority_threshold(kSeeds);
  line.pass = ok >= need;
  line.summary = "single-goal final < 0.2x initial and random-goal final >= 2x in " +
                 count(ok, kSeeds) + " (need " + std::to_string(need) + ")";
  report(line);
}

void baselines() {
  Line line{"baselines (R-MAX, PSRL, yoked SGCRL)"};
  const auto& rmax = sweep("rmax");
  const auto& psrl = sweep("psrl");
  const auto& ctrl = sweep("sgcrl");
  const auto& yr = sweep("yoked", {{"collector", "rmax"}});
  const auto& yp = sweep("yoked", {{"collector", "psrl"}});
  const auto& ys = sweep("yoked", {{"collector", "sgcrl"}});
  // The SGCRL collector of seed s runs as seed s + offset; its own run is
  // the self-collected reference.
  const auto offset =
      std::stoull(resolve_config("yoked").at("collector_seed_offset"));
  const auto& own = sweep("sgcrl", {}, offset);

  int found_r = 0, found_p = 0, mid_r = 0, mid_p = 0, match = 0;
  for (int s = 0; s < kSeeds; ++s) {
    const double fr = scalar(rmax[s], "first_success_episode");
    const double fp = scalar(psrl[s], "first_success_episode");
    found_r += !std::isnan(fr) && fr <= 2000;
    found_p += !std::isnan(fp) && fp <= 2000;
    const double self = scalar(ctrl[s], "terminal_rate");
    const double tr = scalar(yr[s], "terminal_rate");
    const double tp = scalar(yp[s], "terminal_rate");
    const double ts = scalar(ys[s], "terminal_rate");
    const double to = scalar(own[s], "terminal_rate");
    mid_r += tr > 0.0 && tr < self;
    mid_p += tp > 0.0 && tp < self;
    match += std::abs(ts - to) <= 0.1;
    line.detail.push_back("seed " + std::to_string(s) + ": first success rmax " + fmt(fr) +
                          ", psrl " + fmt(fp) + "; terminal yoked-rmax " + fmt(tr) +
                          ", yoked-psrl " + fmt(tp) + ", self " + fmt(self) +
                          "; yoked-sgcrl " + fmt(ts) + " vs its collector " + fmt(to));
  }
  const int need = majority_threshold(kSeeds);
  line.pass = found_r == kSeeds && found_p == kSeeds && mid_r >= need && mid_p >= need &&
              match >= need;
  line.summary = "first success <= 2000 rmax " + count(found_r, kSeeds) + ", psrl " +
                 count(found_p, kSeeds) + "; 0 < yoked < self rmax " + count(mid_r, kSeeds) +
                 ", psrl " + count(mid_p, kSeeds) + "; yoked-sgcrl within 0.1 " +
                 count(match, kSeeds) + " (need all, all, then " + std::to_string(need) + ")";
  report(line);
}

const std::vector<std::pair<std::string, std::vector<std::function<void()>>>>& groups() {
  static const std::vector<std::pair<std::string, std::vector<std::function<void()>>>> g = {
      {"theory", {equilibrium, alignment}},
      {"oracles", {gradient, implicit_reward}},
      {"phase", {phase_transition}},
      {"ablation", {ablation}},
      {"interventions", {interventions}},
      {"multigoal", {multigoal}},
      {"datacollection", {data_collection}},
      {"baselines", {baselines}},
  };
  return g;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted(argv + 1, argv + argc);
  if (wanted.empty())
    for (const auto& [name, fns] : groups()) wanted.push_back(name);
  try {
    for (const auto& w : wanted) {
      auto it = std::find_if(groups().begin(), groups().end(),
                             [&](const auto& g) { return g.first == w; });
      if (it == groups().end()) {
        std::cerr << "unknown group '" << w << "'; groups:";
        for (const auto& g : groups()) std::cerr << ' ' << g.first;
        std::cerr << '\n';
        return 2;
      }
      for (const auto& fn : it->second) fn();
    }
  } catch (const std::exception& e) {
    std::cerr << "acceptance harness error: " << e.what() << '\n';
    return 2;
  }
  int passed = 0;
  for (const auto& l : g_lines) passed += l.pass;
  std::cout << "acceptance: " << passed << "/" << g_lines.size() << " criteria passed\n";
  return 0;
}
