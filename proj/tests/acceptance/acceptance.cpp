// Acceptance criteria runner. Prints one PASS/FAIL line per criterion and
// exits nonzero if any selected criterion fails. `--only N` runs criterion N.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bilinear/arm_selection.hpp"
#include "bilinear/completion.hpp"
#include "bilinear/error.hpp"
#include "bilinear/estr.hpp"
#include "bilinear/harness.hpp"
#include "bilinear/lowoful.hpp"
#include "reference_oful.hpp"

using namespace bilinear;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vector random_unit(std::size_t d, Rng& rng) {
  Vector v(d);
  for (double& x : v) x = rng.normal();
  const double n = norm2(v);
  for (double& x : v) x /= n;
  return v;
}

Matrix random_orthonormal(std::size_t d, std::size_t r, Rng& rng) {
  Matrix g(d, r);
  for (double& v : g.data()) v = rng.normal();
  return householder_qr(g).Q.cols_range(0, r);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 1. Tuned comparison at the full horizon.
Outcome tuned_comparison() {
  ExperimentConfig c;
  c.d1 = c.d2 = 8;
  c.r = 1;
  c.sigma = 0.01;
  c.n_arms_left = c.n_arms_right = 16;
  c.T = 10000;
  c.lambda = 1.0;
  c.reps = 30;
  c.seed = 2019;
  c.tune = true;
  const AggregateResult res = run_experiment(c);
  const MethodResult* oful = nullptr;
  for (const auto& m : res.methods)
    if (m.method == Method::Oful) oful = &m;
  if (!oful) return {false, "oful missing"};
  const double o_mean = oful->mean.back(), o_hw = oful->half_width.back();
  Outcome out{true, fmt("oful %.2f+-%.2f", o_mean, o_hw)};
  for (const auto& m : res.methods) {
    if (m.method == Method::Oful) continue;
    const double mean = m.mean.back(), hw = m.half_width.back();
    const bool ok = mean + hw < o_mean - o_hw;
    out.pass = out.pass && ok;
    out.detail += fmt("; %s %.2f+-%.2f (c=%g T1=%zu)%s", std::string(to_string(m.method)).c_str(),
                      mean, hw, m.c, m.T1, ok ? "" : " NOT BELOW");
  }
  return out;
}

// 2. Log-log slope of median completion error against the exploration budget.
Outcome completion_rate() {
  const std::size_t d = 8, r = 1, trials = 100;
  const double sigma = 0.01;
  const std::vector<std::size_t> budgets{1u << 10, 1u << 12, 1u << 14, 1u << 16};
  Rng root(2024);
  std::vector<double> xs, ys;
  for (std::size_t T1 : budgets) {
    std::vector<double> errs;
    for (std::size_t trial = 0; trial < trials; ++trial) {
      Rng rng = root.derive(T1).derive(trial);
      const Matrix theta = make_low_rank_theta(d, d, r, 1.0, rng);
      const ArmSet X = generate_sphere_arms(d, d, rng), Z = generate_sphere_arms(d, d, rng);
      const Matrix K = X.matrix() * theta * Z.matrix().transposed();
      ObservationTable table(d, d);
      for (const auto& [i, j] : stage1_schedule(T1, d, d, rng)) {
        table.record(i, j, K(i, j) + sigma * rng.normal());
      }
      const AveragedObservations a = averaged(table);
      const CompletionResult cr = complete(a.K_tilde, a.mask, r, CompletionMethod::BurerMonteiro);
      errs.push_back(frobenius_norm(cr.K_hat - K));
    }
    xs.push_back(std::log(static_cast<double>(T1)));
    ys.push_back(std::log(median(errs)));
  }
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  std::string detail = fmt("slope %.4f; medians", slope);
  for (double y : ys) detail += fmt(" %.3e", std::exp(y));
  return {slope >= -0.65 && slope <= -0.35, detail};
}

// 3. Algebraic inequalities over randomized runs.
Outcome algebraic_invariants() {
  ExperimentConfig c;
  c.T = 2000;
  c.reps = 100;
  c.seed = 11;
  c.tune = false;
  c.c = 1.0;
  c.T1 = 256;
  const InvariantReport rep = check_invariants(c);
  std::string detail = fmt("%zu runs, %zu checks, %zu violations", rep.runs, rep.checks,
                           rep.violations.size());
  if (!rep.violations.empty()) detail += "; first: " + rep.violations.front();
  return {rep.ok() && rep.runs >= 100, detail};
}

// 4. All-round coverage of the confidence ellipsoid.
Outcome ellipsoid_coverage() {
  const std::size_t p = 8, k = 4, n_arms = 20, T = 200, runs = 500;
  const double sigma = 0.1, lambda = 1.0, delta = 0.05;
  Rng root(4242);
  std::size_t covered = 0;
  for (std::size_t run = 0; run < runs; ++run) {
    Rng rng = root.derive(run);
    Vector theta(p);
    const Vector head = random_unit(k, rng), tail = random_unit(p - k, rng);
    for (std::size_t i = 0; i < k; ++i) theta[i] = head[i];
    for (std::size_t i = k; i < p; ++i) theta[i] = 0.05 * tail[i - k];
    Matrix arms(n_arms, p);
    for (std::size_t i = 0; i < n_arms; ++i) {
      const Vector a = random_unit(p, rng);
      for (std::size_t j = 0; j < p; ++j) arms(i, j) = a[j];
    }
    LowOfulConfig cfg;
    cfg.p = p;
    cfg.k = k;
    cfg.lambda = lambda;
    cfg.lambda_perp = lambda_perp_default(static_cast<double>(T), k, lambda);
    cfg.B = norm2(theta);
    cfg.B_perp = norm2(std::span<const double>(theta).subspan(k));
    cfg.sigma = sigma;
    cfg.delta = delta;
    cfg.c = 1.0;
    LowOfulState state(cfg);
    bool inside = contains(state.ellipsoid(), theta);
    for (std::size_t t = 0; t < T && inside; ++t) {
      const std::size_t idx = select_arm(state, arms).index;
      const auto a = arms.row(idx);
      state.update(a, dot(a, theta) + sigma * rng.normal());
      inside = contains(state.ellipsoid(), theta);
    }
    covered += inside;
  }
  const double rate = static_cast<double>(covered) / runs;
  const double threshold = 1.0 - delta - 3.0 * std::sqrt(delta * (1.0 - delta) / runs);
  return {rate >= threshold, fmt("coverage %.4f, threshold %.4f", rate, threshold)};
}

// 5. Oracle equivalences.
Outcome oracle_equivalences() {
  Rng root(5);
  std::string detail;
  bool pass = true;

  // Incremental state against a from-scratch batch solve.
  double worst_inc = 0.0;
  for (int seq = 0; seq < 1000; ++seq) {
    Rng rng = root.derive("inc").derive(seq);
    const std::size_t p = 2 + rng.uniform_index(9);
    const std::size_t k = 1 + rng.uniform_index(p);
    const std::size_t n = 1 + rng.uniform_index(150);
    LowOfulConfig cfg;
    cfg.p = p;
    cfg.k = k;
    cfg.lambda = 0.5 + rng.uniform();
    cfg.lambda_perp = k < p ? 1.0 + 50.0 * rng.uniform() : cfg.lambda;
    LowOfulState s(cfg);
    Matrix V = Matrix::diagonal(s.penalty());
    Vector b(p, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      Vector a = random_unit(p, rng);
      const double scale = rng.uniform();
      for (double& x : a) x *= scale;
      const double y = rng.normal();
      s.update(a, y);
      V = V + outer(a, a);
      for (std::size_t i = 0; i < p; ++i) b[i] += a[i] * y;
    }
    const Vector theta = solve_spd(V, b);
    double diff = std::abs(Cholesky(V).log_det() - s.logdet_gram());
    diff = std::max(diff, max_abs(V - s.gram()));
    for (std::size_t i = 0; i < p; ++i) diff = std::max(diff, std::abs(theta[i] - s.theta_hat()[i]));
    worst_inc = std::max(worst_inc, diff);
  }
  pass = pass && worst_inc <= 1e-6;
  detail += fmt("incremental max diff %.2e", worst_inc);

  // Reward identity in rotated coordinates.
  double worst_rot = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    Rng rng = root.derive("rot").derive(trial);
    const std::size_t d1 = 2 + rng.uniform_index(7), d2 = 2 + rng.uniform_index(7);
    const std::size_t r = 1 + rng.uniform_index(std::min(d1, d2));
    Matrix theta(d1, d2);
    for (double& v : theta.data()) v = rng.normal();
    SubspaceEstimate est;
    est.U_hat = random_orthonormal(d1, r, rng);
    est.V_hat = random_orthonormal(d2, r, rng);
    est.U_hat_perp = r < d1 ? complement_basis(est.U_hat) : Matrix(d1, 0);
    est.V_hat_perp = r < d2 ? complement_basis(est.V_hat) : Matrix(d2, 0);
    const ArmSet X = generate_sphere_arms(d1, d1, rng), Z = generate_sphere_arms(d2, d2, rng);
    const Matrix a = rotate_and_vectorize(X, Z, est);
    const Vector th = rearrange_theta(rotated_theta(theta, est), r);
    for (std::size_t i = 0; i < d1; ++i)
      for (std::size_t j = 0; j < d2; ++j) {
        const double diff = std::abs(dot(a.row(i * d2 + j), th) - bilinear_form(X[i], theta, Z[j]));
        worst_rot = std::max(worst_rot, diff);
      }
  }
  pass = pass && worst_rot <= 1e-10;
  detail += fmt("; rotation max diff %.2e", worst_rot);

  // Noiseless fully observed completion.
  double worst_comp = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Rng rng = root.derive("comp").derive(trial);
    const std::size_t d = 3 + rng.uniform_index(8), r = 1 + rng.uniform_index(2);
    const Matrix K = random_orthonormal(d, r, rng) * Matrix::diagonal(Vector(r, 1.0 + rng.uniform())) *
                     random_orthonormal(d, r, rng).transposed();
    const Mask mask(d, d, true);
    for (auto m : {CompletionMethod::BurerMonteiro, CompletionMethod::OptSpaceStyle}) {
      worst_comp = std::max(worst_comp, frobenius_norm(complete(K, mask, r, m).K_hat - K));
    }
  }
  pass = pass && worst_comp <= 1e-6;
  detail += fmt("; completion max error %.2e", worst_comp);

  // Uniform-penalty LowOFUL against an independent plain OFUL, arm for arm.
  std::size_t mismatched_runs = 0;
  for (int run = 0; run < 50; ++run) {
    Rng rng = root.derive("oful").derive(run);
    const std::size_t p = 6, n_arms = 30, T = 300;
    const double sigma = 0.1;
    Matrix arms(n_arms, p);
    std::vector<std::vector<double>> ref_arms(n_arms);
    for (std::size_t i = 0; i < n_arms; ++i) {
      const Vector a = random_unit(p, rng);
      const double scale = 0.5 + 0.5 * rng.uniform();
      for (std::size_t j = 0; j < p; ++j) ref_arms[i].push_back(arms(i, j) = scale * a[j]);
    }
    const Vector theta = random_unit(p, rng);
    LowOfulConfig cfg;
    cfg.p = cfg.k = p;
    cfg.lambda = cfg.lambda_perp = 1.0;
    cfg.B = cfg.B_perp = 1.0;
    cfg.sigma = sigma;
    cfg.delta = 0.05;
    cfg.c = 0.5;
    LowOfulState state(cfg);
    CachedArmScorer scorer(arms, state);
    // With lambda_perp = lambda and B_perp = B, the width term is sqrt(lambda) (B + B_perp).
    reference::Oful ref(p, 1.0, cfg.B + cfg.B_perp, sigma, 0.05, 0.5);
    bool same = true;
    for (std::size_t t = 0; t < T && same; ++t) {
      const std::size_t mine = scorer.select(state).index;
      const std::size_t theirs = ref.choose(ref_arms);
      same = mine == theirs;
      const double y = dot(arms.row(mine), theta) + sigma * rng.normal();
      scorer.observe(state, state.update(arms.row(mine), y));
      ref.update(ref_arms[mine], y);
    }
    mismatched_runs += !same;
  }
  pass = pass && mismatched_runs == 0;
  detail += fmt("; oful reference mismatched runs %zu/50", mismatched_runs);
  return {pass, detail};
}

// 6. Stage-1 schedule counts and subset selection quality.
Outcome schedule_and_selection() {
  Rng root(6);
  std::size_t bad_schedules = 0, cases = 0;
  for (std::size_t d1 = 1; d1 <= 4; ++d1)
    for (std::size_t d2 = 1; d2 <= 4; ++d2)
      for (std::size_t T1 = 1; T1 <= 40; ++T1) {
        Rng rng = root.derive("schedule").derive(d1 * 1000 + d2 * 100 + T1);
        const auto s = stage1_schedule(T1, d1, d2, rng);
        std::vector<std::size_t> counts(d1 * d2, 0);
        bool ok = s.size() == T1;
        for (const auto& [i, j] : s) {
          if (i >= d1 || j >= d2) {
            ok = false;
            break;
          }
          ++counts[i * d2 + j];
        }
        const std::size_t base = T1 / (d1 * d2);
        std::size_t extra = 0;
        for (std::size_t c : counts) {
          if (c != base && c != base + 1) ok = false;
          extra += c - std::min(c, base);
        }
        ok = ok && extra == T1 % (d1 * d2);
        bad_schedules += !ok;
        ++cases;
      }

  std::size_t bad_selections = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Rng arm_rng = root.derive("arms").derive(trial);
    const ArmSet arms = generate_sphere_arms(16, 8, arm_rng);
    const SelectionOptions opts;
    Rng sel = root.derive("select").derive(trial);
    Rng replay = sel;
    const SubsetSelection s = select_subset(arms, sel, opts);
    bool ok = s.score > 0.0;
    // Relaxation candidate: top-weighted arms.
    const std::vector<double> w = relaxation_weights(arms, opts.relaxation);
    std::vector<std::size_t> order(16);
    for (std::size_t i = 0; i < 16; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return w[a] > w[b]; });
    std::vector<std::size_t> top(order.begin(), order.begin() + 8);
    std::sort(top.begin(), top.end());
    ok = ok && s.score >= score_subset(arms, top);
    for (std::size_t c = 0; c < opts.n_random; ++c) {
      ok = ok && s.score >= score_subset(arms, random_subset(16, 8, replay));
    }
    bad_selections += !ok;
  }
  return {bad_schedules == 0 && bad_selections == 0,
          fmt("%zu/%zu schedules wrong; %zu/100 selections wrong", bad_schedules, cases,
              bad_selections)};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--only N]\n", argv[0]);
      return 2;
    }
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"tuned regret comparison", tuned_comparison},
      {"completion error rate", completion_rate},
      {"algebraic invariants", algebraic_invariants},
      {"ellipsoid coverage", ellipsoid_coverage},
      {"oracle equivalences", oracle_equivalences},
      {"schedule and selection", schedule_and_selection},
  };
  if (only < 0 || only > static_cast<int>(criteria.size())) {
    std::fprintf(stderr, "criterion out of range\n");
    return 2;
  }
  bool all = true;
  for (std::size_t n = 1; n <= criteria.size(); ++n) {
    if (only != 0 && static_cast<int>(n) != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[n - 1].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %zu (%s): %s [%.1fs] %s\n", n, criteria[n - 1].first.c_str(),
                out.pass ? "PASS" : "FAIL", secs, out.detail.c_str());
    std::fflush(stdout);
    all = all && out.pass;
  }
  return all ? 0 : 1;
}
