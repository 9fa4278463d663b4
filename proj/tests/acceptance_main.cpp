// Acceptance gate: each criterion prints exactly one [PASS]/[FAIL] line.
// Run all criteria, or a single one with `--only N`.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "kda/kda.hpp"

using namespace kda;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

struct Criterion {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& why) {
    if (!cond && ok) {
      ok = false;
      detail = why;
    }
  }
  void note(const std::string& text) {
    if (ok) detail = text;
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// --------------------------------------------------------------------------
// 1. Scatter identities across many random datasets and all kernels.

Criterion criterion_scatter() {
  Criterion c;
  Timer timer;
  const KernelSpec kernels[] = {
      {KernelKind::linear, 1.0, 3, 1.0},
      {KernelKind::polynomial, 0.5, 3, 1.0},
      {KernelKind::rbf, 0.5, 3, 1.0},
  };
  const int classes[] = {2, 3, 5};
  int datasets = 0;
  double worst_add = 0, worst_psd = 0, worst_factor = 0;
  for (std::uint64_t seed = 1; seed <= 18 && c.ok; ++seed) {
    for (int cls : classes) {
      Index per = Index(6 + (seed % 5) * 6);        // N up to 5*30 = 90 <= 100
      per = std::min<Index>(per, Index(100 / cls));  // keep N <= 100
      per = std::max<Index>(per, 3);
      auto data = gen_gaussians(cls, per, 4, 3.0, seed * 100 + std::uint64_t(cls));
      auto part = build_partition(data.y);
      ++datasets;
      for (const auto& spec : kernels) {
        auto bundle = center_gram(gram_matrix(spec, data.X));
        auto sc = build_scatter_set(bundle, part);
        double scale = sc.S_t.norm();
        worst_add = std::max(worst_add, (sc.S_t - sc.S_b - sc.S_w).norm() / scale);
        for (const Matrix* S : {&sc.S_b, &sc.S_w, &sc.S_t}) {
          Eigen::SelfAdjointEigenSolver<Matrix> eig(*S, Eigen::EigenvaluesOnly);
          double floor = S->norm() > 0 ? -eig.eigenvalues().minCoeff() / S->norm() : 0.0;
          worst_psd = std::max(worst_psd, floor);
        }
        worst_factor = std::max(
            {worst_factor,
             (sc.factors.K_b * sc.factors.K_b.transpose() - sc.S_b).norm() / scale,
             (sc.factors.K_w * sc.factors.K_w.transpose() - sc.S_w).norm() / scale,
             (sc.factors.K_t * sc.factors.K_t.transpose() - sc.S_t).norm() / scale});
      }
    }
  }
  c.require(datasets >= 50, "fewer than 50 datasets exercised");
  c.require(worst_add <= 1e-10, "additivity residual " + fmt(worst_add) + " > 1e-10");
  c.require(worst_psd <= 1e-8, "PSD floor " + fmt(worst_psd) + " > 1e-8");
  c.require(worst_factor <= 1e-10, "factor mismatch " + fmt(worst_factor) + " > 1e-10");
  double elapsed = timer.seconds();
  c.require(elapsed < 30.0, "runtime " + fmt(elapsed) + "s >= 30s");
  c.note(std::to_string(datasets) + " datasets x 3 kernels; additivity " + fmt(worst_add) +
         ", PSD floor " + fmt(worst_psd) + ", factor " + fmt(worst_factor) + ", " +
         fmt(elapsed) + "s");
  return c;
}

// --------------------------------------------------------------------------
// 2. Oracle equivalence on small pencils.

Criterion criterion_oracle() {
  Criterion c;
  Timer timer;

  // Kernel pencils (N <= 40): the three robust strategies against the
  // pseudoinverse oracle.  The ridge is kept tiny so the comparison probes
  // the algorithms, not the regularization.
  struct Cell { int cls; Index per; Index dim; double gamma; };
  const Cell cells[] = {
      {3, 12, 4, 2.0}, {3, 12, 4, 4.0}, {2, 10, 3, 1.0},
      {4, 8, 6, 1.0},  {4, 8, 6, 3.0},  {5, 8, 6, 2.0},
      {2, 16, 5, 2.0}, {3, 10, 5, 1.5},
  };
  SolverOptions tiny;
  tiny.epsilon = 1e-8;  // trace-scaled
  double worst_resid = 0, worst_angle = 0, worst_dtrace = 0;
  int pencils = 0, rank_cells = 0;
  for (const auto& cell : cells) {
    for (std::uint64_t seed : {1, 2}) {
      auto data = gen_gaussians(cell.cls, cell.per, cell.dim, 5.0, seed);
      KernelSpec spec{KernelKind::rbf, cell.gamma, 3, 1.0};
      auto part = build_partition(data.y);
      auto bundle = center_gram(gram_matrix(spec, data.X));
      auto sc = build_scatter_set(bundle, part);
      ++pencils;
      Index d_target = cell.cls - 1;
      auto ch = solve_reg_cholqr(sc.S_b, sc.S_t, tiny, d_target);
      auto gs = solve_gsvd_cod(sc.factors.K_b, sc.factors.K_w, tiny, d_target);
      auto sv = solve_svd_total(sc.factors.K_t, sc.S_b, tiny, d_target);
      auto orc = oracle_pinv_gep(sc.S_b, sc.S_t, 1e-10);

      Matrix ridged = sc.S_t;
      ridged.diagonal().array() += resolve_epsilon(tiny, sc.S_t);
      EigResult pr = ch;
      worst_resid = std::max(worst_resid, residual(sc.S_b, ridged, pr));
      pr = gs;
      worst_resid = std::max(worst_resid, residual(sc.S_b, sc.S_t, pr));
      pr = sv;
      worst_resid = std::max(worst_resid, residual(sc.S_b, sc.S_t, pr));
      pr = orc;
      worst_resid = std::max(worst_resid, residual(sc.S_b, sc.S_t, pr));

      auto sb = detail::factor_singular_spectrum(sc.factors.K_b);
      auto sw = detail::factor_singular_spectrum(sc.factors.K_w);
      auto st = detail::factor_singular_spectrum(sc.factors.K_t);
      bool holds = numerical_rank(st, 1e-10) ==
                   numerical_rank(sw, 1e-10) + numerical_rank(sb, 1e-10);
      if (holds) {
        ++rank_cells;
        for (const EigResult* r : {&ch, &gs, &sv}) {
          Index d = std::min(r->dims(), orc.dims());
          worst_angle = std::max(
              worst_angle, max_principal_angle(r->W.leftCols(d), orc.W.leftCols(d)));
          double to = orc.eigvals.head(d).sum();
          worst_dtrace = std::max(
              worst_dtrace, std::abs(r->eigvals.head(d).sum() - to) / std::abs(to));
        }
      }
    }
  }
  c.require(worst_resid <= 1e-8, "residual " + fmt(worst_resid) + " > 1e-8");
  c.require(rank_cells >= 10, "rank condition held on too few pencils");
  c.require(worst_angle <= 1e-6, "oracle angle " + fmt(worst_angle) + " > 1e-6");
  c.require(worst_dtrace <= 1e-6, "trace deviation " + fmt(worst_dtrace) + " > 1e-6");

  // Cross-product strategy on pencils inside its validity regime
  // (within-scatter commuting with the between-range), looser 1e-4 bar.
  double cx_resid = 0, cx_angle = 0, cx_dtrace = 0;
  for (std::uint64_t seed : {11, 12, 13, 14, 15, 16}) {
    auto p = make_commuting_pencil(30 + Index(seed % 3) * 5, 3, 10, seed);
    SolverOptions abs8;
    abs8.epsilon = 1e-8;
    abs8.epsilon_mode = EpsilonMode::absolute;
    auto cx = solve_crossproduct(p.K_b, p.S_w, abs8, 3);
    Matrix ridged = p.S_w;
    ridged.diagonal().array() += 1e-8;
    EigResult pr = cx;
    cx_resid = std::max(cx_resid, residual(p.S_b, ridged, pr));
    auto orc = oracle_pinv_gep(p.S_b, ridged, 1e-10);
    Index d = std::min(cx.dims(), orc.dims());
    cx_angle = std::max(cx_angle,
                        max_principal_angle(cx.W.leftCols(d), orc.W.leftCols(d)));
    double to = orc.eigvals.head(d).sum();
    cx_dtrace = std::max(cx_dtrace,
                         std::abs(cx.eigvals.head(d).sum() - to) / std::abs(to));
    // The robust strategies stay tight on these pencils too.
    auto gs = solve_gsvd_cod(p.K_b, p.K_w, abs8, 3);
    pr = gs;
    c.require(residual(p.S_b, p.S_t, pr) <= 1e-8, "stacked-factor residual on synthetic pencil");
  }
  c.require(cx_resid <= 1e-4, "crossproduct residual " + fmt(cx_resid) + " > 1e-4");
  c.require(cx_angle <= 1e-4, "crossproduct angle " + fmt(cx_angle) + " > 1e-4");
  c.require(cx_dtrace <= 1e-4, "crossproduct trace dev " + fmt(cx_dtrace) + " > 1e-4");

  double elapsed = timer.seconds();
  c.require(elapsed < 60.0, "runtime " + fmt(elapsed) + "s >= 60s");
  c.note(std::to_string(pencils) + " kernel pencils (" + std::to_string(rank_cells) +
         " with rank condition) + 6 synthetic: residual " + fmt(worst_resid) +
         ", angle " + fmt(worst_angle) + ", trace " + fmt(worst_dtrace) +
         "; crossproduct " + fmt(cx_resid) + "/" + fmt(cx_angle) + "/" + fmt(cx_dtrace) +
         ", " + fmt(elapsed) + "s");
  return c;
}

// --------------------------------------------------------------------------
// 3. Spectral-regression construction identities and exact-solve regime.

Criterion criterion_spectral() {
  Criterion c;
  Timer timer;
  double worst_basis = 0, worst_exact = 0;
  for (Index n : {Index(12), Index(30), Index(48)}) {
    int cls = n >= 30 ? 4 : 3;
    auto data = gen_gaussians(cls, n / cls, 4, 4.0, std::uint64_t(n));
    auto part = build_partition(data.y);
    Matrix V = sr_indicator_basis(part);
    Index N = data.n();
    worst_basis = std::max(worst_basis, V.colwise().sum().cwiseAbs().maxCoeff());
    worst_basis = std::max(
        worst_basis,
        (V.transpose() * V - Matrix::Identity(V.cols(), V.cols())).norm());
    Matrix Bc = centered_between(part) - Matrix::Constant(N, N, 1.0 / double(N));
    worst_basis = std::max(worst_basis, (Bc * V - V).norm());

    KernelSpec spec{KernelKind::rbf, 1.0, 3, 1.0};
    auto bundle = center_gram(gram_matrix(spec, data.X));
    SolverOptions tiny;
    tiny.epsilon = 1e-10;
    auto sr = solve_spectral_regression(bundle.K_centered, part, tiny);
    Matrix Sb, St;
    centered_scatter_pair(bundle, part, Sb, St);
    Matrix I = Matrix::Identity(sr.W.cols(), sr.W.cols());
    worst_exact = std::max(worst_exact, (sr.W.transpose() * St * sr.W - I).norm());
    worst_exact = std::max(worst_exact, (sr.W.transpose() * Sb * sr.W - I).norm());
  }
  c.require(worst_basis <= 1e-12, "basis identity residual " + fmt(worst_basis) + " > 1e-12");
  c.require(worst_exact <= 1e-6, "exact-solve deviation " + fmt(worst_exact) + " > 1e-6");
  double elapsed = timer.seconds();
  c.require(elapsed < 10.0, "runtime " + fmt(elapsed) + "s >= 10s");
  c.note("basis " + fmt(worst_basis) + ", exact-solve " + fmt(worst_exact) + ", " +
         fmt(elapsed) + "s");
  return c;
}

// --------------------------------------------------------------------------
// 4. Nonlinearity demonstration on concentric circles.

Criterion criterion_circles() {
  Criterion c;
  Timer timer;
  auto data = gen_circles(400, 0.1, 5);
  auto parts = split(data, 0.5, 17);
  auto run = [&](const KernelSpec& spec) {
    auto model = fit(parts.train, spec, SolverKind::spectral_regression, {});
    auto cls = nearest_centroid_fit(transform(model, parts.train.X), parts.train.y);
    return evaluate(nearest_centroid_predict(cls, transform(model, parts.test.X)),
                    parts.test.y)
        .accuracy;
  };
  double rbf_acc = run({KernelKind::rbf, 0.5, 3, 1.0});
  double lin_acc = run({KernelKind::linear, 1.0, 3, 1.0});
  c.require(rbf_acc >= 0.95, "rbf accuracy " + fmt(rbf_acc) + " < 0.95");
  c.require(lin_acc <= 0.6, "linear accuracy " + fmt(lin_acc) + " > 0.6");
  double elapsed = timer.seconds();
  c.require(elapsed < 10.0, "runtime " + fmt(elapsed) + "s >= 10s");
  c.note("rbf " + fmt(rbf_acc) + " vs linear " + fmt(lin_acc) + ", " + fmt(elapsed) + "s");
  return c;
}

// --------------------------------------------------------------------------
// 5. Acceleration of the one-linear-system path at N = 2000.

Criterion criterion_speed() {
  Criterion c;
  Timer timer;
  auto data = gen_gaussians(10, 200, 20, 4.0, 7);
  KernelSpec spec{KernelKind::rbf, 0.05, 3, 1.0};
  auto part = build_partition(data.y);
  auto bundle = center_gram(gram_matrix(spec, data.X));
  auto sc = build_scatter_set(bundle, part);

  auto median3 = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[1];
  };
  SolverOptions sr_opts;
  sr_opts.epsilon = 1e-10;  // trace-scaled: deep inside the exact-solve regime
  std::vector<double> sr_times, gsvd_times;
  EigResult sr, gs;
  for (int rep = 0; rep < 3; ++rep) {
    detail::StopWatch sw1;
    sr = solve_spectral_regression(bundle.K_centered, part, sr_opts);
    sr_times.push_back(sw1.seconds());
    SolverOptions opts;
    detail::StopWatch sw2;
    gs = solve_gsvd_cod(sc.factors.K_b, sc.factors.K_w, opts, 9);
    gsvd_times.push_back(sw2.seconds());
  }
  double t_sr = median3(sr_times), t_gsvd = median3(gsvd_times);

  auto sb = detail::factor_singular_spectrum(sc.factors.K_b);
  auto sw = detail::factor_singular_spectrum(sc.factors.K_w);
  auto st = detail::factor_singular_spectrum(sc.factors.K_t);
  bool holds = numerical_rank(st, 1e-10) ==
               numerical_rank(sw, 1e-10) + numerical_rank(sb, 1e-10);
  c.require(holds, "rank condition does not hold at N=2000");
  double dtrace =
      std::abs(sr.eigvals.sum() - gs.eigvals.sum()) / std::abs(gs.eigvals.sum());
  c.require(t_sr <= t_gsvd / 3.0,
            "speedup only " + fmt(t_gsvd / t_sr) + "x (need >= 3x)");
  c.require(dtrace <= 1e-6, "trace deviation " + fmt(dtrace) + " > 1e-6");
  double elapsed = timer.seconds();
  c.require(elapsed < 300.0, "runtime " + fmt(elapsed) + "s >= 300s");
  c.note("fast path " + fmt(t_sr) + "s vs stacked-factor " + fmt(t_gsvd) + "s (" +
         fmt(t_gsvd / t_sr) + "x), trace dev " + fmt(dtrace) + ", " + fmt(elapsed) + "s");
  return c;
}

// --------------------------------------------------------------------------
// 6. Prediction equivalence across variants and solvers.

Criterion criterion_variants() {
  Criterion c;
  Timer timer;
  int used = 0;
  for (std::uint64_t seed = 1; seed <= 24 && c.ok; ++seed) {
    int cls = 2 + int(seed % 4);
    auto data = gen_gaussians(cls, 10, 5, 6.0, seed);
    KernelSpec spec{KernelKind::rbf, 1.0, 3, 1.0};
    std::vector<std::vector<long long>> all_preds;
    bool rank_ok = true;
    for (auto sk : {SolverKind::gsvd_cod, SolverKind::svd_total,
                    SolverKind::spectral_regression}) {
      auto base = fit(data, spec, sk, {});
      rank_ok = rank_ok && base.report.rank_condition_holds;
      for (auto v : {Variant::kda, Variant::kuda, Variant::okda}) {
        auto model = apply_constraint(base, v);
        auto cm = nearest_centroid_fit(transform(model, data.X), data.y);
        all_preds.push_back(nearest_centroid_predict(cm, transform(model, data.X)));
      }
    }
    if (!rank_ok) continue;  // criterion scopes itself to rank-condition datasets
    ++used;
    for (const auto& p : all_preds) {
      c.require(p == all_preds.front(),
                "prediction mismatch on dataset seed " + std::to_string(seed));
    }
  }
  c.require(used >= 20, "only " + std::to_string(used) + " rank-condition datasets");
  double elapsed = timer.seconds();
  c.note(std::to_string(used) +
         " datasets x 3 solvers x 3 variants agree exactly, " + fmt(elapsed) + "s");
  return c;
}

// --------------------------------------------------------------------------
// 7. Engineering contract: persistence, reproducibility, exit codes, parsers.

int run_shell(const std::string& cmd) {
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Criterion criterion_engineering() {
  Criterion c;
  Timer timer;
  const std::string cli = KDA_CLI_PATH;
  const std::string dir = KDA_TEST_TMPDIR;
  auto path = [&dir](const std::string& name) { return dir + "/acc7_" + name; };
  const std::string quiet = " 2> /dev/null";

  // Library-level persistence: bitwise round trip.
  auto data = gen_gaussians(3, 10, 4, 4.0, 41);
  KernelSpec spec{KernelKind::rbf, 0.8, 3, 1.0};
  auto model = fit(data, spec, SolverKind::gsvd_cod, {});
  save_model(model, path("m1.bin"));
  auto back = load_model(path("m1.bin"));
  save_model(back, path("m2.bin"));
  c.require(slurp(path("m1.bin")) == slurp(path("m2.bin")),
            "model file not bitwise stable");
  c.require(back.W == model.W && back.eigvals == model.eigvals,
            "loaded model differs");
  c.require(transform(back, data.X) == transform(model, data.X),
            "loaded model transforms differently");

  // Seeded CLI reproducibility.
  c.require(run_shell(cli + " synth gaussians --classes 3 --per-class 10 --dim 4 "
                            "--separation 3 --seed 6 --out " + path("a.csv") + quiet) == 0,
            "synth exit");
  c.require(run_shell(cli + " synth gaussians --classes 3 --per-class 10 --dim 4 "
                            "--separation 3 --seed 6 --out " + path("b.csv") + quiet) == 0,
            "synth exit");
  c.require(slurp(path("a.csv")) == slurp(path("b.csv")), "seeded synth not bitwise stable");
  c.require(run_shell(cli + " fit " + path("a.csv") + " --kernel rbf --gamma 0.5 "
                            "--solver svd --out " + path("a.model") +
                            " > " + path("fit1.json") + quiet) == 0,
            "fit exit");
  c.require(run_shell(cli + " fit " + path("a.csv") + " --kernel rbf --gamma 0.5 "
                            "--solver svd --out " + path("b.model") +
                            " > " + path("fit2.json") + quiet) == 0,
            "fit exit");
  c.require(slurp(path("a.model")) == slurp(path("b.model")),
            "fit model files not bitwise stable");
  c.require(slurp(path("fit1.json")).find("\"rank_condition\"") != std::string::npos,
            "fit log lacks rank_condition");

  // Exit-code contract.
  c.require(run_shell(cli + " fit " + path("a.csv") + " --kernel rbf --out " +
                      path("x.model") + quiet) == 2,
            "missing gamma should exit 2");
  {
    std::ofstream bad(path("ragged.csv"));
    bad << "1,2,0\n3,4\n";
  }
  c.require(run_shell(cli + " fit " + path("ragged.csv") + " --kernel linear --out " +
                      path("x.model") + " 2> " + path("ragged.err")) == 3,
            "ragged csv should exit 3");
  c.require(slurp(path("ragged.err")).find("line 2") != std::string::npos,
            "ragged csv error lacks line number");
  {
    std::ofstream dup(path("dup.csv"));
    for (int i = 0; i < 8; ++i) dup << "2,2," << (i < 4 ? 0 : 1) << "\n";
  }
  c.require(run_shell(cli + " fit " + path("dup.csv") + " --kernel rbf --gamma 1 "
                            "--solver sr --epsilon 0 --epsilon-mode absolute --out " +
                      path("x.model") + quiet) == 4,
            "singular fit should exit 4");

  // Malformed LIBSVM rejection with a line number.
  {
    std::ofstream bad(path("bad.libsvm"));
    bad << "1 1:0.5\n1 3:1 2:1\n";
  }
  try {
    load_libsvm(path("bad.libsvm"));
    c.require(false, "non-ascending libsvm indices accepted");
  } catch (const parse_error& e) {
    c.require(std::string(e.what()).find("line 2") != std::string::npos,
              "libsvm error lacks line number");
  }

  double elapsed = timer.seconds();
  c.note("persistence bitwise, seeded runs bitwise, exit codes 2/3/4, parser line "
         "numbers, " + fmt(elapsed) + "s");
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      only = std::atoi(argv[i + 1]);
      ++i;
    }
  }
  struct Entry {
    int id;
    const char* name;
    Criterion (*run)();
  };
  const Entry entries[] = {
      {1, "scatter identities", criterion_scatter},
      {2, "oracle equivalence", criterion_oracle},
      {3, "spectral-regression construction", criterion_spectral},
      {4, "nonlinearity demonstration", criterion_circles},
      {5, "acceleration claim", criterion_speed},
      {6, "variant equivalence", criterion_variants},
      {7, "engineering contract", criterion_engineering},
  };
  bool all_ok = true;
  for (const auto& e : entries) {
    if (only != 0 && e.id != only) continue;
    Criterion c = e.run();
    std::printf("[%s] criterion %d: %s — %s\n", c.ok ? "PASS" : "FAIL", e.id, e.name,
                c.detail.c_str());
    std::fflush(stdout);
    all_ok = all_ok && c.ok;
  }
  return all_ok ? 0 : 1;
}
