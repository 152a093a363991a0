// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavier criteria persist their artifacts under acceptance_out/ so
// a rerun picks them up instead of regenerating.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "msrich/errors.hpp"
#include "msrich/fem.hpp"
#include "msrich/pipeline.hpp"
#include "msrich/rng.hpp"

using namespace msrich;

namespace {

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

int g_passed = 0;
int g_failed = 0;

void report(int id, bool pass, const std::string& detail, double seconds) {
  std::printf("C%02d %s  %s (%.1f s)\n", id, pass ? "PASS" : "FAIL", detail.c_str(), seconds);
  std::fflush(stdout);
  (pass ? g_passed : g_failed) += 1;
}

template <typename Fn>
void criterion(int id, Fn&& fn) {
  const double t0 = now_s();
  try {
    std::pair<bool, std::string> r = fn();
    report(id, r.first, r.second, now_s() - t0);
  } catch (const std::exception& err) {
    report(id, false, std::string("exception: ") + err.what(), now_s() - t0);
  }
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// Shared desk-scale setup: the steady training and end-to-end criteria run on
// one workspace so the dataset and network are built once.
RunConfig desk_config() {
  RunConfig cfg;
  cfg.fine_n = 32;
  cfg.coarse_n = 4;
  cfg.nb_list = {4};
  cfg.train_samples = 200;
  cfg.test_samples = 50;
  cfg.hidden_widths = {256, 224, 192};
  cfg.train.epochs = 100;
  cfg.train.batch_size = 32;
  cfg.out_dir = "acceptance_out/steady";
  cfg.seed = 1;
  return cfg;
}

const Workspace& desk() {
  static const Workspace ws = make_workspace(desk_config());
  return ws;
}

std::vector<double> log_uniform_kappa(int n, std::uint64_t seed) {
  Philox rng(seed);
  std::vector<double> kappa(n);
  const double lo = std::log(10.0), hi = std::log(2000.0);
  for (double& k : kappa) k = std::exp(lo + (hi - lo) * rng.uniform());
  return kappa;
}

double energy_norm(const CsrMatrix& A, std::span<const double> v) {
  const std::vector<double> av = A.multiply(v);
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) acc += v[i] * av[i];
  return std::sqrt(std::max(0.0, acc));
}

// --- criterion 3 oracle: dense assembly plus full-pivot LU Picard ----------

struct DenseOracle {
  int n, nn;
  Eigen::MatrixXd mass;

  explicit DenseOracle(int n_cells) : n(n_cells), nn(n_cells + 1) {
    mass = Eigen::MatrixXd::Zero(nn * nn, nn * nn);
    const double area = 0.5 / (n * n);
    const double m_local[3][3] = {{2, 1, 1}, {1, 2, 1}, {1, 1, 2}};
    for_each_triangle([&](const int v[3]) {
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) mass(v[a], v[b]) += area / 12.0 * m_local[a][b];
      }
    });
  }

  int node(int ix, int iy) const { return iy * nn + ix; }

  template <typename F>
  void for_each_triangle(F&& f) const {
    for (int iy = 0; iy < n; ++iy) {
      for (int ix = 0; ix < n; ++ix) {
        const int ll = node(ix, iy), lr = node(ix + 1, iy);
        const int ul = node(ix, iy + 1), ur = node(ix + 1, iy + 1);
        const int lower[3] = {ll, lr, ur};
        const int upper[3] = {ll, ur, ul};
        f(lower);
        f(upper);
      }
    }
  }

  Eigen::MatrixXd stiffness(const std::vector<double>& coeff) const {
    const double k_lower[3][3] = {{0.5, -0.5, 0.0}, {-0.5, 1.0, -0.5}, {0.0, -0.5, 0.5}};
    const double k_upper[3][3] = {{0.5, 0.0, -0.5}, {0.0, 0.5, -0.5}, {-0.5, -0.5, 1.0}};
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nn * nn, nn * nn);
    bool lower = true;
    for_each_triangle([&](const int v[3]) {
      const double c = (coeff[v[0]] + coeff[v[1]] + coeff[v[2]]) / 3.0;
      const auto& k = lower ? k_lower : k_upper;
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) A(v[a], v[b]) += c * k[a][b];
      }
      lower = !lower;
    });
    return A;
  }

  bool boundary(int id) const {
    const int ix = id % nn, iy = id / nn;
    return ix == 0 || ix == n || iy == 0 || iy == n;
  }

  std::vector<Eigen::VectorXd> picard(const std::vector<double>& kappa,
                                      const Eigen::VectorXd& f_nodes, double delta0,
                                      int max_iters) const {
    const int dim = nn * nn;
    Eigen::VectorXd p = Eigen::VectorXd::Zero(dim);
    std::vector<Eigen::VectorXd> iterates;
    for (int it = 0; it < max_iters; ++it) {
      std::vector<double> cond(dim);
      for (int i = 0; i < dim; ++i) cond[i] = kappa[i] / (1.0 + std::abs(p(i)));
      Eigen::MatrixXd B = stiffness(cond);
      Eigen::VectorXd rhs = mass * f_nodes;
      for (int i = 0; i < dim; ++i) {
        if (!boundary(i)) continue;
        B.row(i).setZero();
        B.col(i).setZero();
        B(i, i) = 1.0;
        rhs(i) = 0.0;
      }
      Eigen::VectorXd p_next = Eigen::FullPivLU<Eigen::MatrixXd>(B).solve(rhs);
      iterates.push_back(p_next);
      const double old_norm = p.norm();
      const double change = (p_next - p).norm();
      p = p_next;
      if (old_norm == 0.0) {
        if (change == 0.0) break;
        continue;
      }
      if (change / old_norm <= delta0) break;
    }
    return iterates;
  }
};

// --- criterion 6 helper: pre-activations clear of the activation kinks -----

double min_abs_preactivation(const MlpModel& model, const std::vector<double>& input) {
  Eigen::VectorXd a(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) a[int(i)] = input[i];
  double min_abs = 1e300;
  for (int l = 0; l < model.n_weight_layers(); ++l) {
    Eigen::VectorXd z = model.weights[l] * a + model.biases[l];
    for (int i = 0; i < z.size(); ++i) min_abs = std::min(min_abs, std::abs(z[i]));
    a = z.unaryExpr([act = model.activations[l]](double x) {
      if (act == Activation::selu) return selu(x);
      if (act == Activation::relu) return relu(x);
      return x;
    });
  }
  return min_abs;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- criteria -------------------------------------------------------------

std::pair<bool, std::string> c1_partition_of_unity() {
  const double t0 = now_s();
  auto [fine, coarse] = build_grids(32, 4);
  const PartitionOfUnity pou = partition_of_unity(fine, coarse);
  double sum_defect = 0.0, range_defect = 0.0;
  for (int i = 0; i < fine.n_nodes(); ++i) {
    double sum = 0.0;
    for (const auto& chi : pou.chi) {
      sum += chi[i];
      range_defect = std::max(range_defect, std::max(-chi[i], chi[i] - 1.0));
    }
    sum_defect = std::max(sum_defect, std::abs(sum - 1.0));
  }
  const double elapsed = now_s() - t0;
  const bool pass = sum_defect <= 1e-12 && range_defect <= 1e-12 && elapsed < 5.0;
  return {pass, "partition of unity on (32, 4): sum defect " + fmt("%.2e", sum_defect) +
                    ", range defect " + fmt("%.2e", range_defect) + ", built in " +
                    fmt("%.2f", elapsed) + " s (limits 1e-12, 5 s)"};
}

std::pair<bool, std::string> c2_spectral() {
  const Workspace& ws = desk();
  const PermeabilityField field =
      sample_field(ws.kle, derive_seed(0xACCE, 0, 2), ws.cfg.kappa_range);
  const std::vector<double> zeros(ws.fine.n_nodes(), 0.0);
  const std::vector<double> cond = conductivity(field.values, zeros);
  const int n_basis = 4;
  double worst_ortho = 0.0, worst_res = 0.0, worst_lambda1 = 0.0;
  bool ascending = true;
  for (const Neighborhood& nb : ws.nbs) {
    const SnapshotSpace snap = snapshot_space(ws.fine, nb, cond);
    const SpectralBasis basis = spectral_basis(ws.fine, nb, snap, ws.pou, cond, n_basis);
    worst_lambda1 = std::max(worst_lambda1, basis.eigenvalues[0]);
    for (int k = 1; k < n_basis; ++k) {
      ascending = ascending && basis.eigenvalues[k] >= basis.eigenvalues[k - 1];
    }
    std::vector<double> w(ws.fine.n_tris(), 0.0);
    for (int t : nb.tri_indices) {
      const auto& tri = ws.fine.tris[t];
      w[t] = (cond[tri[0]] + cond[tri[1]] + cond[tri[2]]) / 3.0 * ws.pou.grad_sq_sum[t];
    }
    const CsrMatrix A = assemble_local_stiffness(ws.fine, nb, cond);
    const CsrMatrix S = assemble_local_weighted_mass(ws.fine, nb, w);
    const int nl = nb.n_local();
    for (int a = 0; a < n_basis; ++a) {
      std::span<const double> va(basis.vectors.data() + std::size_t(a) * nl, std::size_t(nl));
      const auto s_va = S.multiply(va);
      for (int b = 0; b < n_basis; ++b) {
        double dot = 0.0;
        for (int l = 0; l < nl; ++l) dot += basis.at(l, b) * s_va[l];
        worst_ortho = std::max(worst_ortho, std::abs(dot - (a == b ? 1.0 : 0.0)));
      }
      const auto a_va = A.multiply(va);
      std::vector<double> nodal_res(nl);
      for (int l = 0; l < nl; ++l) nodal_res[l] = a_va[l] - basis.eigenvalues[a] * s_va[l];
      double res_sq = 0.0;
      for (int s = 0; s < snap.n_snap; ++s) {
        double proj = 0.0;
        for (int l = 0; l < nl; ++l) proj += snap.at(l, s) * nodal_res[l];
        res_sq += proj * proj;
      }
      double coeff_sq = 0.0;
      for (int s = 0; s < snap.n_snap; ++s) {
        const double c = basis.coeffs[std::size_t(a) * snap.n_snap + s];
        coeff_sq += c * c;
      }
      const double rel = std::sqrt(res_sq) /
                         ((1.0 + std::abs(basis.eigenvalues[a])) * std::sqrt(coeff_sq));
      worst_res = std::max(worst_res, rel);
    }
  }
  const bool pass =
      ascending && worst_lambda1 <= 1e-10 && worst_ortho <= 1e-8 && worst_res <= 1e-8;
  return {pass, "spectral problems on all " + std::to_string(ws.n_vertices()) +
                    " neighborhoods: lambda1 max " + fmt("%.2e", worst_lambda1) +
                    ", orthonormality defect " + fmt("%.2e", worst_ortho) +
                    ", projected residual " + fmt("%.2e", worst_res) +
                    (ascending ? "" : ", ORDERING BROKEN") +
                    " (limits 1e-10, 1e-8, 1e-8)"};
}

std::pair<bool, std::string> c3_dense_oracle() {
  const FineGrid fine = make_fine_grid(4);
  const DenseOracle oracle(4);
  const int dim = fine.n_nodes();
  std::vector<double> f(dim, 1.0);
  Eigen::VectorXd f_vec = Eigen::VectorXd::Ones(dim);
  double worst = 0.0;
  bool counts_match = true;
  PicardConfig cfg;
  for (int s = 0; s < 5; ++s) {
    const std::vector<double> kappa = log_uniform_kappa(dim, derive_seed(0xACCE, 1, s));
    const PicardResult got = picard_solve(fine, kappa, f, nullptr, std::nullopt, cfg);
    const auto want = oracle.picard(kappa, f_vec, cfg.delta0, cfg.max_iters);
    counts_match = counts_match && got.iterates.size() == want.size();
    const std::size_t n_cmp = std::min(got.iterates.size(), want.size());
    for (std::size_t it = 0; it < n_cmp; ++it) {
      for (int i = 0; i < dim; ++i) {
        worst = std::max(worst, std::abs(got.iterates[it][i] - want[it](i)));
      }
    }
  }
  const bool pass = counts_match && worst <= 1e-10;
  return {pass, std::string("sparse Picard vs dense-LU oracle on the 4x4 grid, 5 fields: ") +
                    (counts_match ? "iterate counts match, " : "ITERATE COUNTS DIFFER, ") +
                    "max deviation " + fmt("%.2e", worst) + " (limit 1e-10)"};
}

std::pair<bool, std::string> c4_picard_convergence() {
  const Workspace& ws = desk();
  const std::vector<double> f(ws.fine.n_nodes(), 1.0);
  int worst_iters = 0;
  int converged = 0;
  PicardConfig cfg;  // delta0 1e-6, max 10
  for (int s = 0; s < 20; ++s) {
    const PermeabilityField field =
        sample_field(ws.kle, derive_seed(0xACCE, 2, s), ws.cfg.kappa_range);
    const PicardResult res = picard_solve(ws.fine, field.values, f, nullptr, std::nullopt, cfg);
    converged += res.converged ? 1 : 0;
    worst_iters = std::max(worst_iters, res.iterations);
  }
  const bool pass = converged == 20 && worst_iters <= 10;
  return {pass, "steady fine Picard at delta0 1e-6: " + std::to_string(converged) +
                    "/20 seeds converged, max " + std::to_string(worst_iters) +
                    " iterations (limit 10)"};
}

std::pair<bool, std::string> c5_convergence_ordering() {
  const Workspace& ws = desk();
  const PermeabilityField field =
      sample_field(ws.kle, derive_seed(0xACCE, 3, 0), ws.cfg.kappa_range);
  const std::vector<double> f0 = sample_source(ws.fine, ws.source, 0.0);
  const std::vector<double> zeros(ws.fine.n_nodes(), 0.0);
  const std::vector<double> cond0 = conductivity(field.values, zeros);

  const PicardResult fine_res =
      picard_solve(ws.fine, field.values, f0, nullptr, std::nullopt, ws.cfg.picard);
  if (!fine_res.converged) return {false, "fine reference solve did not converge"};

  double err[3] = {0.0, 0.0, 0.0};
  const int nbs[3] = {2, 4, 8};
  OfflineSpace off4;
  CoarsePicardResult coarse4;
  for (int i = 0; i < 3; ++i) {
    OfflineSpace off = build_offline_space(ws.fine, ws.nbs, ws.pou, cond0, nbs[i]);
    const CoarsePicardResult res = coarse_picard_solve(ws.fine, off.R, field.values, f0,
                                                       nullptr, std::nullopt, ws.cfg.picard);
    err[i] = solution_error(res.fine_rep, fine_res.pressure, ws.mass, ws.unit_stiffness)
                 .l2.value;
    if (nbs[i] == 4) {
      off4 = std::move(off);
      coarse4 = res;
    }
  }
  const bool ordered = err[0] >= err[1] && err[1] >= err[2] - 1e-12;

  // Nesting comparison at a frozen conductivity: the offline and the enriched
  // space solve the same linear problem, so the enlarged space cannot lose in
  // the operator norm.
  const std::vector<double> cond_lin = conductivity(field.values, coarse4.fine_rep);
  std::vector<OnlineBasis> bases;
  for (int j = 0; j < ws.n_vertices(); ++j) {
    bases.push_back(online_basis_for(ws.fine, ws.nbs[j], cond_lin, coarse4.fine_rep, f0,
                                     nullptr, std::nullopt, 0, coarse4.iterations));
  }
  const EnrichedSpace enriched = enrich(ws.fine, ws.nbs, ws.pou, off4, std::move(bases));
  const EnrichedSpace offline_only = enrich(ws.fine, ws.nbs, ws.pou, off4, {});
  const OnlineStepResult on =
      online_picard_step(ws.fine, enriched, cond_lin, f0, nullptr, std::nullopt);
  const OnlineStepResult off_lin =
      online_picard_step(ws.fine, offline_only, cond_lin, f0, nullptr, std::nullopt);

  CsrMatrix A_lin = assemble_stiffness(ws.fine, cond_lin);
  std::vector<double> b = assemble_load(ws.fine, ws.mass, f0);
  apply_dirichlet(A_lin, b, ws.fine.on_boundary);
  const std::vector<double> p_ref = solve_spd(A_lin, b);

  auto diff = [&](const std::vector<double>& v) {
    std::vector<double> d(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) d[i] = v[i] - p_ref[i];
    return d;
  };
  const double ref_energy = energy_norm(A_lin, p_ref);
  const double e_on = energy_norm(A_lin, diff(on.fine_rep)) / ref_energy;
  const double e_off = energy_norm(A_lin, diff(off_lin.fine_rep)) / ref_energy;
  const double l2_on = solution_error(on.fine_rep, p_ref, ws.mass, ws.unit_stiffness).l2.value;
  const double l2_off =
      solution_error(off_lin.fine_rep, p_ref, ws.mass, ws.unit_stiffness).l2.value;
  const bool nested = e_on <= e_off + 1e-12 * (1.0 + e_off);
  const bool l2_ok = l2_on <= 1.10 * l2_off;

  const bool pass = ordered && nested && l2_ok;
  return {pass, "offline L2 ordering " + fmt("%.3e", err[0]) + " >= " + fmt("%.3e", err[1]) +
                    " >= " + fmt("%.3e", err[2]) + (ordered ? "" : " BROKEN") +
                    "; online vs offline at nb 4: energy " + fmt("%.3e", e_on) +
                    " <= " + fmt("%.3e", e_off) + (nested ? "" : " BROKEN") + ", L2 " +
                    fmt("%.3e", l2_on) + " <= 1.1 x " + fmt("%.3e", l2_off) +
                    (l2_ok ? "" : " BROKEN")};
}

std::pair<bool, std::string> c6_backprop_and_adam() {
  const std::vector<std::vector<int>> shapes = {
      {4, 6, 5, 3}, {5, 7, 4}, {3, 8, 6, 6, 2}, {6, 5, 6}, {2, 9, 4, 3}};
  double worst_dev = 0.0;
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    for (std::uint64_t seed = 1000 * (s + 1);; ++seed) {
      MlpModel model = init_model(shapes[s], seed);
      Philox rng(seed ^ 0xabcdef);
      std::vector<double> x(shapes[s].front()), y(shapes[s].back());
      for (auto& v : x) v = rng.normal();
      for (auto& v : y) v = rng.normal();
      if (min_abs_preactivation(model, x) < 1e-4) continue;
      worst_dev = std::max(worst_dev, gradient_check(model, x, y));
      break;
    }
  }

  MlpModel model;
  model.layer_sizes = {1, 1};
  model.weights.push_back(Eigen::MatrixXd::Zero(1, 1));
  model.biases.push_back(Eigen::VectorXd::Zero(1));
  model.activations.push_back(Activation::linear);
  AdamState state = make_adam_state(model);
  Gradients grads;
  grads.d_weights.push_back(Eigen::MatrixXd::Constant(1, 1, 1.0));
  grads.d_biases.push_back(Eigen::VectorXd::Constant(1, 1.0));
  adam_step(model, grads, state, 1e-4);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  const double m_hat = ((1.0 - beta1) * 1.0) / (1.0 - beta1);
  const double v_hat = ((1.0 - beta2) * 1.0) / (1.0 - beta2);
  const double expected = -1e-4 * m_hat / (std::sqrt(v_hat) + eps);
  const double adam_dev = std::max(std::abs(model.weights[0](0, 0) - expected),
                                   std::abs(model.biases[0](0) - expected));

  const bool pass = worst_dev <= 1e-5 && adam_dev <= 1e-12 * std::abs(expected);
  return {pass, "gradient checks on 5 models: worst relative deviation " +
                    fmt("%.2e", worst_dev) + " (limit 1e-5); Adam first step off by " +
                    fmt("%.2e", adam_dev) + " (limit 1e-12 relative)"};
}

std::pair<bool, std::string> c7_roundtrips() {
  Philox rng(0x707);
  std::vector<std::vector<double>> samples;
  for (int s = 0; s < 12; ++s) {
    std::vector<double> x(7);
    for (int i = 0; i < 6; ++i) x[i] = 50.0 * rng.normal() + 10.0;
    x[6] = 3.25;  // constant feature
    samples.push_back(x);
  }
  std::vector<double> mn, mx;
  fit_bounds(samples, mn, mx);
  double norm_dev = 0.0;
  for (const auto& x : samples) {
    const std::vector<double> back = denormalize(normalize(x, mn, mx), mn, mx);
    for (std::size_t i = 0; i < x.size(); ++i) {
      norm_dev = std::max(norm_dev, std::abs(back[i] - x[i]) / (1.0 + std::abs(x[i])));
    }
  }

  std::filesystem::create_directories("acceptance_out");
  Dataset ds;
  ds.header.m = 9;
  ds.header.n_neighborhoods = 2;
  ds.header.samples_per_neighborhood = 3;
  ds.header.experiment = 1;
  ds.header.time_step = 5;
  for (int r = 0; r < 6; ++r) {
    DatasetRecord rec;
    rec.neighborhood = std::uint32_t(r / 3);
    rec.seed = derive_seed(7, r, 0);
    for (int i = 0; i < 9; ++i) {
      rec.kappa.push_back(rng.normal());
      rec.phi.push_back(rng.normal());
    }
    ds.records.push_back(std::move(rec));
  }
  save_dataset(ds, "acceptance_out/rt_a.bin");
  save_dataset(load_dataset("acceptance_out/rt_a.bin"), "acceptance_out/rt_b.bin");
  const bool ds_exact = slurp("acceptance_out/rt_a.bin") == slurp("acceptance_out/rt_b.bin");

  const MlpModel model = init_model({7, 5, 7}, 0x17);
  NormalizationBounds bounds;
  bounds.in_min = mn;
  bounds.in_max = mx;
  bounds.out_min = mn;
  bounds.out_max = mx;
  save_model(model, bounds, "acceptance_out/rt_m_a.bin");
  const LoadedModel lm = load_model("acceptance_out/rt_m_a.bin");
  save_model(lm.model, lm.bounds, "acceptance_out/rt_m_b.bin");
  const bool m_exact = slurp("acceptance_out/rt_m_a.bin") == slurp("acceptance_out/rt_m_b.bin");

  const bool pass = norm_dev <= 1e-12 && ds_exact && m_exact;
  return {pass, "normalization round-trip deviation " + fmt("%.2e", norm_dev) +
                    " (limit 1e-12); dataset file " +
                    (ds_exact ? "byte-exact" : "NOT byte-exact") + ", model file " +
                    (m_exact ? "byte-exact" : "NOT byte-exact")};
}

// Kept so criterion 9 can reuse what criterion 8 trained.
TrainHistory g_desk_history;

std::pair<bool, std::string> c8_training_signal() {
  const Workspace& ws = desk();
  const double t0 = now_s();
  const Dataset ds = obtain_dataset(ws, 4, std::nullopt);
  const TrainArtifacts art = obtain_model(ws, ds, 4, std::nullopt);
  const double elapsed = now_s() - t0;
  g_desk_history = art.history;

  const BasisEval ev = eval_basis(ws, ds, art.model, art.bounds, &art.untrained);
  const double initial =
      art.history.train_loss.empty() ? 0.0 : art.history.train_loss.front();
  const double final_loss =
      art.history.train_loss.empty() ? 0.0 : art.history.train_loss.back();
  const bool loss_ok = !art.history.train_loss.empty() && final_loss < 0.5 * initial;
  const bool rmse_ok = ev.rmse.value < ev.rmse_untrained.value && !ev.rmse.degenerate;
  const bool time_ok = elapsed < 900.0;

  // A rerun that loads the persisted model has no history; the loss signal is
  // then taken from the loss curve CSV written when it was trained.
  bool loaded_ok = loss_ok;
  if (art.history.train_loss.empty()) {
    std::ifstream in(loss_path(ws.cfg, 4, std::nullopt));
    double first = 0.0, last = 0.0;
    std::string line;
    std::getline(in, line);
    bool have = false;
    while (std::getline(in, line)) {
      const double v = std::stod(line.substr(line.find(',') + 1));
      if (!have) first = v;
      last = v;
      have = true;
    }
    loaded_ok = have && last < 0.5 * first;
    return {loaded_ok && rmse_ok,
            "desk training (persisted run): loss curve " + fmt("%.4g", first) + " -> " +
                fmt("%.4g", last) + (loaded_ok ? " (halved)" : " (NOT halved)") +
                "; held-out RMSE " + fmt("%.4g", ev.rmse.value) + " < untrained " +
                fmt("%.4g", ev.rmse_untrained.value)};
  }
  return {loss_ok && rmse_ok && time_ok,
          "desk training, 6250 records, widths [289,256,224,192], 100 epochs: loss " +
              fmt("%.4g", initial) + " -> " + fmt("%.4g", final_loss) +
              (loss_ok ? " (halved)" : " (NOT halved)") + "; held-out RMSE " +
              fmt("%.4g", ev.rmse.value) + " < untrained " + fmt("%.4g", ev.rmse_untrained.value) +
              (rmse_ok ? "" : " BROKEN") + "; " + fmt("%.0f", elapsed) + " s (limit 900)"};
}

std::pair<bool, std::string> c9_predicted_solve() {
  const Workspace& ws = desk();
  const SteadyReport rep = run_steady(ws);
  if (rep.per_nb.size() != 1) return {false, "unexpected report shape"};
  const SteadyNbReport& row = rep.per_nb[0];
  bool finite = row.degenerate == 0;
  for (double v : row.l2.values) finite = finite && std::isfinite(v);
  const bool pass = finite && row.l2.mean <= 0.15;
  return {pass, "predicted vs direct online steady solves over " +
                    std::to_string(row.l2.values.size()) + " samples: mean L2 " +
                    fmt("%.3f", row.l2.mean * 100.0) + "% (limit 15%), max " +
                    fmt("%.3f", row.l2.max * 100.0) + "%" +
                    (finite ? "" : ", NON-FINITE VALUES") +
                    "; full-scale reference 0.144% is out of reach at this size"};
}

RunConfig time_config(const std::string& source, const std::string& out_dir) {
  RunConfig cfg;
  cfg.fine_n = 16;
  cfg.coarse_n = 2;
  cfg.nb_list = {4};
  cfg.train_samples = 20;
  cfg.test_samples = 5;
  cfg.hidden_widths = {64};
  cfg.train.epochs = 20;
  cfg.train.batch_size = 16;
  cfg.tau = 25e-7;
  cfg.n_steps = 20;
  cfg.enrichment_steps = {1, 5, 10, 15, 20};
  cfg.source = source;
  cfg.seed = 2;
  cfg.out_dir = out_dir;
  return cfg;
}

std::pair<bool, std::string> c10_time_dependent() {
  const TimeReport zero_rep =
      run_time_dependent(make_workspace(time_config("zero", "acceptance_out/time_zero")));
  const TimeNbReport& z = zero_rep.per_nb.at(0);
  const bool zero_ok = z.max_abs_direct == 0.0 && z.max_abs_pred == 0.0 &&
                       z.max_abs_diff == 0.0 && z.last_l2.mean == 0.0 &&
                       z.last_h1.mean == 0.0 && z.boch_l2.mean == 0.0 && z.boch_h1.mean == 0.0;

  const TimeReport rep =
      run_time_dependent(make_workspace(time_config("sincos", "acceptance_out/time_sincos")));
  const TimeNbReport& row = rep.per_nb.at(0);
  const bool schedule_ok = row.steps == std::vector<int>{1, 5, 10, 15, 20};
  bool finite = row.degenerate == 0 && row.last_l2.mean > 0.0;
  for (double v : row.boch_l2.values) finite = finite && std::isfinite(v);
  const bool boch_ok = row.boch_l2.mean <= 2.0 * row.last_l2.mean &&
                       row.boch_h1.mean <= 2.0 * row.last_h1.mean;

  const bool pass = zero_ok && schedule_ok && finite && boch_ok;
  return {pass, std::string("zero-source control ") +
                    (zero_ok ? "exactly zero" : "NOT ZERO") +
                    "; sin*cos source, 20 steps, events {1,5,10,15,20}: Bochner L2 " +
                    fmt("%.3f", row.boch_l2.mean * 100.0) + "% vs last-step " +
                    fmt("%.3f", row.last_l2.mean * 100.0) + "%, H1 " +
                    fmt("%.3f", row.boch_h1.mean * 100.0) + "% vs " +
                    fmt("%.3f", row.last_h1.mean * 100.0) + "% (within 2x: " +
                    (boch_ok ? "yes" : "NO") + ")"};
}

std::pair<bool, std::string> c11_timing() {
  const int steady_q = report_timing("acceptance_out/steady");
  const int time_q = report_timing("acceptance_out/time_sincos");
  double direct_mean = 0.0, predict_mean = 0.0;
  std::ifstream in("acceptance_out/steady/timing.csv");
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const std::string name = line.substr(0, line.find(','));
    std::stringstream ss(line.substr(line.find(',') + 1));
    std::string count_s, mean_s;
    std::getline(ss, count_s, ',');
    std::getline(ss, mean_s, ',');
    if (name == "basis_direct_s") direct_mean = std::stod(mean_s);
    if (name == "basis_predict_s") predict_mean = std::stod(mean_s);
  }
  const bool pass = steady_q == 4 && time_q == 4 && direct_mean > 0.0 && predict_mean > 0.0;
  return {pass, "timing report: " + std::to_string(steady_q) + "+" + std::to_string(time_q) +
                    " quantities; per-basis direct " + fmt("%.4g", direct_mean) +
                    " s vs predicted " + fmt("%.4g", predict_mean) + " s (informational)"};
}

}  // namespace

int main() {
  std::printf("acceptance run\n");
  criterion(1, c1_partition_of_unity);
  criterion(2, c2_spectral);
  criterion(3, c3_dense_oracle);
  criterion(4, c4_picard_convergence);
  criterion(5, c5_convergence_ordering);
  criterion(6, c6_backprop_and_adam);
  criterion(7, c7_roundtrips);
  criterion(8, c8_training_signal);
  criterion(9, c9_predicted_solve);
  criterion(10, c10_time_dependent);
  criterion(11, c11_timing);
  std::printf("acceptance: %d/%d criteria passed\n", g_passed, g_passed + g_failed);
  return g_failed == 0 ? 0 : 1;
}
