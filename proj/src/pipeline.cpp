#include "msrich/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <utility>

#include "msrich/errors.hpp"
#include "msrich/fem.hpp"
#include "msrich/rng.hpp"

namespace msrich {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

// Shortest exact decimal for a double; keeps CSV output reproducible bit for
// bit across runs.
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt(int v) { return std::to_string(v); }

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : path_(path), out_(path, std::ios::trunc) {
    if (!out_) throw IoError("cannot open " + path + " for writing");
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failure on " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

// Wall-clock samples, one named quantity per row. Values go to their own file
// so every other CSV stays deterministic.
class TimingLog {
 public:
  void add(const char* name, double seconds) {
    std::lock_guard<std::mutex> lock(mtx_);
    samples_.emplace_back(name, seconds);
  }

  void write(const std::string& path) const {
    CsvWriter csv(path);
    csv.row({"quantity", "seconds"});
    for (const auto& [name, sec] : samples_) csv.row({name, fmt(sec)});
    csv.finish();
  }

 private:
  mutable std::mutex mtx_;
  std::vector<std::pair<std::string, double>> samples_;
};

// Index-sharded loop; body(i) must only touch slot i of shared outputs. Any
// thread exception is rethrown on the caller once all workers joined.
void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mtx;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mtx);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

SourceFn make_source(const std::string& name) {
  if (name == "unit") return [](double, double, double) { return 1.0; };
  if (name == "zero") return [](double, double, double) { return 0.0; };
  if (name == "sincos") {
    return [](double, double x, double y) { return std::sin(kPi * x) * std::cos(kPi * y); };
  }
  throw ConfigError("unknown source \"" + name + "\"");
}

std::vector<double> local_values(const Neighborhood& nb, std::span<const double> global) {
  std::vector<double> out(nb.n_local());
  for (int l = 0; l < nb.n_local(); ++l) out[l] = global[nb.nodes[l]];
  return out;
}

// The state the final coarse Picard iterate was linearized at: the previous
// iterate, or the initial guess when the loop ran once.
std::vector<double> linearization_state(const Workspace& ws, const CoarsePicardResult& picard,
                                        const BasisColumns& R, const double* p_prev_coarse) {
  if (picard.iterations >= 2) return picard.fine_iterates[picard.iterations - 2];
  if (ws.cfg.picard.guess == PicardConfig::Guess::previous_step && p_prev_coarse) {
    return R.apply(std::span<const double>(p_prev_coarse, std::size_t(R.n_cols())));
  }
  return std::vector<double>(ws.fine.n_nodes(), 0.0);
}

// Offline space and converged offline Picard solve for one steady sample;
// cond is frozen at the linearization state for the enrichment event.
struct SteadyBackbone {
  OfflineSpace offline;
  CoarsePicardResult picard;
  std::vector<double> cond;
};

SteadyBackbone steady_backbone(const Workspace& ws, std::span<const double> kappa, int nb,
                               const std::vector<double>& f_nodes) {
  SteadyBackbone bb;
  const std::vector<double> zeros(ws.fine.n_nodes(), 0.0);
  bb.offline = build_offline_space(ws.fine, ws.nbs, ws.pou, conductivity(kappa, zeros), nb);
  bb.picard = coarse_picard_solve(ws.fine, bb.offline.R, kappa, f_nodes, nullptr, std::nullopt,
                                  ws.cfg.picard);
  bb.cond = conductivity(kappa, linearization_state(ws, bb.picard, bb.offline.R, nullptr));
  return bb;
}

// Offline backward-Euler march. Index s holds the state after step s; slot 0
// is the zero initial state. conds[s] is frozen at the linearization state of
// step s's final iterate, ready for that step's enrichment event.
struct TimeBackbone {
  OfflineSpace offline;
  std::vector<std::vector<double>> coarse_states;
  std::vector<std::vector<double>> fine_states;
  std::vector<std::vector<double>> conds;
  std::vector<std::vector<double>> f_at;
  std::vector<int> picard_iters;
};

TimeBackbone time_backbone(const Workspace& ws, std::span<const double> kappa, int nb,
                           int up_to_step) {
  TimeBackbone bb;
  const int n = ws.fine.n_nodes();
  const std::vector<double> zeros(n, 0.0);
  bb.offline = build_offline_space(ws.fine, ws.nbs, ws.pou, conductivity(kappa, zeros), nb);
  bb.coarse_states.emplace_back(bb.offline.R.n_cols(), 0.0);
  bb.fine_states.emplace_back(n, 0.0);
  bb.conds.emplace_back();
  bb.f_at.emplace_back();
  bb.picard_iters.push_back(0);
  for (int s = 1; s <= up_to_step; ++s) {
    std::vector<double> f_s = sample_source(ws.fine, ws.source, s * ws.cfg.tau);
    CoarsePicardResult res =
        coarse_picard_solve(ws.fine, bb.offline.R, kappa, f_s, bb.coarse_states.back().data(),
                            ws.cfg.tau, ws.cfg.picard);
    bb.conds.push_back(conductivity(
        kappa, linearization_state(ws, res, bb.offline.R, bb.coarse_states.back().data())));
    bb.coarse_states.push_back(res.coarse);
    bb.fine_states.push_back(res.fine_rep);
    bb.f_at.push_back(std::move(f_s));
    bb.picard_iters.push_back(res.iterations);
  }
  return bb;
}

OnlineBasis predicted_basis(const Workspace& ws, int vertex, const MlpModel& model,
                            const NormalizationBounds& bounds, std::span<const double> kappa,
                            int time_step, int picard_index) {
  const Neighborhood& nb = ws.nbs[vertex];
  const std::vector<double> patch = embed_patch(nb, local_values(nb, kappa));
  OnlineBasis basis;
  basis.vertex = vertex;
  basis.time_step = time_step;
  basis.picard_index = picard_index;
  basis.phi = extract_patch(nb, predict_basis(model, bounds, patch));
  return basis;
}

void assert_shared_offline(const EnrichedSpace& a, const EnrichedSpace& b) {
  bool ok = a.n_offline == b.n_offline;
  for (int c = 0; ok && c < a.n_offline; ++c) {
    ok = a.R.owner[c] == b.R.owner[c] && a.R.rows[c] == b.R.rows[c] && a.R.vals[c] == b.R.vals[c];
  }
  if (!ok) {
    throw NumericError("direct and predicted pipelines disagree on the offline block");
  }
}

// Degenerate ratios settle to exact zero when the compared data is exactly
// equal (both-zero trajectories of a zero-source run); a genuine 0/0 mismatch
// stays flagged as NaN.
double settle(const RelativeError& e, bool exactly_equal) {
  if (e.degenerate && exactly_equal) return 0.0;
  return e.value;
}

bool same_vector(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

bool same_trajectory(const std::vector<std::vector<double>>& a,
                     const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t s = 0; s < a.size(); ++s) {
    if (!same_vector(a[s], b[s])) return false;
  }
  return true;
}

double sup_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::string mode_suffix(int nb, std::optional<int> time_step) {
  std::string s = time_step ? "time_step" + std::to_string(*time_step) : std::string("steady");
  return s + "_nb" + std::to_string(nb);
}

void check_dataset_matches(const Workspace& ws, const Dataset& ds, int nb,
                           std::optional<int> time_step, const std::string& path) {
  const RunConfig& cfg = ws.cfg;
  const DatasetHeader& h = ds.header;
  const std::uint32_t m = std::uint32_t(ws.nbs.front().m());
  const std::uint32_t spn = std::uint32_t(cfg.train_samples + cfg.test_samples);
  const std::uint8_t experiment = time_step ? 1 : 0;
  const std::uint32_t step = time_step ? std::uint32_t(*time_step) : 0;
  if (h.m != m || h.n_neighborhoods != std::uint32_t(ws.n_vertices()) ||
      h.samples_per_neighborhood != spn || h.experiment != experiment || h.time_step != step) {
    throw ConfigError("dataset " + path + " does not match the configuration (nb " +
                      std::to_string(nb) + "); delete it or fix the config");
  }
}

struct Split {
  std::vector<const DatasetRecord*> train;
  std::vector<const DatasetRecord*> test;
};

Split split_dataset(const Workspace& ws, const Dataset& ds) {
  const int spn = int(ds.header.samples_per_neighborhood);
  const int n_train = ws.cfg.train_samples;
  Split split;
  for (std::size_t r = 0; r < ds.records.size(); ++r) {
    const int nu = int(r) % spn;
    (nu < n_train ? split.train : split.test).push_back(&ds.records[r]);
  }
  return split;
}

// Sanity assertion on seed arithmetic: the train stream, the test stream and
// the sentinel global-field stream must never collide.
void assert_seed_disjoint(const Workspace& ws, const Dataset& ds) {
  const int spn = int(ds.header.samples_per_neighborhood);
  const int n_train = ws.cfg.train_samples;
  std::set<std::uint64_t> train, test;
  for (std::size_t r = 0; r < ds.records.size(); ++r) {
    (int(r) % spn < n_train ? train : test).insert(ds.records[r].seed);
  }
  for (std::uint64_t s : test) {
    if (train.count(s)) {
      throw NumericError("train and test record seeds collide at " + std::to_string(s));
    }
  }
  for (int nu = n_train; nu < spn; ++nu) {
    const std::uint64_t s = test_field_seed(ws, nu);
    if (train.count(s) || test.count(s)) {
      throw NumericError("sentinel field seed collides with a record seed at " +
                         std::to_string(s));
    }
  }
}

std::vector<std::vector<double>> record_inputs(const std::vector<const DatasetRecord*>& recs) {
  std::vector<std::vector<double>> out;
  out.reserve(recs.size());
  for (const DatasetRecord* r : recs) out.push_back(r->kappa);
  return out;
}

std::vector<std::vector<double>> record_targets(const std::vector<const DatasetRecord*>& recs) {
  std::vector<std::vector<double>> out;
  out.reserve(recs.size());
  for (const DatasetRecord* r : recs) out.push_back(r->phi);
  return out;
}

void write_loss_csv(const std::string& path, const TrainHistory& history) {
  CsvWriter csv(path);
  csv.row({"epoch", "train_loss", "val_loss"});
  for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
    const double val = e < history.val_loss.size()
                           ? history.val_loss[e]
                           : std::numeric_limits<double>::quiet_NaN();
    csv.row({fmt(int(e) + 1), fmt(history.train_loss[e]), fmt(val)});
  }
  csv.finish();
}

std::vector<std::string> report_cells(const ErrorReport& r, double scale) {
  return {fmt(r.mean * scale), fmt(r.min * scale), fmt(r.max * scale),
          fmt(r.highlight * scale)};
}

void append_cells(std::vector<std::string>& row, std::vector<std::string> cells) {
  for (std::string& c : cells) row.push_back(std::move(c));
}

}  // namespace

Workspace make_workspace(const RunConfig& cfg) {
  validate_config(cfg);
  Workspace ws;
  ws.cfg = cfg;
  auto [fine, coarse] = build_grids(cfg.fine_n, cfg.coarse_n);
  ws.fine = std::move(fine);
  ws.coarse = std::move(coarse);
  ws.nbs = make_all_neighborhoods(ws.fine, ws.coarse);
  ws.pou = partition_of_unity(ws.fine, ws.coarse);
  ws.kle = build_kle(ws.fine, cfg.covariance, cfg.energy_fraction);
  ws.mass = assemble_mass(ws.fine);
  const std::vector<double> ones(ws.fine.n_nodes(), 1.0);
  ws.unit_stiffness = assemble_stiffness(ws.fine, ones);
  ws.source = make_source(cfg.source);
  return ws;
}

std::uint64_t record_seed(const Workspace& ws, int neighborhood, int sample, int attempt) {
  const std::uint64_t s =
      derive_seed(ws.cfg.seed, std::uint64_t(neighborhood), std::uint64_t(sample));
  return attempt == 0 ? s : derive_seed(s, 0x5245u, std::uint64_t(attempt));
}

std::uint64_t test_field_seed(const Workspace& ws, int sample) {
  return derive_seed(ws.cfg.seed, std::uint64_t(ws.n_vertices()), std::uint64_t(sample));
}

std::string dataset_path(const RunConfig& cfg, int nb, std::optional<int> time_step) {
  return cfg.out_dir + "/dataset_" + mode_suffix(nb, time_step) + ".bin";
}

std::string model_path(const RunConfig& cfg, int nb, std::optional<int> time_step) {
  return cfg.out_dir + "/model_" + mode_suffix(nb, time_step) + ".bin";
}

std::string loss_path(const RunConfig& cfg, int nb, std::optional<int> time_step) {
  return cfg.out_dir + "/loss_" + mode_suffix(nb, time_step) + ".csv";
}

Dataset gen_dataset(const Workspace& ws, int nb, std::optional<int> time_step) {
  const RunConfig& cfg = ws.cfg;
  if (time_step && (*time_step < 1 || *time_step > cfg.n_steps)) {
    throw ConfigError("gen_dataset: time step " + std::to_string(*time_step) + " outside [1, " +
                      std::to_string(cfg.n_steps) + "]");
  }
  const int n_v = ws.n_vertices();
  const int spn = cfg.train_samples + cfg.test_samples;
  const std::vector<double> f0 = sample_source(ws.fine, ws.source, 0.0);

  Dataset ds;
  ds.header.m = std::uint32_t(ws.nbs.front().m());
  ds.header.n_neighborhoods = std::uint32_t(n_v);
  ds.header.samples_per_neighborhood = std::uint32_t(spn);
  ds.header.experiment = time_step ? 1 : 0;
  ds.header.time_step = time_step ? std::uint32_t(*time_step) : 0;
  ds.records.resize(std::size_t(n_v) * spn);

  std::atomic<int> retried{0};
  parallel_for(n_v * spn, cfg.threads, [&](int idx) {
    const int j = idx / spn;
    const int nu = idx % spn;
    std::string last_error;
    for (int attempt = 0; attempt < 3; ++attempt) {
      try {
        const std::uint64_t seed = record_seed(ws, j, nu, attempt);
        const PermeabilityField field = sample_field(ws.kle, seed, cfg.kappa_range);
        OnlineBasis basis;
        if (!time_step) {
          const SteadyBackbone bb = steady_backbone(ws, field.values, nb, f0);
          basis = online_basis_for(ws.fine, ws.nbs[j], bb.cond, bb.picard.fine_rep, f0, nullptr,
                                   std::nullopt, 0, bb.picard.iterations);
        } else {
          const int s = *time_step;
          const TimeBackbone bb = time_backbone(ws, field.values, nb, s);
          basis = online_basis_for(ws.fine, ws.nbs[j], bb.conds[s], bb.fine_states[s],
                                   bb.f_at[s], bb.fine_states[s - 1].data(), cfg.tau, s,
                                   bb.picard_iters[s]);
        }
        finalize_phi(ws.fine, ws.nbs[j], ws.pou.chi[j], basis);

        DatasetRecord& rec = ds.records[idx];
        rec.neighborhood = std::uint32_t(j);
        rec.seed = seed;
        rec.kappa = embed_patch(ws.nbs[j], local_values(ws.nbs[j], field.values));
        rec.phi = embed_patch(ws.nbs[j], basis.phi);
        if (attempt > 0) retried.fetch_add(1);
        return;
      } catch (const std::exception& err) {
        last_error = err.what();
      }
    }
    throw NumericError("gen_dataset: record (neighborhood " + std::to_string(j) + ", sample " +
                       std::to_string(nu) + ") failed three attempts: " + last_error);
  });

  const int total = n_v * spn;
  if (retried.load() * 100 > total) {
    throw NumericError("gen_dataset: " + std::to_string(retried.load()) + " of " +
                       std::to_string(total) + " records needed retries (over 1%)");
  }
  return ds;
}

TrainArtifacts train_on_dataset(const Workspace& ws, const Dataset& ds, int nb,
                                std::optional<int> time_step) {
  check_dataset_matches(ws, ds, nb, time_step, "(in-memory)");
  const Split split = split_dataset(ws, ds);
  if (split.train.empty()) throw ConfigError("train_on_dataset: empty training split");

  std::vector<int> layers;
  layers.push_back(int(ds.header.m));
  for (int w : ws.cfg.hidden_widths) layers.push_back(w);
  layers.push_back(int(ds.header.m));

  const std::uint64_t base = derive_seed(ws.cfg.train.seed, std::uint64_t(nb),
                                         time_step ? std::uint64_t(*time_step) : 0);
  TrainArtifacts art;
  art.untrained = init_model(layers, base);
  TrainConfig tcfg = ws.cfg.train;
  tcfg.seed = derive_seed(base, 1, 0);
  TrainResult res = train(art.untrained, record_inputs(split.train), record_targets(split.train),
                          tcfg);
  art.model = std::move(res.model);
  art.bounds = std::move(res.bounds);
  art.history = std::move(res.history);
  return art;
}

Dataset obtain_dataset(const Workspace& ws, int nb, std::optional<int> time_step) {
  const std::string path = dataset_path(ws.cfg, nb, time_step);
  if (std::filesystem::exists(path)) {
    Dataset ds = load_dataset(path);
    check_dataset_matches(ws, ds, nb, time_step, path);
    return ds;
  }
  Dataset ds = gen_dataset(ws, nb, time_step);
  std::filesystem::create_directories(ws.cfg.out_dir);
  save_dataset(ds, path);
  return ds;
}

TrainArtifacts obtain_model(const Workspace& ws, const Dataset& ds, int nb,
                            std::optional<int> time_step) {
  const std::string path = model_path(ws.cfg, nb, time_step);
  if (std::filesystem::exists(path)) {
    LoadedModel lm = load_model(path);
    if (lm.model.input_size() != int(ds.header.m) || lm.model.output_size() != int(ds.header.m)) {
      throw ConfigError("model " + path + " does not match the dataset patch length " +
                        std::to_string(ds.header.m) + "; delete it or fix the config");
    }
    TrainArtifacts art;
    art.untrained = init_model(lm.model.layer_sizes,
                               derive_seed(ws.cfg.train.seed, std::uint64_t(nb),
                                           time_step ? std::uint64_t(*time_step) : 0));
    art.model = std::move(lm.model);
    art.bounds = std::move(lm.bounds);
    return art;
  }
  TrainArtifacts art = train_on_dataset(ws, ds, nb, time_step);
  std::filesystem::create_directories(ws.cfg.out_dir);
  save_model(art.model, art.bounds, path);
  write_loss_csv(loss_path(ws.cfg, nb, time_step), art.history);
  return art;
}

BasisEval eval_basis(const Workspace& ws, const Dataset& ds, const MlpModel& model,
                     const NormalizationBounds& bounds, const MlpModel* untrained) {
  const Split split = split_dataset(ws, ds);
  if (split.test.empty()) throw ConfigError("eval_basis: dataset has no test records");

  std::vector<double> cer(split.test.size());
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    const DatasetRecord& rec = *split.test[i];
    const std::vector<double> pred = predict_basis(model, bounds, rec.kappa);
    const RelativeError e = rel_l2_vector(pred, rec.phi);
    cer[i] = settle(e, same_vector(pred, rec.phi));
  }

  BasisEval ev;
  ev.cer = aggregate(cer, 0);
  const auto inputs = record_inputs(split.test);
  const auto targets = record_targets(split.test);
  ev.rmse = rmse(model, bounds, inputs, targets);
  if (untrained) ev.rmse_untrained = rmse(*untrained, bounds, inputs, targets);
  return ev;
}

SteadyReport run_steady(const Workspace& ws) {
  const RunConfig& cfg = ws.cfg;
  std::filesystem::create_directories(cfg.out_dir);
  const std::vector<double> f0 = sample_source(ws.fine, ws.source, 0.0);
  const int n_test = cfg.test_samples;

  TimingLog timing;
  SteadyReport report;
  for (int nb : cfg.nb_list) {
    const Dataset ds = obtain_dataset(ws, nb, std::nullopt);
    assert_seed_disjoint(ws, ds);
    const TrainArtifacts art = obtain_model(ws, ds, nb, std::nullopt);

    SteadyNbReport row;
    row.nb = nb;
    row.history = art.history;
    row.basis = eval_basis(ws, ds, art.model, art.bounds, &art.untrained);

    std::vector<double> l2(n_test), h1(n_test);
    std::vector<char> degenerate(n_test, 0);
    parallel_for(n_test, cfg.threads, [&](int i) {
      const int nu = cfg.train_samples + i;
      const PermeabilityField field = sample_field(ws.kle, test_field_seed(ws, nu),
                                                   cfg.kappa_range);
      double t0 = now_seconds();
      const SteadyBackbone bb = steady_backbone(ws, field.values, nb, f0);
      const double t_shared = now_seconds() - t0;

      t0 = now_seconds();
      std::vector<OnlineBasis> direct;
      direct.reserve(ws.n_vertices());
      for (int j = 0; j < ws.n_vertices(); ++j) {
        const double tb = now_seconds();
        direct.push_back(online_basis_for(ws.fine, ws.nbs[j], bb.cond, bb.picard.fine_rep, f0,
                                          nullptr, std::nullopt, 0, bb.picard.iterations));
        timing.add("basis_direct_s", now_seconds() - tb);
      }
      const EnrichedSpace enr_d = enrich(ws.fine, ws.nbs, ws.pou, bb.offline, std::move(direct));
      const OnlineStepResult sol_d =
          online_picard_step(ws.fine, enr_d, bb.cond, f0, nullptr, std::nullopt);
      const double t_direct = now_seconds() - t0;

      t0 = now_seconds();
      std::vector<OnlineBasis> predicted;
      predicted.reserve(ws.n_vertices());
      for (int j = 0; j < ws.n_vertices(); ++j) {
        const double tb = now_seconds();
        predicted.push_back(predicted_basis(ws, j, art.model, art.bounds, field.values, 0,
                                            bb.picard.iterations));
        timing.add("basis_predict_s", now_seconds() - tb);
      }
      const EnrichedSpace enr_p =
          enrich(ws.fine, ws.nbs, ws.pou, bb.offline, std::move(predicted));
      const OnlineStepResult sol_p =
          online_picard_step(ws.fine, enr_p, bb.cond, f0, nullptr, std::nullopt);
      const double t_pred = now_seconds() - t0;

      assert_shared_offline(enr_d, enr_p);
      timing.add("solve_online_s", t_shared + t_direct);
      timing.add("solve_predicted_s", t_shared + t_pred);

      const SolutionError err =
          solution_error(sol_p.fine_rep, sol_d.fine_rep, ws.mass, ws.unit_stiffness);
      const bool equal = same_vector(sol_p.fine_rep, sol_d.fine_rep);
      l2[i] = settle(err.l2, equal);
      h1[i] = settle(err.h1, equal);
      if ((err.l2.degenerate || err.h1.degenerate) && !equal) degenerate[i] = 1;
    });

    row.l2 = aggregate(l2, 0);
    row.h1 = aggregate(h1, 0);
    for (char d : degenerate) row.degenerate += d;
    report.per_nb.push_back(std::move(row));
  }

  CsvWriter basis_csv(cfg.out_dir + "/steady_basis_error.csv");
  basis_csv.row({"nb", "mean_pct", "min_pct", "max_pct", "one_sample_pct"});
  CsvWriter l2_csv(cfg.out_dir + "/steady_solution_l2.csv");
  l2_csv.row({"nb", "mean_pct", "min_pct", "max_pct", "one_sample_pct"});
  CsvWriter h1_csv(cfg.out_dir + "/steady_solution_h1.csv");
  h1_csv.row({"nb", "mean_pct", "min_pct", "max_pct", "one_sample_pct"});
  for (const SteadyNbReport& row : report.per_nb) {
    std::vector<std::string> cells = {fmt(row.nb)};
    append_cells(cells, report_cells(row.basis.cer, 100.0));
    basis_csv.row(cells);
    cells = {fmt(row.nb)};
    append_cells(cells, report_cells(row.l2, 100.0));
    l2_csv.row(cells);
    cells = {fmt(row.nb)};
    append_cells(cells, report_cells(row.h1, 100.0));
    h1_csv.row(cells);
  }
  basis_csv.finish();
  l2_csv.finish();
  h1_csv.finish();
  timing.write(cfg.out_dir + "/timing_raw_steady.csv");
  return report;
}

TimeReport run_time_dependent(const Workspace& ws) {
  const RunConfig& cfg = ws.cfg;
  std::filesystem::create_directories(cfg.out_dir);
  const std::vector<int> schedule = schedule_enrichment(cfg.n_steps, cfg.enrichment_steps);
  const int n_test = cfg.test_samples;
  const int S = cfg.n_steps;

  TimingLog timing;
  TimeReport report;
  for (int nb : cfg.nb_list) {
    TimeNbReport row;
    row.nb = nb;
    row.steps = schedule;

    // One dataset and network per enrichment step.
    std::vector<TrainArtifacts> models;
    models.reserve(schedule.size());
    for (std::size_t e = 0; e < schedule.size(); ++e) {
      const Dataset ds = obtain_dataset(ws, nb, schedule[e]);
      if (e == 0) assert_seed_disjoint(ws, ds);
      TrainArtifacts art = obtain_model(ws, ds, nb, schedule[e]);
      row.basis.push_back(eval_basis(ws, ds, art.model, art.bounds, &art.untrained));
      models.push_back(std::move(art));
    }

    std::vector<double> last_l2(n_test), last_h1(n_test), boch_l2(n_test), boch_h1(n_test);
    std::vector<std::vector<double>> step_l2(schedule.size(),
                                             std::vector<double>(n_test, 0.0));
    auto step_h1 = step_l2;
    std::vector<char> degenerate(n_test, 0);
    std::vector<double> sup_direct(n_test, 0.0), sup_pred(n_test, 0.0), sup_diff(n_test, 0.0);

    parallel_for(n_test, cfg.threads, [&](int i) {
      const int nu = cfg.train_samples + i;
      const PermeabilityField field = sample_field(ws.kle, test_field_seed(ws, nu),
                                                   cfg.kappa_range);
      double t0 = now_seconds();
      const TimeBackbone bb = time_backbone(ws, field.values, nb, S);
      const double t_shared = now_seconds() - t0;

      // Accepted states s = 1..S; event steps get overwritten below.
      std::vector<std::vector<double>> traj_d(bb.fine_states.begin() + 1, bb.fine_states.end());
      std::vector<std::vector<double>> traj_p = traj_d;

      double t_direct = 0.0, t_pred = 0.0;
      for (std::size_t e = 0; e < schedule.size(); ++e) {
        const int s = schedule[e];
        const double* p_prev = bb.fine_states[s - 1].data();
        const std::vector<double>& f_s = bb.f_at[s];

        t0 = now_seconds();
        std::vector<OnlineBasis> direct;
        direct.reserve(ws.n_vertices());
        for (int j = 0; j < ws.n_vertices(); ++j) {
          const double tb = now_seconds();
          direct.push_back(online_basis_for(ws.fine, ws.nbs[j], bb.conds[s], bb.fine_states[s],
                                            f_s, p_prev, cfg.tau, s, bb.picard_iters[s]));
          timing.add("basis_direct_s", now_seconds() - tb);
        }
        const EnrichedSpace enr_d =
            enrich(ws.fine, ws.nbs, ws.pou, bb.offline, std::move(direct));
        const OnlineStepResult sol_d =
            online_picard_step(ws.fine, enr_d, bb.conds[s], f_s, p_prev, cfg.tau);
        t_direct += now_seconds() - t0;

        t0 = now_seconds();
        std::vector<OnlineBasis> predicted;
        predicted.reserve(ws.n_vertices());
        for (int j = 0; j < ws.n_vertices(); ++j) {
          const double tb = now_seconds();
          predicted.push_back(predicted_basis(ws, j, models[e].model, models[e].bounds,
                                              field.values, s, bb.picard_iters[s]));
          timing.add("basis_predict_s", now_seconds() - tb);
        }
        const EnrichedSpace enr_p =
            enrich(ws.fine, ws.nbs, ws.pou, bb.offline, std::move(predicted));
        const OnlineStepResult sol_p =
            online_picard_step(ws.fine, enr_p, bb.conds[s], f_s, p_prev, cfg.tau);
        t_pred += now_seconds() - t0;

        assert_shared_offline(enr_d, enr_p);
        traj_d[s - 1] = sol_d.fine_rep;
        traj_p[s - 1] = sol_p.fine_rep;

        const SolutionError err =
            solution_error(sol_p.fine_rep, sol_d.fine_rep, ws.mass, ws.unit_stiffness);
        const bool equal = same_vector(sol_p.fine_rep, sol_d.fine_rep);
        step_l2[e][i] = settle(err.l2, equal);
        step_h1[e][i] = settle(err.h1, equal);
        if ((err.l2.degenerate || err.h1.degenerate) && !equal) degenerate[i] = 1;
      }
      timing.add("solve_online_s", t_shared + t_direct);
      timing.add("solve_predicted_s", t_shared + t_pred);

      const SolutionError last =
          solution_error(traj_p.back(), traj_d.back(), ws.mass, ws.unit_stiffness);
      const bool last_equal = same_vector(traj_p.back(), traj_d.back());
      last_l2[i] = settle(last.l2, last_equal);
      last_h1[i] = settle(last.h1, last_equal);

      const SolutionError boch =
          bochner_errors(traj_p, traj_d, ws.mass, ws.unit_stiffness, cfg.tau);
      const bool traj_equal = same_trajectory(traj_p, traj_d);
      boch_l2[i] = settle(boch.l2, traj_equal);
      boch_h1[i] = settle(boch.h1, traj_equal);
      if ((last.l2.degenerate || boch.l2.degenerate) && !traj_equal) degenerate[i] = 1;

      for (std::size_t s = 0; s < traj_d.size(); ++s) {
        sup_direct[i] = std::max(sup_direct[i], sup_abs(traj_d[s]));
        sup_pred[i] = std::max(sup_pred[i], sup_abs(traj_p[s]));
        for (std::size_t k = 0; k < traj_d[s].size(); ++k) {
          sup_diff[i] = std::max(sup_diff[i], std::abs(traj_p[s][k] - traj_d[s][k]));
        }
      }
    });

    row.last_l2 = aggregate(last_l2, 0);
    row.last_h1 = aggregate(last_h1, 0);
    row.boch_l2 = aggregate(boch_l2, 0);
    row.boch_h1 = aggregate(boch_h1, 0);
    for (std::size_t e = 0; e < schedule.size(); ++e) {
      row.step_l2.push_back(aggregate(step_l2[e], 0));
      row.step_h1.push_back(aggregate(step_h1[e], 0));
    }
    for (char d : degenerate) row.degenerate += d;
    for (int i = 0; i < n_test; ++i) {
      row.max_abs_direct = std::max(row.max_abs_direct, sup_direct[i]);
      row.max_abs_pred = std::max(row.max_abs_pred, sup_pred[i]);
      row.max_abs_diff = std::max(row.max_abs_diff, sup_diff[i]);
    }

    CsvWriter series(cfg.out_dir + "/time_series_nb" + std::to_string(nb) + ".csv");
    series.row({"step", "l2_mean_pct", "l2_min_pct", "l2_max_pct", "l2_one_sample_pct",
                "h1_mean_pct", "h1_min_pct", "h1_max_pct", "h1_one_sample_pct"});
    for (std::size_t e = 0; e < schedule.size(); ++e) {
      std::vector<std::string> cells = {fmt(schedule[e])};
      append_cells(cells, report_cells(row.step_l2[e], 100.0));
      append_cells(cells, report_cells(row.step_h1[e], 100.0));
      series.row(cells);
    }
    series.finish();

    report.per_nb.push_back(std::move(row));
  }

  CsvWriter basis_csv(cfg.out_dir + "/time_basis_error.csv");
  basis_csv.row({"nb", "step", "mean_pct", "min_pct", "max_pct", "one_sample_pct"});
  CsvWriter last_l2_csv(cfg.out_dir + "/time_solution_l2_last.csv");
  last_l2_csv.row({"nb", "mean_pct", "min_pct", "max_pct", "one_sample_pct"});
  CsvWriter last_h1_csv(cfg.out_dir + "/time_solution_h1_last.csv");
  last_h1_csv.row({"nb", "mean_pct", "min_pct", "max_pct", "one_sample_pct"});
  CsvWriter boch_l2_csv(cfg.out_dir + "/time_bochner_l2.csv");
  boch_l2_csv.row({"nb", "mean_pct", "min_pct", "max_pct", "one_sample_pct"});
  CsvWriter boch_h1_csv(cfg.out_dir + "/time_bochner_h1.csv");
  boch_h1_csv.row({"nb", "mean_pct", "min_pct", "max_pct", "one_sample_pct"});
  for (const TimeNbReport& row : report.per_nb) {
    for (std::size_t e = 0; e < row.steps.size(); ++e) {
      std::vector<std::string> cells = {fmt(row.nb), fmt(row.steps[e])};
      append_cells(cells, report_cells(row.basis[e].cer, 100.0));
      basis_csv.row(cells);
    }
    std::vector<std::string> cells = {fmt(row.nb)};
    append_cells(cells, report_cells(row.last_l2, 100.0));
    last_l2_csv.row(cells);
    cells = {fmt(row.nb)};
    append_cells(cells, report_cells(row.last_h1, 100.0));
    last_h1_csv.row(cells);
    cells = {fmt(row.nb)};
    append_cells(cells, report_cells(row.boch_l2, 100.0));
    boch_l2_csv.row(cells);
    cells = {fmt(row.nb)};
    append_cells(cells, report_cells(row.boch_h1, 100.0));
    boch_h1_csv.row(cells);
  }
  basis_csv.finish();
  last_l2_csv.finish();
  last_h1_csv.finish();
  boch_l2_csv.finish();
  boch_h1_csv.finish();
  timing.write(cfg.out_dir + "/timing_raw_time.csv");
  return report;
}

int report_timing(const std::string& out_dir) {
  std::map<std::string, std::vector<double>> quantities;
  for (const char* name : {"timing_raw_steady.csv", "timing_raw_time.csv"}) {
    const std::string path = out_dir + "/" + name;
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      const std::size_t comma = line.find(',');
      if (comma == std::string::npos) {
        throw IoError(path + ": malformed row \"" + line + "\"");
      }
      quantities[line.substr(0, comma)].push_back(std::stod(line.substr(comma + 1)));
    }
  }
  if (quantities.empty()) {
    throw ConfigError("report_timing: no raw timing samples under " + out_dir +
                      "; run the steady or time experiment first");
  }

  CsvWriter csv(out_dir + "/timing.csv");
  csv.row({"quantity", "count", "mean", "min", "max"});
  for (const auto& [name, vals] : quantities) {
    const ErrorReport agg = aggregate(vals, std::nullopt);
    csv.row({name, fmt(int(vals.size())), fmt(agg.mean), fmt(agg.min), fmt(agg.max)});
  }
  csv.finish();
  return int(quantities.size());
}

}  // namespace msrich
