#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "msrich/config.hpp"
#include "msrich/dataset.hpp"
#include "msrich/grid.hpp"
#include "msrich/metrics.hpp"
#include "msrich/mlp.hpp"
#include "msrich/offline.hpp"
#include "msrich/online.hpp"
#include "msrich/picard.hpp"
#include "msrich/pou.hpp"
#include "msrich/random_field.hpp"
#include "msrich/sparse.hpp"

namespace msrich {

// Experiment drivers. Everything below is deterministic for a fixed config:
// fields, datasets, training and the emitted tables reproduce bit by bit.
// Wall-clock measurements are the only exception and live in separate files.

// State shared by every sample of a run: grids, neighborhoods, partition of
// unity, expansion basis of the log-permeability, metric operators and the
// nodal source.
struct Workspace {
  RunConfig cfg;
  FineGrid fine;
  CoarseGrid coarse;
  std::vector<Neighborhood> nbs;
  PartitionOfUnity pou;
  KleBasis kle;
  CsrMatrix mass;            // consistent fine mass
  CsrMatrix unit_stiffness;  // coefficient 1, for the H1 seminorm
  SourceFn source;

  int n_vertices() const { return static_cast<int>(nbs.size()); }
};

Workspace make_workspace(const RunConfig& cfg);

// Seed arithmetic. Dataset records draw their field from (base seed, j, nu);
// the solution-comparison phase draws one coherent global field per test
// sample from the sentinel stream j = n_vertices, which no record can use.
// attempt > 0 salts deterministic retries of failed records.
std::uint64_t record_seed(const Workspace& ws, int neighborhood, int sample, int attempt);
std::uint64_t test_field_seed(const Workspace& ws, int sample);

// Output-file naming inside cfg.out_dir, shared by the drivers and the CLI.
std::string dataset_path(const RunConfig& cfg, int nb, std::optional<int> time_step);
std::string model_path(const RunConfig& cfg, int nb, std::optional<int> time_step);
std::string loss_path(const RunConfig& cfg, int nb, std::optional<int> time_step);

// Builds one sample-pair dataset for basis count nb. Steady mode
// (time_step empty) targets the post-convergence enrichment event; time mode
// targets the event at the given 1-based step of the backward-Euler march.
// Records failing the pipeline are retried with salted seeds; more than 1% of
// retried records (or any record failing three attempts) aborts the run.
Dataset gen_dataset(const Workspace& ws, int nb, std::optional<int> time_step);

struct TrainArtifacts {
  MlpModel model;
  NormalizationBounds bounds;
  TrainHistory history;
  MlpModel untrained;  // same initialization, for baseline comparisons
};

// Trains the patch-to-basis network on the first train_samples records of
// every neighborhood; the remaining records are the held-out test split.
TrainArtifacts train_on_dataset(const Workspace& ws, const Dataset& ds, int nb,
                                std::optional<int> time_step);

// Load-or-build access to the persisted artifacts. An existing dataset is
// header-checked against the config and an existing model against the dataset;
// stale files are rejected rather than silently reused. A loaded model's
// untrained twin is re-initialized from the same derived seed.
Dataset obtain_dataset(const Workspace& ws, int nb, std::optional<int> time_step);
TrainArtifacts obtain_model(const Workspace& ws, const Dataset& ds, int nb,
                            std::optional<int> time_step);

struct BasisEval {
  ErrorReport cer;  // per-record relative l2 over the test split, ratios
  RmseResult rmse;
  RmseResult rmse_untrained;  // meaningful only when a baseline was supplied
};

BasisEval eval_basis(const Workspace& ws, const Dataset& ds, const MlpModel& model,
                     const NormalizationBounds& bounds, const MlpModel* untrained);

struct SteadyNbReport {
  int nb = 0;
  BasisEval basis;
  ErrorReport l2;  // predicted vs direct online solution, ratios
  ErrorReport h1;
  int degenerate = 0;  // samples with an undefined ratio
  TrainHistory history;
};

struct SteadyReport {
  std::vector<SteadyNbReport> per_nb;
};

// Full steady experiment: per nb generate-or-load the dataset, train-or-load
// the network, evaluate basis errors on the test split, then solve every test
// sample with direct and predicted online bases and compare. Writes the error
// tables, loss curves and raw timing samples into cfg.out_dir.
SteadyReport run_steady(const Workspace& ws);

struct TimeNbReport {
  int nb = 0;
  std::vector<int> steps;  // enrichment schedule
  std::vector<BasisEval> basis;  // one per enrichment step
  ErrorReport last_l2, last_h1;
  ErrorReport boch_l2, boch_h1;
  std::vector<ErrorReport> step_l2, step_h1;  // per enrichment step
  int degenerate = 0;
  double max_abs_direct = 0.0;  // trajectory sup norms, for zero-source checks
  double max_abs_pred = 0.0;
  double max_abs_diff = 0.0;
};

struct TimeReport {
  std::vector<TimeNbReport> per_nb;
};

// Full time-dependent experiment: offline backbone march with enrichment
// events at the configured schedule, one network per event step, direct and
// predicted pipelines sharing the backbone. Writes last-step and Bochner
// tables plus the per-step series CSV into cfg.out_dir.
TimeReport run_time_dependent(const Workspace& ws);

// Aggregates the raw timing samples the drivers wrote into
// out_dir/timing.csv with one row per quantity: count, mean, min, max.
// Informational only; returns the number of quantities found.
int report_timing(const std::string& out_dir);

}  // namespace msrich
