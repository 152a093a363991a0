#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "msrich/errors.hpp"
#include "msrich/pipeline.hpp"

namespace {

using namespace msrich;

// Steps a gen-data/train/eval-basis invocation acts on: steady mode is the
// single empty step, time mode is either the explicit --step or the whole
// enrichment schedule.
std::vector<std::optional<int>> selected_steps(const RunConfig& cfg, const std::string& mode,
                                               std::optional<int> step) {
  if (mode == "steady") {
    if (step) throw ConfigError("--step only applies to --mode time");
    return {std::nullopt};
  }
  if (mode != "time") throw ConfigError("unknown mode \"" + mode + "\"");
  if (step) return {step};
  std::vector<std::optional<int>> steps;
  for (int s : schedule_enrichment(cfg.n_steps, cfg.enrichment_steps)) steps.push_back(s);
  return steps;
}

std::string step_label(std::optional<int> step) {
  return step ? "step " + std::to_string(*step) : std::string("steady");
}

int cmd_gen_data(const Workspace& ws, const std::string& mode, std::optional<int> step) {
  for (std::optional<int> s : selected_steps(ws.cfg, mode, step)) {
    for (int nb : ws.cfg.nb_list) {
      const std::string path = dataset_path(ws.cfg, nb, s);
      const bool existed = std::filesystem::exists(path);
      const Dataset ds = obtain_dataset(ws, nb, s);
      std::printf("%s %s: %zu records (%s, nb %d)\n", existed ? "kept" : "wrote", path.c_str(),
                  ds.records.size(), step_label(s).c_str(), nb);
    }
  }
  return 0;
}

int cmd_train(const Workspace& ws, const std::string& mode, std::optional<int> step) {
  for (std::optional<int> s : selected_steps(ws.cfg, mode, step)) {
    for (int nb : ws.cfg.nb_list) {
      const std::string path = model_path(ws.cfg, nb, s);
      const bool existed = std::filesystem::exists(path);
      const Dataset ds = obtain_dataset(ws, nb, s);
      const TrainArtifacts art = obtain_model(ws, ds, nb, s);
      if (existed) {
        std::printf("kept %s (%s, nb %d)\n", path.c_str(), step_label(s).c_str(), nb);
      } else {
        std::printf("wrote %s (%s, nb %d): final train loss %.6g\n", path.c_str(),
                    step_label(s).c_str(), nb, art.history.train_loss.back());
      }
    }
  }
  return 0;
}

int cmd_eval_basis(const Workspace& ws, const std::string& mode, std::optional<int> step) {
  const std::string csv_path = ws.cfg.out_dir + "/basis_eval_" + mode + ".csv";
  std::filesystem::create_directories(ws.cfg.out_dir);
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw IoError("cannot open " + csv_path + " for writing");
  csv << "nb,step,mean_pct,min_pct,max_pct,one_sample_pct,rmse,rmse_untrained\n";
  for (std::optional<int> s : selected_steps(ws.cfg, mode, step)) {
    for (int nb : ws.cfg.nb_list) {
      const Dataset ds = obtain_dataset(ws, nb, s);
      const TrainArtifacts art = obtain_model(ws, ds, nb, s);
      const BasisEval ev = eval_basis(ws, ds, art.model, art.bounds, &art.untrained);
      char line[256];
      std::snprintf(line, sizeof(line), "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", nb,
                    s.value_or(0), ev.cer.mean * 100.0, ev.cer.min * 100.0, ev.cer.max * 100.0,
                    ev.cer.highlight * 100.0, ev.rmse.value, ev.rmse_untrained.value);
      csv << line;
      std::printf("%s, nb %d: basis error mean %.4g%% (min %.4g%%, max %.4g%%), "
                  "rmse %.4g vs untrained %.4g\n",
                  step_label(s).c_str(), nb, ev.cer.mean * 100.0, ev.cer.min * 100.0,
                  ev.cer.max * 100.0, ev.rmse.value, ev.rmse_untrained.value);
    }
  }
  csv.flush();
  if (!csv) throw IoError("write failure on " + csv_path);
  std::printf("wrote %s\n", csv_path.c_str());
  return 0;
}

int cmd_run_steady(const Workspace& ws) {
  const SteadyReport rep = run_steady(ws);
  for (const SteadyNbReport& row : rep.per_nb) {
    std::printf("nb %d: basis mean %.4g%%, solution L2 mean %.4g%%, H1 mean %.4g%%",
                row.nb, row.basis.cer.mean * 100.0, row.l2.mean * 100.0, row.h1.mean * 100.0);
    if (row.degenerate > 0) std::printf(", %d degenerate", row.degenerate);
    std::printf("\n");
  }
  std::printf("tables under %s\n", ws.cfg.out_dir.c_str());
  return 0;
}

int cmd_run_time(const Workspace& ws) {
  const TimeReport rep = run_time_dependent(ws);
  for (const TimeNbReport& row : rep.per_nb) {
    std::printf("nb %d: last-step L2 mean %.4g%%, Bochner L2 mean %.4g%%, "
                "Bochner H1 mean %.4g%%",
                row.nb, row.last_l2.mean * 100.0, row.boch_l2.mean * 100.0,
                row.boch_h1.mean * 100.0);
    if (row.degenerate > 0) std::printf(", %d degenerate", row.degenerate);
    std::printf("\n");
  }
  std::printf("tables under %s\n", ws.cfg.out_dir.c_str());
  return 0;
}

int cmd_report(const RunConfig& cfg) {
  const int n = report_timing(cfg.out_dir);
  std::printf("wrote %s/timing.csv: %d quantities\n", cfg.out_dir.c_str(), n);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multiscale solvers for the nonlinear Richards problem with a learned "
               "online basis"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::vector<int> nb_list;
  int threads = 0;
  app.add_option("--config", config_path, "JSON config file; defaults apply without one");
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  CLI::Option* seed_opt = app.add_option("--seed", seed, "base seed (overrides the config)");
  app.add_option("--nb", nb_list, "online basis counts, comma separated (overrides the config)")
      ->delimiter(',');
  CLI::Option* threads_opt =
      app.add_option("--threads", threads, "worker threads (overrides the config)");

  std::string mode = "steady";
  int step_value = 0;
  auto add_mode_flags = [&](CLI::App* sub) {
    sub->add_option("--mode", mode, "steady or time")
        ->check(CLI::IsMember({"steady", "time"}));
    sub->add_option("--step", step_value,
                    "time-step index; time mode covers the whole enrichment "
                    "schedule without it");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate sample-pair datasets");
  add_mode_flags(gen);
  CLI::App* train = app.add_subcommand("train", "train the patch-to-basis networks");
  add_mode_flags(train);
  CLI::App* eval = app.add_subcommand("eval-basis", "held-out basis errors and RMSE");
  add_mode_flags(eval);
  CLI::App* steady = app.add_subcommand("run-steady", "steady experiment, all tables");
  CLI::App* time_sub = app.add_subcommand("run-time", "time-dependent experiment, all tables");
  CLI::App* report = app.add_subcommand("report", "aggregate raw timing samples");

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (seed_opt->count() > 0) cfg.seed = seed;
    if (!nb_list.empty()) cfg.nb_list = nb_list;
    if (threads_opt->count() > 0) cfg.threads = threads;

    if (report->parsed()) {
      validate_config(cfg);
      return cmd_report(cfg);
    }
    CLI::App* modal = gen->parsed() ? gen : train->parsed() ? train : eval;
    const std::optional<int> step =
        modal->count("--step") > 0 ? std::optional<int>(step_value) : std::nullopt;
    const Workspace ws = make_workspace(cfg);
    if (gen->parsed()) return cmd_gen_data(ws, mode, step);
    if (train->parsed()) return cmd_train(ws, mode, step);
    if (eval->parsed()) return cmd_eval_basis(ws, mode, step);
    if (steady->parsed()) return cmd_run_steady(ws);
    if (time_sub->parsed()) return cmd_run_time(ws);
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}
