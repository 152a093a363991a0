#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msrich/mlp.hpp"
#include "msrich/picard.hpp"
#include "msrich/random_field.hpp"

namespace msrich {

// One experiment description, shared by every CLI subcommand. Parsed from a
// strict JSON document: every key is known, unknown or ill-typed keys fail
// with the offending key path in the message.

struct RunConfig {
  int fine_n = 32;
  int coarse_n = 4;

  CovarianceParams covariance;
  double energy_fraction = 0.95;
  KappaRange kappa_range;

  std::vector<int> nb_list = {2, 4, 6, 8, 12, 16};
  int train_samples = 200;  // per neighborhood
  int test_samples = 50;    // per neighborhood

  PicardConfig picard;
  double tau = 2.5e-6;
  int n_steps = 20;
  std::vector<int> enrichment_steps;  // empty means the default schedule
  std::string source = "unit";        // unit | zero | sincos

  TrainConfig train;
  std::vector<int> hidden_widths = {1600, 1472, 1345};

  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int threads = 1;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

// Range and consistency checks shared by parse_config and the CLI override
// path. Throws ConfigError naming the offending field.
void validate_config(const RunConfig& cfg);

}  // namespace msrich
