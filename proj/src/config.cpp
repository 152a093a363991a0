#include "msrich/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "msrich/errors.hpp"

namespace msrich {

namespace {

using nlohmann::json;

// Tracks which keys of one JSON object were consumed so finish() can reject
// the rest by name.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) {
      throw ConfigError("config: " + label() + " must be a JSON object");
    }
  }

  bool has(const std::string& key) {
    if (!obj_.contains(key)) return false;
    seen_.insert(key);
    return true;
  }

  const json& at(const std::string& key) const { return obj_.at(key); }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void read_int(const std::string& key, int& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number_integer()) {
      throw ConfigError("config: " + key_path(key) + " must be an integer");
    }
    out = v.get<int>();
  }

  void read_u64(const std::string& key, std::uint64_t& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw ConfigError("config: " + key_path(key) + " must be a non-negative integer");
    }
    out = v.get<std::uint64_t>();
  }

  void read_double(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_number()) {
      throw ConfigError("config: " + key_path(key) + " must be a number");
    }
    out = v.get<double>();
  }

  void read_string(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_string()) {
      throw ConfigError("config: " + key_path(key) + " must be a string");
    }
    out = v.get<std::string>();
  }

  void read_int_list(const std::string& key, std::vector<int>& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (!v.is_array()) {
      throw ConfigError("config: " + key_path(key) + " must be an array of integers");
    }
    out.clear();
    for (const json& e : v) {
      if (!e.is_number_integer()) {
        throw ConfigError("config: " + key_path(key) + " must contain only integers");
      }
      out.push_back(e.get<int>());
    }
  }

  void finish() const {
    for (const auto& item : obj_.items()) {
      if (!seen_.count(item.key())) {
        throw ConfigError("config: unknown key " + key_path(item.key()));
      }
    }
  }

 private:
  std::string label() const { return path_.empty() ? std::string("top level") : path_; }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void positive(double v, const char* name) {
  if (!(v > 0.0)) {
    throw ConfigError("config: " + std::string(name) + " must be positive, got " +
                      std::to_string(v));
  }
}

void at_least(int v, int lo, const char* name) {
  if (v < lo) {
    throw ConfigError("config: " + std::string(name) + " must be at least " + std::to_string(lo) +
                      ", got " + std::to_string(v));
  }
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& err) {
    throw ConfigError(std::string("config: ") + err.what());
  }

  RunConfig cfg;
  ObjectReader root(doc, "");

  root.read_int("fine_n", cfg.fine_n);
  root.read_int("coarse_n", cfg.coarse_n);

  if (root.has("kle")) {
    ObjectReader kle(root.at("kle"), "kle");
    kle.read_double("sigma2", cfg.covariance.sigma2);
    kle.read_double("eta1", cfg.covariance.eta1);
    kle.read_double("eta2", cfg.covariance.eta2);
    kle.read_double("energy_fraction", cfg.energy_fraction);
    kle.finish();
  }
  if (root.has("kappa_range")) {
    ObjectReader range(root.at("kappa_range"), "kappa_range");
    range.read_double("min", cfg.kappa_range.min);
    range.read_double("max", cfg.kappa_range.max);
    range.finish();
  }

  root.read_int_list("nb_list", cfg.nb_list);
  root.read_int("train_samples", cfg.train_samples);
  root.read_int("test_samples", cfg.test_samples);

  if (root.has("picard")) {
    ObjectReader picard(root.at("picard"), "picard");
    picard.read_double("delta0", cfg.picard.delta0);
    picard.read_int("max_iters", cfg.picard.max_iters);
    picard.finish();
  }
  root.read_double("tau", cfg.tau);
  root.read_int("n_steps", cfg.n_steps);
  root.read_int_list("enrichment_steps", cfg.enrichment_steps);
  root.read_string("source", cfg.source);

  if (root.has("train")) {
    ObjectReader train(root.at("train"), "train");
    train.read_double("learning_rate", cfg.train.learning_rate);
    train.read_int("batch_size", cfg.train.batch_size);
    train.read_int("epochs", cfg.train.epochs);
    train.read_double("validation_fraction", cfg.train.validation_fraction);
    train.read_u64("seed", cfg.train.seed);
    train.finish();
  }
  root.read_int_list("hidden_widths", cfg.hidden_widths);

  root.read_u64("seed", cfg.seed);
  root.read_string("out_dir", cfg.out_dir);
  root.read_int("threads", cfg.threads);
  root.finish();

  validate_config(cfg);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_config: cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

void validate_config(const RunConfig& cfg) {
  at_least(cfg.fine_n, 2, "fine_n");
  at_least(cfg.coarse_n, 1, "coarse_n");
  if (cfg.fine_n % cfg.coarse_n != 0) {
    throw ConfigError("config: fine_n " + std::to_string(cfg.fine_n) +
                      " is not divisible by coarse_n " + std::to_string(cfg.coarse_n));
  }
  const int k = cfg.fine_n / cfg.coarse_n;
  if (k < 2) {
    throw ConfigError("config: fine_n/coarse_n must be at least 2, got " + std::to_string(k));
  }

  positive(cfg.covariance.sigma2, "kle.sigma2");
  positive(cfg.covariance.eta1, "kle.eta1");
  positive(cfg.covariance.eta2, "kle.eta2");
  if (!(cfg.energy_fraction > 0.0 && cfg.energy_fraction <= 1.0)) {
    throw ConfigError("config: kle.energy_fraction must lie in (0, 1], got " +
                      std::to_string(cfg.energy_fraction));
  }
  positive(cfg.kappa_range.min, "kappa_range.min");
  if (!(cfg.kappa_range.max > cfg.kappa_range.min)) {
    throw ConfigError("config: kappa_range.max must exceed kappa_range.min");
  }

  if (cfg.nb_list.empty()) throw ConfigError("config: nb_list must not be empty");
  const int snapshot_floor = 4 * k;  // boundary nodes of a corner patch
  for (int nb : cfg.nb_list) {
    if (nb < 1 || nb > snapshot_floor) {
      throw ConfigError("config: nb_list entry " + std::to_string(nb) +
                        " outside [1, " + std::to_string(snapshot_floor) +
                        "] supported by the smallest neighborhood");
    }
  }
  at_least(cfg.train_samples, 1, "train_samples");
  at_least(cfg.test_samples, 1, "test_samples");

  positive(cfg.picard.delta0, "picard.delta0");
  at_least(cfg.picard.max_iters, 1, "picard.max_iters");
  positive(cfg.tau, "tau");
  at_least(cfg.n_steps, 1, "n_steps");
  for (int s : cfg.enrichment_steps) {
    if (s < 1 || s > cfg.n_steps) {
      throw ConfigError("config: enrichment step " + std::to_string(s) + " outside [1, " +
                        std::to_string(cfg.n_steps) + "]");
    }
  }
  if (cfg.source != "unit" && cfg.source != "zero" && cfg.source != "sincos") {
    throw ConfigError("config: unknown source \"" + cfg.source +
                      "\" (expected unit, zero or sincos)");
  }

  positive(cfg.train.learning_rate, "train.learning_rate");
  at_least(cfg.train.batch_size, 1, "train.batch_size");
  at_least(cfg.train.epochs, 1, "train.epochs");
  if (!(cfg.train.validation_fraction >= 0.0 && cfg.train.validation_fraction < 1.0)) {
    throw ConfigError("config: train.validation_fraction must lie in [0, 1), got " +
                      std::to_string(cfg.train.validation_fraction));
  }
  if (cfg.hidden_widths.empty()) throw ConfigError("config: hidden_widths must not be empty");
  for (int w : cfg.hidden_widths) {
    if (w < 1) throw ConfigError("config: hidden_widths entries must be positive");
  }

  if (cfg.out_dir.empty()) throw ConfigError("config: out_dir must not be empty");
  at_least(cfg.threads, 1, "threads");
}

}  // namespace msrich
