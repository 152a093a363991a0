#include "msrich/dataset.hpp"

#include <string>

#include "msrich/binary_io.hpp"
#include "msrich/errors.hpp"

namespace msrich {

namespace {

void check_dataset(const Dataset& dataset, const char* caller) {
  const DatasetHeader& h = dataset.header;
  if (h.m == 0 || h.n_neighborhoods == 0 || h.samples_per_neighborhood == 0) {
    throw ConfigError(std::string(caller) + ": header has a zero dimension");
  }
  if (h.experiment > 1) {
    throw ConfigError(std::string(caller) + ": unknown experiment tag " +
                      std::to_string(h.experiment));
  }
  if (dataset.records.size() != dataset.expected_records()) {
    throw DimensionError(std::string(caller) + ": " + std::to_string(dataset.records.size()) +
                         " records, header implies " + std::to_string(dataset.expected_records()));
  }
  for (std::size_t r = 0; r < dataset.records.size(); ++r) {
    const DatasetRecord& rec = dataset.records[r];
    if (rec.neighborhood >= h.n_neighborhoods) {
      throw DimensionError(std::string(caller) + ": record " + std::to_string(r) +
                           " references neighborhood " + std::to_string(rec.neighborhood) +
                           " of " + std::to_string(h.n_neighborhoods));
    }
    if (rec.kappa.size() != h.m || rec.phi.size() != h.m) {
      throw DimensionError(std::string(caller) + ": record " + std::to_string(r) +
                           " has patch lengths " + std::to_string(rec.kappa.size()) + "/" +
                           std::to_string(rec.phi.size()) + ", header says " +
                           std::to_string(h.m));
    }
  }
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
  check_dataset(dataset, "save_dataset");
  BinaryWriter out(path);
  const DatasetHeader& h = dataset.header;
  out.magic("MSRD");
  out.u32(kDatasetFormatVersion);
  out.u32(h.m);
  out.u32(h.n_neighborhoods);
  out.u32(h.samples_per_neighborhood);
  out.u8(h.experiment);
  out.u32(h.time_step);
  for (const DatasetRecord& rec : dataset.records) {
    out.u32(rec.neighborhood);
    out.u64(rec.seed);
    out.f64_array(rec.kappa);
    out.f64_array(rec.phi);
  }
  out.finish();
}

Dataset load_dataset(const std::string& path) {
  BinaryReader in(path);
  in.expect_magic("MSRD");
  const std::uint32_t version = in.u32();
  if (version != kDatasetFormatVersion) {
    throw IoError("load_dataset: unsupported version " + std::to_string(version) + " in " + path);
  }

  Dataset dataset;
  DatasetHeader& h = dataset.header;
  h.m = in.u32();
  h.n_neighborhoods = in.u32();
  h.samples_per_neighborhood = in.u32();
  h.experiment = in.u8();
  h.time_step = in.u32();
  if (h.m == 0 || h.m > (1u << 24)) {
    throw IoError("load_dataset: implausible patch length " + std::to_string(h.m) + " in " + path);
  }
  if (h.n_neighborhoods == 0 || h.n_neighborhoods > (1u << 24) ||
      h.samples_per_neighborhood == 0 || h.samples_per_neighborhood > (1u << 24)) {
    throw IoError("load_dataset: implausible record counts in " + path);
  }
  if (h.experiment > 1) {
    throw IoError("load_dataset: unknown experiment tag in " + path);
  }

  dataset.records.resize(dataset.expected_records());
  for (DatasetRecord& rec : dataset.records) {
    rec.neighborhood = in.u32();
    rec.seed = in.u64();
    if (rec.neighborhood >= h.n_neighborhoods) {
      throw IoError("load_dataset: record references neighborhood " +
                    std::to_string(rec.neighborhood) + " of " +
                    std::to_string(h.n_neighborhoods) + " in " + path);
    }
    rec.kappa = in.f64_array(h.m);
    rec.phi = in.f64_array(h.m);
  }
  in.expect_eof();
  return dataset;
}

}  // namespace msrich
