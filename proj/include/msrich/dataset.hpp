#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace msrich {

// Binary sample-pair container: one record per (neighborhood, sample) holding
// the kappa patch and the online basis target in canonical patch coordinates.

struct DatasetHeader {
  std::uint32_t m = 0;                         // patch length
  std::uint32_t n_neighborhoods = 0;           // coarse vertices
  std::uint32_t samples_per_neighborhood = 0;  // records per vertex
  std::uint8_t experiment = 0;                 // 0 steady, 1 time-dependent
  std::uint32_t time_step = 0;                 // enrichment step for time datasets, else 0
};

struct DatasetRecord {
  std::uint32_t neighborhood = 0;
  std::uint64_t seed = 0;
  std::vector<double> kappa;
  std::vector<double> phi;
};

struct Dataset {
  DatasetHeader header;
  std::vector<DatasetRecord> records;

  std::size_t expected_records() const {
    return std::size_t(header.n_neighborhoods) * header.samples_per_neighborhood;
  }
};

// File layout: magic "MSRD", version u32, header fields, then the records in
// storage order. Little-endian float64 payloads; load validates the header,
// the record count and every per-record length, and rejects trailing bytes,
// making a save/load/save round-trip byte-exact.
void save_dataset(const Dataset& dataset, const std::string& path);
Dataset load_dataset(const std::string& path);

inline constexpr std::uint32_t kDatasetFormatVersion = 1;

}  // namespace msrich
