#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cloven/model.hpp"

namespace cloven {

// Versioned binary container: magic + version, a canonical-JSON header, then
// named little-endian float64 blobs (rows, cols, payload). Round trips are
// bit-exact.
struct BlobFile {
  std::string json_header;
  struct Blob {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;
  };
  std::map<std::string, Blob> blobs;  // ordered, so writes are canonical
};

void write_blob_file(const BlobFile& file, const std::filesystem::path& path,
                     const char magic[8]);
BlobFile read_blob_file(const std::filesystem::path& path,
                        const char magic[8]);

// Model checkpoints hold the config JSON plus every parameter and every
// batchnorm running statistic.
void save_checkpoint(const CloVenModel& model,
                     const std::filesystem::path& path);
CloVenModel load_checkpoint(const std::filesystem::path& path);

}  // namespace cloven
