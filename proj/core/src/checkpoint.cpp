#include "cloven/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoints are little-endian");

namespace cloven {

namespace {

constexpr std::uint32_t kVersion = 1;

[[noreturn]] void fail_io(const std::string& what) {
  throw std::runtime_error("checkpoint: " + what);
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) fail_io("truncated file " + path);
  return v;
}

}  // namespace

void write_blob_file(const BlobFile& file, const std::filesystem::path& path,
                     const char magic[8]) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_io("cannot write " + path.string());
  out.write(magic, 8);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint64_t>(file.json_header.size()));
  out.write(file.json_header.data(),
            static_cast<std::streamsize>(file.json_header.size()));
  write_pod(out, static_cast<std::uint64_t>(file.blobs.size()));
  for (const auto& [name, blob] : file.blobs) {
    write_pod(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(out, static_cast<std::uint64_t>(blob.rows));
    write_pod(out, static_cast<std::uint64_t>(blob.cols));
    out.write(reinterpret_cast<const char*>(blob.data.data()),
              static_cast<std::streamsize>(blob.data.size() * sizeof(double)));
  }
  if (!out) fail_io("write failure on " + path.string());
}

BlobFile read_blob_file(const std::filesystem::path& path,
                        const char magic[8]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open " + path.string());
  char seen[8];
  in.read(seen, 8);
  if (!in || std::memcmp(seen, magic, 8) != 0) {
    fail_io("bad magic in " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(in, path.string());
  if (version != kVersion) {
    fail_io("unsupported version " + std::to_string(version) + " in " +
            path.string());
  }
  BlobFile file;
  const auto json_len = read_pod<std::uint64_t>(in, path.string());
  file.json_header.resize(json_len);
  in.read(file.json_header.data(), static_cast<std::streamsize>(json_len));
  const auto count = read_pod<std::uint64_t>(in, path.string());
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(in, path.string());
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    BlobFile::Blob blob;
    blob.rows = read_pod<std::uint64_t>(in, path.string());
    blob.cols = read_pod<std::uint64_t>(in, path.string());
    blob.data.resize(blob.rows * blob.cols);
    in.read(reinterpret_cast<char*>(blob.data.data()),
            static_cast<std::streamsize>(blob.data.size() * sizeof(double)));
    if (!in) fail_io("truncated blob '" + name + "' in " + path.string());
    file.blobs.emplace(std::move(name), std::move(blob));
  }
  return file;
}

static const char kModelMagic[8] = {'C', 'L', 'V', 'N', 'C', 'K', 'P', 'T'};

void save_checkpoint(const CloVenModel& model,
                     const std::filesystem::path& path) {
  BlobFile file;
  file.json_header = model_config_to_json(model.config());
  for (const auto& [name, tensor] : model.parameters()) {
    file.blobs["param/" + name] =
        BlobFile::Blob{tensor.rows(), tensor.cols(), tensor.values()};
  }
  for (const auto& [name, state] : model.state()) {
    file.blobs["state/" + name] = BlobFile::Blob{1, state->size(), *state};
  }
  write_blob_file(file, path, kModelMagic);
}

CloVenModel load_checkpoint(const std::filesystem::path& path) {
  BlobFile file = read_blob_file(path, kModelMagic);
  ModelConfig cfg = model_config_from_json(file.json_header);
  Rng rng(0);  // weights are overwritten below
  CloVenModel model(cfg, rng);
  for (auto& [name, tensor] : model.parameters()) {
    auto it = file.blobs.find("param/" + name);
    if (it == file.blobs.end()) {
      fail_io("missing parameter '" + name + "' in " + path.string());
    }
    if (it->second.rows != tensor.rows() || it->second.cols != tensor.cols()) {
      fail_io("shape mismatch for parameter '" + name + "'");
    }
    tensor.raw_values() = it->second.data;
  }
  for (auto& [name, state] : model.mutable_state()) {
    auto it = file.blobs.find("state/" + name);
    if (it == file.blobs.end()) {
      fail_io("missing state '" + name + "' in " + path.string());
    }
    if (it->second.data.size() != state->size()) {
      fail_io("shape mismatch for state '" + name + "'");
    }
    *state = it->second.data;
  }
  return model;
}

}  // namespace cloven
