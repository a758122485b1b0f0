#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cwm/core/nn.hpp"
#include "cwm/core/optim.hpp"

namespace cwm::harness {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Named tensor stored as float64 regardless of the build precision.
struct TensorBlob {
  std::string name;
  Shape shape;
  std::vector<double> data;
  bool operator==(const TensorBlob&) const = default;
};

struct OptimizerBlob {
  std::int64_t steps = 0;
  std::vector<TensorBlob> first;
  std::vector<TensorBlob> second;
  bool operator==(const OptimizerBlob&) const = default;
};

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string kind;    ///< "pretrain" or "finetune"
  std::string config;  ///< resolved manifest of the run that wrote it
  std::map<std::string, std::int64_t> counters;
  std::map<std::string, std::string> rng;
  std::map<std::string, std::vector<TensorBlob>> groups;
  std::map<std::string, OptimizerBlob> optimizers;
  bool operator==(const Checkpoint&) const = default;
};

std::vector<std::uint8_t> serialize(const Checkpoint& ck);
/// Throws a data error on bad magic, other versions or truncation.
Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);

/// Writes through a temporary file and renames it into place.
void write_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Parameters followed by buffers (batch-norm statistics).
std::vector<TensorBlob> export_params(const nn::ParamList& params);
/// Requires the same names and shapes in the same order.
void import_params(const std::vector<TensorBlob>& blobs, nn::ParamList& params, const std::string& group);

OptimizerBlob export_optimizer(const Adam& opt);
void import_optimizer(const OptimizerBlob& blob, Adam& opt, const std::string& group);

}  // namespace cwm::harness
