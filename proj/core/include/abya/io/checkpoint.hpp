#pragma once

// Binary checkpoint container:
//   "ABYA1" | u32 version | u32 count | count x entry | u32 CRC32
//   entry = u32 name length | name | u32 rank | u32 dims[rank] | f32 payload
// All integers and floats little-endian; the CRC covers every prior byte.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "abya/agent/agent.hpp"
#include "abya/autodiff/adam.hpp"
#include "abya/autodiff/param_set.hpp"
#include "abya/autodiff/tensor.hpp"

namespace abya::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  ad::Tensor<float> value;
};

std::string encode_entries(const std::vector<NamedTensor>& entries);
/// Validates magic, version, structure and CRC.
std::vector<NamedTensor> decode_entries(const std::string& bytes);

void write_file(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

/// Parameters, optimizer moments and the model kind of a run.
struct Checkpoint {
  std::optional<agent::ModelKind> model;  // absent for a language-model-only checkpoint
  ad::ParamSet<float> params;
  ad::AdamState<float> adam;
};

std::vector<NamedTensor> to_entries(const Checkpoint& ckpt);
Checkpoint from_entries(const std::vector<NamedTensor>& entries);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies every parameter of `target` from `ckpt`. The checkpoint must hold
/// exactly the target's parameter names with matching shapes and, when it
/// records one, the same model kind.
void restore(const Checkpoint& ckpt, agent::ModelKind kind, ad::ParamSet<float>& target,
             ad::AdamState<float>* adam = nullptr);

/// Copies the question-policy parameters (theta.*) of a pretrained language
/// model into `target`.
void restore_language_model(const Checkpoint& ckpt, ad::ParamSet<float>& target);

}  // namespace abya::io
