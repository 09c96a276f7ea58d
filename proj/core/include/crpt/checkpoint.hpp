#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "crpt/tensor.hpp"

namespace crpt::nd {

// Checkpoint container: magic "CRPTCKPT", version u32, entry count u64, then
// per entry (name length u32, name bytes, dtype u32, ndim u32, extents u64...,
// raw little-endian scalars). dtype 0 = f64, 1 = f32. Round-trips of f64
// checkpoints are bit-exact.
inline constexpr char kCheckpointMagic[8] = {'C', 'R', 'P', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, Tensor>>& entries,
                  bool as_f32 = false);

std::map<std::string, Tensor> load_tensors(const std::string& path);

}  // namespace crpt::nd
