#pragma once

#include <map>
#include <string>

#include "json.hpp"
#include "tfg/nn/tensor.hpp"

namespace tfg::nn {

// Checkpoint container: a JSON metadata header plus named double tensors.
struct Checkpoint {
  std::string module;
  nlohmann::json meta;
  std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tfg::nn
