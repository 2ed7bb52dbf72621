#pragma once
// Binary checkpoint container: a JSON metadata header (config, epoch, ...)
// followed by named float tensors. Writes are atomic (temp file + rename).

#include <map>
#include <string>

#include "cc2d/tensor.hpp"
#include "cc2d/vendor_json.hpp"

namespace cc2d {

struct Checkpoint {
  nlohmann::json meta;
  std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cc2d
