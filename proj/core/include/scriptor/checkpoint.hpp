#pragma once

#include <map>
#include <string>

#include "json.hpp"
#include "scriptor/tensor.hpp"

namespace scriptor {

// On-disk model state: a JSON manifest listing {name, shape, dtype, offset}
// per parameter, next to a raw little-endian float32 blob. Values are held as
// doubles in memory and rounded to float32 on save.
struct Checkpoint {
  std::map<std::string, Tensor> params;
  nlohmann::json meta;  // config echo, vocabulary, epoch, level
};

// Writes manifest_path and its sibling blob (same stem, .bin extension).
void save_checkpoint(const std::string& manifest_path,
                     const std::map<std::string, Tensor>& params, const nlohmann::json& meta);

Checkpoint load_checkpoint(const std::string& manifest_path);

}  // namespace scriptor
