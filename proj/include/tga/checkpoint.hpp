#pragma once

#include <string>

#include "tga/model.hpp"

namespace tga {

// Checkpoint file: magic "TGAC", version, tensor count, then per tensor a
// name, rank, dims and the 32-bit float payload. Little-endian throughout.
// A file may carry an optional "emb.pretrained" tensor; when "emb" is absent
// it is adopted as the embedding table.
void save_checkpoint(const Model<float>& m, const std::string& path);
Model<float> load_checkpoint(const std::string& path);

}  // namespace tga
