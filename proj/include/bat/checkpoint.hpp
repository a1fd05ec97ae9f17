#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bat/tensor.hpp"

namespace bat {

// Single-file checkpoint: magic "BATCKPT1", then little-endian records of
// (name, shape, row-major 64-bit values).
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, TensorPtr>>& named);

std::vector<std::pair<std::string, TensorPtr>> load_checkpoint(const std::string& path);

// Copies values from the file into an existing named parameter set; throws on
// missing names or shape mismatch.
void restore_checkpoint(const std::string& path,
                        const std::vector<std::pair<std::string, TensorPtr>>& named);

}  // namespace bat
