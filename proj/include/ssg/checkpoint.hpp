#pragma once

#include "ssg/optim.hpp"

#include <string>

namespace ssg {

// Checkpoint = JSON manifest (name, shape, dtype, offset per tensor) next to a
// single little-endian raw f32 blob. manifest_path conventionally ends in
// .json; the blob lives at the same stem with .bin.
void save_checkpoint(const std::string& manifest_path, const ParameterStore& store);

// Loads values only; gradients and moments start at zero, everything trainable.
ParameterStore load_checkpoint(const std::string& manifest_path);

std::string checkpoint_blob_path(const std::string& manifest_path);

} // namespace ssg
