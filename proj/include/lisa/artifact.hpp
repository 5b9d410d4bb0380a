#pragma once

// Binary model artifact. Layout:
//   8 bytes   magic "LISAMDL1"
//   8 bytes   little-endian uint64 header length n
//   n bytes   JSON header (shapes, kernel parameters, provenance, standardizer)
//   ...       raw little-endian doubles, row-major, in header "arrays" order
// Loading refactorizes the decoder Gram matrix from the stored latents, which
// is deterministic, so a reloaded model predicts bit-identically.

#include "lisa/harness.hpp"

#include <filesystem>

namespace lisa::artifact {

void save(const std::filesystem::path& path, const harness::Model& model);
harness::Model load(const std::filesystem::path& path);

std::string serialize(const harness::Model& model);
harness::Model deserialize(const std::string& bytes);

}  // namespace lisa::artifact
