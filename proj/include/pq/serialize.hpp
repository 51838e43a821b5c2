#pragma once

#include <string>

#include "pq/model.hpp"
#include "pq/quant.hpp"

namespace pq {

// All artifacts share one container: magic "CCLB", u16 format version, a
// kind byte, a kind-specific config block, then named tensors (u32 name
// length + UTF-8 name + rank/dims + little-endian FP32 data).
enum class ArtifactKind : uint8_t { model = 1, prefix = 2, stats = 3 };

inline constexpr uint16_t kArtifactVersion = 1;

void save_model(const std::string& path, const TransformerModel& model);
TransformerModel load_model(const std::string& path);

void save_prefix(const std::string& path, const PrefixCache& prefix);
PrefixCache load_prefix(const std::string& path);

void save_stats(const std::string& path, const CalibrationStats& stats);
CalibrationStats load_stats(const std::string& path);

// Reads just the header; throws artifact_error on anything malformed.
ArtifactKind peek_artifact_kind(const std::string& path);

}  // namespace pq
