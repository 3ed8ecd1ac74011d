#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "geoworld/train.hpp"

namespace geoworld::wm {

inline constexpr int kCheckpointFormatVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { Io, Version, Parse, Truncated, Shape };
  CheckpointError(Kind kind, const std::string& what);
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Checkpoint container: a text header (magic line, format version,
/// architecture, train config, step, rng state, array table) terminated by
/// END_HEADER, then each listed array as little-endian IEEE-754 doubles.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Conventional file name, e.g. "ckpt_005000.gwck".
std::string checkpoint_filename(int step);

}  // namespace geoworld::wm
