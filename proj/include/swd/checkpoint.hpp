#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "swd/corpus.hpp"
#include "swd/model.hpp"

namespace swd {

struct CheckpointMeta {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  std::vector<double> loss_history;  // mean loss per epoch
  std::string tag;
  std::string vocab_fingerprint;
  CorpusOptions corpus;
};

struct Checkpoint {
  ModelConfig model;
  // Relative paths are resolved against the checkpoint's directory.
  std::string vocab_path;
  ModelParams params;
  CheckpointMeta meta;
};

/// Stable hash of the token list, hex encoded.
std::string vocab_fingerprint(const Vocab& vocab);

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

/// Throws FormatError on malformed files and on arrays whose declared shape
/// disagrees with the embedded model configuration.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Vocabulary path of a loaded checkpoint, resolved against `checkpoint_path`.
std::filesystem::path resolve_vocab_path(const Checkpoint& checkpoint,
                                         const std::filesystem::path& checkpoint_path);

}  // namespace swd
