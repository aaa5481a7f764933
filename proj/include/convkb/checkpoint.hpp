#pragma once

#include <filesystem>

#include "convkb/kb.hpp"
#include "convkb/training.hpp"

namespace convkb {

// Versioned binary container: magic + version header, config snapshot,
// length-prefixed UTF-8 vocabularies, then length-prefixed little-endian
// f64 arrays for every parameter block (optimizer state optional).
// Serialization is canonical, so save -> load -> save is byte-identical.
struct Checkpoint {
  ModelState state;
  Vocabulary entities;
  Vocabulary relations;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

// Throws DataError on bad magic, unknown version, truncation, or a stored
// vocabulary hash that does not match the decoded labels.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Entity/relation counts and order hashes must match the dataset when
// resuming or evaluating.
void check_vocab_match(const Checkpoint& ckpt, const KnowledgeBase& kb);

}  // namespace convkb
