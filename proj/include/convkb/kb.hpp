#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace convkb {

struct Triple {
  std::int32_t head = 0;
  std::int32_t relation = 0;
  std::int32_t tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t x = static_cast<std::uint32_t>(t.head);
    x = x * 0x9e3779b97f4a7c15ULL + static_cast<std::uint32_t>(t.relation);
    x = x * 0x9e3779b97f4a7c15ULL + static_cast<std::uint32_t>(t.tail);
    x ^= x >> 32;
    x *= 0xd6e8feb86659fd93ULL;
    return static_cast<std::size_t>(x ^ (x >> 32));
  }
};

using TripleSet = std::unordered_set<Triple, TripleHash>;

// Dense 0-based ids in first-seen order. Labels are opaque byte strings.
class Vocabulary {
 public:
  std::int32_t add(std::string_view label);
  // -1 if unknown
  std::int32_t id_of(std::string_view label) const;
  const std::string& label(std::int32_t id) const { return labels_[id]; }
  std::int32_t size() const { return static_cast<std::int32_t>(labels_.size()); }
  // FNV-1a over labels in index order; detects vocabulary/dataset mismatch
  std::uint64_t order_hash() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.labels_ == b.labels_;
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::int32_t> index_;
};

// Immutable after construction; safe to share across threads.
struct KnowledgeBase {
  Vocabulary entities;
  Vocabulary relations;
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;
  TripleSet filter_index;  // union of all three splits
  TripleSet train_index;   // corruption sampling excludes exactly these
};

// Bernoulli corruption statistics, computed from the training split only.
//   tails_per_head(r) = #train triples with r / #distinct heads under r
//   heads_per_tail(r) = #train triples with r / #distinct tails under r
//   head_corrupt_prob(r) = tph / (tph + hpt)
struct RelationStats {
  std::vector<double> tails_per_head;
  std::vector<double> heads_per_tail;
  std::vector<double> head_corrupt_prob;
  // relations present in the vocabulary but absent from train (prob fixed at 0.5)
  std::vector<std::int32_t> unseen_in_train;
};

// One triple per non-empty line: head<TAB>relation<TAB>tail. Unseen labels
// are appended to the vocabularies. Throws DataError with the line number on
// a malformed line.
std::vector<Triple> parse_triples(const std::filesystem::path& path,
                                  Vocabulary& entities, Vocabulary& relations);

// Parses the three splits in train, valid, test order. Rejects duplicate
// triples within a single split (DataError naming the triple).
KnowledgeBase build_kb(const std::filesystem::path& train_path,
                       const std::filesystem::path& valid_path,
                       const std::filesystem::path& test_path);

RelationStats bernoulli_stats(const KnowledgeBase& kb);

// TSV writer matching the parse_triples format (round-trip identity).
void write_split(const std::filesystem::path& path, const KnowledgeBase& kb,
                 const std::vector<Triple>& triples);

}  // namespace convkb
