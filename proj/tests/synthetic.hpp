#pragma once

// Deterministic synthetic knowledge bases for training and evaluation tests.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "convkb/evaluation.hpp"
#include "convkb/kb.hpp"
#include "convkb/rng.hpp"

namespace synthetic {

// Compositional chain KB over 60 entities: each relation holds a fixed set of
// offsets, (x, r, x+d) for every x with x+d < 60. 476 triples total, split
// 406 train / 20 valid / 50 test by a seeded shuffle.
inline void write_chain_kb(const std::filesystem::path& dir, std::uint64_t seed = 13) {
  constexpr int kEntities = 60;
  const std::vector<std::vector<int>> offsets = {{1, 4}, {2, 3}, {5, 8}, {7, 13, 21}};

  struct Fact {
    int h, r, t;
  };
  std::vector<Fact> facts;
  for (int r = 0; r < static_cast<int>(offsets.size()); ++r) {
    for (int d : offsets[r]) {
      for (int x = 0; x + d < kEntities; ++x) facts.push_back({x, r, x + d});
    }
  }

  convkb::Rng rng(seed);
  for (std::size_t i = facts.size() - 1; i > 0; --i) {
    const auto j = rng.uniform_int(static_cast<std::int32_t>(i + 1));
    std::swap(facts[i], facts[j]);
  }

  auto write = [&](const char* name, std::size_t lo, std::size_t hi) {
    std::ofstream out(dir / name, std::ios::trunc);
    for (std::size_t i = lo; i < hi; ++i) {
      char line[64];
      std::snprintf(line, sizeof(line), "e%02d\tr%d\te%02d", facts[i].h, facts[i].r, facts[i].t);
      out << line << '\n';
    }
  };
  write("test.txt", 0, 50);
  write("valid.txt", 50, 70);
  write("train.txt", 70, facts.size());
}

// Random toy KB held fully in memory (no files): <= max_entities entities,
// <= max_relations relations, n_triples unique triples split across the
// three splits round-robin.
inline convkb::KnowledgeBase random_kb(convkb::Rng& rng, std::int32_t n_entities,
                                       std::int32_t n_relations, std::int32_t n_triples) {
  convkb::KnowledgeBase kb;
  for (std::int32_t e = 0; e < n_entities; ++e) kb.entities.add("e" + std::to_string(e));
  for (std::int32_t r = 0; r < n_relations; ++r) kb.relations.add("r" + std::to_string(r));

  convkb::TripleSet seen;
  std::int32_t made = 0;
  for (int attempts = 0; made < n_triples && attempts < n_triples * 50; ++attempts) {
    const convkb::Triple t{rng.uniform_int(n_entities), rng.uniform_int(n_relations),
                           rng.uniform_int(n_entities)};
    if (!seen.insert(t).second) continue;
    switch (made % 3) {
      case 0: kb.train.push_back(t); break;
      case 1: kb.valid.push_back(t); break;
      default: kb.test.push_back(t); break;
    }
    kb.filter_index.insert(t);
    ++made;
  }
  for (const convkb::Triple& t : kb.train) kb.train_index.insert(t);
  return kb;
}

// Pseudorandom but deterministic score per triple; quantization forces ties.
inline convkb::Scorer hash_scorer(std::uint64_t salt, int quantize_levels = 0) {
  return [salt, quantize_levels](const convkb::Triple& t) {
    std::uint64_t x = salt;
    x = convkb::splitmix64(x ^ static_cast<std::uint64_t>(t.head));
    x = convkb::splitmix64(x ^ static_cast<std::uint64_t>(t.relation) << 20);
    x = convkb::splitmix64(x ^ static_cast<std::uint64_t>(t.tail) << 40);
    double s = static_cast<double>(x >> 11) * 0x1.0p-53;
    if (quantize_levels > 0) {
      s = std::floor(s * quantize_levels) / quantize_levels;
    }
    return s;
  };
}

}  // namespace synthetic
