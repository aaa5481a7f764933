#include "convkb/kb.hpp"

#include <fstream>
#include <map>
#include <set>

#include "convkb/errors.hpp"

namespace convkb {

std::int32_t Vocabulary::add(std::string_view label) {
  auto it = index_.find(std::string(label));
  if (it != index_.end()) return it->second;
  const auto id = static_cast<std::int32_t>(labels_.size());
  labels_.emplace_back(label);
  index_.emplace(labels_.back(), id);
  return id;
}

std::int32_t Vocabulary::id_of(std::string_view label) const {
  auto it = index_.find(std::string(label));
  return it == index_.end() ? -1 : it->second;
}

std::uint64_t Vocabulary::order_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& label : labels_) {
    for (unsigned char c : label) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0x1e;  // separator so {"ab","c"} != {"a","bc"}
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<Triple> parse_triples(const std::filesystem::path& path,
                                  Vocabulary& entities, Vocabulary& relations) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());

  std::vector<Triple> triples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    const auto tab3 = tab2 == std::string::npos ? std::string::npos : line.find('\t', tab2 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos || tab3 != std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected 3 tab-separated fields");
    }

    Triple t;
    t.head = entities.add(std::string_view(line).substr(0, tab1));
    t.relation = relations.add(std::string_view(line).substr(tab1 + 1, tab2 - tab1 - 1));
    t.tail = entities.add(std::string_view(line).substr(tab2 + 1));
    triples.push_back(t);
  }
  if (in.bad()) throw DataError("I/O error reading " + path.string());
  return triples;
}

KnowledgeBase build_kb(const std::filesystem::path& train_path,
                       const std::filesystem::path& valid_path,
                       const std::filesystem::path& test_path) {
  KnowledgeBase kb;
  kb.train = parse_triples(train_path, kb.entities, kb.relations);
  kb.valid = parse_triples(valid_path, kb.entities, kb.relations);
  kb.test = parse_triples(test_path, kb.entities, kb.relations);

  auto index_split = [&kb](const std::vector<Triple>& split, const char* name) {
    TripleSet seen;
    seen.reserve(split.size() * 2);
    for (const Triple& t : split) {
      if (!seen.insert(t).second) {
        throw DataError(std::string("duplicate triple in ") + name + " split: (" +
                        kb.entities.label(t.head) + ", " + kb.relations.label(t.relation) +
                        ", " + kb.entities.label(t.tail) + ")");
      }
      kb.filter_index.insert(t);
    }
    return seen;
  };

  kb.filter_index.reserve((kb.train.size() + kb.valid.size() + kb.test.size()) * 2);
  kb.train_index = index_split(kb.train, "train");
  index_split(kb.valid, "valid");
  index_split(kb.test, "test");
  return kb;
}

RelationStats bernoulli_stats(const KnowledgeBase& kb) {
  const auto n_rel = static_cast<std::size_t>(kb.relations.size());
  RelationStats stats;
  stats.tails_per_head.assign(n_rel, 0.0);
  stats.heads_per_tail.assign(n_rel, 0.0);
  stats.head_corrupt_prob.assign(n_rel, 0.5);

  std::vector<std::int64_t> triple_count(n_rel, 0);
  std::vector<std::set<std::int32_t>> heads(n_rel), tails(n_rel);
  for (const Triple& t : kb.train) {
    ++triple_count[t.relation];
    heads[t.relation].insert(t.head);
    tails[t.relation].insert(t.tail);
  }

  for (std::size_t r = 0; r < n_rel; ++r) {
    if (triple_count[r] == 0) {
      stats.unseen_in_train.push_back(static_cast<std::int32_t>(r));
      continue;
    }
    const double tph = static_cast<double>(triple_count[r]) / static_cast<double>(heads[r].size());
    const double hpt = static_cast<double>(triple_count[r]) / static_cast<double>(tails[r].size());
    stats.tails_per_head[r] = tph;
    stats.heads_per_tail[r] = hpt;
    stats.head_corrupt_prob[r] = tph / (tph + hpt);
  }
  return stats;
}

void write_split(const std::filesystem::path& path, const KnowledgeBase& kb,
                 const std::vector<Triple>& triples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (const Triple& t : triples) {
    out << kb.entities.label(t.head) << '\t' << kb.relations.label(t.relation) << '\t'
        << kb.entities.label(t.tail) << '\n';
  }
  if (!out) throw DataError("I/O error writing " + path.string());
}

}  // namespace convkb
