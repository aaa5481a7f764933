#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "convkb/kb.hpp"

namespace convkb {

// Implausibility score: lower = more plausible. Must be pure and total over
// all entity substitutions; evaluation may call it from multiple threads.
using Scorer = std::function<double(const Triple&)>;

enum class Side { kHead, kTail };

struct EvalConfig {
  bool filtered = true;
  std::vector<int> cutoffs = {1, 3, 10};
  // 1 = serial reference; >1 fans the (triple, side) pairs out over OpenMP.
  // Ranks are integers, so both paths produce identical reports.
  int threads = 1;
};

struct RankingReport {
  std::vector<std::int64_t> head_ranks;  // per test triple, >= 1
  std::vector<std::int64_t> tail_ranks;
  double mean_rank = 0.0;                // over 2*|test| ranks
  double mrr = 0.0;
  std::map<int, double> hits_at;         // cutoff -> proportion in [0, 1]

  // MR<TAB>MRR<TAB>H@1<TAB>H@3<TAB>H@10 with hits in percent
  std::string metrics_line() const;
};

// Rank of the valid triple among all entity substitutions on `side`.
// Filtered mode removes competitors found in kb.filter_index (never the test
// triple itself). Ties are pessimistic: equal-scoring competitors count ahead.
std::int64_t rank_triple(const Scorer& scorer, const Triple& t, Side side,
                         const KnowledgeBase& kb, const EvalConfig& cfg);

// Ranks both sides of every target triple and aggregates MR / MRR / Hits@N.
// Targets default to the test split; the sweep driver passes kb.valid.
RankingReport evaluate(const Scorer& scorer, const KnowledgeBase& kb, const EvalConfig& cfg);
RankingReport evaluate(const Scorer& scorer, const KnowledgeBase& kb, const EvalConfig& cfg,
                       const std::vector<Triple>& targets);

}  // namespace convkb
