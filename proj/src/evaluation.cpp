#include "convkb/evaluation.hpp"

#include <cmath>
#include <cstdio>

#include "convkb/errors.hpp"

namespace convkb {

std::string RankingReport::metrics_line() const {
  auto hit = [this](int n) {
    auto it = hits_at.find(n);
    return it == hits_at.end() ? 0.0 : it->second * 100.0;
  };
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%.4f\t%.6f\t%.4f\t%.4f\t%.4f", mean_rank, mrr, hit(1),
                hit(3), hit(10));
  return buf;
}

std::int64_t rank_triple(const Scorer& scorer, const Triple& t, Side side,
                         const KnowledgeBase& kb, const EvalConfig& cfg) {
  const std::int32_t true_entity = side == Side::kHead ? t.head : t.tail;
  const double true_score = scorer(t);
  if (!std::isfinite(true_score)) {
    throw NumericError("non-finite score for test triple with entity " +
                       kb.entities.label(true_entity));
  }

  std::int64_t rank = 1;
  Triple candidate = t;
  for (std::int32_t e = 0; e < kb.entities.size(); ++e) {
    if (e == true_entity) continue;
    if (side == Side::kHead) {
      candidate.head = e;
    } else {
      candidate.tail = e;
    }
    if (cfg.filtered && kb.filter_index.contains(candidate)) continue;
    const double s = scorer(candidate);
    if (!std::isfinite(s)) {
      throw NumericError("non-finite score for candidate entity " + kb.entities.label(e));
    }
    if (s <= true_score) ++rank;  // pessimistic ties
  }
  return rank;
}

RankingReport evaluate(const Scorer& scorer, const KnowledgeBase& kb, const EvalConfig& cfg) {
  return evaluate(scorer, kb, cfg, kb.test);
}

RankingReport evaluate(const Scorer& scorer, const KnowledgeBase& kb, const EvalConfig& cfg,
                       const std::vector<Triple>& targets) {
  const auto n = static_cast<std::int64_t>(targets.size());
  RankingReport report;
  report.head_ranks.resize(n);
  report.tail_ranks.resize(n);

  if (cfg.threads > 1) {
#pragma omp parallel for schedule(dynamic, 8) num_threads(cfg.threads)
    for (std::int64_t i = 0; i < n; ++i) {
      report.head_ranks[i] = rank_triple(scorer, targets[i], Side::kHead, kb, cfg);
      report.tail_ranks[i] = rank_triple(scorer, targets[i], Side::kTail, kb, cfg);
    }
  } else {
    for (std::int64_t i = 0; i < n; ++i) {
      report.head_ranks[i] = rank_triple(scorer, targets[i], Side::kHead, kb, cfg);
      report.tail_ranks[i] = rank_triple(scorer, targets[i], Side::kTail, kb, cfg);
    }
  }

  // Aggregate in index order: bitwise-stable regardless of thread count.
  double rank_sum = 0.0, rr_sum = 0.0;
  std::map<int, std::int64_t> hit_counts;
  for (int c : cfg.cutoffs) hit_counts[c] = 0;
  auto tally = [&](std::int64_t rank) {
    rank_sum += static_cast<double>(rank);
    rr_sum += 1.0 / static_cast<double>(rank);
    for (int c : cfg.cutoffs) {
      if (rank <= c) ++hit_counts[c];
    }
  };
  for (std::int64_t i = 0; i < n; ++i) {
    tally(report.head_ranks[i]);
    tally(report.tail_ranks[i]);
  }

  const double total = 2.0 * static_cast<double>(n);
  report.mean_rank = n == 0 ? 0.0 : rank_sum / total;
  report.mrr = n == 0 ? 0.0 : rr_sum / total;
  for (const auto& [c, count] : hit_counts) {
    report.hits_at[c] = n == 0 ? 0.0 : static_cast<double>(count) / total;
  }
  return report;
}

}  // namespace convkb
