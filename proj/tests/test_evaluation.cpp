#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "convkb/errors.hpp"
#include "convkb/evaluation.hpp"
#include "convkb/rng.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using namespace convkb;
using testutil::TempDir;
using testutil::kb_from_strings;

TEST_CASE("rank is 1 when there are no competitors") {
  TempDir dir("eval");
  const auto kb = kb_from_strings(dir, "a\tr\ta\n", "", "a\tr\ta\n");
  const Scorer scorer = [](const Triple&) { return 0.5; };
  EvalConfig cfg;
  CHECK(rank_triple(scorer, kb.test[0], Side::kTail, kb, cfg) == 1);
  CHECK(rank_triple(scorer, kb.test[0], Side::kHead, kb, cfg) == 1);
}

TEST_CASE("three-entity tail ranking, raw and filtered") {
  TempDir dir("eval");
  // entities in first-seen order: h, e1, e2, e3
  const auto kb = kb_from_strings(dir, "h\tr\te3\n", "", "h\tr\te1\n");
  const std::int32_t e1 = kb.entities.id_of("e1"), e2 = kb.entities.id_of("e2"),
                     e3 = kb.entities.id_of("e3");
  std::map<std::int32_t, double> tail_scores{{e1, 0.2}, {e2, 0.5}, {e3, 0.1}};
  tail_scores[kb.entities.id_of("h")] = 9.0;
  const Scorer scorer = [&](const Triple& t) { return tail_scores.at(t.tail); };

  EvalConfig cfg;
  cfg.filtered = false;
  CHECK(rank_triple(scorer, kb.test[0], Side::kTail, kb, cfg) == 2);  // e3 beats it
  cfg.filtered = true;  // (h, r, e3) is in the filter index
  CHECK(rank_triple(scorer, kb.test[0], Side::kTail, kb, cfg) == 1);
}

TEST_CASE("closed-form aggregates from forced ranks {1,2,4}") {
  TempDir dir("eval");
  const auto kb = kb_from_strings(dir, "e0\tr\te1\n", "", "e0\tr\te1\ne1\tr\te2\ne2\tr\te3\n");
  REQUIRE(kb.entities.size() == 4);
  // explicit 4x4 score table giving head and tail ranks 1, 2, 4 per triple
  const double table[4][4] = {
      {5.0, 0.0, 6.0, 7.0},
      {0.2, 5.0, 1.0, 6.0},
      {1.0, 2.0, 0.5, 9.0},
      {4.0, 6.0, 7.0, 8.0},
  };
  const Scorer scorer = [&](const Triple& t) { return table[t.head][t.tail]; };
  EvalConfig cfg;
  cfg.filtered = false;
  const auto report = evaluate(scorer, kb, cfg);
  const std::vector<std::int64_t> expect{1, 2, 4};
  CHECK(report.tail_ranks == expect);
  CHECK(report.head_ranks == expect);
  CHECK(report.mean_rank == doctest::Approx(7.0 / 3.0).epsilon(1e-12));
  CHECK(report.mrr == doctest::Approx((1.0 + 0.5 + 0.25) / 3.0).epsilon(1e-12));
  CHECK(report.hits_at.at(10) == 1.0);
  CHECK(report.hits_at.at(1) == doctest::Approx(1.0 / 3.0));
  // the full-sort oracle agrees, including the tie handling
  const auto oracle = oracles::full_sort_evaluate(scorer, kb, false, kb.test);
  CHECK(report.head_ranks == oracle.head_ranks);
  CHECK(report.tail_ranks == oracle.tail_ranks);
}

TEST_CASE("constant scorer forces pessimistic ranks") {
  TempDir dir("eval");
  const auto kb = kb_from_strings(dir, "a\tr\tb\n", "", "a\tr\tc\n");
  const Scorer scorer = [](const Triple&) { return 1.0; };
  EvalConfig cfg;
  cfg.filtered = false;
  // raw: 3 entities, all tie -> rank = number of candidates
  CHECK(rank_triple(scorer, kb.test[0], Side::kTail, kb, cfg) == 3);
  cfg.filtered = true;  // (a, r, b) filtered out of the tail candidates
  CHECK(rank_triple(scorer, kb.test[0], Side::kTail, kb, cfg) == 2);
}

TEST_CASE("filtered rank never exceeds raw rank") {
  Rng rng(404);
  for (int trial = 0; trial < 10; ++trial) {
    const auto kb = synthetic::random_kb(rng, 20, 3, 60);
    const auto scorer = synthetic::hash_scorer(trial);
    EvalConfig raw_cfg, filt_cfg;
    raw_cfg.filtered = false;
    filt_cfg.filtered = true;
    for (const Triple& t : kb.test) {
      for (Side side : {Side::kHead, Side::kTail}) {
        CHECK(rank_triple(scorer, t, side, kb, filt_cfg) <=
              rank_triple(scorer, t, side, kb, raw_cfg));
      }
    }
  }
}

TEST_CASE("ranks are invariant under strictly increasing score transforms") {
  Rng rng(505);
  const auto kb = synthetic::random_kb(rng, 15, 3, 45);
  const auto base = synthetic::hash_scorer(1);
  const Scorer affine = [&](const Triple& t) { return 3.0 * base(t) + 7.0; };
  const Scorer cubed = [&](const Triple& t) {
    const double s = base(t);
    return s * s * s;  // strictly increasing on [0, 1)
  };
  EvalConfig cfg;
  const auto r0 = evaluate(base, kb, cfg);
  const auto r1 = evaluate(affine, kb, cfg);
  const auto r2 = evaluate(cubed, kb, cfg);
  CHECK(r0.head_ranks == r1.head_ranks);
  CHECK(r0.tail_ranks == r1.tail_ranks);
  CHECK(r0.head_ranks == r2.head_ranks);
  CHECK(r0.tail_ranks == r2.tail_ranks);
}

TEST_CASE("evaluate matches the full-sort oracle on random toy KBs with ties") {
  Rng rng(606);
  for (int trial = 0; trial < 10; ++trial) {
    const auto kb = synthetic::random_kb(rng, 12 + trial, 3, 50);
    // quantized scores force plenty of exact ties
    const auto scorer = synthetic::hash_scorer(trial * 11, /*quantize_levels=*/4);
    for (bool filtered : {false, true}) {
      EvalConfig cfg;
      cfg.filtered = filtered;
      const auto report = evaluate(scorer, kb, cfg);
      const auto oracle = oracles::full_sort_evaluate(scorer, kb, filtered, kb.test);
      CHECK(report.head_ranks == oracle.head_ranks);
      CHECK(report.tail_ranks == oracle.tail_ranks);
    }
  }
}

TEST_CASE("aggregates are internally consistent with the rank lists") {
  Rng rng(707);
  const auto kb = synthetic::random_kb(rng, 20, 4, 80);
  const auto scorer = synthetic::hash_scorer(9);
  EvalConfig cfg;
  const auto report = evaluate(scorer, kb, cfg);
  double sum = 0, rr = 0, h10 = 0;
  for (auto ranks : {&report.head_ranks, &report.tail_ranks}) {
    for (auto r : *ranks) {
      sum += static_cast<double>(r);
      rr += 1.0 / static_cast<double>(r);
      h10 += r <= 10 ? 1.0 : 0.0;
    }
  }
  const double n = 2.0 * static_cast<double>(kb.test.size());
  CHECK(report.mean_rank == doctest::Approx(sum / n).epsilon(1e-12));
  CHECK(report.mrr == doctest::Approx(rr / n).epsilon(1e-12));
  CHECK(report.hits_at.at(10) == doctest::Approx(h10 / n).epsilon(1e-12));
}

TEST_CASE("a strictly minimal scorer yields perfect metrics") {
  Rng rng(808);
  const auto kb = synthetic::random_kb(rng, 20, 3, 60);
  const Scorer scorer = [&](const Triple& t) {
    return kb.filter_index.contains(t) ? 0.0 : 1.0;
  };
  EvalConfig cfg;  // filtered removes the competing valid triples
  const auto report = evaluate(scorer, kb, cfg);
  CHECK(report.mean_rank == 1.0);
  CHECK(report.mrr == 1.0);
  for (const auto& [n, hits] : report.hits_at) CHECK(hits == 1.0);
}

TEST_CASE("parallel evaluation is identical to serial") {
  Rng rng(909);
  const auto kb = synthetic::random_kb(rng, 30, 4, 90);
  const auto scorer = synthetic::hash_scorer(3, 8);
  EvalConfig serial, parallel;
  serial.threads = 1;
  parallel.threads = 4;
  const auto a = evaluate(scorer, kb, serial);
  const auto b = evaluate(scorer, kb, parallel);
  CHECK(a.head_ranks == b.head_ranks);
  CHECK(a.tail_ranks == b.tail_ranks);
  CHECK(a.mean_rank == b.mean_rank);
  CHECK(a.mrr == b.mrr);
}

TEST_CASE("non-finite scores raise a numerical error naming the candidate") {
  TempDir dir("eval");
  const auto kb = kb_from_strings(dir, "a\tr\tb\n", "", "a\tr\tc\n");
  const Scorer scorer = [&](const Triple& t) {
    return t.tail == kb.entities.id_of("b") ? std::nan("") : 0.0;
  };
  EvalConfig cfg;
  cfg.filtered = false;
  CHECK_THROWS_WITH_AS(rank_triple(scorer, kb.test[0], Side::kTail, kb, cfg),
                       doctest::Contains("b"), NumericError);
}
