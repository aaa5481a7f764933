#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "convkb/errors.hpp"
#include "convkb/kb.hpp"
#include "convkb/rng.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using namespace convkb;
using testutil::TempDir;
using testutil::kb_from_strings;
using testutil::write_file;

TEST_CASE("parse_triples on an empty file") {
  TempDir dir("kbdata");
  write_file(dir.path / "empty.txt", "");
  Vocabulary ents, rels;
  const auto triples = parse_triples(dir.path / "empty.txt", ents, rels);
  CHECK(triples.empty());
  CHECK(ents.size() == 0);
  CHECK(rels.size() == 0);
}

TEST_CASE("parse_triples assigns ids in first-seen order") {
  TempDir dir("kbdata");
  write_file(dir.path / "t.txt", "a\tr\tx\na\tr\ty\nb\ts\tx\n");
  Vocabulary ents, rels;
  const auto triples = parse_triples(dir.path / "t.txt", ents, rels);
  REQUIRE(triples.size() == 3);
  CHECK(ents.size() == 4);
  CHECK(rels.size() == 2);
  // hand enumeration: a,x then y then b; r then s
  CHECK(ents.label(0) == "a");
  CHECK(ents.label(1) == "x");
  CHECK(ents.label(2) == "y");
  CHECK(ents.label(3) == "b");
  CHECK(rels.label(0) == "r");
  CHECK(rels.label(1) == "s");
  CHECK(triples[0] == Triple{0, 0, 1});
  CHECK(triples[2] == Triple{3, 1, 1});
}

TEST_CASE("parse_triples reports malformed lines with their number") {
  TempDir dir("kbdata");
  write_file(dir.path / "bad.txt", "a\tr\tx\nbroken line without tabs\n");
  Vocabulary ents, rels;
  CHECK_THROWS_WITH_AS(parse_triples(dir.path / "bad.txt", ents, rels),
                       doctest::Contains(":2:"), DataError);

  write_file(dir.path / "bad4.txt", "a\tr\tx\textra\n");
  CHECK_THROWS_AS(parse_triples(dir.path / "bad4.txt", ents, rels), DataError);
}

TEST_CASE("parse_triples on a missing file") {
  Vocabulary ents, rels;
  CHECK_THROWS_AS(parse_triples("/nonexistent/nope.txt", ents, rels), DataError);
}

TEST_CASE("build_kb filter index uses set semantics") {
  TempDir dir("kbdata");
  SUBCASE("single train triple") {
    const auto kb = kb_from_strings(dir, "a\tr\tx\n");
    CHECK(kb.filter_index.size() == 1);
    CHECK(kb.train_index.size() == 1);
  }
  SUBCASE("triple in both train and test counts once") {
    const auto kb = kb_from_strings(dir, "a\tr\tx\n", "", "a\tr\tx\n");
    CHECK(kb.filter_index.size() == 1);
    CHECK(kb.train.size() == 1);
    CHECK(kb.test.size() == 1);
  }
}

TEST_CASE("build_kb rejects duplicates within a split") {
  TempDir dir("kbdata");
  write_file(dir.path / "train.txt", "a\tr\tx\nb\tr\ty\na\tr\tx\n");
  write_file(dir.path / "valid.txt", "");
  write_file(dir.path / "test.txt", "");
  CHECK_THROWS_WITH_AS(
      build_kb(dir.path / "train.txt", dir.path / "valid.txt", dir.path / "test.txt"),
      doctest::Contains("(a, r, x)"), DataError);
}

TEST_CASE("filter_index contains every split triple and rejects corrupted ones") {
  TempDir dir("kbdata");
  const auto kb = kb_from_strings(dir, "a\tr\tx\nb\tr\ty\n", "c\tr\tx\n", "a\tr\ty\n");
  for (const auto* split : {&kb.train, &kb.valid, &kb.test}) {
    for (const Triple& t : *split) CHECK(kb.filter_index.contains(t));
  }
  // (b, r, x) appears in no split
  const std::int32_t b = kb.entities.id_of("b"), x = kb.entities.id_of("x");
  CHECK_FALSE(kb.filter_index.contains(Triple{b, 0, x}));
}

TEST_CASE("bernoulli_stats matches hand counting") {
  TempDir dir("kbdata");
  SUBCASE("1-to-1 relation is symmetric") {
    const auto kb = kb_from_strings(dir, "a\tr\tx\nb\tr\ty\nc\tr\tz\n");
    const auto stats = bernoulli_stats(kb);
    CHECK(stats.tails_per_head[0] == doctest::Approx(1.0));
    CHECK(stats.heads_per_tail[0] == doctest::Approx(1.0));
    CHECK(stats.head_corrupt_prob[0] == doctest::Approx(0.5));
  }
  SUBCASE("3 triples, balanced") {
    // counting oracle: 3 triples, heads {a,b}, tails {x,y}
    const auto kb = kb_from_strings(dir, "a\tr\tx\na\tr\ty\nb\tr\tx\n");
    const auto stats = bernoulli_stats(kb);
    CHECK(stats.tails_per_head[0] == doctest::Approx(1.5));
    CHECK(stats.heads_per_tail[0] == doctest::Approx(1.5));
    CHECK(stats.head_corrupt_prob[0] == doctest::Approx(0.5));
  }
  SUBCASE("4 triples, head-heavy") {
    // counting oracle: 4 triples, heads {a,b}, tails {x,y,z}
    const auto kb = kb_from_strings(dir, "a\tr\tx\na\tr\ty\na\tr\tz\nb\tr\tx\n");
    const auto stats = bernoulli_stats(kb);
    CHECK(stats.tails_per_head[0] == doctest::Approx(2.0));
    CHECK(stats.heads_per_tail[0] == doctest::Approx(4.0 / 3.0));
    CHECK(stats.head_corrupt_prob[0] == doctest::Approx(0.6));
  }
}

TEST_CASE("bernoulli_stats flags relations absent from train") {
  TempDir dir("kbdata");
  const auto kb = kb_from_strings(dir, "a\tr\tx\n", "a\ts\tx\n");
  const auto stats = bernoulli_stats(kb);
  const std::int32_t s = kb.relations.id_of("s");
  CHECK(stats.head_corrupt_prob[s] == doctest::Approx(0.5));
  CHECK(std::find(stats.unseen_in_train.begin(), stats.unseen_in_train.end(), s) !=
        stats.unseen_in_train.end());
}

TEST_CASE("bernoulli_stats is invariant under triple reordering") {
  TempDir dir("kbdata");
  const std::string lines[] = {"a\tr\tx\n", "a\tr\ty\n", "b\tr\tx\n", "c\ts\ta\n", "b\ts\ta\n"};
  std::string fwd, rev;
  for (const auto& l : lines) fwd += l;
  for (auto it = std::rbegin(lines); it != std::rend(lines); ++it) rev += *it;

  TempDir dir2("kbdata");
  const auto kb1 = kb_from_strings(dir, fwd);
  const auto kb2 = kb_from_strings(dir2, rev);
  const auto s1 = bernoulli_stats(kb1);
  const auto s2 = bernoulli_stats(kb2);
  for (std::int32_t r = 0; r < kb1.relations.size(); ++r) {
    const auto r2 = kb2.relations.id_of(kb1.relations.label(r));
    CHECK(s1.head_corrupt_prob[r] == doctest::Approx(s2.head_corrupt_prob[r2]));
    CHECK(s1.tails_per_head[r] == doctest::Approx(s2.tails_per_head[r2]));
  }
}

TEST_CASE("tph and hpt are at least 1 for every occurring relation") {
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    auto kb = synthetic::random_kb(rng, 20, 4, 60);
    const auto stats = bernoulli_stats(kb);
    for (std::int32_t r = 0; r < kb.relations.size(); ++r) {
      if (std::find(stats.unseen_in_train.begin(), stats.unseen_in_train.end(), r) !=
          stats.unseen_in_train.end()) {
        continue;
      }
      CHECK(stats.tails_per_head[r] >= 1.0);
      CHECK(stats.heads_per_tail[r] >= 1.0);
      CHECK(stats.head_corrupt_prob[r] > 0.0);
      CHECK(stats.head_corrupt_prob[r] < 1.0);
    }
  }
}

TEST_CASE("TSV round-trip preserves triples and vocabularies") {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto raw = synthetic::random_kb(rng, 15, 3, 40);
    // parse -> write -> parse must be the identity on a parsed KB
    TempDir dir("roundtrip");
    write_split(dir.path / "train.txt", raw, raw.train);
    write_split(dir.path / "valid.txt", raw, raw.valid);
    write_split(dir.path / "test.txt", raw, raw.test);
    const auto kb1 =
        build_kb(dir.path / "train.txt", dir.path / "valid.txt", dir.path / "test.txt");

    TempDir dir2("roundtrip");
    write_split(dir2.path / "train.txt", kb1, kb1.train);
    write_split(dir2.path / "valid.txt", kb1, kb1.valid);
    write_split(dir2.path / "test.txt", kb1, kb1.test);
    const auto kb2 =
        build_kb(dir2.path / "train.txt", dir2.path / "valid.txt", dir2.path / "test.txt");
    CHECK(kb2.train == kb1.train);
    CHECK(kb2.valid == kb1.valid);
    CHECK(kb2.test == kb1.test);
    CHECK(kb2.entities == kb1.entities);
    CHECK(kb2.relations == kb1.relations);
  }
}
