// Serial-reference vs OpenMP timing for the two data-parallel kernels:
// batch gradients and ranking evaluation. Also cross-checks that the
// parallel results match the serial ones.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "convkb/evaluation.hpp"
#include "convkb/kb.hpp"
#include "convkb/model.hpp"
#include "convkb/rng.hpp"
#include "convkb/training.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace convkb;

namespace {

KnowledgeBase random_kb(std::int32_t n_entities, std::int32_t n_relations,
                        std::int32_t n_train, std::int32_t n_test, std::uint64_t seed) {
  KnowledgeBase kb;
  for (std::int32_t e = 0; e < n_entities; ++e) kb.entities.add("e" + std::to_string(e));
  for (std::int32_t r = 0; r < n_relations; ++r) kb.relations.add("r" + std::to_string(r));
  Rng rng(seed);
  auto draw = [&]() {
    return Triple{rng.uniform_int(n_entities), rng.uniform_int(n_relations),
                  rng.uniform_int(n_entities)};
  };
  while (static_cast<std::int32_t>(kb.train.size()) < n_train) {
    Triple t = draw();
    if (kb.train_index.insert(t).second) {
      kb.train.push_back(t);
      kb.filter_index.insert(t);
    }
  }
  TripleSet seen = kb.train_index;
  while (static_cast<std::int32_t>(kb.test.size()) < n_test) {
    Triple t = draw();
    if (seen.insert(t).second) {
      kb.test.push_back(t);
      kb.filter_index.insert(t);
    }
  }
  return kb;
}

template <typename F>
double time_ms(int repeats, F&& fn) {
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto dt = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    best = std::min(best, dt);
  }
  return best;
}

double max_rel_diff(const GradientSet& a, const GradientSet& b) {
  double worst = 0.0;
  auto cmp = [&worst](double x, double y) {
    worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-12}));
  };
  for (const auto& [id, g] : a.entity) {
    const auto& h = b.entity.at(id);
    for (std::size_t i = 0; i < g.size(); ++i) cmp(g[i], h[i]);
  }
  for (const auto& [id, g] : a.relation) {
    const auto& h = b.relation.at(id);
    for (std::size_t i = 0; i < g.size(); ++i) cmp(g[i], h[i]);
  }
  for (std::size_t i = 0; i < a.weight.size(); ++i) cmp(a.weight[i], b.weight[i]);
  for (std::size_t i = 0; i < a.filters.size(); ++i) cmp(a.filters[i], b.filters[i]);
  for (std::size_t i = 0; i < a.biases.size(); ++i) cmp(a.biases[i], b.biases[i]);
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP kernel comparison"};
  std::int32_t n_entities = 2000, n_relations = 20, n_train = 20000, n_test = 200;
  std::int32_t k = 50, tau = 64, batch = 1024;
  int threads = 0, repeats = 3;
  bool quick = false;
  app.add_option("--entities", n_entities);
  app.add_option("--relations", n_relations);
  app.add_option("--train", n_train);
  app.add_option("--test", n_test);
  app.add_option("--k", k);
  app.add_option("--tau", tau);
  app.add_option("--batch", batch);
  app.add_option("--threads", threads, "default: hardware threads");
  app.add_option("--repeats", repeats);
  app.add_flag("--quick", quick, "tiny sizes for a smoke run");
  CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
  if (threads <= 0) threads = omp_get_max_threads();
#else
  threads = 1;
  std::printf("built without OpenMP; parallel timings degenerate to serial\n");
#endif
  if (quick) {
    n_entities = 200;
    n_relations = 5;
    n_train = 1000;
    n_test = 40;
    k = 16;
    tau = 8;
    batch = 256;
    repeats = 2;
  }

  const KnowledgeBase kb = random_kb(n_entities, n_relations, n_train, n_test, 7);
  const RelationStats stats = bernoulli_stats(kb);
  const EmbeddingStore emb = init_transe_embeddings(7, k, n_entities, n_relations);
  const ConvKBParams params = init_convkb_params(7, k, tau, FilterInit::kTruncatedNormal);

  Rng rng(11);
  std::vector<LabeledTriple> labeled;
  std::vector<std::pair<Triple, Triple>> pairs;
  for (std::int32_t i = 0; i < batch; ++i) {
    const Triple& pos = kb.train[rng.uniform_int(static_cast<std::int32_t>(kb.train.size()))];
    labeled.push_back({pos, +1});
    const Triple neg = sample_corrupted(pos, kb, stats, rng);
    labeled.push_back({neg, -1});
    pairs.emplace_back(pos, neg);
  }

  std::printf("%-22s %10s %12s %9s  %s\n", "kernel", "serial_ms", "parallel_ms", "speedup",
              "agreement");

  {
    BatchGrad serial, parallel;
    const double ts = time_ms(repeats, [&] { serial = grad_convkb(labeled, params, emb, 1e-3, 1); });
    const double tp =
        time_ms(repeats, [&] { parallel = grad_convkb(labeled, params, emb, 1e-3, threads); });
    std::printf("%-22s %10.2f %12.2f %8.2fx  max_rel_diff=%.2e\n", "convkb_batch_grad", ts, tp,
                ts / tp, max_rel_diff(serial.grads, parallel.grads));
  }
  {
    BatchGrad serial, parallel;
    const double ts = time_ms(repeats, [&] { serial = grad_transe(pairs, emb, 1, 1.0, 1); });
    const double tp =
        time_ms(repeats, [&] { parallel = grad_transe(pairs, emb, 1, 1.0, threads); });
    std::printf("%-22s %10.2f %12.2f %8.2fx  max_rel_diff=%.2e\n", "transe_batch_grad", ts, tp,
                ts / tp, max_rel_diff(serial.grads, parallel.grads));
  }
  {
    const Scorer scorer = [&](const Triple& t) { return score_convkb(params, emb, t); };
    EvalConfig cfg;
    RankingReport serial, parallel;
    cfg.threads = 1;
    const double ts = time_ms(repeats, [&] { serial = evaluate(scorer, kb, cfg); });
    cfg.threads = threads;
    const double tp = time_ms(repeats, [&] { parallel = evaluate(scorer, kb, cfg); });
    const bool same =
        serial.head_ranks == parallel.head_ranks && serial.tail_ranks == parallel.tail_ranks;
    std::printf("%-22s %10.2f %12.2f %8.2fx  ranks_identical=%s\n", "convkb_eval", ts, tp,
                ts / tp, same ? "yes" : "NO");
    if (!same) return 1;
  }
  {
    const Scorer scorer = [&](const Triple& t) { return score_transe(emb, t, 1); };
    EvalConfig cfg;
    RankingReport serial, parallel;
    cfg.threads = 1;
    const double ts = time_ms(repeats, [&] { serial = evaluate(scorer, kb, cfg); });
    cfg.threads = threads;
    const double tp = time_ms(repeats, [&] { parallel = evaluate(scorer, kb, cfg); });
    const bool same =
        serial.head_ranks == parallel.head_ranks && serial.tail_ranks == parallel.tail_ranks;
    std::printf("%-22s %10.2f %12.2f %8.2fx  ranks_identical=%s\n", "transe_eval", ts, tp,
                ts / tp, same ? "yes" : "NO");
    if (!same) return 1;
  }
  return 0;
}
