#include "convkb/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "convkb/errors.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace convkb {

namespace {

// RNG stream ids; streams 1 and 2 are taken by parameter initialization.
constexpr std::uint64_t kStreamShuffle = 3;
constexpr std::uint64_t kStreamNegative = 4;

inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void axpy_into(std::map<std::int32_t, std::vector<double>>& blocks, std::int32_t id,
               std::span<const double> g) {
  auto& dst = blocks[id];
  if (dst.empty()) dst.assign(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

void merge_sparse(std::map<std::int32_t, std::vector<double>>& into,
                  const std::map<std::int32_t, std::vector<double>>& from) {
  for (const auto& [id, g] : from) axpy_into(into, id, g);
}

void merge_dense(std::vector<double>& into, const std::vector<double>& from) {
  if (into.empty()) into.assign(from.size(), 0.0);
  for (std::size_t i = 0; i < from.size(); ++i) into[i] += from[i];
}

// Softplus objective and gradient for one labeled triple, accumulated into acc.
// Returns the loss term; -1 signals a non-finite score.
double convkb_example_backward(const LabeledTriple& ex, const ConvKBParams& params,
                               const EmbeddingStore& emb, GradientSet& acc,
                               std::vector<double>& scratch) {
  const std::int32_t k = emb.dim();
  const std::int32_t tau = params.num_filters;
  const auto h = emb.entity(ex.triple.head);
  const auto r = emb.relation(ex.triple.relation);
  const auto t = emb.entity(ex.triple.tail);

  // scratch layout: pre-activations (tau*k) | dh (k) | dr (k) | dt (k)
  scratch.assign(static_cast<std::size_t>(tau) * k + 3 * k, 0.0);
  double* pre = scratch.data();
  double* gh = pre + static_cast<std::size_t>(tau) * k;
  double* gr = gh + k;
  double* gt = gr + k;

  double score = 0.0;
  for (std::int32_t f = 0; f < tau; ++f) {
    const double w0 = params.filters[f * 3 + 0];
    const double w1 = params.filters[f * 3 + 1];
    const double w2 = params.filters[f * 3 + 2];
    const double b = params.biases[f];
    const double* wblock = params.weight.data() + static_cast<std::size_t>(f) * k;
    double* prow = pre + static_cast<std::size_t>(f) * k;
    for (std::int32_t i = 0; i < k; ++i) {
      prow[i] = w0 * h[i] + w1 * r[i] + w2 * t[i] + b;
      score += activate(params.activation, prow[i]) * wblock[i];
    }
  }
  if (!std::isfinite(score)) return -1.0;

  const double x = ex.label * score;
  const double dldf = ex.label * logistic(x);

  if (acc.filters.empty()) {
    acc.filters.assign(static_cast<std::size_t>(tau) * 3, 0.0);
    acc.biases.assign(tau, 0.0);
    acc.weight.assign(static_cast<std::size_t>(tau) * k, 0.0);
  }
  for (std::int32_t f = 0; f < tau; ++f) {
    const double w0 = params.filters[f * 3 + 0];
    const double w1 = params.filters[f * 3 + 1];
    const double w2 = params.filters[f * 3 + 2];
    const double* wblock = params.weight.data() + static_cast<std::size_t>(f) * k;
    const double* prow = pre + static_cast<std::size_t>(f) * k;
    double gf0 = 0.0, gf1 = 0.0, gf2 = 0.0, gb = 0.0;
    for (std::int32_t i = 0; i < k; ++i) {
      acc.weight[f * k + i] += dldf * activate(params.activation, prow[i]);
      const double q = dldf * activate_grad(params.activation, prow[i]) * wblock[i];
      gb += q;
      gf0 += q * h[i];
      gf1 += q * r[i];
      gf2 += q * t[i];
      gh[i] += q * w0;
      gr[i] += q * w1;
      gt[i] += q * w2;
    }
    acc.biases[f] += gb;
    acc.filters[f * 3 + 0] += gf0;
    acc.filters[f * 3 + 1] += gf1;
    acc.filters[f * 3 + 2] += gf2;
  }
  axpy_into(acc.entity, ex.triple.head, {gh, static_cast<std::size_t>(k)});
  axpy_into(acc.entity, ex.triple.tail, {gt, static_cast<std::size_t>(k)});
  axpy_into(acc.relation, ex.triple.relation, {gr, static_cast<std::size_t>(k)});
  return softplus(x);
}

// Margin objective and subgradient for one (pos, neg) pair.
double transe_pair_backward(const Triple& pos, const Triple& neg, const EmbeddingStore& emb,
                            int p, double gamma, GradientSet& acc,
                            std::vector<double>& scratch) {
  const std::int32_t k = emb.dim();
  scratch.assign(2 * static_cast<std::size_t>(k), 0.0);
  double* dpos = scratch.data();
  double* dneg = dpos + k;

  auto residuals = [&](const Triple& t, double* d) {
    const auto h = emb.entity(t.head);
    const auto r = emb.relation(t.relation);
    const auto tl = emb.entity(t.tail);
    double s = 0.0;
    for (std::int32_t i = 0; i < k; ++i) {
      d[i] = h[i] + r[i] - tl[i];
      s += p == 1 ? std::abs(d[i]) : d[i] * d[i];
    }
    return s;
  };
  const double s_pos = residuals(pos, dpos);
  const double s_neg = residuals(neg, dneg);
  const double z = gamma + s_pos - s_neg;
  if (z <= 0.0) return 0.0;

  auto coef = [p](double d) {
    if (p == 1) return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    return 2.0 * d;
  };
  std::vector<double> g(k);
  auto route = [&](const Triple& t, const double* d, double sign) {
    for (std::int32_t i = 0; i < k; ++i) g[i] = sign * coef(d[i]);
    axpy_into(acc.entity, t.head, g);
    axpy_into(acc.relation, t.relation, g);
    for (std::int32_t i = 0; i < k; ++i) g[i] = -g[i];
    axpy_into(acc.entity, t.tail, g);
  };
  route(pos, dpos, 1.0);
  route(neg, dneg, -1.0);
  return z;
}

}  // namespace

AdamState make_adam_state(const EmbeddingStore& emb, const ConvKBParams* conv) {
  AdamState s;
  s.ent_m.assign(emb.entity_data().size(), 0.0);
  s.ent_v.assign(emb.entity_data().size(), 0.0);
  s.rel_m.assign(emb.relation_data().size(), 0.0);
  s.rel_v.assign(emb.relation_data().size(), 0.0);
  if (conv != nullptr) {
    s.filt_m.assign(conv->filters.size(), 0.0);
    s.filt_v.assign(conv->filters.size(), 0.0);
    s.bias_m.assign(conv->biases.size(), 0.0);
    s.bias_v.assign(conv->biases.size(), 0.0);
    s.w_m.assign(conv->weight.size(), 0.0);
    s.w_v.assign(conv->weight.size(), 0.0);
  }
  return s;
}

ModelState init_model(const TrainConfig& cfg, std::int32_t n_entities, std::int32_t n_relations) {
  ModelState m;
  m.config = cfg;
  m.emb = init_transe_embeddings(cfg.seed, cfg.k, n_entities, n_relations);
  if (cfg.model == ModelKind::kConvKB) {
    m.conv = init_convkb_params(cfg.seed, cfg.k, cfg.tau, cfg.filter_init, cfg.activation);
    m.adam = make_adam_state(m.emb, &*m.conv);
  }
  return m;
}

Triple sample_corrupted(const Triple& t, const KnowledgeBase& kb, const RelationStats& stats,
                        Rng& rng) {
  if (kb.entities.size() < 2) throw DataError("corruption sampling needs >= 2 entities");
  const bool corrupt_head = rng.bernoulli(stats.head_corrupt_prob[t.relation]);
  Triple candidate = t;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const std::int32_t e = rng.uniform_int(kb.entities.size());
    if (corrupt_head) {
      candidate.head = e;
    } else {
      candidate.tail = e;
    }
    if (!kb.train_index.contains(candidate)) return candidate;
  }
  throw DataError("corruption sampling exceeded 1000 attempts; relation " +
                  kb.relations.label(t.relation) + " admits no corrupted triple");
}

double softplus_loss(std::span<const double> scores, std::span<const int> labels,
                     std::span<const double> weight, double lambda) {
  double loss = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    loss += softplus(labels[i] * scores[i]);
  }
  double w2 = 0.0;
  for (double w : weight) w2 += w * w;
  return loss + 0.5 * lambda * w2;
}

BatchGrad grad_convkb(std::span<const LabeledTriple> batch, const ConvKBParams& params,
                      const EmbeddingStore& emb, double lambda, int threads) {
  check_shapes(params, emb);
  const auto n = static_cast<std::int64_t>(batch.size());
  BatchGrad out;
  std::int64_t bad = -1;

#ifdef _OPENMP
  const int nt = static_cast<int>(std::max<std::int64_t>(1, std::min<std::int64_t>(threads, n)));
#else
  const int nt = 1;
#endif
  if (nt > 1) {
#ifdef _OPENMP
    std::vector<BatchGrad> partial(nt);
    std::atomic<std::int64_t> first_bad{-1};
    const std::int64_t chunk = (n + nt - 1) / nt;
#pragma omp parallel num_threads(nt)
    {
      const int tid = omp_get_thread_num();
      const std::int64_t lo = tid * chunk;
      const std::int64_t hi = std::min<std::int64_t>(lo + chunk, n);
      std::vector<double> scratch;
      for (std::int64_t i = lo; i < hi; ++i) {
        const double term =
            convkb_example_backward(batch[i], params, emb, partial[tid].grads, scratch);
        if (term < 0.0) {
          std::int64_t expected = -1;
          first_bad.compare_exchange_strong(expected, i);
          break;
        }
        partial[tid].loss += term;
      }
    }
    bad = first_bad.load();
    // merge in thread order: deterministic for a fixed thread count
    for (const BatchGrad& p : partial) {
      out.loss += p.loss;
      merge_sparse(out.grads.entity, p.grads.entity);
      merge_sparse(out.grads.relation, p.grads.relation);
      merge_dense(out.grads.filters, p.grads.filters);
      merge_dense(out.grads.biases, p.grads.biases);
      merge_dense(out.grads.weight, p.grads.weight);
    }
#endif
  } else {
    std::vector<double> scratch;
    for (std::int64_t i = 0; i < n; ++i) {
      const double term = convkb_example_backward(batch[i], params, emb, out.grads, scratch);
      if (term < 0.0) {
        bad = i;
        break;
      }
      out.loss += term;
    }
  }
  if (bad >= 0) {
    const Triple& t = batch[bad].triple;
    throw NumericError("non-finite ConvKB score for triple (" + std::to_string(t.head) + ", " +
                       std::to_string(t.relation) + ", " + std::to_string(t.tail) + ")");
  }

  // L2 on the weight vector, once per batch
  if (out.grads.weight.empty()) out.grads.weight.assign(params.weight.size(), 0.0);
  double w2 = 0.0;
  for (std::size_t j = 0; j < params.weight.size(); ++j) {
    out.grads.weight[j] += lambda * params.weight[j];
    w2 += params.weight[j] * params.weight[j];
  }
  out.loss += 0.5 * lambda * w2;
  if (out.grads.filters.empty()) {
    out.grads.filters.assign(params.filters.size(), 0.0);
    out.grads.biases.assign(params.biases.size(), 0.0);
  }
  return out;
}

BatchGrad grad_transe(std::span<const std::pair<Triple, Triple>> pairs,
                      const EmbeddingStore& emb, int p, double gamma, int threads) {
  const auto n = static_cast<std::int64_t>(pairs.size());
  BatchGrad out;

#ifdef _OPENMP
  const int nt = static_cast<int>(std::max<std::int64_t>(1, std::min<std::int64_t>(threads, n)));
#else
  const int nt = 1;
#endif
  if (nt > 1) {
#ifdef _OPENMP
    std::vector<BatchGrad> partial(nt);
    const std::int64_t chunk = (n + nt - 1) / nt;
#pragma omp parallel num_threads(nt)
    {
      const int tid = omp_get_thread_num();
      const std::int64_t lo = tid * chunk;
      const std::int64_t hi = std::min<std::int64_t>(lo + chunk, n);
      std::vector<double> scratch;
      for (std::int64_t i = lo; i < hi; ++i) {
        partial[tid].loss += transe_pair_backward(pairs[i].first, pairs[i].second, emb, p,
                                                  gamma, partial[tid].grads, scratch);
      }
    }
    for (const BatchGrad& q : partial) {
      out.loss += q.loss;
      merge_sparse(out.grads.entity, q.grads.entity);
      merge_sparse(out.grads.relation, q.grads.relation);
    }
#endif
  } else {
    std::vector<double> scratch;
    for (std::int64_t i = 0; i < n; ++i) {
      out.loss += transe_pair_backward(pairs[i].first, pairs[i].second, emb, p, gamma,
                                       out.grads, scratch);
    }
  }
  return out;
}

void sgd_step(EmbeddingStore& emb, ConvKBParams* conv, const GradientSet& grads, double lr) {
  const std::int32_t k = emb.dim();
  for (const auto& [id, g] : grads.entity) {
    auto row = emb.entity(id);
    for (std::int32_t i = 0; i < k; ++i) row[i] -= lr * g[i];
  }
  for (const auto& [id, g] : grads.relation) {
    auto row = emb.relation(id);
    for (std::int32_t i = 0; i < k; ++i) row[i] -= lr * g[i];
  }
  if (!grads.weight.empty()) {
    if (conv == nullptr) throw ConfigError("gradient has ConvKB blocks but no parameters");
    for (std::size_t j = 0; j < grads.filters.size(); ++j) conv->filters[j] -= lr * grads.filters[j];
    for (std::size_t j = 0; j < grads.biases.size(); ++j) conv->biases[j] -= lr * grads.biases[j];
    for (std::size_t j = 0; j < grads.weight.size(); ++j) conv->weight[j] -= lr * grads.weight[j];
  }
}

void adam_step(AdamState& state, const GradientSet& grads, EmbeddingStore& emb,
               ConvKBParams* conv, double lr) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  auto update = [&](double* theta, double* m, double* v, const double* g, std::size_t len) {
    for (std::size_t j = 0; j < len; ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      theta[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  };

  const auto k = static_cast<std::size_t>(emb.dim());
  for (const auto& [id, g] : grads.entity) {
    const std::size_t base = static_cast<std::size_t>(id) * k;
    update(emb.entity_data().data() + base, state.ent_m.data() + base,
           state.ent_v.data() + base, g.data(), k);
  }
  for (const auto& [id, g] : grads.relation) {
    const std::size_t base = static_cast<std::size_t>(id) * k;
    update(emb.relation_data().data() + base, state.rel_m.data() + base,
           state.rel_v.data() + base, g.data(), k);
  }
  if (!grads.weight.empty()) {
    if (conv == nullptr) throw ConfigError("gradient has ConvKB blocks but no parameters");
    update(conv->filters.data(), state.filt_m.data(), state.filt_v.data(),
           grads.filters.data(), grads.filters.size());
    update(conv->biases.data(), state.bias_m.data(), state.bias_v.data(), grads.biases.data(),
           grads.biases.size());
    update(conv->weight.data(), state.w_m.data(), state.w_v.data(), grads.weight.data(),
           grads.weight.size());
  }
}

std::size_t normalize_entity_rows(EmbeddingStore& emb) {
  std::size_t zero_rows = 0;
  for (std::int32_t e = 0; e < emb.n_entities(); ++e) {
    auto row = emb.entity(e);
    double n2 = 0.0;
    for (double x : row) n2 += x * x;
    if (n2 == 0.0) {
      ++zero_rows;
      continue;
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (double& x : row) x *= inv;
  }
  return zero_rows;
}

EpochStats train_epoch(ModelState& m, const KnowledgeBase& kb, const RelationStats& stats,
                       std::int32_t epoch_index) {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainConfig& cfg = m.config;
  const auto n = static_cast<std::int64_t>(kb.train.size());

  // portable Fisher-Yates; std::shuffle is implementation-defined
  std::vector<std::int32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng = Rng::derive(cfg.seed, kStreamShuffle, static_cast<std::uint64_t>(epoch_index));
  for (std::int64_t i = n - 1; i > 0; --i) {
    const auto j = shuffle_rng.uniform_int(static_cast<std::int32_t>(i + 1));
    std::swap(order[i], order[j]);
  }
  Rng neg_rng = Rng::derive(cfg.seed, kStreamNegative, static_cast<std::uint64_t>(epoch_index));

  EpochStats out;
  double total_loss = 0.0;
  std::size_t zero_rows = 0;
  std::vector<LabeledTriple> labeled;
  std::vector<std::pair<Triple, Triple>> pairs;

  for (std::int64_t start = 0; start < n; start += cfg.batch_size) {
    const std::int64_t stop = std::min<std::int64_t>(start + cfg.batch_size, n);

    if (cfg.model == ModelKind::kTransE || cfg.convkb_entity_norm) {
      zero_rows += normalize_entity_rows(m.emb);
    }

    if (cfg.model == ModelKind::kConvKB) {
      labeled.clear();
      for (std::int64_t i = start; i < stop; ++i) {
        const Triple& pos = kb.train[order[i]];
        labeled.push_back({pos, +1});
        for (std::int32_t j = 0; j < cfg.neg_ratio; ++j) {
          labeled.push_back({sample_corrupted(pos, kb, stats, neg_rng), -1});
        }
      }
      BatchGrad bg = grad_convkb(labeled, *m.conv, m.emb, cfg.lambda, cfg.threads);
      adam_step(*m.adam, bg.grads, m.emb, &*m.conv, cfg.lr);
      total_loss += bg.loss;
      out.examples += static_cast<std::int64_t>(labeled.size());
    } else {
      pairs.clear();
      for (std::int64_t i = start; i < stop; ++i) {
        const Triple& pos = kb.train[order[i]];
        for (std::int32_t j = 0; j < cfg.neg_ratio; ++j) {
          pairs.emplace_back(pos, sample_corrupted(pos, kb, stats, neg_rng));
        }
      }
      BatchGrad bg = grad_transe(pairs, m.emb, cfg.p, cfg.gamma, cfg.threads);
      sgd_step(m.emb, nullptr, bg.grads, cfg.lr);
      total_loss += bg.loss;
      out.examples += static_cast<std::int64_t>(pairs.size());
    }
  }

  if (zero_rows > 0) {
    std::cerr << "warning: " << zero_rows << " zero entity rows left unnormalized in epoch "
              << epoch_index << "\n";
  }
  out.mean_loss = out.examples > 0 ? total_loss / static_cast<double>(out.examples) : 0.0;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::vector<EpochStats> train_model(ModelState& m, const KnowledgeBase& kb,
                                    const std::function<void(std::int32_t, const EpochStats&)>& on_epoch) {
  const RelationStats stats = bernoulli_stats(kb);
  std::vector<EpochStats> history;
  history.reserve(m.config.epochs);
  for (std::int32_t epoch = 0; epoch < m.config.epochs; ++epoch) {
    history.push_back(train_epoch(m, kb, stats, epoch));
    if (on_epoch) on_epoch(epoch, history.back());
  }
  return history;
}

std::function<double(const Triple&)> make_scorer(const ModelState& m) {
  if (m.config.model == ModelKind::kTransE) {
    return [&emb = m.emb, p = m.config.p](const Triple& t) { return score_transe(emb, t, p); };
  }
  return [&emb = m.emb, &conv = *m.conv](const Triple& t) { return score_convkb(conv, emb, t); };
}

namespace {

struct ComponentChecker {
  double h;
  FiniteDiffReport report;

  BlockCheck& block(const std::string& name) {
    for (auto& b : report.blocks) {
      if (b.name == name) return b;
    }
    report.blocks.push_back({name, 0.0, 0, 0});
    return report.blocks.back();
  }

  void skip(const std::string& name) { ++block(name).skipped; }

  void check(const std::string& name, double analytic, double& theta,
             const std::function<double()>& loss) {
    BlockCheck& b = block(name);
    const double orig = theta;
    theta = orig + h;
    const double lp = loss();
    theta = orig - h;
    const double lm = loss();
    theta = orig;
    const double fd = (lp - lm) / (2.0 * h);
    // floor guards against finite-difference noise on near-zero components
    const double rel = std::abs(analytic - fd) /
                       std::max({std::abs(analytic), std::abs(fd), 0.01});
    b.max_rel_err = std::max(b.max_rel_err, rel);
    ++b.checked;
    report.max_rel_err = std::max(report.max_rel_err, rel);
  }
};

// Multiplies the largest-magnitude component by 1.01 across all blocks.
void corrupt_largest(GradientSet& g) {
  double* target = nullptr;
  double best = -1.0;
  auto scan = [&](std::vector<double>& v) {
    for (double& x : v) {
      if (std::abs(x) > best) {
        best = std::abs(x);
        target = &x;
      }
    }
  };
  for (auto& [id, v] : g.entity) scan(v);
  for (auto& [id, v] : g.relation) scan(v);
  scan(g.filters);
  scan(g.biases);
  scan(g.weight);
  if (target != nullptr) *target *= 1.01;
}

}  // namespace

FiniteDiffReport finite_diff_check_convkb(const ConvKBParams& params, const EmbeddingStore& emb,
                                          std::span<const LabeledTriple> sample, double lambda,
                                          double h, bool corrupt_for_test) {
  const std::int32_t k = emb.dim();
  const std::int32_t tau = params.num_filters;
  BatchGrad bg = grad_convkb(sample, params, emb, lambda, 1);
  if (corrupt_for_test) corrupt_largest(bg.grads);

  const bool kinked = params.activation == Activation::kReLU ||
                      params.activation == Activation::kAbs;

  // pre[ex][f*k + i], for the kink-exclusion rule
  std::vector<std::vector<double>> pre(sample.size());
  for (std::size_t e = 0; e < sample.size(); ++e) {
    pre[e].resize(static_cast<std::size_t>(tau) * k);
    const auto hv = emb.entity(sample[e].triple.head);
    const auto rv = emb.relation(sample[e].triple.relation);
    const auto tv = emb.entity(sample[e].triple.tail);
    for (std::int32_t f = 0; f < tau; ++f) {
      for (std::int32_t i = 0; i < k; ++i) {
        pre[e][f * k + i] = params.filters[f * 3] * hv[i] + params.filters[f * 3 + 1] * rv[i] +
                            params.filters[f * 3 + 2] * tv[i] + params.biases[f];
      }
    }
  }
  // A +/-h perturbation moves a pre-activation by at most coef_bound * h;
  // anything inside the window could cross the kink during the probe.
  double coef_bound = 1.0;
  for (double w : params.filters) coef_bound = std::max(coef_bound, std::abs(w));
  for (const LabeledTriple& ex : sample) {
    for (double x : emb.entity(ex.triple.head)) coef_bound = std::max(coef_bound, std::abs(x));
    for (double x : emb.relation(ex.triple.relation)) coef_bound = std::max(coef_bound, std::abs(x));
    for (double x : emb.entity(ex.triple.tail)) coef_bound = std::max(coef_bound, std::abs(x));
  }
  const double window = 2.0 * h * coef_bound;
  auto filter_clear = [&](std::int32_t f) {
    if (!kinked) return true;
    for (std::size_t e = 0; e < sample.size(); ++e) {
      for (std::int32_t i = 0; i < k; ++i) {
        if (std::abs(pre[e][f * k + i]) <= window) return false;
      }
    }
    return true;
  };
  // row i of every example that touches entity (or relation) id
  auto row_clear = [&](std::int32_t id, bool is_relation, std::int32_t i) {
    if (!kinked) return true;
    for (std::size_t e = 0; e < sample.size(); ++e) {
      const Triple& t = sample[e].triple;
      const bool touches = is_relation ? t.relation == id : (t.head == id || t.tail == id);
      if (!touches) continue;
      for (std::int32_t f = 0; f < tau; ++f) {
        if (std::abs(pre[e][f * k + i]) <= window) return false;
      }
    }
    return true;
  };

  ConvKBParams pm = params;
  EmbeddingStore em = emb;
  auto loss = [&]() {
    double l = 0.0;
    for (const LabeledTriple& ex : sample) {
      l += softplus(ex.label * score_convkb(pm, em, ex.triple));
    }
    double w2 = 0.0;
    for (double w : pm.weight) w2 += w * w;
    return l + 0.5 * lambda * w2;
  };

  ComponentChecker cc{h, {}};
  for (const auto& [id, g] : bg.grads.entity) {
    for (std::int32_t i = 0; i < k; ++i) {
      if (!row_clear(id, false, i)) {
        cc.skip("entity");
        continue;
      }
      cc.check("entity", g[i], em.entity(id)[i], loss);
    }
  }
  for (const auto& [id, g] : bg.grads.relation) {
    for (std::int32_t i = 0; i < k; ++i) {
      if (!row_clear(id, true, i)) {
        cc.skip("relation");
        continue;
      }
      cc.check("relation", g[i], em.relation(id)[i], loss);
    }
  }
  for (std::int32_t f = 0; f < tau; ++f) {
    if (!filter_clear(f)) {
      for (int c = 0; c < 3; ++c) cc.skip("filters");
      cc.skip("biases");
      continue;
    }
    for (int c = 0; c < 3; ++c) {
      cc.check("filters", bg.grads.filters[f * 3 + c], pm.filters[f * 3 + c], loss);
    }
    cc.check("biases", bg.grads.biases[f], pm.biases[f], loss);
  }
  // f is linear in w: no kink exclusion for the readout
  for (std::size_t j = 0; j < pm.weight.size(); ++j) {
    cc.check("weight", bg.grads.weight[j], pm.weight[j], loss);
  }
  return cc.report;
}

FiniteDiffReport finite_diff_check_transe(const EmbeddingStore& emb,
                                          std::span<const std::pair<Triple, Triple>> pairs,
                                          int p, double gamma, double h,
                                          bool corrupt_for_test) {
  const std::int32_t k = emb.dim();
  BatchGrad bg = grad_transe(pairs, emb, p, gamma, 1);
  if (corrupt_for_test) corrupt_largest(bg.grads);

  // residuals and hinge values for the exclusion windows
  std::vector<std::vector<double>> res_pos(pairs.size()), res_neg(pairs.size());
  std::vector<double> hinge(pairs.size());
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    auto fill = [&](const Triple& t, std::vector<double>& d) {
      d.resize(k);
      const auto hv = emb.entity(t.head);
      const auto rv = emb.relation(t.relation);
      const auto tv = emb.entity(t.tail);
      double s = 0.0;
      for (std::int32_t i = 0; i < k; ++i) {
        d[i] = hv[i] + rv[i] - tv[i];
        s += p == 1 ? std::abs(d[i]) : d[i] * d[i];
      }
      return s;
    };
    const double sp = fill(pairs[pi].first, res_pos[pi]);
    const double sn = fill(pairs[pi].second, res_neg[pi]);
    hinge[pi] = gamma + sp - sn;
  }

  auto touches = [](const Triple& t, std::int32_t id, bool is_relation) {
    return is_relation ? t.relation == id : (t.head == id || t.tail == id);
  };
  // A component (id, dim i) is checkable unless a pair it influences sits at
  // the hinge boundary, or (p=1) an influenced residual component is near 0.
  auto component_clear = [&](std::int32_t id, bool is_relation, std::int32_t i) {
    for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
      const bool in_pos = touches(pairs[pi].first, id, is_relation);
      const bool in_neg = touches(pairs[pi].second, id, is_relation);
      if (!in_pos && !in_neg) continue;
      double max_res = 0.0;
      for (std::int32_t j = 0; j < k; ++j) {
        max_res = std::max({max_res, std::abs(res_pos[pi][j]), std::abs(res_neg[pi][j])});
      }
      const double slope = p == 1 ? 2.0 : 4.0 * std::max(1.0, max_res);
      if (std::abs(hinge[pi]) <= 2.0 * h * slope) return false;
      if (p == 1 && hinge[pi] > 0.0) {
        if (in_pos && std::abs(res_pos[pi][i]) <= 2.0 * h) return false;
        if (in_neg && std::abs(res_neg[pi][i]) <= 2.0 * h) return false;
      }
    }
    return true;
  };

  EmbeddingStore em = emb;
  auto loss = [&]() {
    double l = 0.0;
    for (const auto& [pos, neg] : pairs) {
      l += margin_loss(score_transe(em, pos, p), score_transe(em, neg, p), gamma);
    }
    return l;
  };

  ComponentChecker cc{h, {}};
  for (const auto& [id, g] : bg.grads.entity) {
    for (std::int32_t i = 0; i < k; ++i) {
      if (!component_clear(id, false, i)) {
        cc.skip("entity");
        continue;
      }
      cc.check("entity", g[i], em.entity(id)[i], loss);
    }
  }
  for (const auto& [id, g] : bg.grads.relation) {
    for (std::int32_t i = 0; i < k; ++i) {
      if (!component_clear(id, true, i)) {
        cc.skip("relation");
        continue;
      }
      cc.check("relation", g[i], em.relation(id)[i], loss);
    }
  }
  return cc.report;
}

}  // namespace convkb
