#include "convkb/model.hpp"

#include <cmath>
#include <string>

#include "convkb/errors.hpp"
#include "convkb/rng.hpp"

namespace convkb {

EmbeddingStore init_transe_embeddings(std::uint64_t seed, std::int32_t k,
                                      std::int32_t n_entities, std::int32_t n_relations) {
  if (k < 1 || n_entities < 1 || n_relations < 1) {
    throw ConfigError("init_transe_embeddings: k and counts must be >= 1");
  }
  EmbeddingStore emb(n_entities, n_relations, k);
  const double bound = 6.0 / std::sqrt(static_cast<double>(k));
  Rng rng = Rng::derive(seed, /*stream=*/1);
  for (double& x : emb.entity_data()) x = rng.uniform(-bound, bound);
  for (double& x : emb.relation_data()) x = rng.uniform(-bound, bound);
  return emb;
}

ConvKBParams init_convkb_params(std::uint64_t seed, std::int32_t k, std::int32_t tau,
                                FilterInit scheme, Activation g) {
  if (k < 1 || tau < 1) throw ConfigError("init_convkb_params: k and tau must be >= 1");
  ConvKBParams p;
  p.num_filters = tau;
  p.activation = g;
  p.filters.resize(static_cast<std::size_t>(tau) * 3);
  p.biases.assign(tau, 0.0);
  p.weight.resize(static_cast<std::size_t>(tau) * k);

  Rng rng = Rng::derive(seed, /*stream=*/2);
  if (scheme == FilterInit::kFixedVector) {
    for (std::int32_t f = 0; f < tau; ++f) {
      p.filters[f * 3 + 0] = 0.1;
      p.filters[f * 3 + 1] = 0.1;
      p.filters[f * 3 + 2] = -0.1;
    }
  } else {
    for (double& x : p.filters) x = rng.truncated_normal(0.0, 0.1);
  }
  for (double& x : p.weight) x = rng.truncated_normal(0.0, 0.1);
  return p;
}

double score_transe(const EmbeddingStore& emb, const Triple& t, int p) {
  const auto h = emb.entity(t.head);
  const auto r = emb.relation(t.relation);
  const auto tl = emb.entity(t.tail);
  double score = 0.0;
  if (p == 1) {
    for (std::int32_t i = 0; i < emb.dim(); ++i) score += std::abs(h[i] + r[i] - tl[i]);
  } else {
    for (std::int32_t i = 0; i < emb.dim(); ++i) {
      const double d = h[i] + r[i] - tl[i];
      score += d * d;
    }
  }
  return score;
}

void feature_map(const TripleMatrix& a, std::span<const double> filter, double bias,
                 Activation g, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = activate(g, filter[0] * a.head[i] + filter[1] * a.relation[i] +
                             filter[2] * a.tail[i] + bias);
  }
}

void check_shapes(const ConvKBParams& params, const EmbeddingStore& emb) {
  const auto tau = static_cast<std::size_t>(params.num_filters);
  if (params.num_filters < 1 || params.filters.size() != tau * 3 ||
      params.biases.size() != tau ||
      params.weight.size() != tau * static_cast<std::size_t>(emb.dim())) {
    throw ConfigError("ConvKB parameter shapes inconsistent with k=" +
                      std::to_string(emb.dim()) + ", tau=" +
                      std::to_string(params.num_filters));
  }
}

double score_convkb(const ConvKBParams& params, const EmbeddingStore& emb, const Triple& t) {
  check_shapes(params, emb);
  const auto h = emb.entity(t.head);
  const auto r = emb.relation(t.relation);
  const auto tl = emb.entity(t.tail);
  const std::int32_t k = emb.dim();

  // Fused: feature maps dotted with the matching weight block, filter-major.
  double score = 0.0;
  for (std::int32_t f = 0; f < params.num_filters; ++f) {
    const double w0 = params.filters[f * 3 + 0];
    const double w1 = params.filters[f * 3 + 1];
    const double w2 = params.filters[f * 3 + 2];
    const double b = params.biases[f];
    const double* wblock = params.weight.data() + static_cast<std::size_t>(f) * k;
    for (std::int32_t i = 0; i < k; ++i) {
      score += activate(params.activation, w0 * h[i] + w1 * r[i] + w2 * tl[i] + b) * wblock[i];
    }
  }
  return score;
}

}  // namespace convkb
