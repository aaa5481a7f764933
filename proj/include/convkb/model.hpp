#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "convkb/kb.hpp"

namespace convkb {

enum class Activation : std::uint8_t { kReLU = 0, kAbs = 1, kSquare = 2, kIdentity = 3 };

// Subgradient convention: g'(0) = 0 for ReLU and Abs.
inline double activate(Activation g, double x) {
  switch (g) {
    case Activation::kReLU: return x > 0.0 ? x : 0.0;
    case Activation::kAbs: return x < 0.0 ? -x : x;
    case Activation::kSquare: return x * x;
    case Activation::kIdentity: return x;
  }
  return x;
}

inline double activate_grad(Activation g, double x) {
  switch (g) {
    case Activation::kReLU: return x > 0.0 ? 1.0 : 0.0;
    case Activation::kAbs: return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    case Activation::kSquare: return 2.0 * x;
    case Activation::kIdentity: return 1.0;
  }
  return 1.0;
}

// Dense k-dimensional vectors for every entity and relation, row-major.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  EmbeddingStore(std::int32_t n_entities, std::int32_t n_relations, std::int32_t k)
      : k_(k),
        n_entities_(n_entities),
        n_relations_(n_relations),
        entity_data_(static_cast<std::size_t>(n_entities) * k, 0.0),
        relation_data_(static_cast<std::size_t>(n_relations) * k, 0.0) {}

  std::int32_t dim() const { return k_; }
  std::int32_t n_entities() const { return n_entities_; }
  std::int32_t n_relations() const { return n_relations_; }

  std::span<double> entity(std::int32_t id) {
    return {entity_data_.data() + static_cast<std::size_t>(id) * k_, static_cast<std::size_t>(k_)};
  }
  std::span<const double> entity(std::int32_t id) const {
    return {entity_data_.data() + static_cast<std::size_t>(id) * k_, static_cast<std::size_t>(k_)};
  }
  std::span<double> relation(std::int32_t id) {
    return {relation_data_.data() + static_cast<std::size_t>(id) * k_, static_cast<std::size_t>(k_)};
  }
  std::span<const double> relation(std::int32_t id) const {
    return {relation_data_.data() + static_cast<std::size_t>(id) * k_, static_cast<std::size_t>(k_)};
  }

  std::vector<double>& entity_data() { return entity_data_; }
  const std::vector<double>& entity_data() const { return entity_data_; }
  std::vector<double>& relation_data() { return relation_data_; }
  const std::vector<double>& relation_data() const { return relation_data_; }

  friend bool operator==(const EmbeddingStore&, const EmbeddingStore&) = default;

 private:
  std::int32_t k_ = 0;
  std::int32_t n_entities_ = 0;
  std::int32_t n_relations_ = 0;
  std::vector<double> entity_data_;
  std::vector<double> relation_data_;
};

// The k x 3 view [v_h, v_r, v_t]; row i is (head[i], relation[i], tail[i]).
struct TripleMatrix {
  std::span<const double> head;
  std::span<const double> relation;
  std::span<const double> tail;
};

enum class FilterInit : std::uint8_t { kTruncatedNormal = 0, kFixedVector = 1 };

// tau width-3 filters, per-filter biases, and the readout weight vector of
// length tau*k. Feature maps concatenate filter-major: filter 0's k entries
// come first.
struct ConvKBParams {
  std::int32_t num_filters = 0;       // tau
  std::vector<double> filters;        // tau x 3, row-major
  std::vector<double> biases;         // tau
  std::vector<double> weight;         // tau * k
  Activation activation = Activation::kReLU;

  std::span<const double> filter(std::int32_t f) const {
    return {filters.data() + static_cast<std::size_t>(f) * 3, 3};
  }

  friend bool operator==(const ConvKBParams&, const ConvKBParams&) = default;
};

// Uniform [-6/sqrt(k), +6/sqrt(k)], deterministic given seed.
EmbeddingStore init_transe_embeddings(std::uint64_t seed, std::int32_t k,
                                      std::int32_t n_entities, std::int32_t n_relations);

// Fixed-vector scheme sets every filter to [0.1, 0.1, -0.1]; truncated-normal
// draws mean 0, sigma 0.1, resampled outside +/-2 sigma. Biases start at 0;
// the weight vector is always truncated-normal.
ConvKBParams init_convkb_params(std::uint64_t seed, std::int32_t k, std::int32_t tau,
                                FilterInit scheme, Activation g = Activation::kReLU);

// sum_i |h_i + r_i - t_i|^p, p in {1, 2}. Lower = more plausible.
double score_transe(const EmbeddingStore& emb, const Triple& t, int p);

// out[i] = g(filter . A_{i,:} + bias)
void feature_map(const TripleMatrix& a, std::span<const double> filter, double bias,
                 Activation g, std::span<double> out);

// concat of the tau feature maps dotted with the weight vector. Lower = more
// plausible. Throws ConfigError on shape mismatch.
double score_convkb(const ConvKBParams& params, const EmbeddingStore& emb, const Triple& t);

void check_shapes(const ConvKBParams& params, const EmbeddingStore& emb);

}  // namespace convkb
