#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "convkb/kb.hpp"
#include "convkb/model.hpp"
#include "convkb/rng.hpp"

namespace convkb {

enum class ModelKind : std::uint8_t { kTransE = 0, kConvKB = 1 };

struct LabeledTriple {
  Triple triple;
  int label = 1;  // +1 valid, -1 corrupted
};

// Sparse per-entity / per-relation gradients plus the dense ConvKB blocks.
// std::map keeps iteration (and therefore accumulation) order deterministic.
struct GradientSet {
  std::map<std::int32_t, std::vector<double>> entity;    // id -> k-vector
  std::map<std::int32_t, std::vector<double>> relation;  // id -> k-vector
  std::vector<double> filters;                           // tau x 3, empty for TransE
  std::vector<double> biases;                            // tau
  std::vector<double> weight;                            // tau * k
};

// Adam moments mirror every parameter block. Sparse semantics: a step updates
// moments only for blocks present in the GradientSet; the step counter is
// global and incremented once per call.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<double> ent_m, ent_v;
  std::vector<double> rel_m, rel_v;
  std::vector<double> filt_m, filt_v;
  std::vector<double> bias_m, bias_v;
  std::vector<double> w_m, w_v;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

AdamState make_adam_state(const EmbeddingStore& emb, const ConvKBParams* conv);

struct TrainConfig {
  ModelKind model = ModelKind::kConvKB;
  std::int32_t k = 50;
  std::int32_t tau = 50;  // ConvKB only
  int p = 1;              // TransE norm order, 1 or 2
  double gamma = 1.0;     // TransE margin
  double lambda = 0.001;  // L2 coefficient on the weight vector
  double lr = 1e-4;
  std::int32_t batch_size = 256;
  std::int32_t epochs = 200;
  std::int32_t neg_ratio = 1;  // corrupted samples per valid triple
  std::uint64_t seed = 7;
  FilterInit filter_init = FilterInit::kTruncatedNormal;
  Activation activation = Activation::kReLU;
  bool convkb_entity_norm = false;  // ConvKB per-batch entity normalization, off by default
  int threads = 1;                  // 1 = bitwise-deterministic reference path
};

// Everything cmd_train produces and the checkpoint persists.
struct ModelState {
  TrainConfig config;
  EmbeddingStore emb;
  std::optional<ConvKBParams> conv;  // absent for TransE
  std::optional<AdamState> adam;     // ConvKB optimizer state
};

ModelState init_model(const TrainConfig& cfg, std::int32_t n_entities, std::int32_t n_relations);

// Bernoulli corruption: replaces head with probability head_corrupt_prob(r),
// else tail, by a uniformly random entity; resamples (up to 1000 attempts)
// until the result is outside the training split.
Triple sample_corrupted(const Triple& t, const KnowledgeBase& kb, const RelationStats& stats,
                        Rng& rng);

// sum_i log(1 + exp(label_i * score_i)) + (lambda/2) * ||w||^2, evaluated in
// the overflow-stable form max(x,0) + log1p(exp(-|x|)).
double softplus_loss(std::span<const double> scores, std::span<const int> labels,
                     std::span<const double> weight, double lambda);

inline double margin_loss(double pos_score, double neg_score, double gamma) {
  const double z = gamma + pos_score - neg_score;
  return z > 0.0 ? z : 0.0;
}

struct BatchGrad {
  double loss = 0.0;
  GradientSet grads;
};

// Analytic gradients of the softplus objective over score_convkb. threads > 1
// fans per-example passes over OpenMP with per-thread accumulators merged in
// thread order; that path is deterministic for a fixed thread count but may
// differ from the serial reference in the last few ulps.
BatchGrad grad_convkb(std::span<const LabeledTriple> batch, const ConvKBParams& params,
                      const EmbeddingStore& emb, double lambda, int threads = 1);

// Analytic subgradients of the margin objective over score_transe.
BatchGrad grad_transe(std::span<const std::pair<Triple, Triple>> pairs,
                      const EmbeddingStore& emb, int p, double gamma, int threads = 1);

void sgd_step(EmbeddingStore& emb, ConvKBParams* conv, const GradientSet& grads, double lr);

void adam_step(AdamState& state, const GradientSet& grads, EmbeddingStore& emb,
               ConvKBParams* conv, double lr);

// Rescales every entity row to unit L2 norm; zero rows are left unchanged and
// counted for the caller to warn about.
std::size_t normalize_entity_rows(EmbeddingStore& emb);

struct EpochStats {
  double mean_loss = 0.0;     // per labeled triple (ConvKB) / per pair (TransE)
  std::int64_t examples = 0;
  double seconds = 0.0;
};

// One pass over a seeded shuffle of the train split: batches of
// config.batch_size valid triples, neg_ratio corruptions each, gradient and
// optimizer step per batch. The TransE path normalizes entity rows once per
// batch before sampling.
EpochStats train_epoch(ModelState& m, const KnowledgeBase& kb, const RelationStats& stats,
                       std::int32_t epoch_index);

// Runs config.epochs epochs; on_epoch (if set) observes each epoch's stats.
std::vector<EpochStats> train_model(ModelState& m, const KnowledgeBase& kb,
                                    const std::function<void(std::int32_t, const EpochStats&)>& on_epoch = {});

// Score function for evaluation; captures m by reference, so the state must
// outlive the returned callable.
std::function<double(const Triple&)> make_scorer(const ModelState& m);

// Central-difference verification of the analytic gradients.
struct BlockCheck {
  std::string name;
  double max_rel_err = 0.0;
  std::int64_t checked = 0;
  std::int64_t skipped = 0;  // kink-excluded components
};

struct FiniteDiffReport {
  std::vector<BlockCheck> blocks;
  double max_rel_err = 0.0;

  bool pass(double tol) const { return max_rel_err <= tol; }
};

// Relative error per component is |analytic - fd| / max(|analytic|, |fd|, 0.01).
// For kinked activations (ReLU, Abs) a component is skipped when any
// pre-activation it influences lies within 2h of 0. corrupt_for_test
// multiplies the largest analytic component by 1.01 before comparing, to
// prove the check detects wrong gradients.
FiniteDiffReport finite_diff_check_convkb(const ConvKBParams& params, const EmbeddingStore& emb,
                                          std::span<const LabeledTriple> sample, double lambda,
                                          double h = 1e-6, bool corrupt_for_test = false);

// TransE analog: kinks are the p=1 residual components and the hinge
// boundary; components influenced by either within the exclusion window are
// skipped.
FiniteDiffReport finite_diff_check_transe(const EmbeddingStore& emb,
                                          std::span<const std::pair<Triple, Triple>> pairs,
                                          int p, double gamma, double h = 1e-6,
                                          bool corrupt_for_test = false);

}  // namespace convkb
