// Command-line surface: train, eval, sweep, gradcheck, stats.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "convkb/checkpoint.hpp"
#include "convkb/errors.hpp"
#include "convkb/evaluation.hpp"
#include "convkb/kb.hpp"
#include "convkb/model.hpp"
#include "convkb/training.hpp"

namespace fs = std::filesystem;
using namespace convkb;

namespace {

struct CommonArgs {
  std::string data_dir;
  std::string model = "convkb";
  std::int32_t k = 50;
  std::int32_t tau = 50;
  int p = 1;
  double gamma = 1.0;
  double lambda = 0.001;
  double lr = 1e-4;
  std::int32_t batch = 256;
  std::int32_t epochs = -1;  // -1 -> per-model default
  std::int32_t neg_ratio = 1;
  std::uint64_t seed = 7;
  std::string filter_init = "tnormal";
  std::string activation = "relu";
  bool entity_norm = false;
  int threads = 1;
};

ModelKind parse_model(const std::string& s) {
  if (s == "transe") return ModelKind::kTransE;
  if (s == "convkb") return ModelKind::kConvKB;
  throw UsageError("unknown model '" + s + "' (expected transe or convkb)");
}

FilterInit parse_filter_init(const std::string& s) {
  if (s == "tnormal") return FilterInit::kTruncatedNormal;
  if (s == "fixed") return FilterInit::kFixedVector;
  throw UsageError("unknown filter init '" + s + "' (expected tnormal or fixed)");
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::kReLU;
  if (s == "abs") return Activation::kAbs;
  if (s == "square") return Activation::kSquare;
  if (s == "identity") return Activation::kIdentity;
  throw UsageError("unknown activation '" + s + "'");
}

TrainConfig to_config(const CommonArgs& a) {
  TrainConfig cfg;
  cfg.model = parse_model(a.model);
  cfg.k = a.k;
  cfg.tau = a.tau;
  cfg.p = a.p;
  cfg.gamma = a.gamma;
  cfg.lambda = a.lambda;
  cfg.lr = a.lr;
  cfg.batch_size = a.batch;
  cfg.epochs = a.epochs >= 0 ? a.epochs
                             : (cfg.model == ModelKind::kTransE ? 3000 : 200);
  cfg.neg_ratio = a.neg_ratio;
  cfg.seed = a.seed;
  cfg.filter_init = parse_filter_init(a.filter_init);
  cfg.activation = parse_activation(a.activation);
  cfg.convkb_entity_norm = a.entity_norm;
  cfg.threads = a.threads;

  if (cfg.k < 1) throw UsageError("--k must be >= 1");
  if (cfg.model == ModelKind::kConvKB && cfg.tau < 1) throw UsageError("--tau must be >= 1");
  if (cfg.p != 1 && cfg.p != 2) throw UsageError("--p must be 1 or 2");
  if (cfg.gamma <= 0.0) throw UsageError("--gamma must be > 0");
  if (cfg.lambda < 0.0) throw UsageError("--lambda must be >= 0");
  if (cfg.lr < 0.0) throw UsageError("--lr must be >= 0");
  if (cfg.batch_size < 1) throw UsageError("--batch must be >= 1");
  if (cfg.neg_ratio < 1) throw UsageError("--neg-ratio must be >= 1");
  if (cfg.threads < 1) throw UsageError("--threads must be >= 1");
  return cfg;
}

void add_common_options(CLI::App* cmd, CommonArgs& a, bool with_data = true) {
  if (with_data) {
    cmd->add_option("--data", a.data_dir, "dataset directory with train.txt/valid.txt/test.txt")
        ->required();
  }
  cmd->add_option("--model", a.model, "transe or convkb");
  cmd->add_option("--k", a.k, "embedding dimension");
  cmd->add_option("--tau", a.tau, "number of ConvKB filters");
  cmd->add_option("--p", a.p, "TransE norm order (1 or 2)");
  cmd->add_option("--gamma", a.gamma, "TransE margin");
  cmd->add_option("--lambda", a.lambda, "L2 coefficient on the weight vector");
  cmd->add_option("--lr", a.lr, "learning rate");
  cmd->add_option("--batch", a.batch, "batch size (valid triples per batch)");
  cmd->add_option("--epochs", a.epochs, "epochs (default: 3000 transe, 200 convkb)");
  cmd->add_option("--neg-ratio", a.neg_ratio, "corrupted samples per valid triple");
  cmd->add_option("--seed", a.seed, "RNG seed for all randomness");
  cmd->add_option("--filter-init", a.filter_init, "tnormal or fixed ([0.1, 0.1, -0.1])");
  cmd->add_option("--activation", a.activation, "relu, abs, square or identity");
  cmd->add_flag("--entity-norm", a.entity_norm, "normalize entity rows per batch in ConvKB");
  cmd->add_option("--threads", a.threads, "worker threads (1 = deterministic reference)");
}

KnowledgeBase load_dataset(const std::string& dir) {
  const fs::path d(dir);
  return build_kb(d / "train.txt", d / "valid.txt", d / "test.txt");
}

// ---------------------------------------------------------------- train ----

int cmd_train(const CommonArgs& args, const std::string& init_from, const std::string& out_path,
              std::string log_path) {
  TrainConfig cfg = to_config(args);
  if (cfg.epochs < 0) throw UsageError("--epochs must be >= 0");
  KnowledgeBase kb = load_dataset(args.data_dir);

  ModelState m = init_model(cfg, kb.entities.size(), kb.relations.size());
  if (!init_from.empty()) {
    Checkpoint prev = load_checkpoint(init_from);
    check_vocab_match(prev, kb);
    if (prev.state.config.k != cfg.k) {
      throw ConfigError("init checkpoint has k=" + std::to_string(prev.state.config.k) +
                        " but --k is " + std::to_string(cfg.k));
    }
    // embeddings transfer; filters, biases and weight start fresh
    m.emb = prev.state.emb;
  }

  if (log_path.empty()) log_path = out_path + ".loss.tsv";
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw DataError("cannot open " + log_path + " for writing");

  train_model(m, kb, [&](std::int32_t epoch, const EpochStats& s) {
    char line[96];
    std::snprintf(line, sizeof(line), "%d\t%.17g", epoch, s.mean_loss);
    log << line << '\n';
    std::cout << line << '\n';
  });
  log.flush();

  save_checkpoint(out_path, Checkpoint{std::move(m), kb.entities, kb.relations});
  std::cerr << "wrote " << out_path << " and " << log_path << "\n";
  return 0;
}

// ----------------------------------------------------------------- eval ----

int cmd_eval(const std::string& data_dir, const std::string& ckpt_path,
             const std::string& setting, int threads, const std::string& ranks_out) {
  if (setting != "filtered" && setting != "raw") {
    throw UsageError("--setting must be filtered or raw");
  }
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  KnowledgeBase kb = load_dataset(data_dir);
  check_vocab_match(ckpt, kb);

  EvalConfig cfg;
  cfg.filtered = setting == "filtered";
  cfg.threads = threads;
  const Scorer scorer = make_scorer(ckpt.state);
  const RankingReport report = evaluate(scorer, kb, cfg);
  std::cout << report.metrics_line() << "\n";

  if (!ranks_out.empty()) {
    std::ofstream out(ranks_out, std::ios::trunc);
    if (!out) throw DataError("cannot open " + ranks_out + " for writing");
    for (std::size_t i = 0; i < kb.test.size(); ++i) {
      const Triple& t = kb.test[i];
      out << kb.entities.label(t.head) << '\t' << kb.relations.label(t.relation) << '\t'
          << kb.entities.label(t.tail) << '\t' << report.head_ranks[i] << '\t'
          << report.tail_ranks[i] << '\n';
    }
  }
  return 0;
}

// ---------------------------------------------------------------- sweep ----

template <typename T>
std::vector<T> parse_list(const std::string& csv, const char* flag) {
  std::vector<T> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::stringstream conv(item);
    T value;
    if constexpr (std::is_same_v<T, std::string>) {
      value = item;
    } else {
      if (!(conv >> value)) throw UsageError(std::string("bad value '") + item + "' in " + flag);
    }
    out.push_back(value);
  }
  if (out.empty()) throw UsageError(std::string("empty grid for ") + flag);
  return out;
}

struct SweepRow {
  TrainConfig cfg;
  double hits10 = 0.0;
  double mr = 0.0;
};

int cmd_sweep(const CommonArgs& args, const std::string& grid_k, const std::string& grid_tau,
              const std::string& grid_lr, const std::string& grid_gamma,
              const std::string& grid_p, const std::string& grid_filter_init) {
  const TrainConfig base = to_config(args);
  KnowledgeBase kb = load_dataset(args.data_dir);

  const auto ks = grid_k.empty() ? std::vector<std::int32_t>{base.k}
                                 : parse_list<std::int32_t>(grid_k, "--grid-k");
  const auto taus = grid_tau.empty() ? std::vector<std::int32_t>{base.tau}
                                     : parse_list<std::int32_t>(grid_tau, "--grid-tau");
  const auto lrs = grid_lr.empty() ? std::vector<double>{base.lr}
                                   : parse_list<double>(grid_lr, "--grid-lr");
  const auto gammas = grid_gamma.empty() ? std::vector<double>{base.gamma}
                                         : parse_list<double>(grid_gamma, "--grid-gamma");
  const auto ps = grid_p.empty() ? std::vector<int>{base.p} : parse_list<int>(grid_p, "--grid-p");
  const auto inits = grid_filter_init.empty()
                         ? std::vector<std::string>{args.filter_init}
                         : parse_list<std::string>(grid_filter_init, "--grid-filter-init");

  // grid points in first-listed order; only the dimensions the model uses
  std::vector<TrainConfig> grid;
  for (std::int32_t k : ks) {
    if (base.model == ModelKind::kTransE) {
      for (double lr : lrs) {
        for (int p : ps) {
          for (double gamma : gammas) {
            TrainConfig c = base;
            c.k = k;
            c.lr = lr;
            c.p = p;
            c.gamma = gamma;
            grid.push_back(c);
          }
        }
      }
    } else {
      for (std::int32_t tau : taus) {
        for (double lr : lrs) {
          for (const std::string& fi : inits) {
            TrainConfig c = base;
            c.k = k;
            c.tau = tau;
            c.lr = lr;
            c.filter_init = parse_filter_init(fi);
            grid.push_back(c);
          }
        }
      }
    }
  }
  if (grid.empty()) throw UsageError("empty sweep grid");

  EvalConfig ecfg;
  ecfg.filtered = true;
  ecfg.threads = base.threads;

  std::cout << "#model\tk\ttau\tp\tgamma\tlr\tfilter_init\thits10\tmr\n";
  std::vector<SweepRow> rows;
  for (const TrainConfig& cfg : grid) {
    ModelState m = init_model(cfg, kb.entities.size(), kb.relations.size());
    train_model(m, kb);
    const Scorer scorer = make_scorer(m);
    // selection metric is Hits@10 on the validation split
    const RankingReport report = evaluate(scorer, kb, ecfg, kb.valid);
    SweepRow row{cfg, report.hits_at.at(10), report.mean_rank};
    rows.push_back(row);
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s\t%d\t%d\t%d\t%.17g\t%.17g\t%s\t%.17g\t%.17g",
                  cfg.model == ModelKind::kTransE ? "transe" : "convkb", cfg.k,
                  cfg.model == ModelKind::kConvKB ? cfg.tau : 0, cfg.p, cfg.gamma, cfg.lr,
                  cfg.filter_init == FilterInit::kFixedVector ? "fixed" : "tnormal", row.hits10,
                  row.mr);
    std::cout << buf << "\n";
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].hits10 > rows[best].hits10 ||
        (rows[i].hits10 == rows[best].hits10 && rows[i].mr < rows[best].mr)) {
      best = i;
    }
  }
  std::cout << "best\t" << best << "\n";
  return 0;
}

// ------------------------------------------------------------- gradcheck ----

int cmd_gradcheck(std::int32_t instances, std::uint64_t seed, const std::string& activation,
                  bool corrupt) {
  const Activation act = parse_activation(activation);
  constexpr std::int32_t kDims[] = {2, 4, 8};
  constexpr std::int32_t kTaus[] = {1, 3, 5};

  double kinked_max = 0.0, smooth_max = 0.0;
  bool all_pass = true;

  for (std::int32_t i = 0; i < instances; ++i) {
    Rng rng = Rng::derive(seed, /*stream=*/50, static_cast<std::uint64_t>(i));
    const std::int32_t k = kDims[i % 3];
    const std::int32_t tau = kTaus[(i / 3) % 3];
    const bool use_convkb = i % 2 == 0;
    const std::int32_t n_ent = 6, n_rel = 3;

    EmbeddingStore emb(n_ent, n_rel, k);
    for (double& x : emb.entity_data()) x = rng.uniform(-1.0, 1.0);
    for (double& x : emb.relation_data()) x = rng.uniform(-1.0, 1.0);

    auto random_triple = [&]() {
      return Triple{rng.uniform_int(n_ent), rng.uniform_int(n_rel), rng.uniform_int(n_ent)};
    };

    FiniteDiffReport report;
    bool kinked;
    if (use_convkb) {
      ConvKBParams params = init_convkb_params(seed + i, k, tau, FilterInit::kTruncatedNormal, act);
      std::vector<LabeledTriple> sample;
      for (int j = 0; j < 3; ++j) sample.push_back({random_triple(), j % 2 == 0 ? 1 : -1});
      report = finite_diff_check_convkb(params, emb, sample, 0.001, 1e-6, corrupt);
      kinked = act == Activation::kReLU || act == Activation::kAbs;
    } else {
      const int p = (i / 2) % 2 == 0 ? 1 : 2;
      std::vector<std::pair<Triple, Triple>> pairs;
      for (int j = 0; j < 3; ++j) pairs.emplace_back(random_triple(), random_triple());
      report = finite_diff_check_transe(emb, pairs, p, 5.0, 1e-6, corrupt);
      kinked = p == 1;
    }

    const double tol = kinked ? 1e-4 : 1e-6;
    (kinked ? kinked_max : smooth_max) = std::max(kinked ? kinked_max : smooth_max,
                                                  report.max_rel_err);
    if (!report.pass(tol)) {
      all_pass = false;
      std::printf("instance %d (%s k=%d tau=%d): FAIL max_rel_err=%.3e tol=%.0e\n", i,
                  use_convkb ? "convkb" : "transe", k, tau, report.max_rel_err, tol);
    }
  }

  std::printf("gradcheck: instances=%d kinked_max_rel_err=%.3e smooth_max_rel_err=%.3e: %s\n",
              instances, kinked_max, smooth_max, all_pass ? "PASS" : "FAIL");
  return all_pass ? 0 : 3;
}

// ---------------------------------------------------------------- stats ----

int cmd_stats(const std::string& data_dir) {
  KnowledgeBase kb = load_dataset(data_dir);
  if (kb.entities.size() == 0) std::cerr << "warning: dataset is empty\n";
  auto line = [&](const char* split, std::size_t n) {
    std::cout << split << '\t' << kb.entities.size() << '\t' << kb.relations.size() << '\t' << n
              << '\n';
  };
  line("train", kb.train.size());
  line("valid", kb.valid.size());
  line("test", kb.test.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"knowledge base completion with ConvKB and TransE"};
  app.require_subcommand(1);

  CommonArgs train_args;
  std::string train_init_from, train_out = "model.ckpt", train_log;
  CLI::App* train = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common_options(train, train_args);
  train->add_option("--init-from", train_init_from, "TransE checkpoint to initialize embeddings");
  train->add_option("--out", train_out, "checkpoint output path");
  train->add_option("--log", train_log, "loss log path (default: <out>.loss.tsv)");

  std::string eval_data, eval_ckpt, eval_setting = "filtered", eval_ranks_out;
  int eval_threads = 1;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
  eval->add_option("--setting", eval_setting, "filtered or raw");
  eval->add_option("--threads", eval_threads, "worker threads");
  eval->add_option("--ranks-out", eval_ranks_out, "per-triple rank TSV output");

  CommonArgs sweep_args;
  std::string grid_k, grid_tau, grid_lr, grid_gamma, grid_p, grid_filter_init;
  CLI::App* sweep = app.add_subcommand("sweep", "grid search selected by validation Hits@10");
  add_common_options(sweep, sweep_args);
  sweep->add_option("--grid-k", grid_k, "comma-separated k values");
  sweep->add_option("--grid-tau", grid_tau, "comma-separated tau values");
  sweep->add_option("--grid-lr", grid_lr, "comma-separated learning rates");
  sweep->add_option("--grid-gamma", grid_gamma, "comma-separated margins");
  sweep->add_option("--grid-p", grid_p, "comma-separated norm orders");
  sweep->add_option("--grid-filter-init", grid_filter_init, "comma-separated init schemes");

  std::int32_t gc_instances = 100;
  std::uint64_t gc_seed = 7;
  std::string gc_activation = "relu";
  bool gc_corrupt = false;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gradcheck->add_option("--instances", gc_instances, "number of random instances");
  gradcheck->add_option("--seed", gc_seed, "RNG seed");
  gradcheck->add_option("--activation", gc_activation, "ConvKB activation to check");
  gradcheck->add_flag("--corrupt", gc_corrupt, "inject a wrong gradient (must fail)");

  std::string stats_data;
  CLI::App* stats = app.add_subcommand("stats", "print dataset statistics");
  stats->add_option("--data", stats_data, "dataset directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) return cmd_train(train_args, train_init_from, train_out, train_log);
    if (eval->parsed()) {
      return cmd_eval(eval_data, eval_ckpt, eval_setting, eval_threads, eval_ranks_out);
    }
    if (sweep->parsed()) {
      return cmd_sweep(sweep_args, grid_k, grid_tau, grid_lr, grid_gamma, grid_p,
                       grid_filter_init);
    }
    if (gradcheck->parsed()) {
      return cmd_gradcheck(gc_instances, gc_seed, gc_activation, gc_corrupt);
    }
    if (stats->parsed()) return cmd_stats(stats_data);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
