#include "gtx/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

#include "gtx/attention.hpp"
#include "gtx/linalg.hpp"
#include "gtx/manifold.hpp"
#include "gtx/terrain.hpp"
#include "gtx/train.hpp"

namespace fs = std::filesystem;

namespace gtx {

namespace {

// ---- schemas -------------------------------------------------------------------

const std::vector<SchemaField>& model_schema() {
  static const std::vector<SchemaField> s = {
      {"model.mode", "string", "dense_gt | sparse_gt | gnn_baseline | mlp_baseline"},
      {"model.layers", "int", "transformer / gnn / mlp layer count"},
      {"model.heads", "int", "attention heads"},
      {"model.d_model", "int", "model width"},
      {"model.d_ff", "int", "feedforward hidden width"},
      {"model.hops", "int", "k-hop mask radius (sparse mode)"},
      {"model.dropout", "real", "hidden dropout rate"},
      {"model.attn_dropout", "real", "attention-weight dropout rate"},
      {"model.pe", "bool", "attach RPEARL positional encodings"},
      {"model.pe_layers", "int", "encoder GNN layers"},
      {"model.pe_order", "int", "filter taps per layer (K)"},
      {"model.pe_hidden", "int", "encoder hidden width"},
      {"model.pe_out_dim", "int", "encoding dimension"},
      {"model.pe_m", "int", "random-ID realizations averaged (M)"},
      {"model.pe_act", "string", "relu | tanh"},
      {"model.expander_degree", "int", "union random expander edges of this degree into the mask (0 = off)"},
      {"model.norm_budget", "real", "spectral clamp for Q,K,V after each step (0 = off)"},
  };
  return s;
}

const std::vector<SchemaField>& train_schema() {
  static const std::vector<SchemaField> s = {
      {"train.lr", "real", "Adam learning rate"},
      {"train.max_epochs", "int", "epoch budget"},
      {"train.patience", "int", "early-stop patience on the validation metric"},
      {"train.beta1", "real", "Adam beta1"},
      {"train.beta2", "real", "Adam beta2"},
      {"train.eps", "real", "Adam epsilon"},
      {"train.weight_decay", "real", "decoupled weight decay"},
  };
  return s;
}

std::vector<SchemaField> command_schema(const std::string& command) {
  std::vector<SchemaField> s = {{"experiment.seed", "int", "root seed (overridden by --seed)"}};
  auto extend = [&](const std::vector<SchemaField>& more) {
    s.insert(s.end(), more.begin(), more.end());
  };
  if (command == "convergence") {
    extend({
        {"convergence.tasks", "list", "any of gt_vs_mt, sparse_gt_vs_restricted_mt, gnn_vs_mnn, spectral"},
        {"convergence.manifold", "string", "circle | flat_torus_2d | sphere_2d"},
        {"convergence.n_grid", "list", "graph sizes for the GT/MT tasks"},
        {"convergence.spectral_n_grid", "list", "graph sizes for the spectral task"},
        {"convergence.gnn_n_grid", "list", "graph sizes for the gnn_vs_mnn task"},
        {"convergence.seeds", "int", "sample-cloud seeds per size"},
        {"convergence.quadrature", "int", "Monte Carlo quadrature cloud size"},
        {"convergence.ref_cloud", "int", "band-projection cloud size (MNN reference)"},
        {"convergence.band", "int", "analytic modes tracked by the MNN reference"},
        {"convergence.radius", "real", "attention ball for the restricted task"},
        {"convergence.feature_dim", "int", "signal channels for the GT/MT tasks"},
        {"convergence.signal_modes", "int", "bandlimited input modes"},
        {"convergence.mnn_channels", "int", "MNN width"},
        {"convergence.mnn_layers", "int", "MNN layers"},
        {"convergence.mnn_order", "int", "MNN filter taps"},
        {"convergence.eps_exponent", "real", "kernel bandwidth exponent for these experiments"},
        {"convergence.model_seed", "int", "frozen model seed"},
        {"convergence.spectral_count", "int", "eigenvalues compared (lambda_2 onward)"},
    });
  } else if (command == "transfer-grid") {
    extend({
        {"transfer.dataset", "string", "community | heterophilic"},
        {"transfer.n", "int", "full synthetic graph size"},
        {"transfer.radius", "real", "geometric connection radius"},
        {"transfer.feature_noise", "real", "community feature noise"},
        {"transfer.noise_dims", "int", "pure-noise feature channels"},
        {"transfer.leak_flip", "real", "heterophilic leak flip probability"},
        {"transfer.structural_weight", "real", "heterophilic structural label weight"},
        {"transfer.alphas_train", "list", "training-subsample fractions"},
        {"transfer.alphas_test", "list", "test-subsample fractions"},
        {"transfer.seeds", "int", "seeds per cell"},
        {"transfer.models", "list", "any of sparse_gt, dense_gt, gnn_baseline, mlp_baseline"},
    });
    extend(model_schema());
    extend(train_schema());
  } else if (command == "ablation") {
    extend({
        {"ablation.dataset", "string", "community | heterophilic"},
        {"ablation.n", "int", "full synthetic graph size"},
        {"ablation.radius", "real", "geometric connection radius"},
        {"ablation.noise_dims", "int", "pure-noise feature channels"},
        {"ablation.leak_flip", "real", "heterophilic leak flip probability"},
        {"ablation.structural_weight", "real", "heterophilic structural label weight"},
        {"ablation.alpha", "real", "training-subsample fraction"},
        {"ablation.seeds", "int", "shared seeds per variant"},
        {"ablation.variants", "list",
         "any of no_pe, rpearl, mask, mask+rpearl, mask+re, mask+rpearl+re (first is the baseline)"},
    });
    extend(model_schema());
    extend(train_schema());
  } else if (command == "terrain") {
    extend({
        {"terrain.dem", "string", "DEM path, or builtin:hill60 for the shipped fixture"},
        {"terrain.strides", "list", "training resolutions"},
        {"terrain.train_sources", "int", "sampled sources for training pairs"},
        {"terrain.train_targets", "int", "targets per source for training pairs"},
        {"terrain.val_fraction", "real", "fraction of training pairs held out for early stopping"},
        {"terrain.test_sources", "int", "max-height sources for full-resolution test pairs"},
        {"terrain.test_targets", "int", "targets per source for test pairs"},
        {"terrain.embed_dim", "int", "embedding dimension of the SPD model"},
    });
    extend(model_schema());
    extend(train_schema());
  }
  // gradcheck/selftest take no config keys beyond the seed
  return s;
}

// ---- shared config readers --------------------------------------------------------

ModelConfig read_model_config(const Config& cfg, Mode default_mode) {
  ModelConfig mc;
  mc.mode = mode_from_name(cfg.get("model.mode", mode_name(default_mode)));
  mc.layers = cfg.get_int("model.layers", 2);
  mc.heads = cfg.get_int("model.heads", 2);
  mc.d_model = cfg.get_int("model.d_model", 32);
  mc.d_ff = cfg.get_int("model.d_ff", 64);
  mc.hops = cfg.get_int("model.hops", 2);
  mc.dropout = cfg.get_double("model.dropout", 0.0);
  mc.attn_dropout = cfg.get_double("model.attn_dropout", 0.0);
  mc.use_pe = cfg.get_bool("model.pe", true);
  mc.pe.layers = cfg.get_int("model.pe_layers", 2);
  mc.pe.order = cfg.get_int("model.pe_order", 3);
  mc.pe.hidden = cfg.get_int("model.pe_hidden", 8);
  mc.pe.out_dim = cfg.get_int("model.pe_out_dim", 8);
  mc.pe.m_samples = cfg.get_int("model.pe_m", 16);
  mc.pe.act = cfg.get("model.pe_act", "relu") == "tanh" ? Nonlinearity::Tanh : Nonlinearity::Relu;
  mc.expander_degree = cfg.get_int("model.expander_degree", 0);
  const double budget = cfg.get_double("model.norm_budget", 0.0);
  if (budget > 0.0) mc.norm_budget = budget;
  return mc;
}

TrainConfig read_train_config(const Config& cfg, uint64_t seed) {
  TrainConfig tc;
  tc.adam.lr = cfg.get_double("train.lr", 3e-3);
  tc.max_epochs = cfg.get_int("train.max_epochs", 200);
  tc.patience = cfg.get_int("train.patience", 30);
  tc.adam.beta1 = cfg.get_double("train.beta1", 0.9);
  tc.adam.beta2 = cfg.get_double("train.beta2", 0.999);
  tc.adam.eps = cfg.get_double("train.eps", 1e-8);
  tc.adam.weight_decay = cfg.get_double("train.weight_decay", 0.0);
  tc.seed = seed;
  return tc;
}

NodeDataset read_dataset(const Config& cfg, const std::string& section, uint64_t seed) {
  const std::string kind = cfg.get(section + ".dataset", "community");
  if (kind == "community") {
    CommunityParams p;
    p.n = cfg.get_int(section + ".n", 4000);
    p.radius = cfg.get_double(section + ".radius", 0.15);
    p.feature_noise = cfg.get_double(section + ".feature_noise", 0.5);
    p.noise_dims = cfg.get_int(section + ".noise_dims", 2);
    p.seed = seed;
    return make_community_dataset(p);
  }
  if (kind == "heterophilic") {
    HeterophilicParams p;
    p.n = cfg.get_int(section + ".n", 2500);
    p.radius = cfg.get_double(section + ".radius", 0.15);
    p.leak_flip = cfg.get_double(section + ".leak_flip", 0.4);
    p.structural_weight = cfg.get_double(section + ".structural_weight", 0.75);
    p.noise_dims = cfg.get_int(section + ".noise_dims", 2);
    p.seed = seed;
    return make_heterophilic_dataset(p);
  }
  throw std::runtime_error("config: unknown dataset '" + kind + "'");
}

// ---- artifact directory -----------------------------------------------------------

struct Artifact {
  fs::path dir;
  std::vector<std::string> files;  // relative names, in creation order

  void note(const std::string& name) { files.push_back(name); }

  void write_manifest() const {
    std::ostringstream os;
    os << "# MANIFEST: fnv1a64 hashes of canonicalized content (wallclock fields masked)\n";
    for (const auto& name : files) {
      const fs::path p = dir / name;
      char hex[17];
      std::snprintf(hex, sizeof(hex), "%016llx",
                    static_cast<unsigned long long>(manifest_hash_file(p.string())));
      os << hex << "  " << fs::file_size(p) << "  " << name << "\n";
    }
    write_text_file((dir / "MANIFEST").string(), os.str());
  }
};

Artifact prepare_artifact_dir(const ExperimentSpec& spec, const std::string& config_echo) {
  fs::path dir(spec.out_dir);
  if (fs::exists(dir)) {
    const bool has_content = !fs::is_empty(dir);
    if (has_content) {
      if (!spec.resume)
        throw std::runtime_error("output directory " + spec.out_dir +
                                 " is not empty (use --resume to reuse it)");
      const fs::path echo_path = dir / "config_echo";
      if (fs::exists(echo_path)) {
        const std::string previous = read_text_file(echo_path.string());
        if (previous != config_echo) {
          std::ostringstream diff;
          diff << "resume mismatch: config differs from the original run\n";
          std::istringstream a(previous), b(config_echo);
          std::string la, lb;
          while (true) {
            const bool ga = static_cast<bool>(std::getline(a, la));
            const bool gb = static_cast<bool>(std::getline(b, lb));
            if (!ga && !gb) break;
            if (!ga) la.clear();
            if (!gb) lb.clear();
            if (la != lb) diff << "  was: " << la << "\n  now: " << lb << "\n";
          }
          throw std::runtime_error(diff.str());
        }
      }
    }
  } else {
    fs::create_directories(dir);
  }
  Artifact art;
  art.dir = dir;
  write_text_file((dir / "config_echo").string(), config_echo);
  art.note("config_echo");
  return art;
}

// ---- commands ----------------------------------------------------------------------

int cmd_convergence(const ExperimentSpec& spec, const Config& cfg, Artifact& art,
                    std::ostringstream& summary) {
  const ManifoldSpec mspec{manifold_from_name(cfg.get("convergence.manifold", "circle"))};
  const auto tasks = cfg.get_strings(
      "convergence.tasks", {"gt_vs_mt", "sparse_gt_vs_restricted_mt", "gnn_vs_mnn", "spectral"});

  CsvWriter curves((art.dir / "curves.csv").string(), {"task", "N", "seed", "error"});
  CsvWriter sums((art.dir / "summary.csv").string(), {"task", "N", "median", "iqr", "fit_slope"});
  for (const auto& task : tasks) {
    ConvergenceConfig cc;
    cc.task = task_from_name(task);
    cc.spec = mspec;
    cc.seeds = cfg.get_int("convergence.seeds", 8);
    cc.root_seed = spec.seed;
    cc.model_seed = static_cast<uint64_t>(cfg.get_int("convergence.model_seed", 11));
    cc.quadrature = cfg.get_int("convergence.quadrature", 16384);
    cc.ref_cloud = cfg.get_int("convergence.ref_cloud", 50000);
    cc.band = cfg.get_int("convergence.band", 33);
    cc.radius = cfg.get_double("convergence.radius", 0.8);
    cc.feature_dim = cfg.get_int("convergence.feature_dim", 4);
    cc.signal_modes = cfg.get_int("convergence.signal_modes", 5);
    cc.mnn_channels = cfg.get_int("convergence.mnn_channels", 3);
    cc.mnn_layers = cfg.get_int("convergence.mnn_layers", 2);
    cc.mnn_order = cfg.get_int("convergence.mnn_order", 3);
    cc.eps_exponent = cfg.get_double("convergence.eps_exponent", 2.0 / 3.0);
    cc.spectral_count = cfg.get_int("convergence.spectral_count", 3);
    if (cc.task == ConvergenceTask::Spectral)
      cc.n_grid = cfg.get_ints("convergence.spectral_n_grid", {256, 512, 1024, 2048});
    else if (cc.task == ConvergenceTask::GnnVsMnn)
      cc.n_grid = cfg.get_ints("convergence.gnn_n_grid", {128, 512, 2048});
    else
      cc.n_grid = cfg.get_ints("convergence.n_grid", {128, 256, 512, 1024, 2048});

    ConvergenceResult result = run_convergence(cc, spec.threads);
    for (const auto& row : result.rows)
      curves.row({row.task, std::to_string(row.n), std::to_string(row.seed),
                  CsvWriter::num(row.error)});
    for (const auto& s : result.summary)
      sums.row({s.task, std::to_string(s.n), CsvWriter::num(s.median_error), CsvWriter::num(s.iqr),
                CsvWriter::num(s.fit_slope)});
    summary << task << ": median error " << result.summary.front().median_error << " at N="
            << result.summary.front().n << " -> " << result.summary.back().median_error
            << " at N=" << result.summary.back().n << " (slope vs log N: " << result.slope_vs_log_n
            << ")\n";
  }
  curves.close();
  sums.close();
  art.note("curves.csv");
  art.note("summary.csv");
  return 0;
}

int cmd_transfer_grid(const ExperimentSpec& spec, const Config& cfg, Artifact& art,
                      std::ostringstream& summary) {
  NodeDataset data = read_dataset(cfg, "transfer", substream_seed(spec.seed, "dataset"));
  GridSpec grid;
  grid.alphas_train = cfg.get_doubles("transfer.alphas_train", {0.05, 0.1, 0.25, 0.5, 1.0});
  grid.alphas_test = cfg.get_doubles("transfer.alphas_test", {1.0});
  grid.seeds = cfg.get_int("transfer.seeds", 5);
  grid.root_seed = substream_seed(spec.seed, "grid");
  TrainConfig tc = read_train_config(cfg, spec.seed);
  ModelConfig base = read_model_config(cfg, Mode::SparseGT);
  base.d_in = data.features.rows();
  base.head = {TaskHead::Kind::Classify, data.num_classes};

  std::vector<std::pair<std::string, ModelConfig>> models;
  for (const auto& name : cfg.get_strings("transfer.models", {"sparse_gt", "dense_gt"})) {
    ModelConfig mc = base;
    mc.mode = mode_from_name(name);
    models.emplace_back(name, mc);
  }
  auto cells = transferability_grid(models, data, grid, tc, spec.threads);

  CsvWriter out((art.dir / "grid.csv").string(),
                {"model", "alpha_train", "alpha_test", "seed", "metric", "wallclock_s"});
  CsvWriter epochs((art.dir / "epoch_times.csv").string(),
                   {"model", "alpha_train", "alpha_test", "seed", "seconds_per_epoch"});
  int failures = 0;
  for (const auto& c : cells) {
    if (c.failed) {
      ++failures;
      summary << "cell failed: " << c.model << " a_tr=" << c.alpha_train << " a_te=" << c.alpha_test
              << " seed=" << c.seed << ": " << c.error << "\n";
      continue;
    }
    out.row({c.model, CsvWriter::num(c.alpha_train), CsvWriter::num(c.alpha_test),
             std::to_string(c.seed), CsvWriter::num(c.metric), CsvWriter::num(c.wallclock_s)});
    epochs.row({c.model, CsvWriter::num(c.alpha_train), CsvWriter::num(c.alpha_test),
                std::to_string(c.seed), CsvWriter::num(c.seconds_per_epoch)});
  }
  out.close();
  epochs.close();
  art.note("grid.csv");
  art.note("epoch_times.csv");
  summary << "grid cells: " << cells.size() << " (" << failures << " failed)\n";
  return 0;
}

int cmd_ablation(const ExperimentSpec& spec, const Config& cfg, Artifact& art,
                 std::ostringstream& summary) {
  Config cfg2 = cfg;
  if (!cfg2.has("ablation.dataset")) cfg2.values["ablation.dataset"] = "heterophilic";
  NodeDataset data = read_dataset(cfg2, "ablation", substream_seed(spec.seed, "dataset"));
  TrainConfig tc = read_train_config(cfg, spec.seed);
  ModelConfig base = read_model_config(cfg, Mode::SparseGT);
  base.d_in = data.features.rows();
  base.head = {TaskHead::Kind::Classify, data.num_classes};
  const auto variants = cfg.get_strings(
      "ablation.variants", {"no_pe", "rpearl", "mask", "mask+rpearl", "mask+re", "mask+rpearl+re"});
  const double alpha = cfg.get_double("ablation.alpha", 0.3);
  const int seeds = cfg.get_int("ablation.seeds", 5);
  auto rows = ablation_run(base, variants, data, alpha, seeds, tc, spec.threads);

  CsvWriter out((art.dir / "ablation.csv").string(), {"variant", "metric", "pct_vs_baseline"});
  for (const auto& r : rows) {
    out.row({r.variant, CsvWriter::num(r.metric), r.pct_vs_baseline});
    summary << ablation_display_name(r.variant) << ": " << r.metric << " (" << r.pct_vs_baseline
            << ")\n";
  }
  out.close();
  art.note("ablation.csv");
  return 0;
}

int cmd_terrain(const ExperimentSpec& spec, const Config& cfg, Artifact& art,
                std::ostringstream& summary) {
  const std::string dem_spec = cfg.get("terrain.dem", "builtin:hill60");
  ElevationGrid full;
  if (dem_spec == "builtin:hill60")
    full = make_hill_dem(60, 60, 1.0, 6, 424242);
  else
    full = load_dem(dem_spec);
  Graph full_graph = grid_graph_8nn(full);

  // full-resolution test pairs: sources by maximum height
  const int test_sources = cfg.get_int("terrain.test_sources", 40);
  const int test_targets = cfg.get_int("terrain.test_targets", 40);
  int dropped = 0;
  PairSet test_pairs = sample_pairs(full_graph, test_sources, test_targets,
                                    PairStrategy::MaxHeightSources,
                                    substream_seed(spec.seed, "test_pairs"), &dropped);
  {
    CsvWriter pc((art.dir / "test_pairs.csv").string(), {"src", "dst", "spd"});
    for (const auto& p : test_pairs)
      pc.row({std::to_string(p.src), std::to_string(p.dst), CsvWriter::num(p.spd)});
    pc.close();
    art.note("test_pairs.csv");
  }
  const SpdMetrics baseline = euclidean_baseline(full_graph, test_pairs);

  TrainConfig tc = read_train_config(cfg, spec.seed);
  ModelConfig mc = read_model_config(cfg, Mode::SparseGT);
  mc.d_in = 3;
  mc.head = {TaskHead::Kind::Embed, cfg.get_int("terrain.embed_dim", 16)};

  const auto strides = cfg.get_ints("terrain.strides", {1, 2});
  const int train_sources = cfg.get_int("terrain.train_sources", 80);
  const int train_targets = cfg.get_int("terrain.train_targets", 40);
  const double val_fraction = cfg.get_double("terrain.val_fraction", 0.15);

  CsvWriter out((art.dir / "terrain.csv").string(),
                {"stride", "n_nodes", "test_mae", "test_rmse", "test_rel_error", "baseline_mae",
                 "wallclock_s"});
  for (int stride : strides) {
    const ElevationGrid grid = stride == 1 ? full : downsample_grid(full, stride);
    Graph g = grid_graph_8nn(grid);
    int drop2 = 0;
    PairSet pairs = sample_pairs(g, std::min(train_sources, g.n()), train_targets,
                                 PairStrategy::Uniform,
                                 substream_seed(spec.seed, "train_pairs", stride), &drop2);
    // deterministic holdout for early stopping
    PairSet train, val;
    RngStream hold(substream_seed(spec.seed, "holdout", stride));
    for (const auto& p : pairs)
      (hold.uniform() < val_fraction ? val : train).push_back(p);
    if (train.empty() || val.empty()) throw std::runtime_error("terrain: pair split degenerate");
    TrainConfig stride_tc = tc;
    stride_tc.seed = substream_seed(tc.seed, "terrain_train", stride);
    TrainResult result = train_spd(mc, g, terrain_features(g), train, val, stride_tc);
    const uint64_t pe_seed = substream_seed(stride_tc.seed, "pe_root");
    const SpdMetrics m = evaluate_spd_model(mc, result.params, full_graph, test_pairs, pe_seed);
    out.row({std::to_string(stride), std::to_string(g.n()), CsvWriter::num(m.mae),
             CsvWriter::num(m.rmse), CsvWriter::num(m.relative_error),
             CsvWriter::num(baseline.mae), CsvWriter::num(result.record.wallclock_s)});
    summary << "stride " << stride << " (" << g.n() << " nodes): full-res test MAE " << m.mae
            << " vs euclidean baseline " << baseline.mae << "\n";
    const std::string log_name = "train_stride" + std::to_string(stride) + ".log";
    write_text_file((art.dir / log_name).string(), run_record_to_log(result.record));
    art.note(log_name);
    const std::string ckpt = "model_stride" + std::to_string(stride) + ".ckpt";
    save_checkpoint((art.dir / ckpt).string(), mc, result.params);
    art.note(ckpt);
  }
  out.close();
  art.note("terrain.csv");
  summary << "dropped disconnected test pairs: " << dropped << "\n";
  return 0;
}

int cmd_gradcheck(const ExperimentSpec&, const Config&, Artifact& art,
                  std::ostringstream& summary) {
  auto results = gradcheck_battery();
  CsvWriter out((art.dir / "gradcheck.csv").string(), {"op", "max_rel_error"});
  bool all_ok = true;
  for (const auto& [name, err] : results) {
    const bool ok = err < 1e-4;
    all_ok = all_ok && ok;
    out.row({name, CsvWriter::num(err)});
    summary << (ok ? "PASS " : "FAIL ") << name << " " << err << "\n";
    std::cout << (ok ? "PASS " : "FAIL ") << name << " max_rel_err=" << err << "\n";
  }
  out.close();
  art.note("gradcheck.csv");
  return all_ok ? 0 : 1;
}

int cmd_selftest(const ExperimentSpec&, const Config&, Artifact& art,
                 std::ostringstream& summary) {
  auto results = selftest_battery();
  CsvWriter out((art.dir / "selftest.csv").string(), {"check", "passed"});
  bool all_ok = true;
  for (const auto& [name, ok] : results) {
    all_ok = all_ok && ok;
    out.row({name, ok ? "1" : "0"});
    summary << (ok ? "PASS " : "FAIL ") << name << "\n";
    std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
  }
  out.close();
  art.note("selftest.csv");
  return all_ok ? 0 : 1;
}

}  // namespace

std::string schema_text(const std::string& command) {
  std::ostringstream os;
  std::vector<std::string> commands;
  if (command.empty())
    commands = {"convergence", "transfer-grid", "ablation", "terrain", "gradcheck", "selftest"};
  else
    commands = {command};
  for (const auto& c : commands) {
    os << "# " << c << "\n";
    for (const auto& f : command_schema(c))
      os << "  " << f.key << "  (" << f.type << ")  " << f.doc << "\n";
  }
  return os.str();
}

void emit_report(const std::string& artifact_dir) {
  const fs::path dir(artifact_dir);
  if (!fs::exists(dir / "MANIFEST"))
    throw std::runtime_error("emit_report: " + artifact_dir + " has no MANIFEST");
  std::ostringstream report;
  report << "artifact report\n";
  std::vector<std::string> produced;

  if (fs::exists(dir / "summary.csv")) {
    CsvTable t = read_csv((dir / "summary.csv").string());
    if (t.header.empty()) throw std::runtime_error("emit_report: corrupt file summary.csv");
    // per-task convergence curves: x = N, y = median error
    CsvWriter plot((dir / "plot_convergence.csv").string(), {"series", "x_n", "y_median", "iqr"});
    for (const auto& r : t.rows) plot.row({r[0], r[1], r[2], r[3]});
    plot.close();
    produced.push_back("plot_convergence.csv");
    report << "convergence summary rows: " << t.rows.size() << "\n";
  }
  if (fs::exists(dir / "grid.csv")) {
    CsvTable t = read_csv((dir / "grid.csv").string());
    const int cm = t.col("model"), ca = t.col("alpha_train"), ct = t.col("alpha_test"),
              cmet = t.col("metric");
    if (cm < 0 || ca < 0 || ct < 0 || cmet < 0)
      throw std::runtime_error("emit_report: corrupt file grid.csv");
    report << "grid rows: " << t.rows.size() << "\n";
    if (t.rows.empty()) {
      report << "grid is empty: all cells failed\n";
      write_text_file((dir / "report.txt").string(), report.str());
      throw std::runtime_error("emit_report: grid.csv has 0 rows (all cells failed)");
    }
    // transferability curve: x = alpha_train, y = median test metric at the
    // largest alpha_test, one series per model
    std::map<std::pair<std::string, std::string>, std::vector<double>> cell;
    double max_ate = 0.0;
    for (const auto& r : t.rows) max_ate = std::max(max_ate, std::stod(r[ct]));
    for (const auto& r : t.rows)
      if (std::stod(r[ct]) == max_ate) cell[{r[cm], r[ca]}].push_back(std::stod(r[cmet]));
    CsvWriter plot((dir / "plot_transfer.csv").string(),
                   {"series", "x_alpha_train", "y_median_metric"});
    for (auto& [key, vals] : cell)
      plot.row({key.first, key.second, CsvWriter::num(median(vals))});
    plot.close();
    produced.push_back("plot_transfer.csv");
    // heatmap data over (alpha_train, alpha_test)
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> heat;
    for (const auto& r : t.rows) heat[{r[cm], r[ca], r[ct]}].push_back(std::stod(r[cmet]));
    CsvWriter hm((dir / "plot_heatmap.csv").string(),
                 {"series", "x_alpha_train", "y_alpha_test", "median_metric"});
    for (auto& [key, vals] : heat)
      hm.row({std::get<0>(key), std::get<1>(key), std::get<2>(key), CsvWriter::num(median(vals))});
    hm.close();
    produced.push_back("plot_heatmap.csv");
  }
  if (fs::exists(dir / "ablation.csv")) {
    CsvTable t = read_csv((dir / "ablation.csv").string());
    const int cv = t.col("variant"), cm = t.col("metric"), cp = t.col("pct_vs_baseline");
    if (cv < 0 || cm < 0 || cp < 0) throw std::runtime_error("emit_report: corrupt file ablation.csv");
    CsvWriter plot((dir / "plot_ablation.csv").string(), {"architecture", "metric", "pct_vs_gt"});
    report << "ablation table:\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "  %-28s %10s %10s\n", "Architecture", "Accuracy", "% vs. GT");
    report << buf;
    for (const auto& r : t.rows) {
      plot.row({ablation_display_name(r[cv]), r[cm], r[cp]});
      std::snprintf(buf, sizeof(buf), "  %-28s %10s %10s\n", ablation_display_name(r[cv]).c_str(),
                    r[cm].c_str(), r[cp].c_str());
      report << buf;
    }
    plot.close();
    produced.push_back("plot_ablation.csv");
  }
  if (fs::exists(dir / "terrain.csv")) {
    CsvTable t = read_csv((dir / "terrain.csv").string());
    const int cs = t.col("stride"), cn = t.col("n_nodes"), cm = t.col("test_mae"),
              cb = t.col("baseline_mae");
    if (cs < 0 || cn < 0 || cm < 0 || cb < 0)
      throw std::runtime_error("emit_report: corrupt file terrain.csv");
    CsvWriter plot((dir / "plot_terrain.csv").string(),
                   {"x_train_nodes", "y_test_mae", "baseline_mae", "stride"});
    for (const auto& r : t.rows) plot.row({r[cn], r[cm], r[cb], r[cs]});
    plot.close();
    produced.push_back("plot_terrain.csv");
    report << "terrain rows: " << t.rows.size() << "\n";
  }
  for (const auto& f : {"gradcheck.csv", "selftest.csv"}) {
    if (fs::exists(dir / f)) {
      CsvTable t = read_csv((dir / f).string());
      report << f << " rows: " << t.rows.size() << "\n";
    }
  }
  write_text_file((dir / "report.txt").string(), report.str());
}

int run_experiment(const ExperimentSpec& spec) {
  Config cfg;
  if (!spec.config_path.empty()) cfg = load_config(spec.config_path);
  validate_config(cfg, command_schema(spec.command));
  ExperimentSpec effective = spec;
  if (!spec.seed_overridden && cfg.has("experiment.seed"))
    effective.seed = static_cast<uint64_t>(cfg.get_int("experiment.seed", 0));

  std::ostringstream echo;
  echo << "command = " << spec.command << "\n";
  echo << "seed = " << effective.seed << "\n";
  echo << cfg.echo();
  Artifact art = prepare_artifact_dir(effective, echo.str());

  std::ostringstream summary;
  const auto t0 = std::chrono::steady_clock::now();
  int rc = 0;
  if (spec.command == "convergence")
    rc = cmd_convergence(effective, cfg, art, summary);
  else if (spec.command == "transfer-grid")
    rc = cmd_transfer_grid(effective, cfg, art, summary);
  else if (spec.command == "ablation")
    rc = cmd_ablation(effective, cfg, art, summary);
  else if (spec.command == "terrain")
    rc = cmd_terrain(effective, cfg, art, summary);
  else if (spec.command == "gradcheck")
    rc = cmd_gradcheck(effective, cfg, art, summary);
  else if (spec.command == "selftest")
    rc = cmd_selftest(effective, cfg, art, summary);
  else
    throw std::runtime_error("unknown command: " + spec.command);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << spec.command << " finished in " << elapsed << "s\n";
  write_text_file((art.dir / "summary.txt").string(), summary.str());
  art.note("summary.txt");
  art.write_manifest();
  emit_report(art.dir.string());
  // include the report files in the manifest as well
  for (const auto& name : {"plot_convergence.csv", "plot_transfer.csv", "plot_heatmap.csv",
                           "plot_ablation.csv", "plot_terrain.csv", "report.txt"})
    if (fs::exists(art.dir / name)) art.note(name);
  art.write_manifest();
  std::cout << (rc == 0 ? "OK" : "FAILED") << " " << spec.command << " -> " << spec.out_dir << "\n";
  return rc;
}

}  // namespace gtx
