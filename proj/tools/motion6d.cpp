// motion6d: dataset generation, training, evaluation and control experiments.
#include "motion6d/config.hpp"
#include "motion6d/ctrlloop.hpp"
#include "motion6d/errors.hpp"
#include "motion6d/synthgen.hpp"
#include "motion6d/tracker.hpp"
#include "motion6d/trainkit.hpp"
#include "svgplot.hpp"

#include <omp.h>

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <thread>

namespace fs = std::filesystem;
using namespace motion6d;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "key = value config file");
  cmd->add_option("--set", c.overrides, "override, key=value (repeatable)");
  cmd->add_option("--workers", c.workers, "parallel workers (default: all cores)")->check(CLI::PositiveNumber);
}

Config resolve(const Common& c) {
  Config cfg;
  if (!c.config_file.empty()) cfg = Config::from_file(c.config_file);
  for (const auto& o : c.overrides) cfg.apply_override(o);
  return cfg;
}

std::string default_data_path(const std::string& given, const std::string& leaf) {
  if (!given.empty()) return given;
  if (const char* root = std::getenv("MOTION6D_DATA_DIR")) return (fs::path(root) / leaf).string();
  throw ConfigError("no path given for " + leaf + " and MOTION6D_DATA_DIR is not set");
}

struct Weights {
  std::string seg, trans, rot;

  void add(CLI::App* cmd) {
    cmd->add_option("--seg", seg, "segmentation checkpoint");
    cmd->add_option("--trans", trans, "translation checkpoint");
    cmd->add_option("--rot", rot, "rotation checkpoint");
  }
  void record(Config& c) const {
    c.set("model.seg_checkpoint", seg);
    c.set("model.trans_checkpoint", trans);
    c.set("model.rot_checkpoint", rot);
  }
};

// Failed --strict assertions are collected and reported together.
struct Assertions {
  std::vector<std::string> failures;
  void check(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  int report(bool strict) const {
    for (const auto& f : failures) std::cerr << (strict ? "assertion failed: " : "warning: ") << f << '\n';
    return strict && !failures.empty() ? 2 : 0;
  }
};

// Mean over all frames of one metric of one config.
std::optional<double> curve_mean(const std::vector<track::CurveRow>& rows, const std::string& config,
                                 const std::string& metric) {
  double s = 0.0;
  int n = 0;
  for (const auto& r : rows) {
    if (r.config == config && r.metric == metric) {
      s += r.mean;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return s / n;
}

// ---- gen-data ----------------------------------------------------------------------

struct GenArgs {
  Common common;
  std::string out;
  int count = -1, objects = -1;
  long long seed = -1;
};

int run_gen(const GenArgs& a) {
  Config cfg = resolve(a.common);
  if (a.count >= 0) cfg.set("data.count", a.count);
  if (a.objects >= 0) cfg.set("data.objects", a.objects);
  if (a.seed >= 0) cfg.set("data.seed", std::to_string(a.seed));
  const auto g = synth::GenerationConfig::from_config(cfg);
  const std::string out = default_data_path(a.out, "train");
  synth::generate_dataset(g, out, a.common.workers);
  Config snapshot;
  g.to_config(snapshot);
  snapshot.write_file((fs::path(out) / "resolved_config.txt").string());
  std::cout << "wrote " << g.count << " sequences to " << out << '\n';
  return 0;
}

// ---- train -------------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string model, data, out, metrics, seg;
  int epochs = -1, batch = -1, max_sequences = -2;
};

int run_train(const TrainArgs& a) {
  omp_set_num_threads(a.common.workers);
  Config cfg = resolve(a.common);
  if (a.epochs > 0) cfg.set("train.epochs", a.epochs);
  if (a.batch > 0) cfg.set("train.batch", a.batch);
  if (a.max_sequences >= 0) cfg.set("train.max_sequences", a.max_sequences);
  const auto tc = train::TrainConfig::from_config(cfg);
  const auto kind = train::parse_model_kind(a.model);
  synth::Dataset data = synth::Dataset::open(default_data_path(a.data, "train"));
  std::optional<nn::SegmentationNet> frozen;
  if (!a.seg.empty()) frozen = CheckpointSet::load(a.seg, "", "").segmentation;
  train::TrainOptions opts;
  opts.checkpoint_out = a.out;
  opts.metrics_out = a.metrics.empty() ? a.out + ".metrics.txt" : a.metrics;
  opts.frozen_segmentation = frozen ? &*frozen : nullptr;
  opts.progress = &std::cout;
  Config snapshot;
  tc.to_config(snapshot);
  snapshot.set("train.model", a.model);
  snapshot.set("train.data", data.root());
  snapshot.set("train.seg_checkpoint", a.seg);
  snapshot.write_file(a.out + ".config.txt");
  const auto log = train::train_model(kind, data, tc, opts);
  std::cout << "trained " << a.model << " for " << log.size() << " epochs, final loss " << log.back().mean_loss
            << ", checkpoint " << a.out << '\n';
  return 0;
}

// ---- eval-predict --------------------------------------------------------------------

struct EvalArgs {
  Common common;
  Weights weights;
  std::string single, multi, out;
  std::vector<std::string> estimators{"neural", "neural+gtmask"}, splits{"single", "multi"};
  int max_samples = -1;
  bool baseline = true, strict = false;
};

int run_eval(const EvalArgs& a) {
  omp_set_num_threads(1);  // parallelism is across sequences
  Config cfg = resolve(a.common);
  const PrevMaskMode mode = parse_prev_mask_mode(cfg.get_string("model.prev_mask_mode", "keep-object"));
  const CheckpointSet weights = CheckpointSet::load(a.weights.seg, a.weights.trans, a.weights.rot);
  const auto& specs = a.estimators;
  const auto& splits = a.splits;
  if (specs.empty() || splits.empty()) throw ConfigError("eval-predict: empty --estimators or --splits");
  fs::create_directories(a.out);

  std::map<std::string, std::string> split_dirs;
  std::vector<track::CurveRow> rows;
  Assertions checks;
  for (const auto& split : splits) {
    if (split != "single" && split != "multi") throw ConfigError("unknown split " + split);
    const std::string dir = default_data_path(split == "single" ? a.single : a.multi, "test_" + split);
    split_dirs[split] = dir;
    const synth::Dataset data = synth::Dataset::open(dir);
    for (const auto& spec : specs) {
      const auto ev = track::evaluate_split(data, split, spec, weights, a.max_samples, a.common.workers, mode);
      rows.insert(rows.end(), ev.rows.begin(), ev.rows.end());
      std::cout << ev.config << ": " << ev.reports.size() << " samples, mean step error "
                << curve_mean(ev.rows, ev.config, "step_trans_cm").value_or(0) << " cm / "
                << curve_mean(ev.rows, ev.config, "step_rot_deg").value_or(0) << " deg\n";
      if (spec == "oracle") {
        for (const auto& r : ev.rows) {
          if (r.metric.rfind("step_", 0) == 0 || r.metric.rfind("int_", 0) == 0) {
            checks.check(r.mean < 1e-3, ev.config + " " + r.metric + " not near zero at frame " +
                                            std::to_string(r.frame));
          }
        }
      }
    }
    if (a.baseline) {
      std::vector<track::TrackReport> reports;
      int n = data.num_samples();
      if (a.max_samples >= 0) n = std::min(n, a.max_samples);
      for (int k = 0; k < n; ++k) {
        const auto ref = data.sample(k);
        reports.push_back(track::baseline_static(data.load(ref.sequence), ref.object));
      }
      const auto base = track::aggregate(reports, "static-" + split);
      rows.insert(rows.end(), base.begin(), base.end());
    }
  }

  // Predicted masks can only add error; a second moving object can only make things harder.
  constexpr double kSlack = 1.1;
  for (const char* metric : {"step_trans_cm", "step_rot_deg"}) {
    for (const auto& split : splits) {
      const auto pred = curve_mean(rows, "pred-" + split, metric);
      const auto gt = curve_mean(rows, "gtmask-" + split, metric);
      if (pred && gt) checks.check(*gt <= kSlack * *pred, "gtmask-" + split + " " + metric + " above pred");
    }
    const auto single = curve_mean(rows, "pred-single", metric);
    const auto multi = curve_mean(rows, "pred-multi", metric);
    if (single && multi) checks.check(*single <= kSlack * *multi, std::string("pred-single ") + metric + " above multi");
  }

  const std::string table = (fs::path(a.out) / "curves.tsv").string();
  track::write_curve_table(table, rows);
  Config snapshot = cfg;
  auto join = [](const std::vector<std::string>& v) {
    std::string out;
    for (const auto& x : v) out += (out.empty() ? "" : " ") + x;
    return out;
  };
  snapshot.set("eval.estimators", join(a.estimators));
  snapshot.set("eval.splits", join(a.splits));
  for (const auto& [split, dir] : split_dirs) snapshot.set("eval.data." + split, dir);
  snapshot.set("eval.max_samples", a.max_samples);
  snapshot.set("model.prev_mask_mode", std::string(prev_mask_mode_name(mode)));
  a.weights.record(snapshot);
  snapshot.write_file((fs::path(a.out) / "resolved_config.txt").string());
  std::cout << "wrote " << rows.size() << " rows to " << table << '\n';
  return checks.report(a.strict);
}

// ---- run-control ---------------------------------------------------------------------

struct ControlArgs {
  Common common;
  Weights weights;
  std::string out, perturb, settings, estimators;
  int trials = -1, max_corrections = -1;
  double gain = -1.0;
  long long seed = -1;
  bool strict = false;
};

void write_trial_tables(const std::string& dir, const ctrl::Experiment& ex) {
  std::ofstream trials(fs::path(dir) / "trials.tsv"), traces(fs::path(dir) / "traces.tsv");
  if (!trials || !traces) throw IoError("cannot write trial tables in " + dir);
  trials << "setting\tT\ttrial\topen_loop_m\topen_loop_deg\tfinal_m\tfinal_deg\titerations_to_success\tskipped\t"
            "low_confidence_frames\tfailure\n";
  traces << "setting\tT\ttrial\titeration\terror_m\terror_deg\n";
  constexpr double kDeg = 180.0 / 3.14159265358979323846;
  for (std::size_t c = 0; c < ex.rows.size(); ++c) {
    const auto& row = ex.rows[c];
    for (std::size_t i = 0; i < ex.trials[c].size(); ++i) {
      const auto& r = ex.trials[c][i];
      trials << row.setting << '\t' << row.perturb_steps << '\t' << i << '\t' << r.open_loop_error.meters << '\t'
             << r.open_loop_error.radians * kDeg << '\t' << r.final_error.meters << '\t'
             << r.final_error.radians * kDeg << '\t' << r.iterations_to_success << '\t' << r.skipped_corrections
             << '\t' << r.low_confidence_frames << '\t' << ctrl::failure_name(r.failure) << '\n';
      for (std::size_t k = 0; k < r.trace.size(); ++k) {
        traces << row.setting << '\t' << row.perturb_steps << '\t' << i << '\t' << k + 1 << '\t'
               << r.trace[k].meters << '\t' << r.trace[k].radians * kDeg << '\n';
      }
    }
  }
}

int run_control(const ControlArgs& a) {
  omp_set_num_threads(1);
  Config cfg = resolve(a.common);
  if (!a.perturb.empty()) cfg.set("control.perturb", a.perturb);
  if (!a.settings.empty()) cfg.set("control.settings", a.settings);
  if (!a.estimators.empty()) cfg.set("control.estimators", a.estimators);
  if (a.trials > 0) cfg.set("control.trials", a.trials);
  if (a.max_corrections >= 0) cfg.set("control.max_corrections", a.max_corrections);
  if (a.gain > 0) cfg.set("control.gain", a.gain);
  if (a.seed >= 0) cfg.set("control.seed", std::to_string(a.seed));
  const auto ec = ctrl::ExperimentConfig::from_config(cfg);
  const CheckpointSet weights = CheckpointSet::load(a.weights.seg, a.weights.trans, a.weights.rot);
  fs::create_directories(a.out);

  const ctrl::Experiment ex = ctrl::run_control_experiment(ec, weights, a.common.workers);
  const std::string table = (fs::path(a.out) / "convergence.tsv").string();
  ctrl::write_convergence_table(table, ex.rows);
  write_trial_tables(a.out, ex);
  Config snapshot;
  ec.to_config(snapshot);
  a.weights.record(snapshot);
  snapshot.write_file((fs::path(a.out) / "resolved_config.txt").string());
  ctrl::write_convergence_table(std::cout, ex.rows);

  Assertions checks;
  checks.check(ex.rows.size() == ec.settings.size() * ec.perturb_steps.size(), "convergence table has missing cells");
  for (const auto& r : ex.rows) {
    const std::string cell = r.setting + " T=" + std::to_string(r.perturb_steps);
    checks.check(r.open_loop_rate >= 0 && r.open_loop_rate <= 1 && r.corrected_rate >= 0 && r.corrected_rate <= 1,
                 cell + " rate outside [0, 1]");
    checks.check(r.corrected_rate >= r.open_loop_rate, cell + " corrections reduced the success rate");
    if (ec.estimators == "oracle") checks.check(r.corrected_rate == 1.0, cell + " oracle did not converge");
  }
  return checks.report(a.strict);
}

// ---- plot ------------------------------------------------------------------------------

struct PlotArgs {
  std::string kind, input, out;
};

int run_plot(const PlotArgs& a) {
  const std::string out = a.out.empty() ? (fs::path(a.input).parent_path() / "figures").string() : a.out;
  std::vector<std::string> files;
  if (a.kind == "error-curves") {
    files = plot::error_curves(track::read_curve_table(a.input), out);
  } else {
    files = plot::convergence_bars(ctrl::read_convergence_table(a.input), out);
  }
  Config snapshot;
  snapshot.set("plot.kind", a.kind);
  snapshot.set("plot.input", a.input);
  snapshot.set("plot.out", out);
  snapshot.write_file((fs::path(out) / ("resolved_config." + a.kind + ".txt")).string());
  for (const auto& f : files) std::cout << f << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motion6d: segmentation and 6D motion estimation for floating objects"};
  app.require_subcommand(1);

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic sequence archive");
  add_common(gen, gen_args.common);
  gen->add_option("--out", gen_args.out, "output directory (default $MOTION6D_DATA_DIR/train)");
  gen->add_option("--count", gen_args.count, "number of sequences");
  gen->add_option("--objects", gen_args.objects, "objects per sequence (1 or 3)");
  gen->add_option("--seed", gen_args.seed, "base seed");

  TrainArgs tr_args;
  auto* tr = app.add_subcommand("train", "train one model (seg, trans or rot)");
  add_common(tr, tr_args.common);
  tr->add_option("--model", tr_args.model, "seg | trans | rot")->required()->check(CLI::IsMember({"seg", "trans", "rot"}));
  tr->add_option("--data", tr_args.data, "training archive (default $MOTION6D_DATA_DIR/train)");
  tr->add_option("--out", tr_args.out, "checkpoint path")->required();
  tr->add_option("--metrics", tr_args.metrics, "per-epoch table (default <out>.metrics.txt)");
  tr->add_option("--seg-checkpoint", tr_args.seg, "frozen segmentation for the predicted-mask curriculum");
  tr->add_option("--epochs", tr_args.epochs, "epochs")->check(CLI::PositiveNumber);
  tr->add_option("--batch", tr_args.batch, "batch size")->check(CLI::PositiveNumber);
  tr->add_option("--max-sequences", tr_args.max_sequences, "use only the first N sequences")->check(CLI::NonNegativeNumber);

  EvalArgs ev_args;
  auto* ev = app.add_subcommand("eval-predict", "track the test splits and write error-curve tables");
  add_common(ev, ev_args.common);
  ev_args.weights.add(ev);
  ev->add_option("--out", ev_args.out, "output directory")->required();
  ev->add_option("--estimators", ev_args.estimators,
                 "one or more of neural, neural+gtmask, oracle, noisy-oracle:PX,DEG")
      ->capture_default_str();
  ev->add_option("--splits", ev_args.splits, "one or more of single, multi")->capture_default_str();
  ev->add_option("--single", ev_args.single, "single-object archive (default $MOTION6D_DATA_DIR/test_single)");
  ev->add_option("--multi", ev_args.multi, "three-object archive (default $MOTION6D_DATA_DIR/test_multi)");
  ev->add_option("--max-samples", ev_args.max_samples, "evaluate at most N samples per split");
  ev->add_flag("!--no-baseline", ev_args.baseline, "skip the static baseline curves");
  ev->add_flag("--strict", ev_args.strict, "exit nonzero when an invariant check fails");

  ControlArgs ct_args;
  auto* ct = app.add_subcommand("run-control", "perturb, return and correct; write convergence tables");
  add_common(ct, ct_args.common);
  ct_args.weights.add(ct);
  ct->add_option("--out", ct_args.out, "output directory")->required();
  ct->add_option("--perturb", ct_args.perturb, "comma list of perturbation lengths (default 30,60,90)");
  ct->add_option("--settings", ct_args.settings, "comma list of objects per scene (default 1,3)");
  ct->add_option("--estimators", ct_args.estimators, "estimator spec (default neural)");
  ct->add_option("--trials", ct_args.trials, "trials per cell")->check(CLI::PositiveNumber);
  ct->add_option("--max-corrections", ct_args.max_corrections, "correction iterations per trial")
      ->check(CLI::NonNegativeNumber);
  ct->add_option("--gain", ct_args.gain, "correction gain")->check(CLI::PositiveNumber);
  ct->add_option("--seed", ct_args.seed, "experiment seed");
  ct->add_flag("--strict", ct_args.strict, "exit nonzero when an invariant check fails");

  PlotArgs pl_args;
  auto* pl = app.add_subcommand("plot", "render SVG figures from a report table");
  pl->add_option("kind", pl_args.kind, "error-curves | convergence")
      ->required()
      ->check(CLI::IsMember({"error-curves", "convergence"}));
  pl->add_option("table", pl_args.input, "curves.tsv or convergence.tsv")->required()->check(CLI::ExistingFile);
  pl->add_option("--out", pl_args.out, "figure directory (default <table dir>/figures)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return run_gen(gen_args);
    if (*tr) return run_train(tr_args);
    if (*ev) return run_eval(ev_args);
    if (*ct) return run_control(ct_args);
    if (*pl) return run_plot(pl_args);
  } catch (const std::exception& e) {
    std::cerr << "motion6d: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
