// Command-line front end: dataset generation, training, evaluation, curve
// export, and benchmark reproduction for the stretch-based PANN library.
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "pann/datagen.hpp"
#include "pann/errors.hpp"
#include "pann/fixtures.hpp"
#include "pann/loading.hpp"
#include "pann/manifest.hpp"
#include "pann/models.hpp"
#include "pann/serialize.hpp"
#include "pann/training.hpp"

namespace {

using namespace pann;

// Argument problems past CLI11's own parsing: exit code 2, like usage errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Global {
  std::uint64_t seed = 0;
  std::string manifest_path;
  bool quiet = false;
};

void add_global(CLI::App* cmd, Global& g) {
  cmd->add_option("--seed", g.seed, "Base RNG seed (default 0)");
  cmd->add_option("--manifest", g.manifest_path,
                  "Manifest path (default: <first output>.manifest.json)");
  cmd->add_flag("--quiet", g.quiet, "Suppress progress output");
}

// Collects the run manifest (argv echo, input/output fingerprints, wall
// clock) and writes it next to the first output.
class Run {
 public:
  Run(std::string command, const std::vector<std::string>& argv,
      const Global& g)
      : global_(&g), start_(std::chrono::steady_clock::now()) {
    man_.command = std::move(command);
    man_.argv = argv;
    man_.seed = g.seed;
  }

  void input(const std::string& path) {
    man_.inputs[path] = file_fingerprint(path);
  }

  void output(const std::string& path) {
    if (first_output_.empty()) first_output_ = path;
    man_.outputs[path] = file_fingerprint(path);
  }

  void finish() {
    man_.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      start_)
            .count();
    std::string path = global_->manifest_path;
    if (path.empty() && !first_output_.empty())
      path = first_output_ + ".manifest.json";
    if (!path.empty()) manifest_save(man_, path);
  }

 private:
  const Global* global_;
  RunManifest man_;
  std::string first_output_;
  std::chrono::steady_clock::time_point start_;
};

void say(const Global& g, const char* fmt, ...) {
  if (g.quiet) return;
  va_list ap;
  va_start(ap, fmt);
  std::vfprintf(stdout, fmt, ap);
  va_end(ap);
  std::fputc('\n', stdout);
}

// Ground truth from a fixture spec ("ogden-fixture:5") or a model JSON path.
std::unique_ptr<EnergyModel> resolve_truth(const std::string& spec,
                                           Run& run) {
  try {
    if (spec.find("fixture:") != std::string::npos)
      return make_fixture_truth(spec);
    run.input(spec);
    return model_load(spec);
  } catch (const FormatError& e) {
    throw UsageError(e.what());
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
}

std::vector<Mode> parse_modes(const std::string& csv) {
  std::vector<Mode> modes;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const std::size_t comma = csv.find(',', pos);
    const std::string tok =
        csv.substr(pos, comma == std::string::npos ? comma : comma - pos);
    if (tok.empty()) throw UsageError("empty mode in '" + csv + "'");
    modes.push_back(mode_from_string(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (modes.empty()) throw UsageError("no modes given");
  return modes;
}

std::vector<std::string> split_commas(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const std::size_t comma = csv.find(',', pos);
    out.push_back(
        csv.substr(pos, comma == std::string::npos ? comma : comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// "m.json" -> "m.report.json" / "m.loss.csv"
std::string derived_path(const std::string& model_path,
                         const std::string& suffix) {
  std::string base = model_path;
  if (ends_with(base, ".json")) base.resize(base.size() - 5);
  return base + suffix;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------

struct GenOpts {
  std::string truth, out;
  double delta = 0.2;
  int n = 200;
};

int cmd_gen(const Global& g, const GenOpts& o,
            const std::vector<std::string>& argv) {
  if (!(o.delta > 0.0)) throw UsageError("--delta must be > 0");
  if (o.n <= 0) throw UsageError("--n must be > 0");
  Run run("gen", argv, g);
  const auto truth = resolve_truth(o.truth, run);
  const SampleConfig sc{o.delta, o.n, g.seed};
  const Dataset ds = build_dataset(*truth, sc);
  save_dataset(ds, o.out);
  run.output(o.out);
  run.finish();
  say(g, "wrote %zu records to %s", ds.records.size(), o.out.c_str());
  say(g, "accepted %d of %llu attempts (%.1f%%)", o.n,
      static_cast<unsigned long long>(ds.meta.attempts),
      100.0 * o.n / static_cast<double>(ds.meta.attempts));
  return 0;
}

struct TrainOpts {
  std::string arch = "lambda-pann";
  double p = 0.0;   // 0: take the arch spec's value (default 3)
  int layers = 0;   // 0: default 2
  int width = 0;    // 0: default 10
  double lr = 1e-3;
  int epochs = 100000;
  double l0 = 0.0;
  std::string measure = "declared";
  std::string data, eval, out, report, loss_csv;
};

LossMeasure parse_measure(const std::string& s) {
  if (s == "declared") return LossMeasure::AsDeclared;
  if (s == "cauchy") return LossMeasure::Cauchy;
  if (s == "nominal") return LossMeasure::Nominal;
  throw UsageError("--measure must be declared, cauchy, or nominal");
}

int cmd_train(const Global& g, const TrainOpts& o,
              const std::vector<std::string>& argv) {
  TrainConfig cfg;
  try {
    const ArchSpec arch = parse_arch_spec(o.arch);
    cfg.arch = arch.kind;
    cfg.p = arch.p;
    if (arch.layers > 0) cfg.layers = arch.layers;
    if (arch.width > 0) cfg.width = arch.width;
  } catch (const FormatError& e) {
    throw UsageError(e.what());
  }
  if (o.p > 0.0) cfg.p = o.p;
  if (o.layers > 0) cfg.layers = o.layers;
  if (o.width > 0) cfg.width = o.width;
  cfg.lr = o.lr;
  cfg.epochs = o.epochs;
  cfg.l0_factor = o.l0;
  cfg.seed = g.seed;
  cfg.loss_stress_measure = parse_measure(o.measure);
  try {
    validate(cfg);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }

  Run run("train", argv, g);
  run.input(o.data);
  std::unique_ptr<PannModel> model;
  TrainReport rep;
  if (ends_with(o.data, ".csv")) {
    const auto pts = load_experimental(o.data);
    const std::string fp = file_fingerprint(o.data);
    auto result = train_experimental(cfg, pts, fp);
    model = std::move(result.first);
    rep = std::move(result.second);
  } else {
    const Dataset train_data = load_dataset(o.data);
    std::unique_ptr<Dataset> eval_data;
    if (!o.eval.empty()) {
      run.input(o.eval);
      eval_data = std::make_unique<Dataset>(load_dataset(o.eval));
    }
    auto result = train(cfg, train_data, eval_data.get());
    model = std::move(result.first);
    rep = std::move(result.second);
  }

  const std::string report_path =
      o.report.empty() ? derived_path(o.out, ".report.json") : o.report;
  const std::string csv_path =
      o.loss_csv.empty() ? derived_path(o.out, ".loss.csv") : o.loss_csv;
  model_save(*model, o.out);
  save_report(rep, report_path);
  save_loss_csv(rep, csv_path);
  run.output(o.out);
  run.output(report_path);
  run.output(csv_path);
  run.finish();
  say(g, "final training MSE %s", fmt_double(rep.final_train_mse).c_str());
  if (std::isfinite(rep.final_extrap_mse))
    say(g, "final extrapolation MSE %s",
        fmt_double(rep.final_extrap_mse).c_str());
  for (const auto& kv : rep.r2)
    say(g, "R2 %s %s", kv.first.c_str(), fmt_double(kv.second).c_str());
  return 0;
}

struct EvalOpts {
  std::string model, data, out;
  double l0 = 0.0;
  std::string measure = "declared";
};

int cmd_eval(const Global& g, const EvalOpts& o,
             const std::vector<std::string>& argv) {
  Run run("eval", argv, g);
  run.input(o.model);
  run.input(o.data);
  const auto model = model_load(o.model);
  auto* pm = dynamic_cast<PannModel*>(model.get());
  nlohmann::json j;
  if (ends_with(o.data, ".csv")) {
    const auto pts = load_experimental(o.data);
    const LossMeasure measure = parse_measure(o.measure);
    if (pm) j["loss"] = loss(*pm, pts, measure, o.l0);
    j["r2"] = r_squared(*model, pts, measure);
  } else {
    if (!pm)
      throw UsageError("synthetic datasets evaluate neural models only; '" +
                       o.model + "' is closed-form");
    const Dataset ds = load_dataset(o.data);
    j["loss"] = loss(*pm, ds, o.l0);
  }
  const std::string text = j.dump(2) + "\n";
  if (!o.out.empty()) {
    std::ofstream f(o.out);
    if (!f) throw FormatError("cannot open '" + o.out + "' for writing");
    f << text;
    run.output(o.out);
  }
  run.finish();
  if (!g.quiet) std::fputs(text.c_str(), stdout);
  return 0;
}

struct CurvesOpts {
  std::string model, out;
  std::string modes = "ut,et,ps";
  double lmin = 0.7, lmax = 1.4;
  int steps = 50;
};

int cmd_curves(const Global& g, const CurvesOpts& o,
               const std::vector<std::string>& argv) {
  if (!(o.lmin > 0.0)) throw UsageError("--lmin must be > 0");
  if (!(o.lmax >= o.lmin)) throw UsageError("--lmax must be >= --lmin");
  if (o.steps < 1) throw UsageError("--steps must be >= 1");
  const std::vector<Mode> modes = parse_modes(o.modes);

  Run run("curves", argv, g);
  run.input(o.model);
  const auto model = model_load(o.model);
  auto* pm = dynamic_cast<const PannModel*>(model.get());

  std::string text;
  text += "# model " + o.model + "\n";
  text += "# kind " + to_string(model->kind()) + "\n";
  text += "# grid " + fmt_double(o.lmin) + " " + fmt_double(o.lmax) + " " +
          std::to_string(o.steps) + "\n";
  if (pm && pm->train_delta)
    text += "# training_domain " + fmt_double(1.0 - *pm->train_delta) + " " +
            fmt_double(1.0 + *pm->train_delta) + "\n";
  text += "mode,lambda,sigma\n";
  for (const Mode mode : modes) {
    for (int i = 0; i < o.steps; ++i) {
      const double lam =
          o.steps == 1 ? o.lmin
                       : o.lmin + (o.lmax - o.lmin) * i / (o.steps - 1.0);
      const ModeSpec spec{mode, lam};
      const double sigma = model->incompressible()
                               ? incompressible_mode_stress(*model, spec)[0]
                               : compressible_mode_stress(*model, spec).sigma[0];
      text += to_string(mode) + "," + fmt_double(lam) + "," +
              fmt_double(sigma) + "\n";
    }
  }
  std::ofstream f(o.out);
  if (!f) throw FormatError("cannot open '" + o.out + "' for writing");
  f << text;
  if (!f) throw FormatError("write failed for '" + o.out + "'");
  f.close();
  run.output(o.out);
  run.finish();
  say(g, "wrote %zu curve rows to %s", modes.size() * o.steps,
      o.out.c_str());
  return 0;
}

struct BenchOpts {
  std::string suite = "ogden";
  std::string archs = "lambda-pann:p=3,i-pann:w=23";
  std::string fixtures = "1,2,3,4,5,6,7,8,9,10";
  std::string out_dir = ".";
  int epochs = 20000;
  int layers = 2;
  int width = 10;
  double lr = 1e-3;
  double train_delta = 0.2, extrap_delta = 0.3;
  int train_n = 200, extrap_n = 500;
};

std::string sanitize(const std::string& name) {
  std::string out;
  for (char c : name)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-')
               ? c
               : '-';
  return out;
}

int cmd_bench(const Global& g, const BenchOpts& o,
              const std::vector<std::string>& argv) {
  if (o.suite != "ogden" && o.suite != "genogden")
    throw UsageError("--suite must be ogden or genogden");
  std::vector<ArchSpec> archs;
  try {
    for (const std::string& tok : split_commas(o.archs))
      archs.push_back(parse_arch_spec(tok));
  } catch (const FormatError& e) {
    throw UsageError(e.what());
  }
  if (archs.empty()) throw UsageError("no architectures given");
  std::vector<std::unique_ptr<EnergyModel>> truths;
  std::vector<const EnergyModel*> truth_ptrs;
  try {
    for (const std::string& tok : split_commas(o.fixtures)) {
      truths.push_back(make_fixture_truth(o.suite + "-fixture:" + tok));
      truth_ptrs.push_back(truths.back().get());
    }
  } catch (const FormatError& e) {
    throw UsageError(e.what());
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }

  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.layers = o.layers;
  cfg.width = o.width;
  cfg.lr = o.lr;
  cfg.seed = g.seed;
  try {
    validate(cfg);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }

  std::error_code ec;
  std::filesystem::create_directories(o.out_dir, ec);
  if (ec)
    throw FormatError("cannot create directory '" + o.out_dir +
                      "': " + ec.message());

  Run run("bench", argv, g);
  const BenchReport rep = median_benchmark(
      archs, truth_ptrs, cfg, o.train_delta, o.train_n, o.extrap_delta,
      o.extrap_n);

  std::string summary = "arch,final_median_train,final_median_extrap\n";
  for (const BenchSeries& s : rep.series) {
    const std::string name = sanitize(to_string(s.arch));
    const std::string path = o.out_dir + "/" + o.suite + "-" + name + ".csv";
    std::string csv = "epoch,median_train,median_extrap\n";
    for (std::size_t i = 0; i < s.epochs.size(); ++i)
      csv += std::to_string(s.epochs[i]) + "," +
             fmt_double(s.median_train[i]) + "," +
             fmt_double(s.median_extrap[i]) + "\n";
    std::ofstream f(path);
    if (!f) throw FormatError("cannot open '" + path + "' for writing");
    f << csv;
    if (!f) throw FormatError("write failed for '" + path + "'");
    f.close();
    run.output(path);
    summary += to_string(s.arch) + "," +
               fmt_double(s.median_train.empty() ? 0.0
                                                 : s.median_train.back()) +
               "," +
               fmt_double(s.median_extrap.empty() ? 0.0
                                                  : s.median_extrap.back()) +
               "\n";
  }
  const std::string summary_path =
      o.out_dir + "/" + o.suite + "-summary.csv";
  std::ofstream f(summary_path);
  if (!f) throw FormatError("cannot open '" + summary_path + "' for writing");
  f << summary;
  f.close();
  run.output(summary_path);
  run.finish();
  if (!g.quiet) std::fputs(summary.c_str(), stdout);
  return 0;
}

struct ExportOpts {
  std::string truth, out;
};

int cmd_export(const Global& g, const ExportOpts& o,
               const std::vector<std::string>& argv) {
  Run run("export", argv, g);
  std::unique_ptr<EnergyModel> truth;
  try {
    truth = make_fixture_truth(o.truth);
  } catch (const FormatError& e) {
    throw UsageError(e.what());
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  model_save(*truth, o.out);
  run.output(o.out);
  run.finish();
  say(g, "wrote %s model to %s", to_string(truth->kind()).c_str(),
      o.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polyconvex stretch-based PANN constitutive models"};
  app.require_subcommand(1);
  const std::vector<std::string> argv_echo(argv, argv + argc);

  Global g;
  add_global(&app, g);

  GenOpts gen;
  CLI::App* cgen = app.add_subcommand("gen", "Sample a synthetic dataset");
  cgen->add_option("--truth", gen.truth,
                   "Ground truth: ogden-fixture:N, genogden-fixture:N, or a "
                   "model JSON path")
      ->required();
  cgen->add_option("--delta", gen.delta, "Perturbation half-width");
  cgen->add_option("--n", gen.n, "Number of records");
  cgen->add_option("--out", gen.out, "Output JSONL path")->required();
  add_global(cgen, g);

  TrainOpts tr;
  CLI::App* ctrain = app.add_subcommand("train", "Train a PANN model");
  ctrain->add_option("--arch", tr.arch, "lambda-pann[, -nophi, -additive] or i-pann");
  ctrain->add_option("--p", tr.p, "Deep-set reduction exponent (default 3)");
  ctrain->add_option("--layers", tr.layers, "Hidden layers per stack (default 2)");
  ctrain->add_option("--width", tr.width, "Neurons per hidden layer (default 10)");
  ctrain->add_option("--lr", tr.lr, "Adam learning rate");
  ctrain->add_option("--epochs", tr.epochs, "Full-batch epochs");
  ctrain->add_option("--l0", tr.l0, "L0 gate penalty factor (0 disables)");
  ctrain->add_option("--measure", tr.measure,
                     "Experimental loss measure: declared|cauchy|nominal");
  ctrain->add_option("--data", tr.data,
                     "Training data: JSONL dataset or experimental CSV")
      ->required();
  ctrain->add_option("--eval", tr.eval, "Extrapolation JSONL dataset");
  ctrain->add_option("--out", tr.out, "Model JSON output path")->required();
  ctrain->add_option("--report", tr.report,
                     "Report JSON path (default <out>.report.json)");
  ctrain->add_option("--loss-csv", tr.loss_csv,
                     "Loss CSV path (default <out>.loss.csv)");
  add_global(ctrain, g);

  EvalOpts ev;
  CLI::App* ceval = app.add_subcommand("eval", "Evaluate a model on data");
  ceval->add_option("--model", ev.model, "Model JSON path")->required();
  ceval->add_option("--data", ev.data, "JSONL dataset or experimental CSV")
      ->required();
  ceval->add_option("--l0", ev.l0, "Include L0 penalty at this factor");
  ceval->add_option("--measure", ev.measure,
                    "Experimental loss measure: declared|cauchy|nominal");
  ceval->add_option("--out", ev.out, "Also write the metrics JSON here");
  add_global(ceval, g);

  CurvesOpts cu;
  CLI::App* ccurves =
      app.add_subcommand("curves", "Export stress-stretch curves as CSV");
  ccurves->add_option("--model", cu.model, "Model JSON path")->required();
  ccurves->add_option("--modes", cu.modes, "Comma list of ut,et,ps");
  ccurves->add_option("--lmin", cu.lmin, "Grid lower stretch");
  ccurves->add_option("--lmax", cu.lmax, "Grid upper stretch");
  ccurves->add_option("--steps", cu.steps, "Grid points per mode");
  ccurves->add_option("--out", cu.out, "Output CSV path")->required();
  add_global(ccurves, g);

  BenchOpts be;
  CLI::App* cbench = app.add_subcommand(
      "bench", "Median train/extrapolation benchmark over fixtures");
  cbench->add_option("--suite", be.suite, "ogden or genogden");
  cbench->add_option("--archs", be.archs, "Comma list of arch specs");
  cbench->add_option("--fixtures", be.fixtures, "Comma list of fixture indices");
  cbench->add_option("--epochs", be.epochs, "Epochs per run");
  cbench->add_option("--layers", be.layers, "Default hidden layers");
  cbench->add_option("--width", be.width, "Default width");
  cbench->add_option("--lr", be.lr, "Adam learning rate");
  cbench->add_option("--train-delta", be.train_delta, "Training-set delta");
  cbench->add_option("--train-n", be.train_n, "Training-set size");
  cbench->add_option("--extrap-delta", be.extrap_delta,
                     "Extrapolation-set delta");
  cbench->add_option("--extrap-n", be.extrap_n, "Extrapolation-set size");
  cbench->add_option("--out-dir", be.out_dir, "Directory for CSV artifacts");
  add_global(cbench, g);

  ExportOpts ex;
  CLI::App* cexport = app.add_subcommand(
      "export", "Write a compiled-in fixture as a model JSON");
  cexport->add_option("--truth", ex.truth, "ogden-fixture:N or genogden-fixture:N")
      ->required();
  cexport->add_option("--out", ex.out, "Output JSON path")->required();
  add_global(cexport, g);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (cgen->parsed()) return cmd_gen(g, gen, argv_echo);
    if (ctrain->parsed()) return cmd_train(g, tr, argv_echo);
    if (ceval->parsed()) return cmd_eval(g, ev, argv_echo);
    if (ccurves->parsed()) return cmd_curves(g, cu, argv_echo);
    if (cbench->parsed()) return cmd_bench(g, be, argv_echo);
    if (cexport->parsed()) return cmd_export(g, ex, argv_echo);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
