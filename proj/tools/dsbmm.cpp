// dsbmm command-line front end: simulate, fit, report.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dsbmm/dgp.hpp"
#include "dsbmm/digest.hpp"
#include "dsbmm/errors.hpp"
#include "dsbmm/gibbs.hpp"
#include "dsbmm/metrics.hpp"
#include "dsbmm/panel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dsbmm;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
  }
  fs::rename(tmp, path);
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

// Files excluded from reproducibility digests.
const std::vector<std::string> kVolatile = {"manifest.json", "timing.json"};

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  std::map<std::string, std::string> inputs;
  std::optional<std::uint64_t> seed;
  std::string started = utc_now();
  std::vector<fs::path> artifact_dirs;

  void write(const fs::path& out, int status, const std::string& error) const {
    json artifacts = json::object();
    json dirs = json::object();
    for (const auto& d : artifact_dirs) {
      if (!fs::is_directory(d)) continue;
      for (const auto& [p, h] : file_digests(d, kVolatile)) artifacts[(d / p).lexically_relative(out).generic_string()] = h;
      dirs[d.lexically_relative(out).generic_string()] = directory_digest(d, kVolatile);
    }
    json j{{"command", command},
           {"argv", argv},
           {"config", config},
           {"config_sha256", sha256_hex(config.dump())},
           {"inputs", inputs},
           {"seed", seed ? json(*seed) : json(nullptr)},
           {"started", started},
           {"finished", utc_now()},
           {"exit_status", status},
           {"artifacts", artifacts},
           {"directory_sha256", dirs}};
    if (!error.empty()) j["error"] = error;
    std::error_code ec;
    fs::create_directories(out, ec);
    write_file(out / "manifest.json", j.dump(2) + "\n");
  }
};

// Runs `body`, mapping failures to exit codes and writing the manifest.
int guarded(Manifest& m, const fs::path& out, const std::function<void()>& body) {
  int status = kOk;
  std::string error;
  try {
    body();
  } catch (const UsageError& e) {
    status = kUsage;
    error = e.what();
  } catch (const Error& e) {
    status = kRuntime;
    error = e.what();
  } catch (const std::exception& e) {
    status = kRuntime;
    error = e.what();
  }
  if (!error.empty()) std::cerr << "dsbmm " << m.command << ": " << error << "\n";
  if (!out.empty()) {
    try {
      m.write(out, status, error);
    } catch (const std::exception& e) {
      std::cerr << "dsbmm " << m.command << ": cannot write manifest: " << e.what() << "\n";
      if (status == kOk) status = kRuntime;
    }
  }
  return status;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string preset;
  std::string config;
  int n = 50;
  int t = 15;
  std::uint64_t seed = 1;
  std::string out;
};

void cmd_simulate(const SimulateArgs& a, Manifest& m) {
  GeneratorConfig cfg;
  if (!a.config.empty()) {
    m.inputs[a.config] = sha256_file(a.config);
    try {
      cfg = config_from_json(read_json_file(a.config));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  } else {
    try {
      cfg = build_preset(a.preset, a.n, a.t);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }
  validate_config(cfg);
  m.config = config_to_json(cfg);
  m.config["n_nodes"] = a.n;
  m.config["n_times"] = a.t;
  RngStream rng(a.seed, 0);
  auto [panel, truth] = simulate(cfg, a.n, a.t, rng);
  const fs::path out(a.out);
  fs::create_directories(out);
  save_panel(panel, out);
  write_file(out / "truth.json", truth_to_json(truth).dump(2) + "\n");
  write_file(out / "generator.json", config_to_json(cfg).dump(2) + "\n");
  m.artifact_dirs.push_back(out);
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string data;
  long iters = 2000;
  long burnin = 1000;
  long thin = 1;
  std::string prior = "group_lasso";
  std::string prior_file;
  std::uint64_t seed = 1;
  std::string out;
  bool resume = false;
  bool randomize_scan = false;
  bool no_feedback = false;
  long checkpoint_every = 100;
  int parallel = 1;
  int restarts = 10;
  bool quiet = false;
  bool iters_given = false;
};

void cmd_fit(const FitArgs& a, Manifest& m) {
  const fs::path out(a.out);
  std::mutex log_mutex;
  auto progress_for = [&](int chain) -> ProgressFn {
    if (a.quiet) return {};
    return [&, chain](long it, double ll) {
      std::lock_guard<std::mutex> lock(log_mutex);
      std::fprintf(stderr, "chain %d iteration %ld loglik %.6f\n", chain, it, ll);
    };
  };

  std::vector<fs::path> dirs;
  if (a.parallel == 1) {
    dirs.push_back(out);
  } else {
    for (int c = 1; c <= a.parallel; ++c) dirs.push_back(out / ("chain_" + std::to_string(c)));
  }

  if (a.resume) {
    for (const auto& d : dirs) {
      if (!fs::exists(d / "meta.json")) throw Error(ErrorCode::CorruptCheckpoint, "no chain store at " + d.string());
    }
  } else if (!fs::is_directory(a.data)) {
    throw UsageError("data directory not found: " + a.data);
  }

  std::optional<MultiLayerPanel> panel;
  std::optional<PriorConfig> prior;
  if (!a.resume) {
    try {
      panel = load_panel_dir(a.data);
    } catch (const Error& e) {
      throw UsageError(std::string("cannot load panel: ") + e.what());
    }
    for (const auto& [p, h] : file_digests(a.data)) m.inputs[(fs::path(a.data) / p).generic_string()] = h;
    const PriorMode mode = a.prior == "normal" ? PriorMode::Normal : PriorMode::GroupLasso;
    if (!a.prior_file.empty()) {
      m.inputs[a.prior_file] = sha256_file(a.prior_file);
      try {
        prior = prior_from_json(read_json_file(a.prior_file));
      } catch (const json::exception& e) {
        throw UsageError(a.prior_file + ": " + e.what());
      }
    } else {
      prior = default_prior(panel->specs(), mode);
    }
    prior->transition.mode = mode;
  }

  std::vector<FitConfig> configs;
  for (int c = 0; c < a.parallel; ++c) {
    FitConfig fc;
    fc.iterations = a.iters;
    fc.burn_in = a.burnin;
    fc.thinning = a.thin;
    fc.prior_mode = a.prior == "normal" ? PriorMode::Normal : PriorMode::GroupLasso;
    fc.seed = a.seed + static_cast<std::uint64_t>(c);
    fc.randomize_scan = a.randomize_scan;
    fc.feedback = !a.no_feedback;
    fc.checkpoint_every = a.checkpoint_every;
    fc.kmeans_restarts = a.restarts;
    if (!a.resume) {
      try {
        fc.validate();
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
    }
    configs.push_back(fc);
  }
  m.config = fit_config_to_json(configs.front());
  m.config["parallel_chains"] = a.parallel;
  m.config["resume"] = a.resume;
  if (prior) m.config["prior"] = prior_to_json(*prior);

  std::vector<std::exception_ptr> errors(dirs.size());
  auto work = [&](std::size_t c) {
    try {
      if (a.resume) {
        long extra = 0;
        if (a.iters_given) extra = std::max(0L, a.iters - load_chain(dirs[c]).config.iterations);
        resume(dirs[c], extra, progress_for(static_cast<int>(c) + 1));
      } else {
        run(*panel, configs[c], *prior, dirs[c], progress_for(static_cast<int>(c) + 1));
      }
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (dirs.size() == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t c = 0; c < dirs.size(); ++c) threads.emplace_back(work, c);
    for (auto& t : threads) t.join();
  }
  for (const auto& d : dirs) m.artifact_dirs.push_back(d);
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------- report

struct ReportArgs {
  std::vector<std::string> chains;
  std::vector<std::string> truths;
  std::string out;
  double level = 0.95;
};

double median(std::vector<double> v) { return v.empty() ? 0.0 : quantile(std::move(v), 0.5); }

void cmd_report(const ReportArgs& a, Manifest& m) {
  if (!a.truths.empty() && a.truths.size() != 1 && a.truths.size() != a.chains.size()) {
    throw UsageError("give one --truth for all chains or one per chain");
  }
  m.config = {{"level", a.level}, {"chains", a.chains}, {"truth", a.truths}};
  const fs::path out(a.out);
  fs::create_directories(out);

  struct Row {
    std::string chain;
    std::string preset;
    EvaluationReport report;
  };
  std::vector<Row> rows;
  for (std::size_t c = 0; c < a.chains.size(); ++c) {
    const fs::path dir(a.chains[c]);
    if (!fs::is_directory(dir)) throw UsageError("chain directory not found: " + dir.string());
    for (const auto& [p, h] : file_digests(dir, kVolatile)) m.inputs[(dir / p).generic_string()] = h;
    const ChainStore chain = load_chain(dir);
    std::optional<GroundTruth> truth;
    if (!a.truths.empty()) {
      const std::string& tp = a.truths.size() == 1 ? a.truths[0] : a.truths[c];
      m.inputs[tp] = sha256_file(tp);
      try {
        truth = truth_from_json(read_json_file(tp));
      } catch (const Error& e) {
        throw UsageError(tp + ": " + e.what());
      }
    }
    EvaluationReport rep;
    try {
      rep = evaluate(chain, truth ? &*truth : nullptr, a.level);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DimensionMismatch) throw UsageError(e.what());
      throw;
    }
    const fs::path target = a.chains.size() == 1 ? out : out / ("chain_" + std::to_string(c + 1));
    fs::create_directories(target);
    json j = report_to_json(rep);
    j["chain"] = dir.generic_string();
    if (truth) j["preset"] = truth->config.name;
    write_file(target / "report.json", j.dump(2) + "\n");
    write_file(target / "report.csv", report_to_csv(rep));
    rows.push_back({dir.generic_string(), truth ? truth->config.name : "", std::move(rep)});
  }

  // Aggregate per preset over chains with truth.
  std::map<std::string, std::vector<const Row*>> by_preset;
  for (const auto& r : rows)
    if (r.report.has_truth) by_preset[r.preset].push_back(&r);
  json agg = json::object();
  std::string csv = "preset,metric,layer,family,value\n";
  char num[64];
  auto fmt = [&](double v) {
    std::snprintf(num, sizeof num, "%.17g", v);
    return std::string(num);
  };
  for (const auto& [preset, group] : by_preset) {
    if (group.size() < 2) continue;
    const int L = group.front()->report.n_layers;
    int retrieved = 0;
    for (const Row* r : group) retrieved += r->report.gbc_retrieved ? 1 : 0;
    const double prop = static_cast<double>(retrieved) / group.size();
    json g{{"n_chains", group.size()}, {"retrieved", retrieved}, {"retrieval_proportion", prop}};
    csv += preset + ",retrieval_proportion,,," + fmt(prop) + "\n";
    json ari = json::array(), cicj = json::array();
    for (int l = 0; l < L; ++l) {
      std::vector<double> va, vc;
      for (const Row* r : group) {
        va.push_back(r->report.global_ari[l]);
        vc.push_back(r->report.cic[l]);
      }
      ari.push_back({{"median", median(va)}, {"min", *std::min_element(va.begin(), va.end())}});
      cicj.push_back({{"median", median(vc)}});
      csv += preset + ",median_global_ari," + std::to_string(l + 1) + ",," + fmt(median(va)) + "\n";
      csv += preset + ",median_cic," + std::to_string(l + 1) + ",," + fmt(median(vc)) + "\n";
    }
    g["global_ari"] = ari;
    g["cic"] = cicj;
    json mse = json::object();
    for (std::size_t f = 0; f < group.front()->report.mse.size(); ++f) {
      const Family fam = group.front()->report.mse[f].first;
      json per = json::array();
      for (int l = 0; l < L; ++l) {
        std::vector<double> v;
        for (const Row* r : group)
          if (const auto& x = r->report.mse[f].second[l]) v.push_back(*x);
        if (v.empty()) {
          per.push_back(nullptr);
          continue;
        }
        per.push_back({{"median", median(v)}});
        csv += preset + ",median_mse," + std::to_string(l + 1) + "," + family_name(fam) + "," + fmt(median(v)) + "\n";
      }
      mse[family_name(fam)] = per;
    }
    g["mse"] = mse;
    json chains = json::array();
    for (const Row* r : group) chains.push_back({{"chain", r->chain}, {"gbc_retrieved", r->report.gbc_retrieved}});
    g["chains"] = chains;
    agg[preset] = g;
  }
  if (!agg.empty()) {
    write_file(out / "aggregate.json", agg.dump(2) + "\n");
    write_file(out / "aggregate.csv", csv);
  } else {
    std::error_code ec;
    fs::remove(out / "aggregate.json", ec);
    fs::remove(out / "aggregate.csv", ec);
  }
  m.artifact_dirs.push_back(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic multilayer stochastic block model: simulate, fit and evaluate"};
  app.require_subcommand(1);

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic multilayer panel with ground truth");
  auto* preset_opt = sim->add_option("--preset", sa.preset, "Preset name")
                         ->check(CLI::IsMember(preset_names()));
  auto* config_opt = sim->add_option("--config", sa.config, "Generator configuration JSON")->check(CLI::ExistingFile);
  preset_opt->excludes(config_opt);
  sim->add_option("--n", sa.n, "Number of nodes")->check(CLI::PositiveNumber);
  sim->add_option("--t", sa.t, "Number of time points")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sa.seed, "Random seed");
  sim->add_option("--out", sa.out, "Output directory")->required();

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Run the Gibbs sampler on a panel directory");
  fit->add_option("--data", fa.data, "Panel directory (spec.json and layer CSVs)");
  auto* iters_opt = fit->add_option("--iters", fa.iters, "Total iterations")->check(CLI::PositiveNumber);
  fit->add_option("--burnin", fa.burnin, "Burn-in iterations")->check(CLI::NonNegativeNumber);
  fit->add_option("--thin", fa.thin, "Thinning interval")->check(CLI::PositiveNumber);
  fit->add_option("--prior", fa.prior, "Transition prior")->check(CLI::IsMember({"normal", "group_lasso"}));
  fit->add_option("--prior-file", fa.prior_file, "Prior hyperparameter JSON")->check(CLI::ExistingFile);
  fit->add_option("--seed", fa.seed, "Random seed (chain c uses seed + c - 1)");
  fit->add_option("--out", fa.out, "Chain store directory")->required();
  fit->add_flag("--resume", fa.resume, "Continue the chain stored in --out; --iters sets the new total");
  fit->add_flag("--randomize-scan", fa.randomize_scan, "Random node order in membership updates");
  fit->add_flag("--no-feedback", fa.no_feedback, "Drop cross-layer transition factors from FFBS");
  fit->add_option("--checkpoint-every", fa.checkpoint_every, "Checkpoint interval (0: end only)")
      ->check(CLI::NonNegativeNumber);
  fit->add_option("--parallel-chains", fa.parallel, "Independent chains run concurrently")->check(CLI::PositiveNumber);
  fit->add_option("--kmeans-restarts", fa.restarts, "k-means restarts at initialization")->check(CLI::PositiveNumber);
  fit->add_flag("--quiet", fa.quiet, "No progress lines");

  ReportArgs ra;
  auto* rep = app.add_subcommand("report", "Evaluate chain stores, optionally against ground truth");
  rep->add_option("--chains", ra.chains, "Chain store directories")->required();
  rep->add_option("--truth", ra.truths, "truth.json (one shared, or one per chain)")->check(CLI::ExistingFile);
  rep->add_option("--out", ra.out, "Report directory")->required();
  rep->add_option("--level", ra.level, "Credible level")->check(CLI::Range(0.5, 0.999));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  Manifest m;
  m.argv.assign(argv, argv + argc);
  if (sim->parsed()) {
    m.command = "simulate";
    m.seed = sa.seed;
    if (sa.preset.empty() && sa.config.empty()) {
      std::cerr << "dsbmm simulate: one of --preset or --config is required\n";
      return kUsage;
    }
    return guarded(m, sa.out, [&] { cmd_simulate(sa, m); });
  }
  if (fit->parsed()) {
    m.command = "fit";
    m.seed = fa.seed;
    fa.iters_given = iters_opt->count() > 0;
    if (!fa.resume && fa.data.empty()) {
      std::cerr << "dsbmm fit: --data is required\n";
      return kUsage;
    }
    return guarded(m, fa.out, [&] { cmd_fit(fa, m); });
  }
  m.command = "report";
  return guarded(m, ra.out, [&] { cmd_report(ra, m); });
}
