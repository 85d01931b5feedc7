// Command-line front end: synthetic data generation, single-cell training,
// benchmark sweeps, and the verification suites. Every run echoes its fully
// resolved configuration into a key=value metadata sidecar (timestamps last,
// so diff-based comparisons can ignore them).
//
// Exit codes: 0 success, 1 validation error, 2 cell failures under --strict.

#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sideinfo/bench.hpp"
#include "sideinfo/checks.hpp"
#include "sideinfo/csv.hpp"
#include "sideinfo/model_io.hpp"
#include "sideinfo/synth.hpp"

namespace {

using namespace sideinfo;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string git_describe() {
  FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r");
  if (!pipe) return "unavailable";
  char buf[256];
  std::string out;
  while (fgets(buf, sizeof(buf), pipe)) out += buf;
  const int rc = pclose(pipe);
  while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
  if (rc != 0 || out.empty()) return "unavailable";
  return out;
}

// Sidecar: command, the subcommand's resolved options (defaults included, so
// the echo is byte-identical across identical invocations), git describe,
// then wall-clock timestamps as the final lines.
void write_meta(const std::string& path, const std::string& command, const CLI::App& cmd,
                const std::string& started) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "command=" << command << '\n';
  std::istringstream cfg(cmd.config_to_str(/*default_also=*/true, /*write_description=*/false));
  std::vector<std::string> lines;
  for (std::string line; std::getline(cfg, line);)
    if (!line.empty()) lines.push_back(line);
  std::sort(lines.begin(), lines.end());
  for (const std::string& line : lines) out << line << '\n';
  out << "git_describe=" << git_describe() << '\n';
  out << "started_at_utc=" << started << '\n';
  out << "finished_at_utc=" << utc_now() << '\n';
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (const std::string& tok : out)
    if (tok.empty()) throw std::invalid_argument("empty token in list '" + s + "'");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  for (const std::string& tok : split_commas(s)) out.push_back(detail::parse_size(tok));
  return out;
}

SigmaKind sigma_from_token(const std::string& s) {
  if (s == "margin") return SigmaKind::margin;
  if (s == "exp-dist") return SigmaKind::exp_neg_dist;
  if (s == "gaussian") return SigmaKind::gaussian;
  throw std::invalid_argument("unknown sigma: '" + s + "' (margin, exp-dist, gaussian)");
}

std::size_t workers_default() {
  if (const char* env = std::getenv("SIDEINFO_WORKERS")) {
    try {
      return std::max<std::size_t>(1, detail::parse_size(env));
    } catch (const std::exception&) {
      throw std::invalid_argument("SIDEINFO_WORKERS must be a positive integer");
    }
  }
  return 1;
}

struct GenerateArgs {
  GeneratorConfig gen;
  std::string out = "trajectory.csv";
  std::string meta;
};

int cmd_generate(const GenerateArgs& a, const CLI::App& cmd, const std::string& started) {
  const Trajectory tr = generate(a.gen);
  std::ofstream out(a.out);
  if (!out) throw std::runtime_error("cannot open for writing: " + a.out);

  const std::size_t d = a.gen.obs_dim, e = a.gen.embedded_dim();
  out << "t,s,y,z_direct,z_relative";
  for (std::size_t j = 0; j < d; ++j) out << ",x_" << j;
  for (std::size_t j = 0; j < e; ++j) out << ",z_embedded_" << j;
  out << '\n';
  for (std::size_t t = 0; t < a.gen.length; ++t) {
    out << t << ',' << format_double(tr.s[t]) << ',' << tr.y[t] << ','
        << format_double(tr.z_direct[t]) << ',';
    // the relative channel describes steps, so its last row is empty
    if (t + 1 < a.gen.length) out << format_double(tr.z_relative[t]);
    for (std::size_t j = 0; j < d; ++j) out << ',' << format_double(tr.x(t, j));
    for (std::size_t j = 0; j < e; ++j) out << ',' << format_double(tr.z_embedded(t, j));
    out << '\n';
  }
  out.close();
  write_meta(a.meta.empty() ? a.out + ".meta" : a.meta, "generate", cmd, started);
  std::cout << "wrote " << a.gen.length << " samples to " << a.out << '\n';
  return 0;
}

struct TrainArgs {
  CellSpec cell;
  BenchConfig bench;
  std::string side = "direct", pattern = "direct", procedure = "simultaneous";
  double weight_main = -1.0, weight_side = -1.0, gamma = -1.0, margin = -1.0;
  std::string sigma;
  std::string out = "cell.csv";
  std::string meta;
  std::string save_model;
  std::string trace_path;
  bool strict = false;
};

int cmd_train(TrainArgs& a, const CLI::App& cmd, const std::string& started) {
  a.cell.side = side_from_name(a.side);
  a.cell.method = method_from_name(a.pattern);
  a.cell.procedure = procedure_from_name(a.procedure);
  validate_cell(a.cell);

  CellOptions opts;
  PatternSpec spec;
  ModelStack trained;
  const bool pattern_cell = !is_baseline(a.cell.method);
  if (pattern_cell) {
    spec = default_pattern_spec(a.cell.method, a.cell.procedure);
    if (a.weight_main >= 0.0) spec.weight_main = a.weight_main;
    if (a.weight_side >= 0.0) spec.weight_side = a.weight_side;
    if (a.gamma >= 0.0) spec.gamma = a.gamma;
    if (a.margin >= 0.0) spec.margin = a.margin;
    if (!a.sigma.empty()) spec.sigma = sigma_from_token(a.sigma);
    opts.spec = &spec;
    opts.trained = &trained;
  } else if (a.weight_main >= 0.0 || a.weight_side >= 0.0 || a.gamma >= 0.0 ||
             a.margin >= 0.0 || !a.sigma.empty() || !a.save_model.empty()) {
    throw std::invalid_argument("pattern options do not apply to baseline methods");
  }

  std::ofstream trace_file;
  if (!a.trace_path.empty()) {
    trace_file.open(a.trace_path);
    if (!trace_file) throw std::runtime_error("cannot open for writing: " + a.trace_path);
    trace_file << "epoch,main_loss,side_loss\n";
    a.bench.train.trace = [&trace_file](std::size_t epoch, double main, double side) {
      trace_file << epoch << ',' << format_double(main) << ',' << format_double(side)
                 << '\n';
    };
  }

  const RawRow row = run_cell(a.cell, a.bench, opts);
  write_raw_csv(a.out, {row});
  write_meta(a.meta.empty() ? a.out + ".meta" : a.meta, "train", cmd, started);
  if (!a.save_model.empty() && !row.failed) save_model(trained, a.save_model);

  std::cout << kRawCsvHeader << '\n' << raw_row_line(row) << '\n';
  if (row.failed) {
    std::cerr << "cell failed (non-finite optimization or rank-deficient statistics)\n";
    if (a.strict) return 2;
  }
  return 0;
}

struct SweepArgs {
  BenchConfig bench;
  SweepPlan plan;
  std::string side = "direct";
  std::string patterns = "direct";
  std::string procedures = "simultaneous";
  std::string n_list;
  std::string out_prefix = "results";
  std::string meta;
  bool strict = false;
};

int cmd_sweep(SweepArgs& a, const CLI::App& cmd, const std::string& started) {
  const SideKind side = side_from_name(a.side);
  a.plan.cells.clear();
  for (const std::string& p : split_commas(a.patterns))
    for (const std::string& proc : split_commas(a.procedures))
      a.plan.cells.push_back({side, method_from_name(p), procedure_from_name(proc)});
  if (!a.n_list.empty()) a.plan.n_train = parse_size_list(a.n_list);

  std::size_t done = 0;
  const std::size_t total = a.plan.cells.size() * a.plan.n_train.size() * a.plan.seeds;
  const SweepResult res = run_sweep(a.plan, a.bench, [&](const RawRow& row) {
    ++done;
    std::cerr << "[" << done << "/" << total << "] " << row.side_info << "/"
              << row.pattern << "/" << row.procedure << " n=" << row.n_train
              << " seed=" << row.seed << (row.failed ? " FAILED" : "") << '\n';
  });

  const std::string raw_path = a.out_prefix + "_raw.csv";
  const std::string agg_path = a.out_prefix + "_agg.csv";
  write_raw_csv(raw_path, res.raw);
  write_agg_csv(agg_path, res.agg);
  write_meta(a.meta.empty() ? a.out_prefix + "_meta.txt" : a.meta, "sweep", cmd, started);

  std::size_t failures = 0;
  for (const RawRow& r : res.raw) failures += r.failed;
  std::cout << "wrote " << res.raw.size() << " raw rows to " << raw_path << " and "
            << res.agg.size() << " aggregate rows to " << agg_path;
  if (failures) std::cout << " (" << failures << " failed cells)";
  std::cout << '\n';
  return failures > 0 && a.strict ? 2 : 0;
}

struct GradcheckArgs {
  std::uint64_t seed = 7;
  double tol = 1e-5;
  std::size_t draws = 20;
  std::string only;
  std::string sigma;
  std::string meta = "gradcheck_meta.txt";
};

int cmd_gradcheck(const GradcheckArgs& a, const CLI::App& cmd, const std::string& started) {
  if (!(a.tol > 0.0)) throw std::invalid_argument("--tol must be positive");
  std::vector<std::string> filter;
  if (!a.only.empty()) filter.push_back(a.only);
  if (!a.sigma.empty()) {
    sigma_from_token(a.sigma);  // validate the token
    filter.push_back(a.sigma == "exp-dist" ? "expdist" : a.sigma);
  }
  const auto results = gradcheck_all(a.seed, a.tol, a.draws, filter);
  bool all_pass = true;
  for (const CheckResult& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << '\n';
    all_pass = all_pass && r.pass;
  }
  write_meta(a.meta, "gradcheck", cmd, started);
  return all_pass ? 0 : 1;
}

struct OracleArgs {
  std::uint64_t seed = 7;
  std::string suite;
  double tol = 1e-12;
  std::string meta = "oracle_check_meta.txt";
};

int cmd_oracle_check(const OracleArgs& a, const CLI::App& cmd, const std::string& started) {
  if (!(a.tol > 0.0)) throw std::invalid_argument("--tol must be positive");
  const auto results = oracle_all(a.seed, a.suite, a.tol);
  bool all_pass = true;
  for (const CheckResult& r : results) {
    std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << '\n';
    all_pass = all_pass && r.pass;
  }
  write_meta(a.meta, "oracle-check", cmd, started);
  return all_pass ? 0 : 1;
}

void add_bench_flags(CLI::App* cmd, BenchConfig& bench) {
  cmd->add_option("--base-seed", bench.base_seed, "sweep-level master seed");
  cmd->add_option("--obs-dim", bench.obs_dim, "observation dimension d");
  cmd->add_option("--noise-std", bench.noise_std, "side-channel noise standard deviation");
  cmd->add_option("--test-size", bench.test_size, "test trajectory length");
  cmd->add_option("--rep-dim", bench.rep_dim,
                  "representation width (0: channel width for 'direct', else 1)");
  cmd->add_option("--lr", bench.train.learning_rate, "learning rate");
  cmd->add_option("--momentum", bench.train.momentum, "Nesterov momentum");
  cmd->add_option("--epochs", bench.train.epochs, "training epochs");
  cmd->add_option("--batch-size", bench.train.batch_size, "minibatch size");
  cmd->add_option("--finetune-epochs", bench.train.finetune_epochs,
                  "joint epochs after pretraining");
  cmd->add_option("--finetune-lr", bench.train.finetune_lr, "finetuning learning rate");
}

// Each command parses as its own top-level CLI::App: config-file handling
// (set_config, allow_config_extras) only runs on a root app in CLI11, so a
// nested subcommand would silently skip the file.
int run_command(const std::string& name, const std::string& description, int argc, char** argv,
                const std::function<void(CLI::App&)>& add_options,
                const std::function<int(const CLI::App&)>& run) {
  CLI::App cmd{description, "sideinfo " + name};
  cmd.set_config("--config", "", "key=value config file; flags override file values");
  cmd.allow_config_extras(false);
  add_options(cmd);
  try {
    cmd.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cmd.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    return run(cmd);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  const std::string started = utc_now();
  const std::string usage =
      "usage: sideinfo <command> [options]\n"
      "commands:\n"
      "  generate      write one synthetic trajectory as CSV\n"
      "  train         run one benchmark cell\n"
      "  sweep         run a grid of benchmark cells\n"
      "  gradcheck     finite-difference checks for every loss and map family\n"
      "  oracle-check  closed-form oracles: naive-loop, sfa, cca, pca\n"
      "run 'sideinfo <command> --help' for the command's options\n";
  if (argc < 2) {
    std::cerr << usage;
    return 1;
  }
  const std::string command = argv[1];
  if (command == "--help" || command == "-h" || command == "help") {
    std::cout << usage;
    return 0;
  }
  const int sub_argc = argc - 1;
  char** sub_argv = argv + 1;

  if (command == "generate") {
    GenerateArgs a;
    return run_command(
        command, "write one synthetic trajectory as CSV", sub_argc, sub_argv,
        [&](CLI::App& cmd) {
          cmd.add_option("--obs-dim", a.gen.obs_dim, "observation dimension d");
          cmd.add_option("--embed-dim", a.gen.embed_dim,
                         "embedded channel dimension e (0: d/2)");
          cmd.add_option("--noise-std", a.gen.side_noise_std,
                         "side-channel noise standard deviation");
          cmd.add_option("--length", a.gen.length, "trajectory length T");
          cmd.add_option("--seed", a.gen.seed, "generator seed");
          cmd.add_option("--out", a.out, "output CSV path");
          cmd.add_option("--meta", a.meta, "metadata sidecar path (default: <out>.meta)");
        },
        [&](const CLI::App& cmd) { return cmd_generate(a, cmd, started); });
  }

  if (command == "train") {
    TrainArgs a;
    return run_command(
        command, "run one benchmark cell", sub_argc, sub_argv,
        [&](CLI::App& cmd) {
          cmd.add_option("--side-info", a.side, "direct|embedded|relative|none");
          cmd.add_option("--pattern", a.pattern,
                         "direct|multi-task|multi-view-corr|multi-view-pred|"
                         "pairwise-transform|logreg|pca|sfa");
          cmd.add_option("--procedure", a.procedure,
                         "simultaneous|decoupled|pretrain-finetune|none");
          cmd.add_option("--n", a.cell.n_train, "training trajectory length");
          cmd.add_option("--seed", a.cell.seed_index, "seed index within the sweep");
          add_bench_flags(&cmd, a.bench);
          cmd.add_option("--weight-main", a.weight_main, "main objective weight");
          cmd.add_option("--weight-side", a.weight_side, "side objective weight");
          cmd.add_option("--gamma", a.gamma, "batch-variance penalty strength");
          cmd.add_option("--margin", a.margin, "dissimilarity margin");
          cmd.add_option("--sigma", a.sigma, "margin|exp-dist|gaussian");
          cmd.add_option("--out", a.out, "raw CSV path for the single row");
          cmd.add_option("--meta", a.meta, "metadata sidecar path (default: <out>.meta)");
          cmd.add_option("--save-model", a.save_model, "write trained parameters as JSON");
          cmd.add_option("--trace", a.trace_path,
                         "per-epoch loss trace CSV (epoch, main_loss, side_loss)");
          cmd.add_flag("--strict", a.strict, "exit 2 if the cell fails");
        },
        [&](const CLI::App& cmd) { return cmd_train(a, cmd, started); });
  }

  if (command == "sweep") {
    SweepArgs a;
    std::size_t workers_flag = 0;
    return run_command(
        command, "run a grid of benchmark cells", sub_argc, sub_argv,
        [&](CLI::App& cmd) {
          cmd.add_option("--side-info", a.side, "direct|embedded|relative|none");
          cmd.add_option("--patterns", a.patterns, "comma-separated method list");
          cmd.add_option("--procedures", a.procedures, "comma-separated procedure list");
          cmd.add_option("--n", a.n_list,
                         "comma-separated training sizes (default 25,50,100,200,400,800)");
          cmd.add_option("--seeds", a.plan.seeds, "seeds per cell");
          add_bench_flags(&cmd, a.bench);
          cmd.add_option("--out", a.out_prefix,
                         "output prefix (<prefix>_raw.csv, <prefix>_agg.csv)");
          cmd.add_option("--meta", a.meta, "metadata sidecar path (default: <prefix>_meta.txt)");
          cmd.add_option("--workers", workers_flag,
                         "parallel cell workers (default: SIDEINFO_WORKERS or 1)");
          cmd.add_flag("--strict", a.strict, "exit 2 if any cell fails");
        },
        [&](const CLI::App& cmd) {
          a.bench.workers = workers_flag > 0 ? workers_flag : workers_default();
          return cmd_sweep(a, cmd, started);
        });
  }

  if (command == "gradcheck") {
    GradcheckArgs a;
    return run_command(
        command, "finite-difference checks for every loss and map family", sub_argc, sub_argv,
        [&](CLI::App& cmd) {
          cmd.add_option("--seed", a.seed, "draw seed");
          cmd.add_option("--tol", a.tol, "relative error tolerance");
          cmd.add_option("--draws", a.draws, "random draws per combination");
          cmd.add_option("--only", a.only, "restrict to combinations containing this name");
          cmd.add_option("--sigma", a.sigma, "restrict to one sigma (margin|exp-dist|gaussian)");
          cmd.add_option("--meta", a.meta, "metadata sidecar path");
        },
        [&](const CLI::App& cmd) { return cmd_gradcheck(a, cmd, started); });
  }

  if (command == "oracle-check") {
    OracleArgs a;
    return run_command(
        command, "closed-form oracles: naive-loop, sfa, cca, pca", sub_argc, sub_argv,
        [&](CLI::App& cmd) {
          cmd.add_option("--seed", a.seed, "data seed");
          cmd.add_option("--suite", a.suite, "run one suite (naive-loop|sfa|cca|pca); default all");
          cmd.add_option("--tol", a.tol, "naive-loop equality tolerance");
          cmd.add_option("--meta", a.meta, "metadata sidecar path");
        },
        [&](const CLI::App& cmd) { return cmd_oracle_check(a, cmd, started); });
  }

  std::cerr << "unknown command '" << command << "'\n" << usage;
  return 1;
}
