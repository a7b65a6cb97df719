// Command-line front end: simulate, smooth, compare, paper, validate.
//
// Exit codes: 0 success, 1 usage or invalid input, 2 numerical failure,
// 3 reproduction check mismatch.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jmls/jmls.hpp"

namespace fs = std::filesystem;
using namespace jmls;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitMismatch = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::size_t parse_cap(const std::string& s) {
  if (s == "inf" || s == "∞") return kUnbounded;
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::logic_error&) {
    throw UsageError("invalid cap '" + s + "'");
  }
  if (used != s.size() || v < 1) throw UsageError("caps must be integers ≥ 1 or 'inf', got '" + s + "'");
  return static_cast<std::size_t>(v);
}

SmootherCaps parse_caps(const std::string& text) {
  const auto parts = jmls::detail::split(text, ',');
  if (parts.size() < 2 || parts.size() > 3) throw UsageError("--caps expects F,B or F,B,S");
  SmootherCaps caps;
  caps.forward = parse_cap(parts[0]);
  caps.backward = parse_cap(parts[1]);
  if (parts.size() == 3) {
    const std::size_t s = parse_cap(parts[2]);
    if (s != kUnbounded) caps.smoothed = s;
  }
  return caps;
}

std::string cap_text(std::size_t c) { return c == kUnbounded ? "inf" : std::to_string(c); }

struct ModelSource {
  std::string model_path;
  std::string preset;

  void add_options(CLI::App* app) {
    auto* m = app->add_option("--model", model_path, "model document (JSON)")->check(CLI::ExistingFile);
    auto* p = app->add_option("--preset", preset, "built-in model")
                  ->check(CLI::IsMember({"example1", "example2", "example3"}));
    m->excludes(p);
  }

  Preset load() const {
    if (!preset.empty()) return preset_by_name(preset);
    if (model_path.empty()) throw UsageError("one of --model or --preset is required");
    auto doc = read_model(model_path);
    Preset p;
    p.name = model_path;
    p.model = std::move(doc.model);
    p.prior = std::move(doc.prior);
    p.N = 0;
    return p;
  }
};

struct InputOptions {
  std::string kind;
  double mean = 0.0, stddev = 1.0, value = 0.0, amplitude = 1.0, rate = 1.0;

  void add_options(CLI::App* app) {
    app->add_option("--input", kind, "input generator")
        ->check(CLI::IsMember({"gaussian-iid", "constant", "sinusoid"}));
    app->add_option("--input-mean", mean, "gaussian-iid mean");
    app->add_option("--input-std", stddev, "gaussian-iid standard deviation");
    app->add_option("--input-value", value, "constant input value");
    app->add_option("--amplitude", amplitude, "sinusoid amplitude");
    app->add_option("--rate", rate, "sinusoid angular rate per step");
  }

  InputSpec resolve(const InputSpec& fallback) const {
    if (kind.empty()) return fallback;
    InputSpec s;
    s.kind = input_kind_from_string(kind);
    s.mean = mean;
    s.stddev = stddev;
    s.value = value;
    s.amplitude = amplitude;
    s.rate = rate;
    return s;
  }
};

void validate_or_throw(const Preset& p) {
  if (const auto rep = validate_model(p.model); !rep.ok()) throw InvalidArgument("invalid model:\n" + rep.summary());
  if (const auto rep = validate_prior(p.model, p.prior); !rep.ok()) throw InvalidArgument("invalid prior:\n" + rep.summary());
}

void print_counts(std::ostream& os, const char* label, const std::vector<std::size_t>& counts) {
  os << label << '[';
  for (std::size_t i = 0; i < counts.size(); ++i) os << (i ? "," : "") << counts[i];
  os << ']';
}

// Prepends flags read from a JSON object to the subcommand's arguments so that
// later command-line flags override them.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::optional<std::string> config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file");
      config = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      break;
    }
  }
  if (!config) return args;
  std::ifstream is(*config);
  if (!is) throw UsageError("cannot read config '" + *config + "'");
  Json j;
  try {
    is >> j;
  } catch (const Json::exception& e) {
    throw UsageError("config '" + *config + "': " + e.what());
  }
  if (!j.is_object()) throw UsageError("config must be a JSON object of flag names to values");
  std::vector<std::string> flags;
  for (const auto& [key, value] : j.items()) {
    if (value.is_boolean()) {
      if (value.get<bool>()) flags.push_back("--" + key);
      continue;
    }
    flags.push_back("--" + key);
    flags.push_back(value.is_string() ? value.get<std::string>() : value.dump());
  }
  auto sub = std::find_if(args.begin(), args.end(), [](const std::string& a) { return a.rfind("-", 0) != 0; });
  if (sub == args.end()) throw UsageError("--config requires a subcommand");
  args.insert(sub + 1, flags.begin(), flags.end());
  return args;
}

int cmd_simulate(const ModelSource& src, const InputOptions& in, std::optional<std::size_t> N, std::uint64_t seed,
                 const std::string& out) {
  const Preset p = src.load();
  validate_or_throw(p);
  const std::size_t steps = N.value_or(p.N);
  if (steps == 0) throw UsageError("--N must be at least 1");
  const auto u = generate_inputs(in.resolve(p.input), steps, p.model.p(), seed);
  const Dataset data = simulate(p.model, p.prior, u, noise_seed(seed));
  if (out.empty()) {
    write_dataset(std::cout, data);
  } else {
    write_dataset(out, data);
    std::cout << "wrote " << data.size() << " rows to " << out << '\n';
  }
  return kExitOk;
}

struct SmoothOptions {
  std::string data_path;
  std::string caps = "inf,inf";
  std::string method = "two-filter";
  std::string out = "jmls_out";
  std::optional<std::size_t> N;
  std::uint64_t seed = 1;
  std::size_t grid = 0;
  unsigned threads = 1;
  RangeSpaceOptions range;
  bool dump_likelihoods = false;
};

int cmd_smooth(const ModelSource& src, const InputOptions& in, const SmoothOptions& o) {
  const Preset p = src.load();
  validate_or_throw(p);
  Dataset data;
  if (!o.data_path.empty()) {
    data = read_dataset(o.data_path);
  } else {
    const std::size_t steps = o.N.value_or(p.N);
    if (steps == 0) throw UsageError(o.N ? "--N must be at least 1" : "--data or --N is required for this model");
    data = simulate(p.model, p.prior, generate_inputs(in.resolve(p.input), steps, p.model.p(), o.seed),
                    noise_seed(o.seed));
  }
  if (data.u.empty() || data.u.front().size() != p.model.p() || data.y.front().size() != p.model.q()) {
    throw InvalidArgument("dataset columns do not match the model's input/output dimensions");
  }
  const SmootherCaps caps = parse_caps(o.caps);
  fs::create_directories(o.out);

  std::vector<SmoothedState> smoothed;
  Json summary;
  summary["method"] = o.method;
  summary["N"] = data.size();
  if (o.method == "two-filter") {
    SmootherOptions opts;
    opts.range = o.range;
    opts.threads = o.threads;
    const SmootherResult res = run_smoother(p.model, p.prior, data, caps, opts);
    smoothed = res.smoothed;
    summary["caps"] = {cap_text(caps.forward), cap_text(caps.backward),
                       caps.smoothed ? cap_text(*caps.smoothed) : std::string("inf")};
    summary["seconds"] = {{"forward", res.forward_seconds},
                          {"backward", res.backward_seconds},
                          {"combine", res.combine_seconds}};
    Json steps = Json::array();
    for (std::size_t k = 0; k < data.size(); ++k) {
      steps.push_back({{"k", k + 1},
                       {"forward_before", res.forward[k].counts_before_reduction},
                       {"forward_after", res.forward[k].filtered.counts()},
                       {"backward_before", res.backward[k].counts_before_reduction},
                       {"backward_after", res.backward[k].propagated.counts()},
                       {"smoothed", res.smoothed[k].mixture.counts()}});
    }
    summary["components"] = std::move(steps);
    if (o.dump_likelihoods) write_likelihoods((fs::path(o.out) / "likelihoods.csv").string(), res.backward);
    std::cout << "forward " << res.forward_seconds << " s, backward " << res.backward_seconds << " s, combine "
              << res.combine_seconds << " s\n";
  } else if (o.method == "enumerate") {
    smoothed = enumerate_smoother(p.model, p.prior, data).smoothed;
  } else {
    if (p.model.m() != 1 || p.prior.component_count() != 1) throw UsageError("--method rts needs one mode and one prior component");
    const auto& c = p.prior.modes[0].front();
    const RtsResult rts = rts_smoother(p.model.modes[0], c.mean, c.cov, data, p.model.timing);
    for (std::size_t k = 0; k < data.size(); ++k) {
      SmoothedState st;
      st.k = k;
      st.mixture = GaussianMixture(1);
      st.mixture.modes[0].push_back({0.0, rts.smoothed_mean[k], rts.smoothed_cov[k]});
      st.mode_marginal = {1.0};
      smoothed.push_back(std::move(st));
    }
  }

  write_mixtures((fs::path(o.out) / "mixtures.csv").string(), smoothed_mixtures(smoothed));
  write_mode_marginals((fs::path(o.out) / "modes.csv").string(), smoothed);
  if (o.grid > 0) {
    for (const auto& st : smoothed) {
      const auto grid = evaluate_grid(st.mixture, default_axes(st.mixture, o.grid));
      write_grid((fs::path(o.out) / ("grid_" + std::to_string(st.k + 1) + ".csv")).string(), grid);
    }
  }
  {
    std::ofstream os(fs::path(o.out) / "summary.json");
    os << summary.dump(2) << '\n';
  }
  for (const auto& st : smoothed) {
    std::cout << "k=" << st.k + 1 << ' ';
    print_counts(std::cout, "components=", st.mixture.counts());
    std::cout << " p(z)=";
    for (std::size_t z = 0; z < st.mode_marginal.size(); ++z) std::cout << (z ? "," : "") << st.mode_marginal[z];
    std::cout << '\n';
  }
  std::cout << "outputs in " << o.out << '\n';
  return kExitOk;
}

struct CompareOptions {
  std::string reference;
  std::string candidate;
  std::size_t grid = 2001;
  double half_width = 8.0;
  double floor = 1e-300;
  std::string out;
};

int cmd_compare(const CompareOptions& o) {
  const MixtureSeries a = read_mixtures(o.reference);
  const MixtureSeries b = read_mixtures(o.candidate);
  if (a.steps.size() != b.steps.size()) throw InvalidArgument("sources have different N");
  if (a.n != b.n || a.m != b.m) throw InvalidArgument("sources have different state dimension or mode count");
  if (a.n > 2) throw InvalidArgument("compare supports state dimension ≤ 2");
  const std::size_t points = a.n == 2 && o.grid == 2001 ? 501 : o.grid;

  std::ostringstream csv;
  jmls::detail::set_precision(csv);
  csv << "k,kl,l1,max_abs\n";
  double sum_kl = 0.0;
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    const auto axes = default_axes(a.steps[k], points, o.half_width);
    const DensityGrid ga = evaluate_grid(a.steps[k], axes);
    const DensityGrid gb = evaluate_grid(b.steps[k], axes);
    const double kl = grid_kl(ga, gb, o.floor);
    sum_kl += kl;
    csv << k + 1 << ',' << kl << ',' << grid_l1(ga, gb) << ',' << grid_max_abs_diff(ga, gb) << '\n';
  }
  const double mean_kl = sum_kl / static_cast<double>(a.steps.size());
  if (o.out.empty()) {
    std::cout << csv.str();
  } else {
    std::ofstream os(o.out);
    if (!os) throw FormatError("cannot write '" + o.out + "'");
    os << csv.str();
  }
  std::cout << "mean KL over " << a.steps.size() << " steps: " << mean_kl << '\n';
  return kExitOk;
}

int cmd_paper(const std::string& id, std::uint64_t seed, std::size_t datasets) {
  std::vector<Report> reports;
  if (id == "entropy-counterexample" || id == "all") reports.push_back(reproduce_entropy_counterexample());
  if (id == "example1" || id == "all") reports.push_back(reproduce_example1(seed));
  if (id == "example2" || id == "all") reports.push_back(reproduce_example2(datasets, seed));
  if (id == "example3" || id == "all") reports.push_back(reproduce_example3(seed));
  bool ok = true;
  for (const auto& r : reports) {
    std::cout << r;
    ok = ok && r.passed();
  }
  std::cout << (ok ? "ALL PASS" : "MISMATCH") << '\n';
  return ok ? kExitOk : kExitMismatch;
}

int cmd_validate(const ModelSource& src) {
  const Preset p = src.load();
  const auto model_rep = validate_model(p.model);
  const auto prior_rep = validate_prior(p.model, p.prior);
  std::cout << "model: " << model_rep.summary() << (model_rep.ok() ? "\n" : "");
  std::cout << "prior: " << prior_rep.summary() << (prior_rep.ok() ? "\n" : "");
  return model_rep.ok() && prior_rep.ok() ? kExitOk : kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Jump Markov linear system smoother"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_unused;
  app.add_option("--config", config_unused, "JSON object of flag names to values; command-line flags override it");

  ModelSource sim_src, smooth_src, val_src;
  InputOptions sim_in, smooth_in;
  std::optional<std::size_t> sim_N;
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "simulate a dataset (CSV with truth columns)");
  sim_src.add_options(sim);
  sim_in.add_options(sim);
  sim->add_option("--N", sim_N, "number of steps (default: preset length)");
  sim->add_option("--seed", sim_seed, "random seed");
  sim->add_option("--out", sim_out, "output CSV path (default: stdout)");

  SmoothOptions so;
  auto* smooth = app.add_subcommand("smooth", "run a smoother and write mixtures, mode marginals and grids");
  smooth_src.add_options(smooth);
  smooth_in.add_options(smooth);
  smooth->add_option("--data", so.data_path, "dataset CSV (default: simulate with --seed)")->check(CLI::ExistingFile);
  smooth->add_option("--N", so.N, "steps to simulate when no dataset is given");
  smooth->add_option("--seed", so.seed, "random seed for simulation");
  smooth->add_option("--caps", so.caps, "component caps F,B[,S]; 'inf' for no reduction");
  smooth->add_option("--method", so.method, "smoother")->check(CLI::IsMember({"two-filter", "enumerate", "rts"}));
  smooth->add_option("--out", so.out, "output directory");
  smooth->add_option("--grid", so.grid, "points per axis for density grid CSVs (0: none)");
  smooth->add_option("--threads", so.threads, "worker threads for the combination step")->check(CLI::PositiveNumber);
  smooth->add_option("--rank-tol", so.range.rank_tol, "relative eigenvalue threshold for likelihood rank");
  smooth->add_option("--angle-tol", so.range.angle_tol, "principal-angle threshold for range-space grouping");
  smooth->add_option("--range-tol", so.range.range_tol, "relative threshold for s lying in the range of L");
  smooth->add_flag("--dump-likelihoods", so.dump_likelihoods, "write backward likelihood components");

  CompareOptions co;
  auto* compare = app.add_subcommand("compare", "compare two mixture-parameter files on density grids");
  compare->add_option("reference", co.reference, "reference mixtures CSV")->required()->check(CLI::ExistingFile);
  compare->add_option("candidate", co.candidate, "candidate mixtures CSV")->required()->check(CLI::ExistingFile);
  compare->add_option("--grid", co.grid, "points per axis (2-D default 501)")->check(CLI::Range(3, 100000));
  compare->add_option("--half-width", co.half_width, "grid half-width in reference standard deviations");
  compare->add_option("--floor", co.floor, "density floor inside the KL logarithm")->check(CLI::PositiveNumber);
  compare->add_option("--out", co.out, "metric CSV path (default: stdout)");

  std::string paper_id;
  std::uint64_t paper_seed = 1;
  std::size_t paper_datasets = 50;
  auto* paper = app.add_subcommand("paper", "reproduce a worked example and check it");
  paper->add_option("example", paper_id, "example id")
      ->required()
      ->check(CLI::IsMember({"entropy-counterexample", "example1", "example2", "example3", "all"}));
  paper->add_option("--seed", paper_seed, "seed (first seed for example2)");
  paper->add_option("--datasets", paper_datasets, "example2 dataset count")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "check a model document");
  val_src.add_options(validate);

  try {
    auto args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    app.parse(args);
    if (sim->parsed()) return cmd_simulate(sim_src, sim_in, sim_N, sim_seed, sim_out);
    if (smooth->parsed()) return cmd_smooth(smooth_src, smooth_in, so);
    if (compare->parsed()) return cmd_compare(co);
    if (paper->parsed()) return cmd_paper(paper_id, paper_seed, paper_datasets);
    if (validate->parsed()) return cmd_validate(val_src);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
