// ipgla: experiment runner for the inexact proximal Langevin sampler.
//
//   ipgla <experiment> [--config FILE] [--seed N] [--samples N] [--out DIR] [--set key=value ...]
//
// Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ipgla/config.hpp"
#include "ipgla/experiments.hpp"
#include "ipgla/io.hpp"
#include "ipgla/prox_check.hpp"

#ifndef IPGLA_VERSION
#define IPGLA_VERSION "dev"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace ipgla;
using namespace ipgla::experiments;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string num(double v) { return detail::format_double(v); }

class Csv {
 public:
  Csv(const fs::path& path, const std::vector<std::string>& header) : os_(path) {
    if (!os_) throw IoError("cannot write " + path.string());
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << "\n";
  }

 private:
  std::ofstream os_;
};

struct InputImage {
  std::string path;
  std::size_t size = 64;
};

InputImage read_input(ConfigReader& r) {
  return {r.get_string("image", "phantom"), r.get_size("size", 64, 8, 4096)};
}

ImageBuffer load_input(const InputImage& in) {
  if (in.path == "phantom") return make_phantom(in.size);
  return read_image(in.path);
}

ConvolutionKernel read_kernel(ConfigReader& r, const std::string& type, std::size_t size, double stddev) {
  const std::string t = r.get_choice("blur", type, {"gaussian", "uniform"});
  const std::size_t n = r.get_size("blur_size", size, 1, 63);
  const double sd = r.get_double("blur_std", stddev, 1e-3, 100.0);
  if (n % 2 == 0) throw ConfigError("blur_size must be odd");
  return t == "gaussian" ? make_gaussian_blur(n, sd) : make_uniform_blur(n);
}

/// Output directory plus the manifest being assembled.
struct Run {
  fs::path dir;
  json manifest;
  std::vector<std::string> files;

  fs::path file(const std::string& name) {
    files.push_back(name);
    return dir / name;
  }

  void image(const std::string& stem, const ImageBuffer& img, bool rescale = false) {
    write_png(file(stem + ".png").string(), rescale ? normalize_for_display(img) : img);
    write_raw(file(stem + ".raw").string(), img);
  }

  /// log10 of a std map, rescaled for display; the raw dump keeps the std values.
  void log_std_image(const std::string& stem, const ImageBuffer& stddev) {
    ImageBuffer lg(stddev.shape);
    for (std::size_t i = 0; i < lg.data.size(); ++i) lg.data[i] = std::log10(std::max(stddev.data[i], 1e-12));
    write_png(file(stem + ".png").string(), normalize_for_display(lg));
    write_raw(file(stem + ".raw").string(), stddev);
  }
};

json image_run_json(const ImageRun& r) {
  json j;
  j["eps_tilde"] = r.eps_tilde;
  j["psnr_db"] = r.psnr;
  j["seed"] = r.seed;
  if (r.c0) j["c0"] = *r.c0;
  j["inner_iterations_total"] = r.inner_total;
  j["inner_iterations_mean"] = r.mean_inner;
  j["mean_step"] = r.mean_gamma;
  j["seconds"] = r.seconds;
  j["warnings"] = r.warnings;
  return j;
}

std::string tag(std::size_t i) { return "run" + std::to_string(i); }

// ---------------------------------------------------------------------------

void cmd_toy1d(ConfigReader& r, Run& run) {
  Toy1dParams p;
  p.alpha = r.get_double("alpha", p.alpha, 1e-12);
  p.sigma = r.get_double("sigma", p.sigma, 1e-12);
  p.y = r.get_double("y", p.y);
  p.gamma = r.get_double("gamma", p.gamma, 1e-12);
  p.eps = r.get_list("eps", p.eps, 0.0);
  p.betas = r.get_list("betas", p.betas, 1e-12);
  p.decay_c = r.get_double("decay_c", p.decay_c, 0.0);
  p.chains = r.get_size("chains", p.chains, 2);
  p.iterations = r.get_size("iterations", p.iterations, 1);
  p.mala_samples = r.get_size("mala_samples", p.mala_samples, 2);
  p.mala_burn_in = r.get_size("mala_burn_in", p.mala_burn_in);
  p.mala_gamma = r.get_double("mala_gamma", p.mala_gamma, 1e-12);
  p.seed = r.get_u64("seed", p.seed);
  p.threads = static_cast<unsigned>(r.get_size("threads", 0, 0, 1024));
  r.finish();
  if (p.gamma > p.sigma * p.sigma) throw ConfigError("gamma must not exceed sigma^2 = 1/L");

  const Toy1dResult res = run_toy1d(p);
  Csv csv(run.file("toy1d_w2.csv"), {"panel", "parameter", "k_iterations", "w2_sq", "bound_w2_sq"});
  for (const auto& c : res.curves)
    for (std::size_t i = 0; i < c.k.size(); ++i)
      csv.row({to_string(c.panel), num(c.parameter), std::to_string(c.k[i]), num(c.w2_sq[i]), num(c.bound[i])});
  run.manifest["seeds"] = {{"mala", res.mala_seed}, {"ensemble_base", res.ensemble_seed}};
  run.manifest["results"] = {{"W0_sq", res.bound_params.W0_sq},
                             {"Ctilde", res.bound_params.Ctilde},
                             {"lambda_F", res.bound_params.lambda_F},
                             {"L", res.bound_params.L},
                             {"mala_acceptance", res.mala_acceptance},
                             {"reference_mean", res.reference_mean},
                             {"reference_variance", res.reference_variance}};
  run.manifest["warnings"] = res.warnings;
}

void cmd_wavelet(ConfigReader& r, Run& run) {
  WaveletDeblurParams p;
  const InputImage in = read_input(r);
  p.kernel = read_kernel(r, "gaussian", 5, 1.0);
  p.sigma = r.get_double("sigma", p.sigma, 1e-12);
  p.mu = r.get_double("mu", p.mu, 1e-12);
  p.levels = r.get_int("levels", p.levels, 1, 12);
  p.dual_step_fraction = r.get_double("dual_step_fraction", p.dual_step_fraction, 1e-6, 1.0);
  p.eps_tilde = r.get_list("eps_tilde", p.eps_tilde, 0.0, 1.0);
  p.n_samples = r.get_size("n_samples", p.n_samples, 1);
  p.burn_in = r.get_size("burn_in", p.burn_in);
  p.seed = r.get_u64("seed", p.seed);
  p.threads = static_cast<unsigned>(r.get_size("threads", 0, 0, 1024));
  r.finish();
  p.image = load_input(in);

  const WaveletDeblurResult res = run_wavelet_deblur(p);
  run.image("truth", res.truth);
  run.image("observed", res.observed);
  Csv csv(run.file("psnr.csv"), {"file_tag", "eps_tilde", "psnr_db", "c0", "inner_iterations_mean",
                                 "inner_iterations_total", "seconds"});
  json runs = json::array();
  for (std::size_t i = 0; i < res.runs.size(); ++i) {
    const auto& x = res.runs[i];
    run.image("mmse_" + tag(i), x.mmse);
    run.log_std_image("logstd_" + tag(i), x.stddev);
    csv.row({tag(i), num(x.eps_tilde), num(x.psnr), x.c0 ? num(*x.c0) : "nan", num(x.mean_inner),
             std::to_string(x.inner_total), num(x.seconds)});
    runs.push_back(image_run_json(x));
  }
  run.manifest["seeds"] = {{"data", res.data_seed}};
  run.manifest["results"] = {{"step", res.gamma}, {"lipschitz", res.lipschitz}, {"lambda_F", res.lambda_F}, {"runs", runs}};
}

void cmd_tv_denoise(ConfigReader& r, Run& run) {
  TvDenoiseParams p;
  const InputImage in = read_input(r);
  p.sigma = r.get_double("sigma", p.sigma, 1e-12);
  p.mu = r.get_double("mu", p.mu, 1e-12);
  p.eps_tilde = r.get_list("eps_tilde", p.eps_tilde, 1e-300, 1.0);
  p.deltas = r.get_list("deltas", p.deltas, 0.0);
  p.reference_eps_tilde = r.get_double("reference_eps_tilde", p.reference_eps_tilde, 1e-300, 1.0);
  p.reference_samples = r.get_size("reference_samples", p.reference_samples, 1);
  p.n_samples = r.get_size("n_samples", p.n_samples, 1);
  p.burn_in = r.get_size("burn_in", p.burn_in);
  p.warm_start = r.get_bool("warm_start", p.warm_start);
  p.max_inner = r.get_int("max_inner", p.max_inner, 1, 100000000);
  p.seed = r.get_u64("seed", p.seed);
  p.threads = static_cast<unsigned>(r.get_size("threads", 0, 0, 1024));
  r.finish();
  p.image = load_input(in);

  const TvDenoiseResult res = run_tv_denoise(p);
  run.image("truth", res.truth);
  run.image("noisy", res.noisy);
  run.image("reference_mmse", res.reference.mmse);
  run.log_std_image("reference_logstd", res.reference.stddev);
  Csv runs_csv(run.file("runs.csv"), {"file_tag", "eps_tilde", "psnr_db", "inner_iterations_mean",
                                      "inner_iterations_total", "seconds"});
  // k_star_samples = -1 and inner_iterations_at_k_star = -1 mean "not reached within n_samples".
  Csv kstar_csv(run.file("k_star.csv"), {"eps_tilde", "delta", "k_star_samples", "inner_iterations_at_k_star"});
  json runs = json::array();
  for (std::size_t i = 0; i < res.runs.size(); ++i) {
    const auto& x = res.runs[i];
    run.image("mmse_" + tag(i), x.run.mmse);
    run.log_std_image("logstd_" + tag(i), x.run.stddev);
    runs_csv.row({tag(i), num(x.run.eps_tilde), num(x.run.psnr), num(x.run.mean_inner),
                  std::to_string(x.run.inner_total), num(x.run.seconds)});
    for (const auto& k : x.k_star)
      kstar_csv.row({num(x.run.eps_tilde), num(k.delta), k.k_star ? std::to_string(*k.k_star) : "-1",
                     k.inner_iterations ? std::to_string(*k.inner_iterations) : "-1"});
    runs.push_back(image_run_json(x.run));
  }
  {
    std::vector<std::string> header = {"sample"};
    for (const auto& x : res.runs) header.push_back("relative_error_eps_" + num(x.run.eps_tilde));
    Csv err(run.file("relative_error.csv"), header);
    const std::size_t n = res.runs.empty() ? 0 : res.runs.front().relative_errors.size();
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<std::string> cells = {std::to_string(k + 1)};
      for (const auto& x : res.runs) cells.push_back(num(x.relative_errors[k]));
      err.row(cells);
    }
  }
  run.manifest["seeds"] = {{"data", res.data_seed}, {"reference_chain", res.reference.seed}};
  run.manifest["results"] = {{"step", res.gamma}, {"reference", image_run_json(res.reference)}, {"runs", runs}};
}

void cmd_tv_deblur(ConfigReader& r, Run& run) {
  TvDeblurParams p;
  const InputImage in = read_input(r);
  p.kernel = read_kernel(r, "gaussian", 9, 1.5);
  p.sigma = r.get_double("sigma", p.sigma, 1e-12);
  p.mu = r.get_double("mu", p.mu, 1e-12);
  p.eps_tilde = r.get_list("eps_tilde", p.eps_tilde, 1e-300, 1.0);
  p.n_samples = r.get_size("n_samples", p.n_samples, 1);
  p.burn_in = r.get_size("burn_in", p.burn_in);
  p.map_iterations = r.get_int("map_iterations", p.map_iterations, 1, 1000000);
  p.seed = r.get_u64("seed", p.seed);
  p.threads = static_cast<unsigned>(r.get_size("threads", 0, 0, 1024));
  r.finish();
  p.image = load_input(in);

  const TvDeblurResult res = run_tv_deblur(p);
  run.image("truth", res.truth);
  run.image("observed", res.observed);
  run.image("map", res.map);
  Csv csv(run.file("runs.csv"), {"file_tag", "eps_tilde", "psnr_db", "inner_iterations_mean",
                                 "inner_iterations_total", "seconds"});
  json runs = json::array();
  for (std::size_t i = 0; i < res.runs.size(); ++i) {
    const auto& x = res.runs[i];
    run.image("mmse_" + tag(i), x.mmse);
    run.log_std_image("logstd_" + tag(i), x.stddev);
    csv.row({tag(i), num(x.eps_tilde), num(x.psnr), num(x.mean_inner), std::to_string(x.inner_total), num(x.seconds)});
    runs.push_back(image_run_json(x));
  }
  run.manifest["seeds"] = {{"data", res.data_seed}};
  run.manifest["results"] = {{"step", res.gamma}, {"map_psnr_db", res.map_psnr}, {"runs", runs}};
}

void cmd_poisson(ConfigReader& r, Run& run) {
  PoissonDeblurParams p;
  const InputImage in = read_input(r);
  p.kernel = read_kernel(r, "uniform", 5, 1.0);
  p.mean_intensity = r.get_double("mean_intensity", p.mean_intensity, 1e-12);
  p.background = r.get_double("background", p.background, 1e-12);
  p.mu = r.get_double("mu", p.mu, 1e-12);
  p.backtracking_max_factor = r.get_double("backtracking_max_factor", p.backtracking_max_factor, 1.0);
  p.n_samples = r.get_size("n_samples", p.n_samples, 2);
  p.acf_max_lag = r.get_size("acf_max_lag", p.acf_max_lag, 1);
  p.configs[0].burn_in = r.get_size("fixed_burn_in", p.configs[0].burn_in);
  const std::size_t bt_burn = r.get_size("backtracking_burn_in", p.configs[1].burn_in);
  p.configs[1].burn_in = p.configs[2].burn_in = bt_burn;
  const int small = r.get_int("inner_small", p.configs[1].inner_iterations, 1, 100000);
  const int large = r.get_int("inner_large", p.configs[2].inner_iterations, 1, 100000);
  p.configs[0].inner_iterations = p.configs[2].inner_iterations = large;
  p.configs[1].inner_iterations = small;
  p.configs[0].name = "fixed_step_" + std::to_string(large) + "_inner";
  p.configs[1].name = "backtracking_" + std::to_string(small) + "_inner";
  p.configs[2].name = "backtracking_" + std::to_string(large) + "_inner";
  p.seed = r.get_u64("seed", p.seed);
  p.threads = static_cast<unsigned>(r.get_size("threads", 0, 0, 1024));
  r.finish();
  p.image = load_input(in);
  for (std::size_t f : p.std_factors)
    if (p.image.height() % f || p.image.width() % f)
      throw ConfigError("image size must be divisible by " + std::to_string(f) + " for the std maps");

  const PoissonDeblurResult res = run_poisson_deblur(p);
  run.image("truth", res.truth);
  run.image("counts", res.counts, true);
  Csv csv(run.file("runs.csv"), {"config", "step_rule", "inner_iterations", "psnr_db", "mean_step", "sample_minimum",
                                 "inner_iterations_total", "seconds"});
  json runs = json::array();
  for (const auto& x : res.runs) {
    const std::string& name = x.spec.name;
    run.image("mmse_" + name, x.run.mmse);
    for (const auto& [f, m] : x.std_maps) run.log_std_image("logstd_x" + std::to_string(f) + "_" + name, m);
    csv.row({name, x.spec.backtracking ? "backtracking" : "fixed", std::to_string(x.spec.inner_iterations),
             num(x.run.psnr), num(x.run.mean_gamma), num(x.sample_minimum), std::to_string(x.run.inner_total),
             num(x.run.seconds)});
    json j = image_run_json(x.run);
    j.erase("eps_tilde");
    j["config"] = name;
    j["sample_minimum"] = x.sample_minimum;
    runs.push_back(j);
  }
  {
    std::vector<std::string> header = {"lag"};
    const char* ranks[] = {"slowest", "median", "fastest"};
    for (const auto& x : res.runs)
      for (const char* rk : ranks) header.push_back("acf_" + x.spec.name + "_" + rk);
    Csv acf(run.file("acf.csv"), header);
    std::size_t lags = 0;
    for (const auto& x : res.runs) lags = std::max(lags, x.acf[0].size());
    for (std::size_t l = 0; l < lags; ++l) {
      std::vector<std::string> cells = {std::to_string(l)};
      for (const auto& x : res.runs)
        for (int k = 0; k < 3; ++k) cells.push_back(l < x.acf[k].size() ? num(x.acf[k][l]) : "nan");
      acf.row(cells);
    }
  }
  {
    Csv modes(run.file("fourier_modes.csv"), {"rank", "u", "v", "ata_eigenvalue"});
    const char* ranks[] = {"slowest", "median", "fastest"};
    for (int k = 0; k < 3; ++k)
      modes.row({ranks[k], std::to_string(res.modes[k].u), std::to_string(res.modes[k].v), num(res.modes[k].eigenvalue)});
  }
  run.manifest["seeds"] = {{"data", res.data_seed}};
  run.manifest["results"] = {{"intensity_scale", res.scale}, {"lipschitz_estimate", res.lipschitz_estimate},
                             {"runs", runs}};
}

int cmd_prox_check(ConfigReader& r, Run& run) {
  ProxCheckParams p;
  p.abs_trials = r.get_size("abs_trials", p.abs_trials, 1);
  p.abs_grid = r.get_size("abs_grid", p.abs_grid, 2);
  p.tv_trials = r.get_size("tv_trials", p.tv_trials, 0);
  p.tv_size = r.get_size("tv_size", p.tv_size, 2, 1024);
  p.oracle_trials = r.get_size("oracle_trials", p.oracle_trials, 0);
  p.oracle_iterations = r.get_int("oracle_iterations", p.oracle_iterations, 1, 100000000);
  p.seed = r.get_u64("seed", p.seed);
  r.finish();

  const auto rows = run_prox_check(p);
  Csv csv(run.file("prox_check.csv"), {"check", "trials", "passed", "worst_violation"});
  bool ok = true;
  json results = json::array();
  for (const auto& row : rows) {
    csv.row({row.check, std::to_string(row.trials), std::to_string(row.passed), num(row.worst_violation)});
    std::printf("%-36s %s  %zu/%zu\n", row.check.c_str(), row.ok() ? "PASS" : "FAIL", row.passed, row.trials);
    results.push_back({{"check", row.check}, {"trials", row.trials}, {"passed", row.passed}});
    ok = ok && row.ok();
  }
  run.manifest["results"] = results;
  return ok ? 0 : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inexact proximal gradient Langevin sampling experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", IPGLA_VERSION);

  struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples;
    std::string out;
    std::vector<std::string> sets;
  };
  Options opt;

  struct Command {
    std::string name;
    std::string description;
    /// Config key that --samples sets.
    std::string samples_key;
  };
  const std::vector<Command> commands = {
      {"toy1d", "1D toy target: W2 distance of parallel chains to a MALA reference", "chains"},
      {"wavelet-deblur", "Wavelet l1 deblurring, exact vs inexact prox", "n_samples"},
      {"tv-denoise", "TV denoising: k*(delta) and inner-iteration cost per accuracy level", "n_samples"},
      {"tv-deblur", "TV deblurring with Gaussian blur: MAP, MMSE and std maps", "n_samples"},
      {"poisson-deblur", "TV deblurring from Poisson counts with fixed and backtracking steps", "n_samples"},
      {"prox-check", "Run the inexact prox oracle checks", "abs_trials"},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.description);
    sub->add_option("--config", opt.config, "flat key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "base seed (config key: seed)");
    sub->add_option("--samples", opt.samples, "sample count (config key: " + c.samples_key + ")");
    sub->add_option("--out", opt.out, "output directory (default: out/<experiment>)");
    sub->add_option("--set", opt.sets, "override a config key, key=value (repeatable)");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  std::size_t which = 0;
  while (!subs[which]->parsed()) ++which;
  const Command& cmd = commands[which];
  const auto t0 = std::chrono::steady_clock::now();

  try {
    KeyValueConfig cfg = opt.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(opt.config);
    for (const auto& s : opt.sets) cfg.set(s);
    if (opt.seed) cfg.set("seed", std::to_string(*opt.seed));
    if (opt.samples) cfg.set(cmd.samples_key, std::to_string(*opt.samples));
    ConfigReader reader(cfg);

    Run run;
    run.dir = opt.out.empty() ? fs::path("out") / cmd.name : fs::path(opt.out);
    fs::create_directories(run.dir);
    run.manifest["experiment"] = cmd.name;
    run.manifest["version"] = IPGLA_VERSION;
    std::vector<std::string> args(argv, argv + argc);
    run.manifest["command_line"] = args;

    int code = 0;
    if (cmd.name == "toy1d") {
      cmd_toy1d(reader, run);
    } else if (cmd.name == "wavelet-deblur") {
      cmd_wavelet(reader, run);
    } else if (cmd.name == "tv-denoise") {
      cmd_tv_denoise(reader, run);
    } else if (cmd.name == "tv-deblur") {
      cmd_tv_deblur(reader, run);
    } else if (cmd.name == "poisson-deblur") {
      cmd_poisson(reader, run);
    } else {
      code = cmd_prox_check(reader, run);
    }

    {
      std::ofstream os(run.file("config.resolved"));
      os << "# " << cmd.name << " " << IPGLA_VERSION << "\n" << reader.resolved_text();
    }
    json config = json::object();
    for (const auto& [k, v] : reader.resolved()) config[k] = v;
    run.manifest["config"] = config;
    run.manifest["wall_clock_seconds"] = seconds_since(t0);
    run.files.push_back("manifest.json");
    run.manifest["files"] = run.files;
    std::ofstream(run.dir / "manifest.json") << run.manifest.dump(2) << "\n";
    std::cout << "wrote " << run.files.size() << " files to " << run.dir.string() << "\n";
    return code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "input/output error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid parameter: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DomainError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
