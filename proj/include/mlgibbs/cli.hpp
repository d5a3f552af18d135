#pragma once

#include <openssl/evp.h>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mlgibbs/bounds.hpp"
#include "mlgibbs/config.hpp"
#include "mlgibbs/dataset.hpp"
#include "mlgibbs/mnist.hpp"
#include "mlgibbs/mt.hpp"
#include "mlgibbs/net.hpp"
#include "mlgibbs/sampler.hpp"
#include "mlgibbs/verify.hpp"

namespace mlgibbs {

// set by the SIGINT handler; train loops flush partial traces and mark the
// run record interrupted when they see it
inline std::atomic<bool> g_stop_requested{false};

struct RunInterrupted : Error {
  using Error::Error;
};

// git-style content hash: SHA-1 over "blob <size>\0<content>"
inline std::string git_blob_sha1(std::string_view content) {
  std::string payload = "blob " + std::to_string(content.size());
  payload.push_back('\0');
  payload.append(content);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(payload.data(), payload.size(), digest, &len, EVP_sha1(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

enum class DatasetSource { kSynthetic, kMnist };

// Everything a train run needs, parsed from the flat key-value config.
struct ExperimentConfig {
  DatasetSource source = DatasetSource::kSynthetic;
  std::string mnist_dir;
  std::size_t subsample = 0;  // 0 keeps the full training set
  std::size_t synth_count = 100;
  std::uint64_t synth_seed = 0;
  bool synth_teacher = true;
  double synth_input_scale = 1.0;

  std::vector<std::size_t> dims;
  OutputActivation output = OutputActivation::kSoftmax;
  std::vector<double> alphas;
  double input_radius = 1.0;

  std::vector<double> temps;
  std::size_t outer_iters = 1;
  std::size_t inner_iters = 1;
  std::vector<double> scales;
  std::size_t thin = 100;
  std::uint64_t seed = 0;
  double gibbs_gamma = 1.0;
  std::size_t test_eval_every = 100;
  std::string out_dir = "run_out";

  static ExperimentConfig from_kv(const KeyValueFile& kv) {
    ExperimentConfig cfg;
    if (kv.get_uint("schema_version") != 1) throw ConfigError("unsupported schema_version");
    const std::string source = kv.get_string("dataset.source");
    if (source == "mnist") {
      cfg.source = DatasetSource::kMnist;
      cfg.mnist_dir = kv.get_string("dataset.mnist_dir");
      cfg.input_radius = 28.0;  // pixels in [0,1] cap the norm at sqrt(784)
      if (kv.has("net.input_radius") && kv.get_double("net.input_radius") != 28.0)
        throw ConfigError("net.input_radius is fixed at 28 for mnist data");
    } else if (source == "synthetic") {
      cfg.source = DatasetSource::kSynthetic;
      cfg.synth_count = kv.get_uint("dataset.synth.count");
      cfg.synth_seed = kv.get_uint("dataset.synth.seed", 0);
      const std::string labels = kv.get_string("dataset.synth.labels", "teacher");
      if (labels != "teacher" && labels != "random")
        throw ConfigError("dataset.synth.labels must be teacher or random");
      cfg.synth_teacher = labels == "teacher";
      cfg.synth_input_scale = kv.get_double("dataset.synth.input_scale", 1.0);
      cfg.input_radius = kv.get_double("net.input_radius");
    } else {
      throw ConfigError("dataset.source must be mnist or synthetic");
    }
    cfg.subsample = kv.get_uint("dataset.subsample", 0);

    cfg.dims = kv.get_sizes("net.dims");
    if (cfg.dims.size() < 3) throw ConfigError("net.dims needs at least three entries");
    const std::string output = kv.get_string("net.output", "softmax");
    if (output == "softmax")
      cfg.output = OutputActivation::kSoftmax;
    else if (output == "identity")
      cfg.output = OutputActivation::kIdentity;
    else
      throw ConfigError("net.output must be softmax or identity");
    cfg.alphas = kv.get_doubles("net.alpha");
    const std::size_t depth = cfg.dims.size() - 1;
    if (cfg.alphas.size() == 1) cfg.alphas.assign(depth, cfg.alphas[0]);
    if (cfg.alphas.size() != depth) throw ConfigError("net.alpha needs one entry per layer");

    cfg.temps = kv.get_doubles("sampler.temps");
    cfg.outer_iters = kv.get_uint("sampler.outer_iters");
    cfg.inner_iters = kv.get_uint("sampler.inner_iters", 1);
    cfg.scales = kv.get_doubles("sampler.scales");
    if (cfg.scales.size() == 1) cfg.scales.assign(depth, cfg.scales[0]);
    cfg.thin = kv.get_uint("sampler.thin", 100);
    cfg.seed = kv.get_uint("sampler.seed", 0);
    cfg.gibbs_gamma = kv.get_double("sampler.gamma", 1.0);
    cfg.test_eval_every = kv.get_uint("run.test_eval_every", 100);
    if (cfg.test_eval_every < 1) throw ConfigError("run.test_eval_every must be >= 1");
    cfg.out_dir = kv.get_string("run.out_dir", "run_out");
    return cfg;
  }

  KeyValueFile to_kv() const {
    KeyValueFile kv;
    kv.set("schema_version", "1");
    kv.set("dataset.source", source == DatasetSource::kMnist ? "mnist" : "synthetic");
    if (source == DatasetSource::kMnist) {
      kv.set("dataset.mnist_dir", mnist_dir);
    } else {
      kv.set("dataset.synth.count", std::to_string(synth_count));
      kv.set("dataset.synth.seed", std::to_string(synth_seed));
      kv.set("dataset.synth.labels", synth_teacher ? "teacher" : "random");
      kv.set("dataset.synth.input_scale", format_double(synth_input_scale));
      kv.set("net.input_radius", format_double(input_radius));
    }
    kv.set("dataset.subsample", std::to_string(subsample));
    std::string dims_text;
    for (std::size_t d : dims) dims_text += (dims_text.empty() ? "" : " ") + std::to_string(d);
    kv.set("net.dims", dims_text);
    kv.set("net.output", output == OutputActivation::kSoftmax ? "softmax" : "identity");
    kv.set("net.alpha", join_doubles(alphas));
    kv.set("sampler.temps", join_doubles(temps));
    kv.set("sampler.outer_iters", std::to_string(outer_iters));
    kv.set("sampler.inner_iters", std::to_string(inner_iters));
    kv.set("sampler.scales", join_doubles(scales));
    kv.set("sampler.thin", std::to_string(thin));
    kv.set("sampler.seed", std::to_string(seed));
    kv.set("sampler.gamma", format_double(gibbs_gamma));
    kv.set("run.test_eval_every", std::to_string(test_eval_every));
    kv.set("run.out_dir", out_dir);
    return kv;
  }

  NetSpec net_spec() const {
    std::vector<LayerSpec> layers;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k)
      layers.emplace_back(identity_pattern(dims[k + 1], dims[k]), alphas[k]);
    return NetSpec(std::move(layers), output, input_radius);
  }

 private:
  static std::string join_doubles(const std::vector<double>& v) {
    std::string out;
    for (double x : v) out += (out.empty() ? "" : " ") + format_double(x);
    return out;
  }
};

struct LoadedData {
  Dataset train;
  std::optional<Dataset> test;
};

inline LoadedData load_experiment_data(const ExperimentConfig& cfg, const NetSpec& spec) {
  LoadedData out;
  if (cfg.source == DatasetSource::kMnist) {
    MnistData mnist = load_mnist(cfg.mnist_dir);
    out.train = std::move(mnist.train);
    out.test = std::move(mnist.test);
  } else {
    NetParams teacher = NetParams::at_references(spec);
    out.train = synth_dataset(spec, cfg.synth_count, cfg.synth_seed,
                              cfg.synth_teacher ? SynthLabels::kTeacher : SynthLabels::kRandom,
                              &teacher, cfg.synth_input_scale);
  }
  if (cfg.subsample > 0 && cfg.subsample < out.train.size())
    out.train.examples.resize(cfg.subsample);
  validate_dataset(out.train);
  return out;
}

// binary weights snapshot: "MLGW", layer count, then rows/cols + doubles
inline void save_weights(const std::string& path, const NetParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out.write("MLGW", 4);
  const auto layers = static_cast<std::uint32_t>(params.weights.size());
  out.write(reinterpret_cast<const char*>(&layers), 4);
  for (const auto& w : params.weights) {
    const auto rows = static_cast<std::uint32_t>(w.rows());
    const auto cols = static_cast<std::uint32_t>(w.cols());
    out.write(reinterpret_cast<const char*>(&rows), 4);
    out.write(reinterpret_cast<const char*>(&cols), 4);
    out.write(reinterpret_cast<const char*>(w.data()),
              static_cast<std::streamsize>(sizeof(double)) * w.size());
  }
}

inline NetParams load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string_view(magic, 4) != "MLGW") throw FormatError("weights magic mismatch");
  std::uint32_t layers = 0;
  in.read(reinterpret_cast<char*>(&layers), 4);
  NetParams params;
  for (std::uint32_t k = 0; k < layers; ++k) {
    std::uint32_t rows = 0, cols = 0;
    in.read(reinterpret_cast<char*>(&rows), 4);
    in.read(reinterpret_cast<char*>(&cols), 4);
    Eigen::MatrixXd w(rows, cols);
    in.read(reinterpret_cast<char*>(w.data()),
            static_cast<std::streamsize>(sizeof(double)) * w.size());
    if (!in) throw FormatError("weights file truncated");
    params.weights.push_back(std::move(w));
  }
  return params;
}

namespace cli_detail {

struct TraceRow {
  std::size_t iter;
  double train_risk;
  double test_risk;
  double accept_outer;
  double accept_inner;
};

inline void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << "iter,train_risk,test_risk,accept_outer,accept_inner\n";
  for (const auto& r : rows)
    out << r.iter << ',' << format_double(r.train_risk) << ',' << format_double(r.test_risk)
        << ',' << format_double(r.accept_outer) << ',' << format_double(r.accept_inner) << '\n';
}

}  // namespace cli_detail

// Runs the multilevel trainer (or the Gibbs baseline) and persists the risk
// trace, the final weights, the effective config echo, and the run record.
inline int cmd_train(const ExperimentConfig& cfg, bool gibbs_baseline, std::ostream& log) {
  namespace fs = std::filesystem;
  const auto started = std::chrono::steady_clock::now();
  NetSpec spec = cfg.net_spec();
  if (!gibbs_baseline && cfg.temps.size() != 2)
    throw ConfigError("sampler.temps needs two entries for multilevel training");
  LoadedData data = load_experiment_data(cfg, spec);
  log << "loaded " << data.train.size() << " training examples";
  if (data.test) log << ", " << data.test->size() << " test examples";
  log << "\n";

  fs::create_directories(cfg.out_dir);
  const std::string config_echo = cfg.to_kv().serialize();
  {
    std::ofstream echo(cfg.out_dir + "/config_echo.cfg", std::ios::binary);
    echo << config_echo;
  }

  std::optional<BatchEvaluator> test_eval;
  if (data.test) test_eval.emplace(spec, *data.test);

  SamplerConfig sampler_cfg{TemperatureVector(cfg.temps), cfg.outer_iters, cfg.inner_iters,
                            cfg.scales, cfg.seed, NetParams::at_references(spec), cfg.thin};
  std::vector<LayerPrior> priors;
  for (const auto& layer : spec.layers) priors.push_back(flat_ball_prior(layer));

  std::vector<cli_detail::TraceRow> rows;
  rows.reserve(cfg.outer_iters);
  double last_test_risk = -1.0;  // -1 marks "not evaluated yet"
  IterationHook hook = [&](const IterationUpdate& u) {
    if ((u.iteration - 1) % cfg.test_eval_every == 0) {
      if (test_eval) last_test_risk = test_eval->risk(spec, u.params);
      log << "iter " << u.iteration << ": train_risk " << format_double(u.train_risk);
      if (test_eval) log << ", test_risk " << format_double(last_test_risk);
      log << '\n';
    }
    const double outer_rate = u.iteration > 1 ? static_cast<double>(u.outer_accepted) /
                                                    static_cast<double>(u.iteration - 1)
                                              : 0.0;
    rows.push_back({u.iteration, u.train_risk, last_test_risk, outer_rate, u.inner_accept_rate});
    if (g_stop_requested.load()) throw RunInterrupted("interrupted");
  };

  ChainTrace trace;
  bool interrupted = false;
  try {
    if (gibbs_baseline)
      trace = gibbs_sampler(cfg.gibbs_gamma, priors, data.train, spec, sampler_cfg, hook);
    else
      trace = multilevel_metropolis(sampler_cfg, data.train, spec, priors, hook);
  } catch (const RunInterrupted&) {
    interrupted = true;
  }

  const std::string trace_path = cfg.out_dir + "/risk_trace.csv";
  cli_detail::write_trace_csv(trace_path, rows);

  KeyValueFile record;
  record.set("status", interrupted ? "interrupted" : "complete");
  record.set("algorithm", gibbs_baseline ? "gibbs" : "multilevel");
  record.set("config_sha1", git_blob_sha1(config_echo));
  record.set("risk_trace", trace_path);
  record.set("seed", std::to_string(cfg.seed));
  if (!interrupted) {
    save_weights(cfg.out_dir + "/final_weights.bin", trace.final_params);
    record.set("final_weights", cfg.out_dir + "/final_weights.bin");
    record.set("accept_outer", format_double(trace.outer.rate()));
    record.set("accept_inner", format_double(trace.accept_inner));
    BatchEvaluator train_eval(spec, data.train);
    record.set("final_train_risk", format_double(train_eval.risk(spec, trace.final_params)));
    record.set("final_train_error_rate",
               format_double(train_eval.misclassification(spec, trace.final_params)));
    if (test_eval) {
      record.set("final_test_risk", format_double(test_eval->risk(spec, trace.final_params)));
      record.set("final_test_error_rate",
                 format_double(test_eval->misclassification(spec, trace.final_params)));
    }
  }
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started);
  record.set("wall_seconds", format_double(elapsed.count()));
  {
    std::ofstream rec(cfg.out_dir + "/run_record.txt", std::ios::binary);
    rec << record.serialize();
  }
  log << (interrupted ? "interrupted; partial trace flushed\n" : "run complete\n");
  return interrupted ? 1 : 0;
}

// Solves a problem file (priors + coefficients, optional risk tilt), prints
// the joint, objective and residue, and cross-checks the grid oracle at
// desk scale.
inline int cmd_mt_demo(const std::string& path, std::ostream& out) {
  KeyValueFile kv = KeyValueFile::parse_file(path);
  if (kv.get_uint("schema_version") != 1) throw ConfigError("unsupported schema_version");
  const auto axes = kv.get_sizes("axes");
  const auto coeffs = kv.get_doubles("coeffs");
  if (coeffs.size() != axes.size()) throw ConfigError("coeffs must have one entry per axis");
  std::vector<FiniteJoint> priors;
  for (std::size_t i = 1; i <= axes.size(); ++i) {
    std::vector<std::size_t> sizes(axes.begin(), axes.begin() + static_cast<std::ptrdiff_t>(i));
    priors.emplace_back(sizes, kv.get_doubles("prior." + std::to_string(i)));
  }
  TemperatureVector temps(coeffs);
  MtProblem problem = kv.has("risk")
                          ? build_twisted_problem(std::move(priors), temps, kv.get_doubles("risk"))
                          : MtProblem(std::move(priors), temps);

  auto sol = mt_solve(problem);
  out << "joint =";
  for (std::size_t c = 0; c < sol.joint.cell_count(); ++c) out << ' ' << format_double(sol.joint[c]);
  out << "\nobjective = " << format_double(sol.objective);
  out << "\nrenyi_residue = " << format_double(sol.renyi_residue) << '\n';
  if (problem.priors.back().cell_count() <= 16) {
    auto grid = brute_force_minimize(problem, 200);
    out << "grid_objective = " << format_double(grid.objective) << '\n';
    out << "grid_gap = " << format_double(grid.objective - sol.objective) << '\n';
  }
  return 0;
}

// Evaluates every bound whose inputs the file supplies and writes one
// report; unknown combinations simply stay absent.
inline int cmd_bounds(const std::string& path, const std::string& out_path, std::ostream& log) {
  KeyValueFile kv = KeyValueFile::parse_file(path);
  if (kv.get_uint("schema_version") != 1) throw ConfigError("unsupported schema_version");
  BoundInputs in;
  in.n = kv.get_uint("n");
  in.lipschitz = kv.get_double("L");
  in.product_norm = kv.get_double("M");
  in.input_radius = kv.get_double("R");
  in.betas = kv.get_doubles("betas");
  if (kv.has("gammas")) in.gammas = kv.get_doubles("gammas");
  if (kv.has("mi")) in.mi_terms = kv.get_doubles("mi");
  if (kv.has("kl")) in.kl_terms = kv.get_doubles("kl");

  KeyValueFile report;
  report.set("inputs_sha1", git_blob_sha1(kv.serialize()));
  report.set("n", std::to_string(in.n));
  report.set("C", format_double(in.chain_coeff()));
  if (!in.mi_terms.empty())
    report.set("generalization_bound", format_double(chained_generalization_bound(in)));
  if (!in.kl_terms.empty() && !in.gammas.empty()) {
    auto excess = excess_risk_bound(in);
    report.set("excess_bound", format_double(excess.bound));
    std::string stars;
    for (double g : excess.gamma_star)
      stars += (stars.empty() ? "" : " ") + format_double(g);
    report.set("gamma_star", stars);
    report.set("excess_bound_optimized", format_double(excess.optimized));
    if (kv.has("epsilon"))
      report.set("high_prob_lower_bound",
                 format_double(high_prob_bound(in, kv.get_double("epsilon"))));
  }
  if (kv.has("neighborhood_kl") && kv.has("epsilon") && !in.gammas.empty())
    report.set("neighborhood_excess",
               format_double(neighborhood_excess(in, kv.get_double("epsilon"),
                                                 kv.get_doubles("neighborhood_kl"))));
  if (kv.has("gibbs.sigma")) {
    auto g = gibbs_excess(kv.get_double("gibbs.sigma"), kv.get_uint("gibbs.n", in.n),
                          kv.get_double("gibbs.gamma"), kv.get_double("gibbs.kl"));
    report.set("gibbs_excess_bound", format_double(g.bound));
    report.set("gibbs_gamma_star", format_double(g.gamma_star));
    report.set("gibbs_excess_optimized", format_double(g.optimized));
  }

  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + out_path + "'");
  out << report.serialize();
  log << "bound report written to " << out_path << '\n';
  return 0;
}

// Runs the property suite and prints a machine-readable summary, one line
// per group; nonzero exit when anything fails.
inline int cmd_verify(const VerifyOptions& opts, std::ostream& out) {
  const auto results = run_property_suite(opts);
  std::size_t failed = 0;
  for (const auto& r : results) {
    out << "group." << r.name << " = " << (r.passed ? "pass" : "fail") << '\n';
    if (!r.passed) {
      out << "detail." << r.name << " = " << r.detail << '\n';
      ++failed;
    }
  }
  out << "groups_total = " << results.size() << '\n';
  out << "groups_failed = " << failed << '\n';
  return failed == 0 ? 0 : 1;
}

}  // namespace mlgibbs
