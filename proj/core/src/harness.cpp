// Copyright 2026 The wmlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wmlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "wmlab/dual.hpp"

namespace wmlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt6(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

void write_atomically(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << contents;
  }
  fs::rename(tmp, path);
}

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json j;
  in >> j;
  return j;
}

bool is_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty input file: " + path);
  const auto pos = line.find_first_not_of(" \t\r");
  return pos != std::string::npos && line[pos] == '{';
}

}  // namespace

int worker_count() {
  if (const char* env = std::getenv("WMLAB_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load()) return;
        try {
          body(i);
        } catch (...) {
          const std::scoped_lock lock(error_mu);
          if (!first_error) first_error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

ExperimentConfig load_experiment_config(const std::string& path) {
  const json j = parse_json_file(path);
  ExperimentConfig c;
  c.lm_path = j.at("lm_path").get<std::string>();
  c.engine = j.value("engine", c.engine);
  c.gamma = j.value("gamma", c.gamma);
  c.delta = j.value("delta", c.delta);
  c.delta_target = j.value("delta_target", c.delta_target);
  c.eta = j.value("eta", c.eta);
  c.lambda_init = j.value("lambda_init", c.lambda_init);
  c.lambda_cap = j.value("lambda_cap", c.lambda_cap);
  c.temperature = j.value("temperature", c.temperature);
  c.key = j.value("key", c.key);
  c.t_max = j.value("t_max", c.t_max);
  c.n_sequences = j.value("n_sequences", c.n_sequences);
  c.master_seed = j.value("master_seed", c.master_seed);
  if (j.contains("prompt")) c.prompt = j.at("prompt").get<std::vector<Token>>();
  c.output_dir = j.value("output_dir", c.output_dir);
  if (c.n_sequences < 1) throw std::invalid_argument("n_sequences must be >= 1");
  return c;
}

GenerationTrace run_engine(const LanguageModel& lm, const ExperimentConfig& config,
                           int seq_index) {
  const std::uint64_t seed = sequence_seed(config.master_seed, seq_index);
  Context prompt;
  prompt.prompt = config.prompt;

  GenerationTrace trace;
  if (config.engine == "plain") {
    PlainParams p;
    p.gamma = config.gamma;
    p.key = config.key;
    p.rng_seed = seed;
    p.t_max = config.t_max;
    trace = plain_generate(lm, prompt, p);
  } else if (config.engine == "srl") {
    SrlParams p;
    p.gamma = config.gamma;
    p.delta = config.delta;
    p.key = config.key;
    p.t_max = config.t_max;
    trace = srl_generate(lm, prompt, p, seed);
  } else if (config.engine == "dualga") {
    DualGaParams p;
    p.gamma = config.gamma;
    p.delta_target = config.delta_target;
    p.eta = config.eta;
    p.lambda_init = config.lambda_init;
    p.lambda_cap = config.lambda_cap;
    p.key = config.key;
    p.t_max = config.t_max;
    trace = dualga_generate(lm, prompt, p, seed);
  } else if (config.engine == "autocov") {
    DualGaParams p;
    p.gamma = config.gamma;
    p.delta_target = config.delta_target;
    p.eta = config.eta;
    p.lambda_init = config.lambda_init;
    p.lambda_cap = config.lambda_cap;
    p.key = config.key;
    p.t_max = config.t_max;
    trace = autocov_generate(lm, prompt, p, seed);
  } else if (config.engine == "ems") {
    EmsParams p;
    p.temperature = config.temperature;
    p.key = mix64(config.key ^ seed);
    p.t_max = config.t_max;
    trace = ems_generate(lm, prompt, p);
  } else {
    throw std::invalid_argument("unknown engine: " + config.engine);
  }
  trace.seq_index = seq_index;
  return trace;
}

std::vector<SequenceSummary> cmd_generate(const ExperimentConfig& config) {
  const auto lm = load_lm(config.lm_path);
  ensure_dir(config.output_dir);
  std::vector<SequenceSummary> summaries(static_cast<std::size_t>(config.n_sequences));

  parallel_for(static_cast<std::size_t>(config.n_sequences), [&](std::size_t i) {
    const GenerationTrace trace = run_engine(*lm, config, static_cast<int>(i));
    char name[32];
    std::snprintf(name, sizeof(name), "trace_%05zu.jsonl", i);
    write_trace(trace, (fs::path(config.output_dir) / name).string());
    SequenceSummary& s = summaries[i];
    s.index = static_cast<int>(i);
    s.engine = trace.engine;
    s.token_count = trace.effective_len;
    s.green_count = trace.green_count();
    s.mean_dg = trace.mean_dg();
    s.mean_kl = trace.mean_kl();
    s.terminated_early = trace.terminated_early;
    s.key = trace.key;
  });

  std::ostringstream csv;
  csv << "seq_index,engine,token_count,green_count,mean_dg,mean_kl,terminated_early,key\n";
  for (const auto& s : summaries) {
    csv << s.index << ',' << s.engine << ',' << s.token_count << ',' << s.green_count
        << ',' << fmt6(s.mean_dg) << ',' << fmt6(s.mean_kl) << ','
        << (s.terminated_early ? 1 : 0) << ',' << s.key << "\n";
  }
  write_atomically((fs::path(config.output_dir) / "summary.csv").string(), csv.str());
  return summaries;
}

std::vector<Token> load_token_file(const std::string& path) {
  const json j = parse_json_file(path);
  if (!j.is_array()) throw std::runtime_error("token file must be a JSON array: " + path);
  return j.get<std::vector<Token>>();
}

void save_token_file(std::span<const Token> tokens, const std::string& path) {
  const json j = std::vector<Token>(tokens.begin(), tokens.end());
  write_atomically(path, j.dump() + "\n");
}

namespace {

struct DetectInput {
  std::vector<Token> tokens;
  std::uint64_t key = 0;
  double gamma = 0.5;
  Vocabulary vocab;
};

DetectInput read_detect_input(const std::string& path, const DetectConfig& config) {
  DetectInput input;
  if (is_trace_file(path)) {
    const GenerationTrace trace = read_trace(path);
    input.tokens = trace.effective_tokens();
    input.key = trace.key;
    input.gamma = trace.gamma;
    input.vocab = trace.vocab;
  } else {
    input.tokens = load_token_file(path);
    if (!config.vocab) {
      throw std::runtime_error("token files need an explicit vocabulary: " + path);
    }
    input.vocab = *config.vocab;
  }
  if (config.key) input.key = *config.key;
  if (config.gamma) input.gamma = *config.gamma;
  if (input.tokens.empty()) throw std::runtime_error("no tokens to detect in " + path);
  return input;
}

DetectionReport detect_one(const DetectInput& input, DetectMethod method,
                           double threshold) {
  switch (method) {
    case DetectMethod::green_z:
      return detect_green_z(input.tokens, input.key, input.gamma, input.vocab, threshold);
    case DetectMethod::green_binomial:
      return detect_green_binomial(input.tokens, input.key, input.gamma, input.vocab,
                                   threshold);
    case DetectMethod::ems_gamma:
      return ems_p_value(input.tokens, input.key, input.vocab, threshold);
    case DetectMethod::autocov_normal:
      return autocov_p_value(input.tokens, input.key, input.gamma, input.vocab, threshold);
  }
  throw std::invalid_argument("unknown detection method");
}

}  // namespace

std::vector<NamedReport> cmd_detect(const std::vector<std::string>& inputs,
                                    const DetectConfig& config,
                                    const std::string& output_dir) {
  if (inputs.empty()) throw std::invalid_argument("no input files");
  ensure_dir(output_dir);
  std::vector<NamedReport> reports(inputs.size());
  parallel_for(inputs.size(), [&](std::size_t i) {
    const DetectInput input = read_detect_input(inputs[i], config);
    reports[i] = {inputs[i], detect_one(input, config.method, config.threshold)};
  });

  std::ostringstream csv;
  csv << "input,method,score,p_value,n_effective,decision,threshold\n";
  for (const auto& r : reports) {
    csv << fs::path(r.input).filename().string() << ',' << to_string(r.report.method)
        << ',' << fmt6(r.report.score) << ',' << fmt6(r.report.p_value) << ','
        << r.report.n_effective << ',' << (r.report.decision ? 1 : 0) << ','
        << fmt6(r.report.threshold) << "\n";
  }
  write_atomically((fs::path(output_dir) / "report.csv").string(), csv.str());
  return reports;
}

std::vector<std::string> cmd_attack(const std::vector<std::string>& inputs,
                                    const AttackSpec& spec, const DetectConfig& config,
                                    const std::string& output_dir) {
  if (inputs.empty()) throw std::invalid_argument("no input files");
  ensure_dir(output_dir);
  std::vector<std::string> outputs(inputs.size());
  parallel_for(inputs.size(), [&](std::size_t i) {
    const DetectInput input = read_detect_input(inputs[i], config);
    AttackSpec per_input = spec;
    per_input.seed = mix64(spec.seed ^ static_cast<std::uint64_t>(i));
    const auto attacked =
        apply_attack(input.tokens, per_input, input.key, input.gamma, input.vocab);
    const std::string name = fs::path(inputs[i]).stem().string() + ".attacked.json";
    const std::string out_path = (fs::path(output_dir) / name).string();
    save_token_file(attacked, out_path);
    outputs[i] = out_path;
  });
  return outputs;
}

SweepConfig load_sweep_config(const std::string& path) {
  const json j = parse_json_file(path);
  SweepConfig c;
  c.lm_path = j.at("lm_path").get<std::string>();
  c.t_max = j.value("t_max", c.t_max);
  c.n_sequences = j.value("n_sequences", c.n_sequences);
  c.master_seed = j.value("master_seed", c.master_seed);
  c.fpr = j.value("fpr", c.fpr);
  if (j.contains("prompt")) c.prompt = j.at("prompt").get<std::vector<Token>>();
  c.output_dir = j.value("output_dir", c.output_dir);
  if (!j.contains("grid") || !j.at("grid").is_array() || j.at("grid").empty()) {
    throw std::invalid_argument("sweep config needs a non-empty grid");
  }
  for (const auto& cell : j.at("grid")) {
    SweepCell sc;
    sc.config.engine = cell.at("engine").get<std::string>();
    sc.config.gamma = cell.value("gamma", 0.5);
    sc.config.delta = cell.value("delta", 1.0);
    sc.config.delta_target = cell.value("delta_target", 0.25);
    sc.config.eta = cell.value("eta", 0.5);
    sc.config.lambda_init = cell.value("lambda_init", 1.0);
    sc.config.lambda_cap = cell.value("lambda_cap", 50.0);
    sc.config.temperature = cell.value("temperature", 1.0);
    sc.config.key = cell.value("key", static_cast<std::uint64_t>(17));
    sc.label = cell.value("label", sc.config.engine);
    c.grid.push_back(std::move(sc));
  }
  return c;
}

std::vector<SweepRow> cmd_sweep(const SweepConfig& config) {
  const auto lm = load_lm(config.lm_path);
  ensure_dir(config.output_dir);
  std::vector<SweepRow> rows(config.grid.size());

  for (std::size_t cell_idx = 0; cell_idx < config.grid.size(); ++cell_idx) {
    ExperimentConfig cell = config.grid[cell_idx].config;
    cell.lm_path = config.lm_path;
    cell.t_max = config.t_max;
    cell.n_sequences = config.n_sequences;
    // Shared master seed: identical cells produce identical rows, and
    // cross-cell comparisons are paired.
    cell.master_seed = config.master_seed;
    cell.prompt = config.prompt;

    const auto n = static_cast<std::size_t>(cell.n_sequences);
    std::vector<double> kls(n, 0.0);
    std::vector<double> dgs(n, 0.0);
    std::vector<std::uint8_t> hits(n, 0);
    parallel_for(n, [&](std::size_t i) {
      const GenerationTrace trace = run_engine(*lm, cell, static_cast<int>(i));
      DetectInput input;
      input.tokens = trace.effective_tokens();
      input.key = trace.key;
      input.gamma = trace.gamma;
      input.vocab = trace.vocab;
      DetectMethod method = DetectMethod::green_binomial;
      if (cell.engine == "ems") method = DetectMethod::ems_gamma;
      if (cell.engine == "autocov") method = DetectMethod::autocov_normal;
      const DetectionReport report = detect_one(input, method, config.fpr);
      hits[i] = report.decision ? 1 : 0;
      kls[i] = trace.mean_kl();
      dgs[i] = trace.mean_dg();
    });

    SweepRow& row = rows[cell_idx];
    row.label = config.grid[cell_idx].label;
    row.engine = cell.engine;
    for (std::size_t i = 0; i < n; ++i) {
      row.mean_kl += kls[i];
      row.mean_dg += dgs[i];
      row.tpr += hits[i];
    }
    row.mean_kl /= cell.n_sequences;
    row.mean_dg /= cell.n_sequences;
    row.tpr /= cell.n_sequences;
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const SweepRow& a, const SweepRow& b) { return a.mean_kl < b.mean_kl; });
  std::ostringstream csv;
  csv << "label,engine,mean_kl,mean_dg,tpr\n";
  for (const auto& r : rows) {
    csv << r.label << ',' << r.engine << ',' << fmt6(r.mean_kl) << ',' << fmt6(r.mean_dg)
        << ',' << fmt6(r.tpr) << "\n";
  }
  write_atomically((fs::path(config.output_dir) / "sweep.csv").string(), csv.str());
  return rows;
}

DualSimConfig load_dualsim_config(const std::string& path) {
  const json j = parse_json_file(path);
  DualSimConfig c;
  c.delta_target = j.value("delta_target", c.delta_target);
  c.eta_scale = j.value("eta_scale", c.eta_scale);
  c.lambda_init = j.value("lambda_init", c.lambda_init);
  c.lambda_cap = j.value("lambda_cap", c.lambda_cap);
  if (j.contains("t_ladder")) c.t_ladder = j.at("t_ladder").get<std::vector<int>>();
  c.n_seeds = j.value("n_seeds", c.n_seeds);
  c.stream_kind = j.value("stream_kind", c.stream_kind);
  c.beta_a = j.value("beta_a", c.beta_a);
  c.beta_b = j.value("beta_b", c.beta_b);
  c.stream_path = j.value("stream_path", c.stream_path);
  c.master_seed = j.value("master_seed", c.master_seed);
  c.output_dir = j.value("output_dir", c.output_dir);
  return c;
}

std::vector<DualSimRow> cmd_dualsim(const DualSimConfig& config) {
  ensure_dir(config.output_dir);
  std::vector<double> file_stream;
  std::vector<int> ladder = config.t_ladder;
  if (config.stream_kind == "file") {
    file_stream = load_green_mass_stream(config.stream_path);
    ladder = {static_cast<int>(file_stream.size())};
  } else if (config.stream_kind != "beta") {
    throw std::invalid_argument("unknown stream kind: " + config.stream_kind);
  }

  std::vector<DualSimRow> rows;
  for (const int t : ladder) {
    if (t < 1) throw std::invalid_argument("ladder entries must be positive");
    const double eta = config.eta_scale / std::sqrt(static_cast<double>(t));
    std::vector<double> dg_gaps(static_cast<std::size_t>(config.n_seeds), 0.0);
    std::vector<double> kl_gaps(static_cast<std::size_t>(config.n_seeds), 0.0);

    parallel_for(static_cast<std::size_t>(config.n_seeds), [&](std::size_t s) {
      std::vector<double> stream;
      if (config.stream_kind == "file") {
        stream = file_stream;
      } else {
        Mix64Stream rng(mix64(config.master_seed ^ mix64(static_cast<std::uint64_t>(t))) ^
                        static_cast<std::uint64_t>(s));
        stream.resize(static_cast<std::size_t>(t));
        for (double& g : stream) g = rng.next_beta(config.beta_a, config.beta_b);
      }
      const DualTrace trace = simulate_dual_dynamics(
          stream, config.delta_target, eta, config.lambda_init, config.lambda_cap);
      dg_gaps[s] = std::abs(trace.mean_dg - config.delta_target);
      double opt_kl = 0.0;
      if (config.delta_target > 0.0) {
        opt_kl = offline_opt(stream, config.delta_target).kl_star;
      }
      kl_gaps[s] = std::max(0.0, trace.mean_kl - opt_kl);
    });

    DualSimRow row;
    row.t = t;
    for (int s = 0; s < config.n_seeds; ++s) {
      row.dg_gap_abs += dg_gaps[static_cast<std::size_t>(s)];
      row.kl_gap_pos += kl_gaps[static_cast<std::size_t>(s)];
    }
    row.dg_gap_abs /= config.n_seeds;
    row.kl_gap_pos /= config.n_seeds;
    row.dg_gap_scaled = std::sqrt(static_cast<double>(t)) * row.dg_gap_abs;
    row.kl_gap_scaled = std::sqrt(static_cast<double>(t)) * row.kl_gap_pos;
    rows.push_back(row);
  }

  std::ostringstream csv;
  csv << "t,dg_gap_abs,dg_gap_scaled,kl_gap_pos,kl_gap_scaled\n";
  for (const auto& r : rows) {
    csv << r.t << ',' << fmt6(r.dg_gap_abs) << ',' << fmt6(r.dg_gap_scaled) << ','
        << fmt6(r.kl_gap_pos) << ',' << fmt6(r.kl_gap_scaled) << "\n";
  }
  write_atomically((fs::path(config.output_dir) / "dualsim.csv").string(), csv.str());
  return rows;
}

std::vector<RepetitionAlert> monitor_lambda(std::span<const double> lambdas,
                                            double lambda_threshold, int run_window) {
  if (run_window < 1) throw std::invalid_argument("run window must be positive");
  std::vector<RepetitionAlert> alerts;

  // Excursions above the threshold.
  std::size_t i = 0;
  while (i < lambdas.size()) {
    if (lambdas[i] > lambda_threshold) {
      std::size_t j = i;
      double peak = lambdas[i];
      while (j + 1 < lambdas.size() && lambdas[j + 1] > lambda_threshold) {
        ++j;
        peak = std::max(peak, lambdas[j]);
      }
      alerts.push_back({static_cast<int>(i) + 1, static_cast<int>(j - i) + 1, peak});
      i = j + 1;
    } else {
      ++i;
    }
  }

  // Maximal strictly increasing runs; run_length counts increments.
  std::size_t start = 0;
  for (std::size_t k = 1; k <= lambdas.size(); ++k) {
    const bool rising = k < lambdas.size() && lambdas[k] > lambdas[k - 1];
    if (!rising) {
      const int increments = static_cast<int>(k - 1 - start);
      if (increments >= run_window) {
        alerts.push_back({static_cast<int>(start) + 1, increments, lambdas[k - 1]});
      }
      start = k;
    }
  }

  std::sort(alerts.begin(), alerts.end(),
            [](const RepetitionAlert& a, const RepetitionAlert& b) {
              return a.start_step < b.start_step;
            });
  return alerts;
}

std::vector<RepetitionAlert> cmd_monitor(const std::string& trace_path,
                                         double lambda_threshold, int run_window) {
  const GenerationTrace trace = read_trace(trace_path);
  if (trace.engine != "dualga" && trace.engine != "autocov") {
    throw std::runtime_error("trace lacks a dual-variable column: " + trace_path);
  }
  std::vector<double> lambdas;
  lambdas.reserve(static_cast<std::size_t>(trace.effective_len));
  for (int t = 0; t < trace.effective_len; ++t) {
    lambdas.push_back(trace.steps[static_cast<std::size_t>(t)].lambda);
  }
  return monitor_lambda(lambdas, lambda_threshold, run_window);
}

}  // namespace wmlab
