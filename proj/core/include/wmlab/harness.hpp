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
//
// Configuration-driven experiment runner behind the command line tool:
// generation batches, detection batches, attacks, Pareto sweeps, dual-rate
// simulations, and the dual-variable repetition monitor.

#ifndef WMLAB_HARNESS_HPP_
#define WMLAB_HARNESS_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wmlab/attack.hpp"
#include "wmlab/detect.hpp"
#include "wmlab/engines.hpp"

namespace wmlab {

// Worker count: WMLAB_THREADS if set, else hardware concurrency.
int worker_count();
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

struct ExperimentConfig {
  std::string lm_path;
  std::string engine = "plain";  // plain | srl | dualga | autocov | ems
  double gamma = 0.5;
  double delta = 1.0;            // srl boost
  double delta_target = 0.25;    // dualga / autocov
  double eta = 0.5;
  double lambda_init = 1.0;
  double lambda_cap = 50.0;
  double temperature = 1.0;      // ems
  std::uint64_t key = 0;
  int t_max = 200;
  int n_sequences = 1;
  std::uint64_t master_seed = 0;
  std::vector<Token> prompt;
  std::string output_dir = ".";
};

ExperimentConfig load_experiment_config(const std::string& path);

// Sequence i draws its seed by mixing, not incrementing, so partition and
// sampling streams stay uncorrelated across sequences.
inline std::uint64_t sequence_seed(std::uint64_t master_seed, int index) {
  return mix64(master_seed ^ static_cast<std::uint64_t>(index));
}

// Runs one sequence of the configured engine. EMS derives a per-sequence
// watermark key from the seed (it has no other source of randomness); the
// green-list engines keep the configured key and vary the sampling stream.
GenerationTrace run_engine(const LanguageModel& lm, const ExperimentConfig& config,
                           int seq_index);

struct SequenceSummary {
  int index = 0;
  std::string engine;
  int token_count = 0;
  int green_count = 0;
  double mean_dg = 0.0;
  double mean_kl = 0.0;
  bool terminated_early = false;
  std::uint64_t key = 0;
};

// Writes trace_<i>.jsonl per sequence plus summary.csv under output_dir.
std::vector<SequenceSummary> cmd_generate(const ExperimentConfig& config);

struct DetectConfig {
  DetectMethod method = DetectMethod::green_binomial;
  double threshold = 1e-4;
  std::optional<std::uint64_t> key;    // default: trace header
  std::optional<double> gamma;         // default: trace header
  std::optional<Vocabulary> vocab;     // required for bare token files
};

struct NamedReport {
  std::string input;
  DetectionReport report;
};

// Inputs are trace files or JSON token arrays; writes report.csv.
std::vector<NamedReport> cmd_detect(const std::vector<std::string>& inputs,
                                    const DetectConfig& config,
                                    const std::string& output_dir);

// Applies the attack to each input and writes <stem>.attacked.json token
// arrays under output_dir.
std::vector<std::string> cmd_attack(const std::vector<std::string>& inputs,
                                    const AttackSpec& spec, const DetectConfig& config,
                                    const std::string& output_dir);

struct SweepCell {
  std::string label;
  ExperimentConfig config;  // lm_path/output_dir/master_seed inherited
};

struct SweepConfig {
  std::string lm_path;
  int t_max = 200;
  int n_sequences = 50;
  std::uint64_t master_seed = 0;
  double fpr = 1e-4;
  std::vector<Token> prompt;
  std::vector<SweepCell> grid;
  std::string output_dir = ".";
};

struct SweepRow {
  std::string label;
  std::string engine;
  double mean_kl = 0.0;
  double mean_dg = 0.0;
  double tpr = 0.0;
};

SweepConfig load_sweep_config(const std::string& path);

// One row per grid cell (mean KL, mean DG, TPR at the configured FPR),
// sorted by mean KL; writes sweep.csv.
std::vector<SweepRow> cmd_sweep(const SweepConfig& config);

struct DualSimConfig {
  double delta_target = 0.2;
  double eta_scale = 1.0;  // eta = eta_scale / sqrt(T)
  double lambda_init = 1.0;
  double lambda_cap = 50.0;
  std::vector<int> t_ladder = {100, 400, 1600, 6400};
  int n_seeds = 100;
  std::string stream_kind = "beta";  // beta | file
  double beta_a = 2.0;
  double beta_b = 2.0;
  std::string stream_path;
  std::uint64_t master_seed = 0;
  std::string output_dir = ".";
};

struct DualSimRow {
  int t = 0;
  double dg_gap_abs = 0.0;     // mean_s |mean DG - target|
  double dg_gap_scaled = 0.0;  // sqrt(T) * dg_gap_abs
  double kl_gap_pos = 0.0;     // mean_s (mean KL - OPT)_+
  double kl_gap_scaled = 0.0;  // sqrt(T) * kl_gap_pos
};

DualSimConfig load_dualsim_config(const std::string& path);
std::vector<DualSimRow> cmd_dualsim(const DualSimConfig& config);

struct RepetitionAlert {
  int start_step = 0;  // 1-based
  int run_length = 0;
  double lambda_peak = 0.0;
};

// Alerts on dual-variable excursions above the threshold and on strictly
// increasing runs of at least run_window steps.
std::vector<RepetitionAlert> monitor_lambda(std::span<const double> lambdas,
                                            double lambda_threshold, int run_window);

// Reads a dual-engine trace and monitors its lambda column.
std::vector<RepetitionAlert> cmd_monitor(const std::string& trace_path,
                                         double lambda_threshold = 12.0,
                                         int run_window = 15);

// Token array files used by attack/detect round trips.
std::vector<Token> load_token_file(const std::string& path);
void save_token_file(std::span<const Token> tokens, const std::string& path);

}  // namespace wmlab

#endif  // WMLAB_HARNESS_HPP_
