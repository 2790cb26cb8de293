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
// wmlab: generate / detect / attack / sweep / dualsim / verify / monitor.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wmlab/attack.hpp"
#include "wmlab/detect.hpp"
#include "wmlab/harness.hpp"
#include "wmlab/verify.hpp"

namespace {

using namespace wmlab;

int run_generate(const ExperimentConfig& config) {
  const auto summaries = cmd_generate(config);
  double dg = 0.0;
  double kl = 0.0;
  for (const auto& s : summaries) {
    dg += s.mean_dg;
    kl += s.mean_kl;
  }
  std::printf("generated %zu sequences (mean DG %.6g, mean KL %.6g) -> %s\n",
              summaries.size(), dg / summaries.size(), kl / summaries.size(),
              config.output_dir.c_str());
  return 0;
}

int run_detect(const std::vector<std::string>& inputs, const DetectConfig& config,
               const std::string& output_dir) {
  const auto reports = cmd_detect(inputs, config, output_dir);
  int positives = 0;
  for (const auto& r : reports) positives += r.report.decision ? 1 : 0;
  std::printf("detected %d/%zu at threshold %.3g -> %s/report.csv\n", positives,
              reports.size(), config.threshold, output_dir.c_str());
  return 0;
}

int run_verify() {
  const auto results = run_verification();
  int failures = 0;
  for (const auto& r : results) {
    if (r.pass) {
      std::printf("PASS,%s\n", r.name.c_str());
    } else {
      ++failures;
      std::printf("FAIL,%s,%s\n", r.name.c_str(), r.detail.c_str());
    }
  }
  std::printf("# %zu properties, %d failures\n", results.size(), failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Green/red-list watermark laboratory for synthetic language models"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Run a generation experiment");
  std::string gen_config_path;
  ExperimentConfig gen_config;
  gen->add_option("--config", gen_config_path, "JSON experiment config");
  auto* o_lm = gen->add_option("--lm", gen_config.lm_path, "language model file");
  auto* o_engine = gen->add_option("--engine", gen_config.engine,
                                   "plain|srl|dualga|autocov|ems");
  auto* o_gamma = gen->add_option("--gamma", gen_config.gamma, "green list ratio");
  auto* o_delta = gen->add_option("--delta", gen_config.delta, "constant boost (srl)");
  auto* o_target = gen->add_option("--delta-target", gen_config.delta_target,
                                   "average DG target (dualga/autocov)");
  auto* o_eta = gen->add_option("--eta", gen_config.eta, "dual step size");
  auto* o_linit = gen->add_option("--lambda-init", gen_config.lambda_init, "initial dual");
  auto* o_lcap = gen->add_option("--lambda-cap", gen_config.lambda_cap, "dual upper bound");
  auto* o_temp = gen->add_option("--temperature", gen_config.temperature, "EMS temperature");
  auto* o_key = gen->add_option("--key", gen_config.key, "watermark key");
  auto* o_tmax = gen->add_option("--t-max", gen_config.t_max, "max tokens per sequence");
  auto* o_nseq = gen->add_option("--n-sequences", gen_config.n_sequences, "sequence count");
  auto* o_seed = gen->add_option("--master-seed", gen_config.master_seed, "master seed");
  auto* o_prompt = gen->add_option("--prompt", gen_config.prompt, "prompt tokens");
  auto* o_out = gen->add_option("--output-dir", gen_config.output_dir, "output directory");

  // detect
  auto* det = app.add_subcommand("detect", "Score sequences against a key");
  std::vector<std::string> det_inputs;
  std::string det_method = "green_binomial";
  DetectConfig det_config;
  std::uint64_t det_key = 0;
  double det_gamma = 0.5;
  std::int32_t det_vocab = 0;
  std::int32_t det_term = -1;
  std::string det_out = ".";
  det->add_option("inputs", det_inputs, "trace files or JSON token arrays")->required();
  det->add_option("--method", det_method, "green_z|green_binomial|ems_gamma|autocov_normal");
  det->add_option("--threshold", det_config.threshold, "p-value decision threshold");
  auto* d_key = det->add_option("--key", det_key, "detection key override");
  auto* d_gamma = det->add_option("--gamma", det_gamma, "green ratio override");
  auto* d_vocab = det->add_option("--vocab-size", det_vocab, "vocab size (token files)");
  det->add_option("--term-token", det_term, "terminator (token files)");
  det->add_option("--output-dir", det_out, "where report.csv goes");

  // attack
  auto* att = app.add_subcommand("attack", "Perturb token sequences");
  std::vector<std::string> att_inputs;
  std::string att_kind = "deletion";
  std::string att_mode = "random";
  AttackSpec att_spec;
  std::uint64_t att_key = 0;
  double att_gamma = 0.5;
  std::int32_t att_vocab = 0;
  std::int32_t att_term = -1;
  std::string att_out = ".";
  att->add_option("inputs", att_inputs, "trace files or JSON token arrays")->required();
  att->add_option("--attack", att_kind, "deletion|insertion|substitution");
  att->add_option("--rate", att_spec.rate, "attacked fraction in [0,1)");
  att->add_option("--mode", att_mode, "random|worst_case");
  att->add_option("--attack-seed", att_spec.seed, "attack seed");
  auto* a_key = att->add_option("--key", att_key, "detection key (worst_case)");
  auto* a_gamma = att->add_option("--gamma", att_gamma, "green ratio override");
  auto* a_vocab = att->add_option("--vocab-size", att_vocab, "vocab size (token files)");
  att->add_option("--term-token", att_term, "terminator (token files)");
  att->add_option("--output-dir", att_out, "where attacked files go");

  // sweep
  auto* swp = app.add_subcommand("sweep", "Grid sweep emitting a Pareto table");
  std::string swp_config_path;
  std::string swp_out;
  swp->add_option("--config", swp_config_path, "JSON sweep config")->required();
  swp->add_option("--output-dir", swp_out, "output directory override");

  // dualsim
  auto* sim = app.add_subcommand("dualsim", "Dual-ascent rate simulation");
  std::string sim_config_path;
  DualSimConfig sim_config;
  sim->add_option("--config", sim_config_path, "JSON dualsim config");
  auto* s_target = sim->add_option("--delta-target", sim_config.delta_target, "DG target");
  auto* s_scale = sim->add_option("--eta-scale", sim_config.eta_scale,
                                  "eta = eta_scale / sqrt(T)");
  auto* s_linit = sim->add_option("--lambda-init", sim_config.lambda_init, "initial dual");
  auto* s_ladder = sim->add_option("--t-ladder", sim_config.t_ladder, "horizons");
  auto* s_seeds = sim->add_option("--n-seeds", sim_config.n_seeds, "replications");
  auto* s_kind = sim->add_option("--stream", sim_config.stream_kind, "beta|file");
  auto* s_a = sim->add_option("--beta-a", sim_config.beta_a, "beta shape a");
  auto* s_b = sim->add_option("--beta-b", sim_config.beta_b, "beta shape b");
  auto* s_path = sim->add_option("--stream-path", sim_config.stream_path, "stream file");
  auto* s_seed = sim->add_option("--master-seed", sim_config.master_seed, "master seed");
  auto* s_out = sim->add_option("--output-dir", sim_config.output_dir, "output directory");

  // verify
  app.add_subcommand("verify", "Run the named invariant suite");

  // monitor
  auto* mon = app.add_subcommand("monitor", "Repetition alerts from the dual variable");
  std::string mon_trace;
  double mon_threshold = 12.0;
  int mon_window = 15;
  mon->add_option("trace", mon_trace, "dualga/autocov trace file")->required();
  mon->add_option("--lambda-threshold", mon_threshold, "alert level");
  mon->add_option("--run-window", mon_window, "monotone run length");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      ExperimentConfig config;
      if (!gen_config_path.empty()) config = load_experiment_config(gen_config_path);
      if (o_lm->count()) config.lm_path = gen_config.lm_path;
      if (o_engine->count()) config.engine = gen_config.engine;
      if (o_gamma->count()) config.gamma = gen_config.gamma;
      if (o_delta->count()) config.delta = gen_config.delta;
      if (o_target->count()) config.delta_target = gen_config.delta_target;
      if (o_eta->count()) config.eta = gen_config.eta;
      if (o_linit->count()) config.lambda_init = gen_config.lambda_init;
      if (o_lcap->count()) config.lambda_cap = gen_config.lambda_cap;
      if (o_temp->count()) config.temperature = gen_config.temperature;
      if (o_key->count()) config.key = gen_config.key;
      if (o_tmax->count()) config.t_max = gen_config.t_max;
      if (o_nseq->count()) config.n_sequences = gen_config.n_sequences;
      if (o_seed->count()) config.master_seed = gen_config.master_seed;
      if (o_prompt->count()) config.prompt = gen_config.prompt;
      if (o_out->count()) config.output_dir = gen_config.output_dir;
      if (config.lm_path.empty()) throw std::runtime_error("no language model given");
      return run_generate(config);
    }
    if (det->parsed()) {
      DetectConfig config = det_config;
      config.method = detect_method_from_string(det_method);
      if (d_key->count()) config.key = det_key;
      if (d_gamma->count()) config.gamma = det_gamma;
      if (d_vocab->count()) {
        Vocabulary vocab{det_vocab, det_term < 0 ? det_vocab - 1 : det_term};
        config.vocab = vocab;
      }
      return run_detect(det_inputs, config, det_out);
    }
    if (att->parsed()) {
      att_spec.kind = attack_kind_from_string(att_kind);
      att_spec.mode = attack_mode_from_string(att_mode);
      DetectConfig config;
      if (a_key->count()) config.key = att_key;
      if (a_gamma->count()) config.gamma = att_gamma;
      if (a_vocab->count()) {
        Vocabulary vocab{att_vocab, att_term < 0 ? att_vocab - 1 : att_term};
        config.vocab = vocab;
      }
      const auto outputs = cmd_attack(att_inputs, att_spec, config, att_out);
      std::printf("attacked %zu sequences -> %s\n", outputs.size(), att_out.c_str());
      return 0;
    }
    if (swp->parsed()) {
      SweepConfig config = load_sweep_config(swp_config_path);
      if (!swp_out.empty()) config.output_dir = swp_out;
      const auto rows = cmd_sweep(config);
      std::printf("swept %zu configurations -> %s/sweep.csv\n", rows.size(),
                  config.output_dir.c_str());
      return 0;
    }
    if (sim->parsed()) {
      DualSimConfig config;
      if (!sim_config_path.empty()) config = load_dualsim_config(sim_config_path);
      if (s_target->count()) config.delta_target = sim_config.delta_target;
      if (s_scale->count()) config.eta_scale = sim_config.eta_scale;
      if (s_linit->count()) config.lambda_init = sim_config.lambda_init;
      if (s_ladder->count()) config.t_ladder = sim_config.t_ladder;
      if (s_seeds->count()) config.n_seeds = sim_config.n_seeds;
      if (s_kind->count()) config.stream_kind = sim_config.stream_kind;
      if (s_a->count()) config.beta_a = sim_config.beta_a;
      if (s_b->count()) config.beta_b = sim_config.beta_b;
      if (s_path->count()) config.stream_path = sim_config.stream_path;
      if (s_seed->count()) config.master_seed = sim_config.master_seed;
      if (s_out->count()) config.output_dir = sim_config.output_dir;
      const auto rows = cmd_dualsim(config);
      for (const auto& r : rows) {
        std::printf("T=%d sqrtT*|DG gap|=%.6g sqrtT*(KL gap)+=%.6g\n", r.t,
                    r.dg_gap_scaled, r.kl_gap_scaled);
      }
      return 0;
    }
    if (app.get_subcommand("verify")->parsed()) {
      return run_verify();
    }
    if (mon->parsed()) {
      const auto alerts = cmd_monitor(mon_trace, mon_threshold, mon_window);
      std::printf("start_step,run_length,lambda_peak\n");
      for (const auto& a : alerts) {
        std::printf("%d,%d,%.6g\n", a.start_step, a.run_length, a.lambda_peak);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
