// tools/ftsim.cc

// Copyright 2026  The ftsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: data generation, pretraining, federated
// adaptation, evaluation and the numerical self-checks.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ftsim/checkpoint.h"
#include "ftsim/config_file.h"
#include "ftsim/experiment.h"
#include "ftsim/rnnt_lattice.h"

namespace {

using namespace ftsim;

// Flags shared by the subcommands that build an ExperimentConfig. Each one
// overrides the matching config-file key.
struct CommonFlags {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;

  void Add(CLI::App *app, const std::string &flag, const std::string &key,
           const std::string &help) {
    app->add_option_function<std::string>(
        flag,
        [this, key](const std::string &v) { overrides.emplace_back(key, v); },
        help);
  }

  ExperimentConfig Build() const {
    KeyValueConfig kv = config_path.empty() ? KeyValueConfig()
                                            : KeyValueConfig::Load(config_path);
    for (const auto &[k, v] : overrides) {
      if (k == "band") {
        const auto comma = v.find(',');
        if (comma == std::string::npos)
          throw std::invalid_argument("--band expects L,R");
        kv.Set("band_left", v.substr(0, comma));
        kv.Set("band_right", v.substr(comma + 1));
      } else {
        kv.Set(k, v);
      }
    }
    return ExperimentConfigFromFile(kv);
  }
};

void AddExperimentFlags(CLI::App *app, CommonFlags &f) {
  app->add_option("--config", f.config_path, "key = value config file")
      ->check(CLI::ExistingFile);
  f.Add(app, "--preset", "preset", "device | video");
  f.Add(app, "--seed", "seed", "master seed");
  f.Add(app, "--workers", "workers", "device trainer threads");
}

void AddAdaptFlags(CLI::App *app, CommonFlags &f) {
  f.Add(app, "--rounds", "rounds", "federated rounds");
  f.Add(app, "--devices", "devices", "devices per round");
  f.Add(app, "--local-updates", "local_updates", "local steps per round (K)");
  f.Add(app, "--block-momentum", "block_momentum", "server momentum");
  f.Add(app, "--mask", "mask",
        "all|encoder|attention|keyvalue|predictor|joiner|bias");
  f.Add(app, "--loss", "loss", "full|ar|sr");
  f.Add(app, "--band", "band", "band widths L,R");
  f.Add(app, "--filter-threshold", "filter_threshold",
        "confidence threshold");
  f.Add(app, "--labels", "labels", "true|pseudo");
  f.Add(app, "--learning-rate", "learning_rate", "local learning rate");
}

std::ofstream OpenOut(const std::string &path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error(path + ": cannot open for writing");
  return os;
}

ParameterSet LoadParams(const std::string &path, const ExperimentConfig &c) {
  return LoadCheckpoint(path, MakeParameterLayout(c.model)).params;
}

int GenData(const CommonFlags &f, const std::string &dir, int count) {
  ExperimentConfig c = f.Build();
  if (count > 0) c.eval_size = count;
  std::filesystem::create_directories(dir);
  const EvalSets sets = MakeEvalSets(c);
  SaveDataset(dir + "/source.jsonl", sets.source);
  SaveDataset(dir + "/target.jsonl", sets.target);
  std::printf("wrote %zu source and %zu target utterances to %s\n",
              sets.source.size(), sets.target.size(), dir.c_str());
  return 0;
}

int RunPretrain(const CommonFlags &f, const std::string &ckpt,
                const std::string &curve) {
  const ExperimentConfig c = f.Build();
  const PretrainResult r = Pretrain(c);
  SaveCheckpoint(ckpt, {r.params, {}});
  if (!curve.empty()) {
    std::ofstream os = OpenOut(curve);
    os << "step,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < r.loss_curve.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%zu,%.6f\n", i + 1, r.loss_curve[i]);
      os << buf;
    }
  }
  const EvalSets sets = MakeEvalSets(c);
  const EvalResult src = Evaluate(c.model, r.params, sets.source);
  const EvalResult tgt = Evaluate(c.model, r.params, sets.target);
  std::printf("source_TER=%.6f target_TER=%.6f source_loss=%.6f checkpoint=%s\n",
              src.token_error_rate, tgt.token_error_rate, src.mean_loss,
              ckpt.c_str());
  return 0;
}

int RunAdapt(const CommonFlags &f, const std::string &ckpt,
             const std::string &out, const std::string &save,
             const std::string &mode) {
  const ExperimentConfig c = f.Build();
  const ParameterSet w0 = LoadParams(ckpt, c);
  std::ofstream file;
  std::ostream *os = &std::cout;
  if (!out.empty()) {
    file = OpenOut(out);
    os = &file;
  }
  *os << MetricsCsvHeader() << '\n';
  auto row = [&](const MetricsRow &r) {
    *os << MetricsCsvLine(r) << '\n' << std::flush;
  };
  const AdaptResult r =
      mode == "central" ? AdaptCentralized(c, w0, row) : Adapt(c, w0, row);
  if (!save.empty()) {
    const ServerState &s = r.final_state;
    SaveCheckpoint(save, {s.w_curr, CheckpointServerState{
                                        s.round, s.block_momentum, s.w_prev}});
  }
  return 0;
}

int RunEval(const CommonFlags &f, const std::string &ckpt,
            const std::string &data) {
  const ExperimentConfig c = f.Build();
  const ParameterSet w = LoadParams(ckpt, c);
  auto report = [&](const char *name, const std::vector<Utterance> &set) {
    const EvalResult r = Evaluate(c.model, w, set);
    std::printf("%s TER=%.6f loss=%.6f utterances=%zu\n", name,
                r.token_error_rate, r.mean_loss, r.utterances);
  };
  if (!data.empty()) {
    report("data", LoadDataset(data));
  } else {
    const EvalSets sets = MakeEvalSets(c);
    report("source", sets.source);
    report("target", sets.target);
  }
  return 0;
}

LogitLattice RandomLattice(Rng &rng, int T, int U, int V) {
  std::vector<int> y(U);
  for (int &k : y) k = rng.UniformInt(1, V - 1);
  LogitLattice lat = LogitLattice::Zeros(T, y, V, 0);
  for (double &s : lat.Scores()) s = rng.Uniform(-2.0, 2.0);
  return lat;
}

// Worst relative error of analytic against central-difference gradients.
double GradError(LogitLattice &lat, const std::vector<double> &analytic,
                 const std::function<double()> &loss) {
  double diff = 0.0, norm = 0.0;
  std::vector<double> &scores = lat.Scores();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double saved = scores[i];
    scores[i] = saved + 1e-5;
    const double plus = loss();
    scores[i] = saved - 1e-5;
    const double minus = loss();
    scores[i] = saved;
    const double fd = (plus - minus) / 2e-5;
    diff = std::max(diff, std::abs(fd - analytic[i]));
    norm = std::max(norm, std::abs(fd));
  }
  return norm > 0 ? diff / norm : diff;
}

int GradCheck(std::uint64_t seed, int instances) {
  Rng rng(seed);
  double full = 0.0, restricted = 0.0;
  for (int i = 0; i < instances; ++i) {
    LogitLattice lat = RandomLattice(rng, rng.UniformInt(1, 5),
                                     rng.UniformInt(0, 4), rng.UniformInt(2, 6));
    full = std::max(full, GradError(lat, RnntGrad(lat),
                                    [&] { return RnntLossFull(lat); }));
    const BandMask band = MakeBandMask(ViterbiAlign(lat), 1, 1, lat.Frames(),
                                       lat.TargetLen());
    restricted = std::max(
        restricted, GradError(lat, RestrictedGrad(lat, band),
                              [&] { return RestrictedLoss(lat, band); }));
  }
  const bool ok = full < 1e-5 && restricted < 1e-5;
  std::printf(
      "rnnt_grad max_rel_err=%.3e restricted_grad max_rel_err=%.3e %s\n", full,
      restricted, ok ? "PASS" : "FAIL");
  return ok ? 0 : 2;
}

int OracleCheck(std::uint64_t seed, int instances) {
  Rng rng(seed);
  double loss_err = 0.0;
  int viterbi_bad = 0;
  for (int i = 0; i < instances; ++i) {
    const LogitLattice lat = RandomLattice(rng, rng.UniformInt(1, 5),
                                           rng.UniformInt(0, 4),
                                           rng.UniformInt(2, 6));
    loss_err = std::max(loss_err,
                        std::abs(RnntLossFull(lat) - BruteForceLoss(lat)));
    double best = -INFINITY;
    for (const AlignmentPath &p : EnumerateAlignments(lat))
      best = std::max(best, p.log_prob);
    viterbi_bad += ViterbiAlign(lat).log_prob != best;
  }
  const bool ok = loss_err < 1e-10 && viterbi_bad == 0;
  std::printf("loss max_abs_err=%.3e viterbi_mismatches=%d %s\n", loss_err,
              viterbi_bad, ok ? "PASS" : "FAIL");
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Federated transducer adaptation simulator"};
  app.require_subcommand(1);

  CommonFlags gen_f, pre_f, adapt_f, eval_f;
  std::string gen_dir = "data", pre_ckpt = "pretrained.ckpt", pre_curve;
  std::string adapt_ckpt = "pretrained.ckpt", adapt_out, adapt_save;
  std::string adapt_mode = "fl", eval_ckpt = "pretrained.ckpt", eval_data;
  int gen_count = 0, check_n = 50;
  std::uint64_t check_seed = 1;

  CLI::App *gen = app.add_subcommand("gen-data", "write eval datasets as JSONL");
  AddExperimentFlags(gen, gen_f);
  gen->add_option("--out", gen_dir, "output directory");
  gen->add_option("--count", gen_count, "utterances per domain");

  CLI::App *pre = app.add_subcommand("pretrain", "train w0 on the source domain");
  AddExperimentFlags(pre, pre_f);
  pre->add_option("--checkpoint", pre_ckpt, "output checkpoint");
  pre->add_option("--out", pre_curve, "training loss CSV");

  CLI::App *adapt = app.add_subcommand("adapt", "federated adaptation from w0");
  AddExperimentFlags(adapt, adapt_f);
  AddAdaptFlags(adapt, adapt_f);
  adapt->add_option("--checkpoint", adapt_ckpt, "pretrained checkpoint");
  adapt->add_option("--out", adapt_out, "metrics CSV (default stdout)");
  adapt->add_option("--save", adapt_save, "final checkpoint with server state");
  adapt->add_option("--mode", adapt_mode, "fl | central")
      ->check(CLI::IsMember({"fl", "central"}));

  CLI::App *ev = app.add_subcommand("eval", "TER and loss of a checkpoint");
  AddExperimentFlags(ev, eval_f);
  ev->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate");
  ev->add_option("--data", eval_data, "JSONL dataset (default: eval sets)");

  CLI::App *grad = app.add_subcommand("gradcheck", "finite-difference checks");
  CLI::App *oracle =
      app.add_subcommand("oracle-check", "loss and Viterbi against enumeration");
  for (CLI::App *sub : {grad, oracle}) {
    sub->add_option("--seed", check_seed, "random seed");
    sub->add_option("--instances", check_n, "random lattices");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::fprintf(stderr, "ftsim: error: usage: %s\n", e.what());
    return 64;
  }

  try {
    if (*gen) return GenData(gen_f, gen_dir, gen_count);
    if (*pre) return RunPretrain(pre_f, pre_ckpt, pre_curve);
    if (*adapt)
      return RunAdapt(adapt_f, adapt_ckpt, adapt_out, adapt_save, adapt_mode);
    if (*ev) return RunEval(eval_f, eval_ckpt, eval_data);
    if (*grad) return GradCheck(check_seed, check_n);
    if (*oracle) return OracleCheck(check_seed, check_n);
  } catch (const std::exception &e) {
    std::string msg = e.what();
    for (char &ch : msg)
      if (ch == '\n') ch = ' ';
    std::fprintf(stderr, "ftsim: error: %s\n", msg.c_str());
    return 1;
  }
  return 0;
}
