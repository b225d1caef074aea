// tests/sim_harness_test.cc

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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "ftsim/checkpoint.h"
#include "ftsim/config_file.h"
#include "ftsim/evaluation.h"
#include "ftsim/experiment.h"
#include "ftsim/synthetic_data.h"

namespace ftsim {
namespace {

namespace fs = std::filesystem;

std::string TempPath(const std::string &name) {
  return (fs::temp_directory_path() /
          ("ftsim_" + std::to_string(::getpid()) + "_" + name))
      .string();
}

std::string ReadFile(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void WriteFile(const std::string &path, const std::string &bytes) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os << bytes;
}

// Small enough to pretrain and adapt in well under a second.
ExperimentConfig TinyExperiment() {
  ExperimentConfig c = ExperimentConfig::Preset("device");
  c.model.hidden_dim = 8;
  c.model.joint_dim = 8;
  c.pretrain_steps = 40;
  c.rounds = 2;
  c.devices = 3;
  c.trainer.local_updates = 2;
  c.trainer.batch_size = 2;
  c.eval_size = 10;
  return c;
}

TEST(SyntheticDataTest, SameSeedSameDataset) {
  const DomainPair dp = MakeDomains(DomainSpec(), 5);
  const auto a = GenDataset(dp.target, 20, 9), b = GenDataset(dp.target, 20, 9);
  const auto c = GenDataset(dp.target, 20, 10);
  bool differs = false;
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(a[i].features, b[i].features);
    EXPECT_EQ(a[i].tokens, b[i].tokens);
    EXPECT_EQ(a[i].true_alignment.steps, b[i].true_alignment.steps);
    differs = differs || !(a[i].features == c[i].features);
  }
  EXPECT_TRUE(differs);
  EXPECT_THROW(GenDataset(dp.source, 0, 1), std::invalid_argument);
}

TEST(SyntheticDataTest, StructureOfUtterances) {
  DomainSpec spec;
  spec.d_min = 1;
  spec.d_max = 3;
  const DomainPair dp = MakeDomains(spec, 6);
  for (const Utterance &u : GenDataset(dp.source, 300, 1)) {
    const int U = int(u.tokens.size()), T = u.features.frames;
    ASSERT_GE(U, 2);
    ASSERT_LE(U, 10);
    EXPECT_LE(U * 1, T);
    EXPECT_LE(T, U * 3);
    for (int i = 1; i < U; ++i) EXPECT_NE(u.tokens[i], u.tokens[i - 1]);
    for (int y : u.tokens) EXPECT_NE(y, 0);
    EXPECT_TRUE(IsValidPath(u.true_alignment, T, u.tokens, 0));
    const std::vector<int> at = EmissionFrames(u.true_alignment);
    EXPECT_EQ(at.front(), 0);
    EXPECT_EQ(u.domain, Domain::kSource);
  }
}

TEST(SyntheticDataTest, NoiselessFramesMatchTheirPrototype) {
  DomainSpec spec;
  spec.source_noise = 0.0;
  const DomainPair dp = MakeDomains(spec, 7);
  const DomainConfig &d = dp.source;
  int errors = 0;
  for (const Utterance &u : GenDataset(d, 50, 2)) {
    const std::vector<int> at = EmissionFrames(u.true_alignment);
    for (int t = 0; t < u.features.frames; ++t) {
      // Nearest prototype over the non-blank tokens.
      int best = -1;
      double best_d = INFINITY;
      for (int k = 1; k < d.vocab; ++k) {
        double dist = 0.0;
        for (int f = 0; f < d.feat_dim; ++f) {
          const double e = u.features.At(t, f) - d.Prototype(k)[f];
          dist += e * e;
        }
        if (dist < best_d) best_d = dist, best = k;
      }
      const int u_idx = int(std::upper_bound(at.begin(), at.end(), t) - at.begin()) - 1;
      errors += best != u.tokens[u_idx];
    }
  }
  EXPECT_EQ(errors, 0);
}

TEST(SyntheticDataTest, TargetDomainShift) {
  DomainSpec spec;
  spec.target_shift = 0.2;
  const DomainPair dp = MakeDomains(spec, 8);
  EXPECT_EQ(dp.source.vocab, dp.target.vocab);
  EXPECT_EQ(dp.target.domain, Domain::kTarget);
  EXPECT_EQ(dp.target.noise_sigma, spec.target_noise);
  for (int k = 1; k < spec.vocab; ++k) {
    const auto p = dp.source.Prototype(k), q = dp.target.Prototype(k);
    double pp = 0, dd = 0, pd = 0;
    for (int f = 0; f < spec.feat_dim; ++f) {
      pp += p[f] * p[f];
      dd += (q[f] - p[f]) * (q[f] - p[f]);
      pd += p[f] * (q[f] - p[f]);
    }
    EXPECT_NEAR(std::sqrt(dd), 0.2 * std::sqrt(pp), 1e-12);
    EXPECT_NEAR(pd, 0.0, 1e-10);
  }
  // Most likely source token is the least likely target token.
  const auto &ps = dp.source.token_prior, &pt = dp.target.token_prior;
  const int top = int(std::max_element(ps.begin() + 1, ps.end()) - ps.begin());
  EXPECT_EQ(pt[top], *std::min_element(pt.begin() + 1, pt.end()));
}

TEST(TokenErrorRateTest, HandChecked) {
  const std::vector<int> abc = {1, 2, 3}, ac = {1, 3}, a = {1}, bc = {2, 3};
  EXPECT_EQ(TokenErrorRate(abc, abc), 0.0);
  EXPECT_EQ(TokenErrorRate({}, abc), 1.0);
  EXPECT_EQ(TokenErrorRate(std::vector<int>{2, 1}, std::vector<int>{1, 2}), 1.0);
  EXPECT_EQ(EditDistance(ac, abc), 1u);
  EXPECT_DOUBLE_EQ(TokenErrorRate(ac, abc), 1.0 / 3.0);
  EXPECT_EQ(EditDistance(bc, a), 2u);
  EXPECT_EQ(TokenErrorRate(bc, a), 2.0);
  EXPECT_EQ(TokenErrorRate(bc, {}), 2.0);
}

TEST(EvaluateTest, CorpusLevelCounts) {
  const ExperimentConfig c = TinyExperiment();
  const ParameterSet w = InitParams(c.model);
  const EvalSets sets = MakeEvalSets(c);
  const EvalResult r = Evaluate(c.model, w, sets.source);
  std::size_t edits = 0, ref = 0;
  double loss = 0.0;
  for (const Utterance &u : sets.source) {
    edits += EditDistance(GreedyDecode(c.model, w, u.features).tokens, u.tokens);
    ref += u.tokens.size();
    loss += RnntLossFull(ModelForward(c.model, w, u.features, u.tokens).lattice);
  }
  EXPECT_EQ(r.edits, edits);
  EXPECT_EQ(r.ref_tokens, ref);
  EXPECT_DOUBLE_EQ(r.token_error_rate, double(edits) / double(ref));
  EXPECT_NEAR(r.mean_loss, loss / sets.source.size(), 1e-12);
  EXPECT_THROW(Evaluate(c.model, w, std::vector<Utterance>{}),
               std::invalid_argument);
}

TEST(CheckpointTest, RoundTripIsBitExact) {
  const ModelConfig mc;
  Checkpoint ck;
  ck.params = InitParams(mc);
  ck.params.Group("bias_all").values[3] = -0.0;
  ck.params.Group("bias_all").values[4] = 1e-310;
  CheckpointServerState s;
  s.round = 7;
  s.block_momentum = 0.8;
  s.w_prev = ck.params;
  s.w_prev.Group("joiner").values[0] = 0.1 + 0.2;
  ck.server = s;
  const std::string path = TempPath("rt.ckpt");
  SaveCheckpoint(path, ck);
  const Checkpoint back = LoadCheckpoint(path, MakeParameterLayout(mc));
  EXPECT_TRUE(back.params.BitEqual(ck.params));
  ASSERT_TRUE(back.server.has_value());
  EXPECT_EQ(back.server->round, 7);
  EXPECT_EQ(back.server->block_momentum, 0.8);
  EXPECT_TRUE(back.server->w_prev.BitEqual(s.w_prev));
  EXPECT_EQ(std::signbit(back.params.Group("bias_all").values[3]), true);

  ck.server.reset();
  SaveCheckpoint(path, ck);
  EXPECT_FALSE(LoadCheckpoint(path).server.has_value());
  fs::remove(path);
}

CheckpointError::Kind LoadKind(const std::string &path,
                               const ParameterSet *layout = nullptr) {
  try {
    if (layout)
      LoadCheckpoint(path, *layout);
    else
      LoadCheckpoint(path);
  } catch (const CheckpointError &e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error";
  return CheckpointError::Kind::kIo;
}

TEST(CheckpointTest, DistinctErrors) {
  using Kind = CheckpointError::Kind;
  const ModelConfig mc;
  const std::string path = TempPath("err.ckpt");
  SaveCheckpoint(path, {InitParams(mc), {}});
  const std::string good = ReadFile(path);

  std::string bad = good;
  bad[0] = 'X';
  WriteFile(path, bad);
  EXPECT_EQ(LoadKind(path), Kind::kBadMagic);

  WriteFile(path, good.substr(0, good.size() - 5));
  EXPECT_EQ(LoadKind(path), Kind::kTruncated);
  WriteFile(path, good.substr(0, 30));
  EXPECT_EQ(LoadKind(path), Kind::kTruncated);

  WriteFile(path, good);
  ModelConfig other = mc;
  other.joint_dim = 12;
  const ParameterSet layout = MakeParameterLayout(other);
  try {
    LoadCheckpoint(path, layout);
    ADD_FAILURE() << "no error";
  } catch (const CheckpointError &e) {
    EXPECT_EQ(e.kind(), Kind::kShapeMismatch);
    EXPECT_NE(std::string(e.what()).find("'enc_out'"), std::string::npos)
        << e.what();
  }
  EXPECT_EQ(LoadKind(TempPath("missing.ckpt")), Kind::kIo);
  fs::remove(path);
}

TEST(ConfigFileTest, ParsesAndReportsProblems) {
  const KeyValueConfig kv = KeyValueConfig::Parse(
      "# comment\n rounds = 12 \n\nloss=ar\nspeed_rates = 0.9, 1.0,1.1\n"
      "augment = off\nfilter_threshold = -inf\n");
  EXPECT_EQ(kv.GetInt("rounds"), 12);
  EXPECT_EQ(kv.GetString("loss"), "ar");
  EXPECT_EQ(kv.GetDoubleList("speed_rates"), (std::vector<double>{0.9, 1.0, 1.1}));
  EXPECT_EQ(kv.GetBool("augment"), false);
  EXPECT_TRUE(std::isinf(*kv.GetDouble("filter_threshold")));
  EXPECT_FALSE(kv.GetInt("missing").has_value());
  EXPECT_TRUE(kv.UnusedKeys().empty());

  EXPECT_THROW(KeyValueConfig::Parse("a = 1\na = 2\n"), std::invalid_argument);
  EXPECT_THROW(KeyValueConfig::Parse("just text\n"), std::invalid_argument);
  const KeyValueConfig bad = KeyValueConfig::Parse("rounds = many\n");
  EXPECT_THROW(bad.GetInt("rounds"), std::invalid_argument);
}

TEST(ExperimentConfigTest, PresetsAndOverrides) {
  for (const std::string &name : ExperimentConfig::PresetNames())
    EXPECT_NO_THROW(ExperimentConfig::Preset(name).Validate());
  const ExperimentConfig dev = ExperimentConfig::Preset("device");
  const ExperimentConfig vid = ExperimentConfig::Preset("video");
  EXPECT_TRUE(dev.trainer.augment.enabled);
  EXPECT_TRUE(std::isinf(dev.trainer.filter_threshold));
  EXPECT_EQ(vid.trainer.filter_threshold, -0.2);
  EXPECT_GT(vid.domains.target_noise, dev.domains.target_noise);
  EXPECT_EQ(dev.block_momentum, 0.8);
  EXPECT_EQ(dev.pretrain_band_left, 2);
  EXPECT_EQ(dev.pretrain_band_right, 5);
  EXPECT_THROW(ExperimentConfig::Preset("radio"), std::invalid_argument);

  const ExperimentConfig c = ExperimentConfigFromFile(KeyValueConfig::Parse(
      "preset = video\nrounds = 3\nmask = keyvalue\nlabels = true\n"
      "band_left = 1\nloss = full\n"));
  EXPECT_EQ(c.preset, "video");
  EXPECT_EQ(c.rounds, 3);
  EXPECT_EQ(c.trainer.mask, AdaptationMask::Preset("keyvalue"));
  EXPECT_TRUE(c.trainer.use_true_labels);
  EXPECT_EQ(c.trainer.band_left, 1);
  EXPECT_EQ(c.trainer.loss, LossKind::kFull);
  EXPECT_THROW(ExperimentConfigFromFile(KeyValueConfig::Parse("roundz = 3\n")),
               std::invalid_argument);
  EXPECT_THROW(ExperimentConfigFromFile(KeyValueConfig::Parse("devices = 0\n")),
               std::invalid_argument);
}

TEST(DatasetFileTest, RoundTripAndErrors) {
  const DomainPair dp = MakeDomains(DomainSpec(), 3);
  const auto data = GenDataset(dp.target, 15, 4);
  const std::string path = TempPath("data.jsonl");
  SaveDataset(path, data);
  const auto back = LoadDataset(path);
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back[i].features, data[i].features);
    EXPECT_EQ(back[i].tokens, data[i].tokens);
    EXPECT_EQ(back[i].true_alignment.steps, data[i].true_alignment.steps);
    EXPECT_EQ(back[i].domain, Domain::kTarget);
  }
  WriteFile(path, ReadFile(path) + "{\"domain\":\"target\"}\n");
  try {
    LoadDataset(path);
    ADD_FAILURE() << "no error";
  } catch (const std::runtime_error &e) {
    EXPECT_NE(std::string(e.what()).find(":16:"), std::string::npos) << e.what();
  }
  fs::remove(path);
}

TEST(PretrainTest, DeterministicLossFallsAndBeatsInit) {
  ExperimentConfig c = TinyExperiment();
  c.pretrain_steps = 300;
  const PretrainResult a = Pretrain(c), b = Pretrain(c);
  EXPECT_TRUE(a.params.BitEqual(b.params));
  ASSERT_EQ(a.loss_curve.size(), 300u);
  double first = 0, last = 0;
  for (int i = 0; i < 30; ++i) {
    first += a.loss_curve[i];
    last += a.loss_curve[270 + i];
  }
  EXPECT_LT(last, first);

  ModelConfig init_cfg = c.model;
  init_cfg.seed = MixSeed(c.seed, HashName("model"));
  const EvalSets sets = MakeEvalSets(c);
  EXPECT_LT(Evaluate(c.model, a.params, sets.source).mean_loss,
            Evaluate(c.model, InitParams(init_cfg), sets.source).mean_loss);
}

TEST(AdaptTest, ZeroLearningRateGivesFlatRows) {
  ExperimentConfig c = TinyExperiment();
  const ParameterSet w0 = Pretrain(c).params;
  c.trainer.learning_rate = 0.0;
  const AdaptResult r = Adapt(c, w0);
  ASSERT_EQ(r.rows.size(), 3u);
  for (const MetricsRow &row : r.rows) {
    EXPECT_EQ(row.target_ter, r.rows[0].target_ter);
    EXPECT_EQ(row.source_ter, r.rows[0].source_ter);
    EXPECT_EQ(row.delta_norm, 0.0);
  }
  EXPECT_TRUE(r.final_state.w_curr.BitEqual(w0));
}

TEST(AdaptTest, CsvIdenticalAcrossWorkerCounts) {
  ExperimentConfig c = TinyExperiment();
  c.preset = "video";
  c.trainer.filter_threshold = -0.3;
  const ParameterSet w0 = Pretrain(c).params;
  std::ostringstream one, many;
  c.workers = 1;
  WriteMetricsCsv(one, Adapt(c, w0).rows);
  c.workers = 3;
  WriteMetricsCsv(many, Adapt(c, w0).rows);
  EXPECT_EQ(one.str(), many.str());
  EXPECT_EQ(one.str().substr(0, one.str().find('\n')), MetricsCsvHeader());
}

TEST(AdaptTest, CentralizedBaselineRuns) {
  ExperimentConfig c = TinyExperiment();
  const ParameterSet w0 = Pretrain(c).params;
  const AdaptResult r = AdaptCentralized(c, w0);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows[1].keep_rate, 1.0);
  EXPECT_GT(r.rows[1].delta_norm, 0.0);
  EXPECT_EQ(r.final_state.round, 2);
}

}  // namespace
}  // namespace ftsim
