#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "gdm/autodiff/ops.hpp"
#include "gdm/harness/ablation.hpp"
#include "gdm/harness/artifacts.hpp"
#include "gdm/harness/report.hpp"
#include "model_checks.hpp"
#include "test_util.hpp"

using namespace gdm;
using namespace gdm::harness;
namespace fs = std::filesystem;

namespace {

ehr::SyntheticConfig tiny_config() {
  ehr::SyntheticConfig c;
  c.n_patients = 30;
  c.n_diag = 10;
  c.n_proc = 6;
  c.n_med = 8;
  c.n_lab_tests = 3;
  c.mean_visits = 2.5;
  c.n_ddi_pairs = 4;
  return c;
}

const Dataset& tiny_data() {
  static const Dataset d = dataset_from_corpus(ehr::generate_synthetic(tiny_config(), 7));
  return d;
}

RunConfig tiny_run(std::size_t epochs = 2) {
  RunConfig c;
  c.d = 8;
  c.n_heads = 2;
  c.epochs = epochs;
  c.learning_rate = 5e-3;
  return c;
}

// Splits one CSV line, honouring double-quoted fields.
std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

// Arm name mapped to the concatenated columns from `from_col` on.
std::map<std::string, std::string> csv_columns_by_arm(const std::string& csv, std::size_t from_col) {
  std::map<std::string, std::string> out;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto fields = split_csv(line);
    for (std::size_t i = from_col; i < fields.size(); ++i) out[fields[0]] += fields[i] + ";";
    out[fields[0]] += "\n";
  }
  return out;
}

}  // namespace

TEST(RunConfig, DefaultsFollowTheConfiguredModel) {
  RunConfig c;
  EXPECT_EQ(c.epochs, 20u);
  EXPECT_DOUBLE_EQ(c.learning_rate, 5e-4);
  EXPECT_EQ(c.d, 64u);
  EXPECT_EQ(c.n_heads, 8u);
  EXPECT_DOUBLE_EQ(c.dropout, 0.7);
  EXPECT_DOUBLE_EQ(c.lambda_graph, 0.1);
  EXPECT_DOUBLE_EQ(c.loss.alpha, 0.005);
  EXPECT_EQ(std::vector<std::uint64_t>(kDefaultSeeds.begin(), kDefaultSeeds.end()),
            (std::vector<std::uint64_t>{1, 3, 16, 18, 1234}));
}

TEST(RunConfig, JsonRoundTripKeepsHash) {
  RunConfig c;
  c.seed = 16;
  c.attn = model::AttnVariant::kV1;
  c.graph_bias = false;
  c.modality = model::ModalityConfig::parse("GY");
  c.loss.beta0 = 5.0;
  c.reg_scope = RegScope::kPatient;
  const auto back = run_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.hash(), c.hash());
}

TEST(RunConfig, HashIgnoresOutputDirectoryOnly) {
  RunConfig a, b;
  b.out_dir = "/somewhere/else";
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = 3;
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
}

TEST(RunConfig, GraphBiasWithV1FailsFast) {
  RunConfig c;
  c.attn = model::AttnVariant::kV1;
  c.graph_bias = true;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"attn", "v1"}}), std::invalid_argument);
  EXPECT_NO_THROW(run_config_from_json(nlohmann::json{{"attn", "v1"}, {"graph_bias", false}}));
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"epoch", 3}}), std::invalid_argument);
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"loss", {{"gama", 1}}}}), std::invalid_argument);
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"reg_scope", "batch"}}), std::invalid_argument);
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"d", 10}, {"heads", 4}}), std::invalid_argument);
  EXPECT_THROW(run_config_from_json(nlohmann::json{{"epochs", "many"}}), std::invalid_argument);
}

TEST(PatientLoss, EqualsSumOfIndependentParts) {
  auto cfg = tiny_run();
  auto m = make_model(tiny_data(), cfg);
  const auto& p = tiny_data().train.front();
  objective::LossConfig loss;
  const double beta = 0.7;
  const auto pl = patient_loss(m, p, objective::ddi_matrix(tiny_data().ddi), loss, beta, 0.5);

  const auto out = model::forward_patient(m, p);
  double expect = loss.alpha * model::squared_norm(m.named_params());
  for (std::size_t t = 0; t < out.size(); ++t) {
    std::vector<double> y(out[t].logits.numel(), 0.0);
    for (auto med : p.visits[t].medications) y[med] = 1.0;
    const auto pred = objective::predicted_set(out[t].probabilities, 0.5);
    expect += objective::bce_loss_logits(y, out[t].logits.data());
    expect += beta * objective::ddi_loss(out[t].probabilities, pred, tiny_data().ddi, loss.ddi_coeff);
    EXPECT_EQ(pl.predicted[t], pred);
  }
  EXPECT_NEAR(pl.total.item(), expect, 1e-12);
}

TEST(PatientLoss, FullObjectiveGradientMatchesFiniteDifferences) {
  auto cfg = tiny_run();
  cfg.modality = model::ModalityConfig::parse("LGY");
  auto m = make_model(tiny_data(), cfg);
  gdm::testing::offset_biases(m, 2);
  const ehr::EncodedPatient* two = nullptr;
  for (const auto& p : tiny_data().train)
    if (p.visits.size() >= 2) two = &p;
  ASSERT_NE(two, nullptr);
  ehr::EncodedPatient patient{two->patient_id, {two->visits[0], two->visits[1]}};
  const auto r = gdm::testing::model_grad_check(m, patient, tiny_data().ddi, 2.0);
  EXPECT_LT(r.check.max_rel_error, 1e-4) << r.worst_param;
}

TEST(Training, SameSeedGivesIdenticalTrajectory) {
  const auto cfg = tiny_run(3);
  auto a = make_model(tiny_data(), cfg);
  auto b = make_model(tiny_data(), cfg);
  const auto ra = train_model(a, tiny_data(), cfg);
  const auto rb = train_model(b, tiny_data(), cfg);
  ASSERT_EQ(ra.step_losses.size(), rb.step_losses.size());
  EXPECT_EQ(ra.step_losses.size(), 3 * tiny_data().train.size());
  for (std::size_t i = 0; i < ra.step_losses.size(); ++i) EXPECT_EQ(ra.step_losses[i], rb.step_losses[i]) << i;
  EXPECT_EQ(ra.best_epoch, rb.best_epoch);
}

TEST(Training, ReducesTrainBce) {
  const auto cfg = tiny_run(6);
  auto m = make_model(tiny_data(), cfg);
  const auto r = train_model(m, tiny_data(), cfg);
  EXPECT_LT(r.final_train_bce, r.initial_train_bce);
  EXPECT_EQ(r.epochs.size(), 6u);
  EXPECT_GE(r.best_epoch, 1u);
}

TEST(Training, SelectsEarliestBestEpoch) {
  const auto cfg = tiny_run(4);
  auto m = make_model(tiny_data(), cfg);
  const auto r = train_model(m, tiny_data(), cfg);
  double best = -1.0;
  std::size_t best_epoch = 0;
  for (const auto& e : r.epochs) {
    if (e.val_jaccard > best) best = e.val_jaccard, best_epoch = e.epoch;
  }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_EQ(r.best_val_jaccard, best);
  const auto preds = predict_patients(m, tiny_data().validation);
  EXPECT_EQ(objective::compute_metrics(preds, tiny_data().ddi).jaccard, best);
}

TEST(Training, ZeroEpochsKeepsInitialization) {
  const auto cfg = tiny_run(0);
  auto m = make_model(tiny_data(), cfg);
  const auto init = make_model(tiny_data(), cfg);
  const auto r = train_model(m, tiny_data(), cfg);
  EXPECT_EQ(r.best_epoch, 0u);
  const auto a = m.named_params(), b = init.named_params();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(std::equal(a[i].second.data().begin(), a[i].second.data().end(), b[i].second.data().begin()));
  }
  const auto ev = evaluate_predictions(predict_patients(m, tiny_data().test), tiny_data().ddi, 1, 10);
  for (auto name : objective::kMetricNames) EXPECT_TRUE(std::isfinite(ev.bootstrap.summary(name).mean));
}

TEST(Training, NonFiniteInitialParamsAreReported) {
  const auto cfg = tiny_run(1);
  auto m = make_model(tiny_data(), cfg);
  m.mutable_params().out_b.mutable_data()[0] = std::nan("");
  try {
    train_model(m, tiny_data(), cfg);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("epoch 0"), std::string::npos) << what;
    EXPECT_NE(what.find("patient '"), std::string::npos) << what;
  }
}

TEST(Training, DivergenceMidRunNamesEpochAndPatient) {
  const auto cfg = tiny_run(3);
  auto m = make_model(tiny_data(), cfg);
  const auto first = tiny_data().train.front().patient_id;
  try {
    train_model(m, tiny_data(), cfg, [&](const EpochLog& log) {
      if (log.epoch == 1) m.mutable_params().out_b.mutable_data()[0] = HUGE_VAL;
    });
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    const std::string what = e.what();
    EXPECT_EQ(what.rfind("epoch 2 patient '", 0), 0u) << what;
  }
}

TEST(Training, PatientScopeAppliesFullPenaltyEachStep) {
  auto cfg = tiny_run(1);
  cfg.loss.alpha = 0.5;
  auto a = make_model(tiny_data(), cfg);
  cfg.reg_scope = RegScope::kPatient;
  auto b = make_model(tiny_data(), cfg);
  auto ra = train_model(a, tiny_data(), tiny_run(1) /* dataset scope, alpha 0.005 */);
  (void)ra;
  const auto rb = train_model(b, tiny_data(), cfg);
  RunConfig dataset_cfg = cfg;
  dataset_cfg.reg_scope = RegScope::kDataset;
  auto c = make_model(tiny_data(), dataset_cfg);
  const auto rc = train_model(c, tiny_data(), dataset_cfg);
  // Same first step except for the penalty share.
  const double reg = model::squared_norm(make_model(tiny_data(), cfg).named_params());
  const double n = static_cast<double>(tiny_data().train.size());
  EXPECT_NEAR(rb.step_losses[0] - rc.step_losses[0], cfg.loss.alpha * reg * (1.0 - 1.0 / n), 1e-9);
}

TEST(FrequencyBaseline, PicksMostFrequentMedsWithMeanSetSize) {
  std::vector<ehr::EncodedPatient> train(1);
  auto visit = [](std::vector<std::size_t> meds) {
    ehr::EncodedVisit v;
    v.medications = std::move(meds);
    return v;
  };
  train[0].visits = {visit({0, 1}), visit({1, 2}), visit({1, 2, 3}), visit({2})};
  const auto b = FrequencyBaseline::fit(train, 5);
  EXPECT_EQ(b.top_k, (objective::MedSet{1, 2}));  // mean size 2; counts 1:3, 2:3, 0:1, 3:1
  EXPECT_DOUBLE_EQ(b.frequency[1], 0.75);
  const auto p = b.predict(train);
  EXPECT_EQ(p[0].visits[3].predicted, (objective::MedSet{1, 2}));
  EXPECT_EQ(p[0].visits[3].truth, (objective::MedSet{2}));
}

TEST(Checkpoint, RoundTripReproducesPredictions) {
  const auto dir = gdm::testing::temp_dir("ckpt");
  const auto cfg = tiny_run(1);
  auto m = make_model(tiny_data(), cfg);
  train_model(m, tiny_data(), cfg);
  save_checkpoint(dir / "c.json", m, cfg, 1);
  const auto ck = load_checkpoint(dir / "c.json");
  EXPECT_EQ(ck.config_hash, cfg.hash());
  const auto back = model_from_checkpoint(ck, tiny_data());
  const auto a = predict_patients(m, tiny_data().test), b = predict_patients(back, tiny_data().test);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t t = 0; t < a[i].visits.size(); ++t) EXPECT_EQ(a[i].visits[t].probabilities, b[i].visits[t].probabilities);
}

TEST(Checkpoint, CorruptedFilesAreRejected) {
  const auto dir = gdm::testing::temp_dir("ckpt");
  const auto cfg = tiny_run(0);
  auto m = make_model(tiny_data(), cfg);
  save_checkpoint(dir / "c.json", m, cfg, 0);
  auto text = gdm::testing::read_file(dir / "c.json");

  write_text(dir / "truncated.json", text.substr(0, text.size() / 2));
  EXPECT_THROW(load_checkpoint(dir / "truncated.json"), CheckpointError);

  auto j = nlohmann::json::parse(text);
  j["params"][0]["values"][0] = j["params"][0]["values"][0].get<double>() + 1.0;
  write_text(dir / "tampered.json", j.dump());
  try {
    load_checkpoint(dir / "tampered.json");
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
  }
  EXPECT_THROW(load_checkpoint(dir / "absent.json"), CheckpointError);
}

TEST(Checkpoint, VocabularyMismatchIsRejected) {
  const auto dir = gdm::testing::temp_dir("ckpt");
  auto other_cfg = tiny_config();
  other_cfg.n_med = 9;
  const auto other = dataset_from_corpus(ehr::generate_synthetic(other_cfg, 7));
  const auto cfg = tiny_run(0);
  auto m = make_model(tiny_data(), cfg);
  save_checkpoint(dir / "c.json", m, cfg, 0);
  EXPECT_THROW(model_from_checkpoint(load_checkpoint(dir / "c.json"), other), CheckpointError);
}

TEST(Evaluation, CsvFieldsAreQuotedWhenNeeded) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a, b"), "\"a, b\"");
  EXPECT_EQ(csv_field("say \"x\""), "\"say \"\"x\"\"\"");
  EXPECT_EQ(split_csv(csv_field("q\", r") + ",2"), (std::vector<std::string>{"q\", r", "2"}));
}

TEST(Evaluation, SameInputsGiveIdenticalCsv) {
  const auto cfg = tiny_run(1);
  auto m = make_model(tiny_data(), cfg);
  const auto p = predict_patients(m, tiny_data().test);
  EXPECT_EQ(eval_csv("x", 3, evaluate_predictions(p, tiny_data().ddi, 3, 10)),
            eval_csv("x", 3, evaluate_predictions(p, tiny_data().ddi, 3, 10)));
}

TEST(Dataset, CorpusDirectoryRoundTrip) {
  const auto dir = gdm::testing::temp_dir("corpus");
  const auto corpus = ehr::generate_synthetic(tiny_config(), 7);
  ehr::write_corpus(dir, corpus, tiny_config(), 7);
  const auto loaded = load_corpus_dir(dir);
  const auto& direct = tiny_data();
  EXPECT_EQ(loaded.ddi, direct.ddi);
  EXPECT_EQ(loaded.causal.diag_to_med, direct.causal.diag_to_med);
  ASSERT_EQ(loaded.test.size(), direct.test.size());
  for (std::size_t i = 0; i < loaded.test.size(); ++i) EXPECT_EQ(loaded.test[i].patient_id, direct.test[i].patient_id);
  fs::remove(dir / "ddi.tsv");
  EXPECT_THROW(load_corpus_dir(dir), ehr::DataError);
}

TEST(Dataset, LabRangesComeFromTrainingPatients) {
  const auto& d = tiny_data();
  const ehr::LabVocab from_train(ehr::select_patients(d.records, d.split.train));
  ASSERT_EQ(d.vocab.labs.size(), from_train.size());
  for (std::size_t i = 0; i < from_train.size(); ++i) {
    EXPECT_EQ(d.vocab.labs.range(i).min, from_train.range(i).min);
    EXPECT_EQ(d.vocab.labs.range(i).max, from_train.range(i).max);
  }
}

TEST(Ablation, StandardGridHasNineArms) {
  const auto arms = standard_arms();
  ASSERT_EQ(arms.size(), 9u);
  EXPECT_EQ(arms[0].name, "Baseline (v1)");
  EXPECT_EQ(arms[0].attn, model::AttnVariant::kV1);
  EXPECT_FALSE(arms[0].graph_bias);
  EXPECT_EQ(arms[4].name, "Dual v2 (LGY)");
  EXPECT_EQ(arms[8].name, "GraphDiffMed (LGY)");
  EXPECT_TRUE(arms[8].graph_bias);
  EXPECT_EQ(arms[1].slug(), "dual_v2_base");
  EXPECT_EQ(kill_switch_arm().slug(), "graphdiffmed_base_lambda_0");
  for (const auto& a : arms) EXPECT_NO_THROW(a.apply(RunConfig{}).validate()) << a.name;
}

TEST(Ablation, GridConfigParsing) {
  const auto g = grid_config_from_json(nlohmann::json{{"seeds", {1, 3}}, {"arms", {"Baseline (v1)", "dual_v2_l"}}});
  EXPECT_EQ(g.seeds, (std::vector<std::uint64_t>{1, 3}));
  ASSERT_EQ(g.arms.size(), 2u);
  EXPECT_EQ(g.arms[1].name, "Dual v2 (L)");
  EXPECT_THROW(grid_config_from_json(nlohmann::json{{"arms", {"Dual v3"}}}), std::invalid_argument);
  EXPECT_THROW(grid_config_from_json(nlohmann::json{{"seeds", nlohmann::json::array()}}), std::invalid_argument);
  EXPECT_THROW(grid_config_from_json(nlohmann::json{{"sedes", {1}}}), std::invalid_argument);
}

TEST(Ablation, SingleCellMatchesTrainThenEval) {
  GridConfig g;
  g.base = tiny_run(2);
  g.arms = {standard_arms()[5]};
  g.seeds = {3};
  g.kill_switch_pair = false;
  const auto r = run_ablation(tiny_data(), g, {});
  ASSERT_EQ(r.cells.size(), 1u);
  ASSERT_TRUE(r.cells[0].ok) << r.cells[0].error;
  auto cfg = g.arms[0].apply(g.base);
  cfg.seed = 3;
  const auto direct = run_train_eval(tiny_data(), cfg, {});
  EXPECT_TRUE(same_metrics(r.cells[0].eval, direct.eval));
  EXPECT_EQ(r.cells[0].config_hash, cfg.hash());
  EXPECT_TRUE(r.significance.empty());
}

TEST(Ablation, KillSwitchPairIsExactlyEqual) {
  const auto dir = gdm::testing::temp_dir("grid");
  GridConfig g;
  g.base = tiny_run(2);
  g.arms = {standard_arms()[0], standard_arms()[1]};
  g.seeds = {1, 3};
  const auto r = run_ablation(tiny_data(), g, dir);
  ASSERT_EQ(r.cells.size(), 6u);
  for (const auto& c : r.cells) EXPECT_TRUE(c.ok) << c.arm << ": " << c.error;
  ASSERT_TRUE(r.kill_switch.has_value());
  EXPECT_TRUE(r.kill_switch->identical);
  bool saw_pair = false;
  for (const auto& s : r.significance) {
    if (s.arm == kill_switch_arm().name) {
      saw_pair = true;
      EXPECT_EQ(s.test.p_value, 1.0) << s.metric;
      EXPECT_EQ(s.test.statistic, 0.0) << s.metric;
    }
  }
  EXPECT_TRUE(saw_pair);
  // Metric columns of the pair agree byte for byte.
  const auto seeds = csv_columns_by_arm(gdm::testing::read_file(dir / "ablation_seeds.csv"), 1);
  EXPECT_EQ(seeds.at(kill_switch_arm().name), seeds.at("Dual v2 (-)"));
  const auto table = csv_columns_by_arm(gdm::testing::read_file(dir / "ablation_table.csv"), 1);
  EXPECT_EQ(table.at(kill_switch_arm().name), table.at("Dual v2 (-)"));
  for (const char* f : {"ablation_table.txt", "significance.csv", "ablation.json"}) EXPECT_TRUE(fs::exists(dir / f));
}

TEST(Ablation, FailingCellIsRecordedAndGridContinues) {
  GridConfig g;
  g.base = tiny_run(1);
  g.base.n_heads = 3;  // 8 is not divisible by 3
  g.arms = {standard_arms()[0]};
  g.seeds = {1, 3};
  g.kill_switch_pair = false;
  const auto r = run_ablation(tiny_data(), g, {});
  ASSERT_EQ(r.cells.size(), 2u);
  for (const auto& c : r.cells) {
    EXPECT_FALSE(c.ok);
    EXPECT_FALSE(c.error.empty());
  }
  EXPECT_EQ(r.arms[0].seeds_ok, 0u);
}

TEST(Report, AttentionRowsSumToOne) {
  auto cfg = tiny_run(1);
  cfg.modality = model::ModalityConfig::parse("L");
  auto m = make_model(tiny_data(), cfg);
  const auto dump = dump_attention(m, tiny_data().test);
  std::map<std::tuple<std::string, int, int>, double> sums;
  std::istringstream in(dump.weights);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    sums[{j["patient"], j["visit"], j["head"]}] += j["weight"].get<double>();
    ++n;
  }
  ASSERT_GT(n, 0u);
  for (const auto& [key, s] : sums) EXPECT_NEAR(s, 1.0, 1e-9);
  std::istringstream gates(dump.gates);
  while (std::getline(gates, line)) {
    const double g = nlohmann::json::parse(line)["gate"];
    EXPECT_GT(g, 0.0);
    EXPECT_LT(g, 1.0);
  }
}

TEST(Report, OutputsAreByteIdenticalOnRerun) {
  const auto dir = gdm::testing::temp_dir("report");
  const auto corpus_dir = dir / "corpus";
  ehr::write_corpus(corpus_dir, ehr::generate_synthetic(tiny_config(), 7), tiny_config(), 7);
  auto cfg = tiny_run(2);
  cfg.data_dir = corpus_dir.string();
  run_train_eval(load_corpus_dir(corpus_dir), cfg, dir / "run");
  const auto a = build_report(dir / "run", dir / "rep_a");
  const auto b = build_report(dir / "run", dir / "rep_b");
  ASSERT_EQ(a.written.size(), b.written.size());
  ASSERT_GE(a.written.size(), 3u);
  for (std::size_t i = 0; i < a.written.size(); ++i) {
    EXPECT_EQ(gdm::testing::read_file(a.written[i]), gdm::testing::read_file(b.written[i])) << a.written[i];
  }
  const auto svg = gdm::testing::read_file(dir / "rep_a" / "plots" / "run.svg");
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
}

TEST(Report, MissingArtifactsAreListed) {
  const auto dir = gdm::testing::temp_dir("report");
  EXPECT_THROW(build_report(dir / "nope", dir / "out"), ReportError);
  fs::create_directories(dir / "empty");
  try {
    build_report(dir / "empty", dir / "out");
    FAIL();
  } catch (const ReportError& e) {
    EXPECT_NE(std::string(e.what()).find("train_log.csv"), std::string::npos);
  }
  fs::create_directories(dir / "half" / "run");
  write_text(dir / "half" / "run" / "train_log.csv", "epoch,train_loss\n1,0.5\n");
  try {
    build_report(dir / "half", dir / "out");
    FAIL();
  } catch (const ReportError& e) {
    EXPECT_NE(std::string(e.what()).find("checkpoint.json"), std::string::npos);
  }
}
