#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lesanet/commands.hpp"
#include "support.hpp"

using namespace lesanet;
namespace fs = std::filesystem;
using lesanet::testing::data_path;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("lesanet_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig tiny_config() {
  auto cfg = run_config_from_overrides({
      "run.seed=5",
      "paths.ontology=" + data_path("synthetic40.onto"),
      "gen.patients=150",
      "gen.dim=8",
      "gen.p_drop_parent=0.4",
      "gen.p_inject=0.1",
      "vocab.min_train=5",
      "vocab.min_val=1",
      "vocab.min_test=1",
      "model.hidden=16",
      "model.embedding=8",
      "train.batch_size=32",
      "train.schedule=2:0.05,1:0.01",
      "loss.rhem_draws=500",
      "loss.triplets=200",
  });
  return cfg;
}

}  // namespace

TEST(RunConfig, ParsesSectionsAndOverrides) {
  std::istringstream in("[run]\nseed = 9\n[train]\nschedule = 3:0.1, 2:0.01\n[loss]\nlambda = 2.5\nspl = false\n");
  auto cfg = parse_run_config(in, "cfg.ini", {"loss.lambda=4", "train.batch_size=64"});
  EXPECT_EQ(cfg.seed, 9u);
  ASSERT_EQ(cfg.train.schedule.size(), 2u);
  EXPECT_EQ(cfg.train.schedule[1].epochs, 2u);
  EXPECT_EQ(cfg.train.loss.lambda, 4.0);
  EXPECT_FALSE(cfg.train.loss.use_spl);
  EXPECT_EQ(cfg.train.batch_size, 64u);
}

TEST(RunConfig, DefaultsMatchTrainingRecipe) {
  RunConfig cfg;
  EXPECT_EQ(cfg.train.batch_size, 128u);
  ASSERT_EQ(cfg.train.schedule.size(), 2u);
  EXPECT_EQ(cfg.train.schedule[0].epochs, 10u);
  EXPECT_EQ(cfg.train.schedule[0].rate, 0.01);
  EXPECT_EQ(cfg.train.schedule[1].epochs, 5u);
  EXPECT_EQ(cfg.train.schedule[1].rate, 0.001);
  EXPECT_EQ(cfg.train.loss.gamma, 2.0);
  EXPECT_EQ(cfg.train.loss.rhem_draws, 10000u);
  EXPECT_EQ(cfg.train.loss.theta, 1.0);
  EXPECT_EQ(cfg.train.loss.mu, 0.1);
  EXPECT_EQ(cfg.train.loss.triplets, 5000u);
  EXPECT_EQ(cfg.train.loss.lambda, 5.0);
  EXPECT_EQ(cfg.train.loss.beta_clamp, 300.0);
  EXPECT_EQ(cfg.embedding, 256u);
}

TEST(RunConfig, SchemaViolationsAreReported) {
  auto bad = [](const std::string& text) {
    std::istringstream in(text);
    return parse_run_config(in, "cfg.ini");
  };
  EXPECT_THROW(bad("[trian]\nseed=1\n"), ConfigError);
  EXPECT_THROW(bad("[train]\nbatchsize=1\n"), ConfigError);
  EXPECT_THROW(bad("[train]\nbatch_size=-3\n"), ConfigError);
  EXPECT_THROW(bad("[loss]\ngamma=0\n"), ConfigError);
  EXPECT_THROW(bad("[loss]\nspl=maybe\n"), ConfigError);
  EXPECT_THROW(bad("[train]\nschedule=10\n"), ConfigError);
  EXPECT_THROW(run_config_from_overrides({"seed=3"}), ConfigError);
  try {
    bad("[gen]\ndim=abc\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("gen.dim"), std::string::npos);
  }
}

TEST(RunConfig, WriteReadRoundTrip) {
  auto cfg = tiny_config();
  cfg.train.loss.use_triplet = false;
  cfg.gen.noise.p_drop = 0.125;
  std::ostringstream out;
  write_run_config(out, cfg);
  std::istringstream in(out.str());
  auto back = parse_run_config(in, "echo");
  std::ostringstream again;
  write_run_config(again, back);
  EXPECT_EQ(out.str(), again.str());
}

TEST(RunConfig, AblationSwitches) {
  auto cfg = run_config_from_overrides(ablation_overrides(true, true, true, true, true, true));
  EXPECT_FALSE(cfg.train.loss.use_spl);
  EXPECT_FALSE(cfg.eval.use_refined);
  EXPECT_FALSE(cfg.train.loss.use_rhem);
  EXPECT_FALSE(cfg.train.expand_labels);
  EXPECT_FALSE(cfg.relevance_filter);
  EXPECT_FALSE(cfg.train.loss.use_triplet);
  EXPECT_FALSE(cfg.train.rhem_reliable_only);
  EXPECT_TRUE(cfg.train.loss.use_wce);
}

TEST(CmdOntology, ValidateExpandClosure) {
  std::ostringstream out, err;
  EXPECT_EQ(cmd_ontology(OntologyAction::kValidate, data_path("chest_abdomen.onto"), "", out, err), 0);
  out.str("");
  EXPECT_EQ(cmd_ontology(OntologyAction::kExpand, data_path("chest_abdomen.onto"), data_path("expand_example.txt"),
                         out, err),
            0);
  std::istringstream lines(out.str());
  std::string first;
  std::getline(lines, first);
  EXPECT_EQ(first, "chest, lung, right lung, right mid lung");
  out.str("");
  EXPECT_EQ(cmd_ontology(OntologyAction::kClosure, data_path("chest_abdomen.onto"), "", out, err), 0);
  EXPECT_NE(out.str().find("left lower lobe <-> right mid lung"), std::string::npos);
}

TEST(CmdOntology, CyclicFixtureFails) {
  std::ostringstream out, err;
  EXPECT_NE(cmd_ontology(OntologyAction::kValidate, data_path("cyclic.onto"), "", out, err), 0);
  EXPECT_NE(err.str().find("cycle"), std::string::npos);
  EXPECT_NE(err.str().find("nodule"), std::string::npos);
}

TEST(CmdOntology, MalformedFileGivesLineNumber) {
  auto dir = scratch("bad_onto");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.onto") << "[labels]\nlung | body-part\n[parents]\nlung => chest\n";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_ontology(OntologyAction::kValidate, (dir / "bad.onto").string(), "", out, err), 2);
  EXPECT_NE(err.str().find("bad.onto:4"), std::string::npos) << err.str();
  fs::remove_all(dir);
}

TEST(CmdMine, FixtureRows) {
  auto dir = scratch("mine");
  fs::create_directories(dir);
  std::ostringstream err;
  ASSERT_EQ(cmd_mine(data_path("sentences.tsv"), data_path("chest_abdomen.onto"), (dir / "m.tsv").string(), err),
            0);
  EXPECT_NE(err.str().find("L004"), std::string::npos);
  std::ifstream in(dir / "m.tsv");
  auto rows = read_mined_labels(in);
  std::map<std::pair<std::string, std::string>, Relevance> got;
  for (const auto& r : rows) got[{r.lesion_id, r.label_name}] = r.relevance;
  EXPECT_EQ(got.at({"L001", "right lower lobe"}), Relevance::kIrrelevant);
  EXPECT_EQ(got.at({"L001", "right mid lung"}), Relevance::kRelevant);
  EXPECT_EQ(got.at({"L002", "adenopathy"}), Relevance::kUncertain);
  EXPECT_EQ(got.at({"L002", "mass"}), Relevance::kUncertain);
  EXPECT_EQ(got.at({"L003", "nodule"}), Relevance::kRelevant);
  fs::remove_all(dir);
}

TEST(ApplyMinedLabels, RelevanceFilter) {
  auto o = std::make_shared<const LabelOntology>(LabelOntology::build(read_ontology_file(data_path("chest_abdomen.onto"))));
  Dataset ds(o, 1);
  ds.add("L1", "p1", Split::kTrain, {0.0}, o->empty_set());
  LabelId rll = *o->find("right lower lobe"), nod = *o->find("nodule");
  std::vector<MinedLabelRow> rows = {{"L1", rll, "right lower lobe", Relevance::kIrrelevant},
                                     {"L1", nod, "nodule", Relevance::kUncertain},
                                     {"L9", nod, "nodule", Relevance::kRelevant}};
  Dataset a = ds;
  EXPECT_EQ(apply_mined_labels(a, rows, true), 1u);
  EXPECT_EQ(a[0].mined_labels, o->set_of({nod}));
  Dataset b = ds;
  apply_mined_labels(b, rows, false);
  EXPECT_EQ(b[0].mined_labels, o->set_of({rll, nod}));
  rows[0].label_name = "liver";
  EXPECT_THROW(apply_mined_labels(a, rows, true), DatasetError);
}

TEST(Commands, GenTrainEvalRetrieve) {
  auto root = scratch("pipeline");
  auto cfg = tiny_config();
  std::ostringstream out, err;
  ASSERT_EQ(cmd_gen(cfg, root / "gen1", out, err), 0) << err.str();
  ASSERT_EQ(cmd_gen(cfg, root / "gen2", out, err), 0) << err.str();
  EXPECT_EQ(slurp(root / "gen1" / "dataset.tsv"), slurp(root / "gen2" / "dataset.tsv"));
  EXPECT_TRUE(fs::exists(root / "gen1" / "resolved_config.ini"));

  // Refuses to write into a non-empty directory.
  EXPECT_NE(cmd_gen(cfg, root / "gen1", out, err), 0);

  cfg.paths.dataset = (root / "gen1" / "dataset.tsv").string();
  ASSERT_EQ(cmd_train(cfg, root / "train", out, err), 0) << err.str();
  EXPECT_TRUE(fs::exists(root / "train" / "checkpoint.txt"));
  std::ifstream log(root / "train" / "train_log.tsv");
  std::size_t lines = 0;
  for (std::string l; std::getline(log, l);) ++lines;
  EXPECT_EQ(lines, 1 + cfg.train.total_epochs());

  cfg.paths.checkpoint = (root / "train" / "checkpoint.txt").string();
  ASSERT_EQ(cmd_eval(cfg, root / "eval", out, err), 0) << err.str();
  auto kv = slurp(root / "eval" / "report.kv");
  EXPECT_NE(kv.find("mined.macro_auc="), std::string::npos);
  EXPECT_NE(kv.find("clean.macro_f1="), std::string::npos);
  EXPECT_NE(kv.find("clean.acg@5="), std::string::npos);

  std::ostringstream rout;
  ASSERT_EQ(cmd_retrieve(cfg, root / "retrieve", 5, rout, err), 0) << err.str();
  EXPECT_NE(rout.str().find("ACG@5 = "), std::string::npos);

  // Same config twice: identical checkpoint and report bytes.
  ASSERT_EQ(cmd_train(cfg, root / "train2", out, err), 0);
  EXPECT_EQ(slurp(root / "train" / "checkpoint.txt"), slurp(root / "train2" / "checkpoint.txt"));
  cfg.paths.checkpoint = (root / "train2" / "checkpoint.txt").string();
  ASSERT_EQ(cmd_eval(cfg, root / "eval2", out, err), 0);
  EXPECT_EQ(kv, slurp(root / "eval2" / "report.kv"));
  EXPECT_EQ(slurp(root / "eval" / "report.txt"), slurp(root / "eval2" / "report.txt"));
  fs::remove_all(root);
}

TEST(Commands, MissingInputsFailCleanly) {
  auto cfg = tiny_config();
  cfg.paths.dataset = "/nonexistent/dataset.tsv";
  std::ostringstream out, err;
  EXPECT_NE(cmd_train(cfg, scratch("missing"), out, err), 0);
  EXPECT_NE(err.str().find("cannot open dataset"), std::string::npos);
  EXPECT_FALSE(fs::exists(scratch("missing")));
}
