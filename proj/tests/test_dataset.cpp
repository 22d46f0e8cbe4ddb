#include <gtest/gtest.h>

#include <sstream>

#include "lesanet/dataset.hpp"
#include "support.hpp"

using namespace lesanet;

namespace {

std::shared_ptr<const LabelOntology> load(const std::string& file) {
  return std::make_shared<const LabelOntology>(
      LabelOntology::build(read_ontology_file(lesanet::testing::data_path(file))));
}

std::string serialize(const Dataset& ds) {
  std::ostringstream out;
  write_dataset(out, ds);
  return out.str();
}

GeneratorConfig small_config(std::uint64_t seed) {
  GeneratorConfig g;
  g.n_patients = 60;
  g.dim = 6;
  g.seed = seed;
  g.noise = {0.4, 0.2, 0.1};
  return g;
}

}  // namespace

TEST(Split, StableAndRoughlyProportional) {
  EXPECT_EQ(split_for_patient("P000123"), split_for_patient("P000123"));
  std::array<std::size_t, 3> counts{};
  for (int i = 0; i < 20000; ++i) ++counts[static_cast<std::size_t>(split_for_patient("patient-" + std::to_string(i)))];
  EXPECT_NEAR(counts[0] / 20000.0, 0.8, 0.02);
  EXPECT_NEAR(counts[1] / 20000.0, 0.1, 0.02);
  EXPECT_NEAR(counts[2] / 20000.0, 0.1, 0.02);
}

TEST(DatasetAdd, ExpandsAndChecksPatients) {
  auto o = load("chest_abdomen.onto");
  Dataset ds(o, 2);
  ds.add("a", "p1", Split::kTrain, {0.0, 1.0}, o->set_of({*o->find("right mid lung")}));
  EXPECT_EQ(ds[0].expanded_labels.count(), 4u);
  EXPECT_THROW(ds.add("b", "p1", Split::kTest, {0.0, 1.0}, o->empty_set()), DatasetError);
  EXPECT_THROW(ds.add("c", "p2", Split::kTrain, {0.0}, o->empty_set()), DatasetError);
  EXPECT_THROW(ds.add("a", "p3", Split::kTrain, {0.0, 1.0}, o->empty_set()), DatasetError);
}

TEST(Vocabulary, NineTrainOccurrencesIsTooFew) {
  auto o = load("chest_abdomen.onto");
  Dataset ds(o, 1);
  int k = 0;
  auto add = [&](const std::string& label, Split split, int times) {
    for (int i = 0; i < times; ++i) {
      std::string p = "p" + std::to_string(k++);
      ds.add(p + "-L0", p, split, {0.0}, o->set_of({*o->find(label)}));
    }
  };
  add("hemangioma", Split::kTrain, 10);
  add("hemangioma", Split::kVal, 2);
  add("hemangioma", Split::kTest, 2);
  add("large", Split::kTrain, 9);
  add("large", Split::kVal, 2);
  add("large", Split::kTest, 2);
  auto f = filter_vocabulary(ds, {10, 2, 2});
  std::vector<std::string> kept;
  for (LabelId id : f.remap) kept.push_back(o->name(id));
  EXPECT_EQ(kept, (std::vector<std::string>{"neoplasm", "hemangioma"}));
  EXPECT_EQ(f.dataset.ontology().size(), 2u);
  // Samples that only carried "large" end up with no labels.
  EXPECT_TRUE(f.dataset[14].mined_labels.empty());
  EXPECT_EQ(f.dataset[0].expanded_labels.count(), 2u);
}

TEST(Vocabulary, RemapRoundTrip) {
  auto o = load("synthetic40.onto");
  auto g = small_config(5);
  g.n_patients = 400;
  auto ds = generate_synthetic(o, g);
  auto f = filter_vocabulary(ds, {10, 2, 2});
  EXPECT_EQ(serialize(apply_remap(ds, f.remap)), serialize(f.dataset));
}

TEST(Generator, SameSeedSameBytes) {
  auto o = load("synthetic40.onto");
  EXPECT_EQ(serialize(generate_synthetic(o, small_config(42))), serialize(generate_synthetic(o, small_config(42))));
  EXPECT_NE(serialize(generate_synthetic(o, small_config(42))), serialize(generate_synthetic(o, small_config(43))));
}

TEST(Generator, CleanSetsAreConsistent) {
  auto o = load("synthetic40.onto");
  auto ds = generate_synthetic(o, small_config(9));
  for (const auto& s : ds.samples()) {
    ASSERT_TRUE(s.clean_labels);
    const LabelSet& clean = *s.clean_labels;
    EXPECT_FALSE(clean.empty());
    EXPECT_EQ(o->expand(clean), clean);
    for (LabelId c : clean.ids()) EXPECT_FALSE(o->exclusive_with(c).intersects(clean));
    // Corruption injects at most one label outside the clean set.
    EXPECT_LE((s.mined_labels - clean).count(), 1u);
    EXPECT_EQ(s.features.size(), 6u);
  }
}

TEST(Generator, QuotaGivesExactSplitSizes) {
  auto o = load("synthetic40.onto");
  GeneratorConfig g;
  g.dim = 4;
  g.split_quota = {100, 15, 15};
  auto ds = generate_synthetic(o, g);
  EXPECT_EQ(ds.indices(Split::kTrain).size(), 200u);
  EXPECT_EQ(ds.indices(Split::kVal).size(), 30u);
  EXPECT_EQ(ds.indices(Split::kTest).size(), 30u);
}

TEST(Generator, NoCorruptionMeansMinedEqualsClean) {
  auto o = load("synthetic40.onto");
  auto g = small_config(1);
  g.noise = {};
  auto ds = generate_synthetic(o, g);
  for (const auto& s : ds.samples()) EXPECT_EQ(s.mined_labels, *s.clean_labels);
}

TEST(Generator, ParentDropRateIsRespected) {
  auto o = load("synthetic40.onto");
  auto g = small_config(3);
  g.n_patients = 2000;
  g.noise = {0.4, 0.0, 0.0};
  std::size_t inner = 0, dropped = 0;
  auto ds = generate_synthetic(o, g);
  for (const auto& s : ds.samples())
    for (LabelId c : s.clean_labels->ids())
      if (o->descendants(c).intersects(*s.clean_labels)) {
        ++inner;
        dropped += !s.mined_labels.test(c);
      }
  EXPECT_NEAR(static_cast<double>(dropped) / static_cast<double>(inner), 0.4, 0.02);
}

TEST(DatasetFile, RoundTrip) {
  auto o = load("synthetic40.onto");
  auto ds = generate_synthetic(o, small_config(2));
  auto text = serialize(ds);
  std::istringstream in(text);
  auto back = read_dataset(in, o);
  EXPECT_EQ(serialize(back), text);
  EXPECT_EQ(back.size(), ds.size());
  EXPECT_EQ(back[3].features, ds[3].features);
}

TEST(DatasetFile, MalformedLineReportsLine) {
  auto o = load("chest_abdomen.onto");
  std::ostringstream header;
  write_dataset(header, Dataset(o, 2));
  std::istringstream in(header.str() + "a\tp\ttrain\t0\t1.0\n");
  try {
    read_dataset(in, o, "x.tsv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_NE(std::string(e.what()).find("x.tsv"), std::string::npos) << e.what();
  }
}

TEST(ClassFrequencies, CountsPerSplit) {
  auto o = load("chest_abdomen.onto");
  Dataset ds(o, 1);
  ds.add("a", "p1", Split::kTrain, {0.0}, o->set_of({*o->find("lung nodule")}));
  ds.add("b", "p2", Split::kTrain, {0.0}, o->set_of({*o->find("nodule")}));
  ds.add("c", "p3", Split::kVal, {0.0}, o->set_of({*o->find("nodule")}));
  auto f = class_frequencies(ds, Split::kTrain);
  EXPECT_EQ(f[*o->find("nodule")].positives, 2u);
  EXPECT_EQ(f[*o->find("nodule")].negatives, 0u);
  EXPECT_EQ(f[*o->find("chest")].positives, 1u);
  EXPECT_EQ(f[*o->find("liver")].negatives, 2u);
  EXPECT_EQ(class_frequencies(ds, Split::kTrain, LabelView::kMined)[*o->find("chest")].positives, 0u);
}
