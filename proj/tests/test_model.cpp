#include <gtest/gtest.h>

#include <limits>
#include <sstream>
#include <utility>

#include "lesanet/model.hpp"
#include "support.hpp"

using namespace lesanet;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

}  // namespace

TEST(Params, InitShapesAndIdentity) {
  auto p = ModelParams::init({8, 16, 5, 4}, 1);
  EXPECT_EQ(p.w1.rows(), 8);
  EXPECT_EQ(p.w1.cols(), 16);
  EXPECT_EQ(p.ws.cols(), 5);
  EXPECT_EQ(p.we.cols(), 4);
  EXPECT_TRUE(p.w.isIdentity(0.0));
  EXPECT_TRUE(p.b1.isZero(0.0));
  EXPECT_EQ(p.parameter_count(), 8u * 16 + 16 + 16 * 5 + 5 + 25 + 16 * 4 + 4);
  EXPECT_EQ(ModelParams::init({8, 16, 5, 4}, 1).w1, p.w1);
  EXPECT_NE(ModelParams::init({8, 16, 5, 4}, 2).w1, p.w1);
}

TEST(Forward, IdentityPropagationIsExact) {
  Rng rng(3);
  auto p = ModelParams::init({6, 10, 7, 5}, 3);
  auto c = forward(p, random_matrix(rng, 9, 6));
  EXPECT_TRUE((c.refined.array() == c.scores.array()).all());
  EXPECT_TRUE((c.refined_probs.array() == c.probs.array()).all());
}

TEST(Forward, EmbeddingsAreUnitLength) {
  Rng rng(4);
  auto p = ModelParams::init({6, 10, 7, 5}, 4);
  auto c = forward(p, random_matrix(rng, 9, 6));
  for (Eigen::Index i = 0; i < c.embedding.rows(); ++i) EXPECT_NEAR(c.embedding.row(i).norm(), 1.0, 1e-12);
}

TEST(Forward, RejectsBadInput) {
  auto p = ModelParams::init({6, 10, 7, 5}, 4);
  EXPECT_THROW(forward(p, Matrix::Zero(3, 5)), ModelError);
  Matrix x = Matrix::Zero(2, 6);
  x(1, 2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(forward(p, x), ModelError);
}

// Random linear functional of every output; central differences along random
// directions and per parameter.
TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(5);
  auto p = ModelParams::init({5, 9, 4, 3}, 5);
  p.w += 0.1 * random_matrix(rng, 4, 4);
  p.b1.setConstant(0.1);
  Matrix x = random_matrix(rng, 7, 5);
  Matrix gs = random_matrix(rng, 7, 4), gr = random_matrix(rng, 7, 4), ge = random_matrix(rng, 7, 3);
  auto loss = [&](const ModelParams& q) {
    auto c = forward(q, x);
    return (c.scores.array() * gs.array()).sum() + (c.refined.array() * gr.array()).sum() +
           (c.embedding.array() * ge.array()).sum();
  };
  auto cache = forward(p, x);
  ASSERT_FALSE((cache.hidden_pre.array().abs() < 1e-4).any());
  auto g = backward(p, cache, {gs, gr, ge});
  auto s = lesanet::testing::check_all_parameters(p, g, loss, 1e-5);
  EXPECT_LT(s.worst, 1e-4) << s.where;

  // Random direction through all parameters at once.
  auto dir = ModelParams::zeros_like(p);
  double analytic = 0.0;
  auto db = dir.blocks();
  auto gb = std::as_const(g).blocks();
  std::normal_distribution<double> n(0.0, 1.0);
  for (std::size_t b = 0; b < db.size(); ++b)
    for (std::size_t k = 0; k < db[b].values.size(); ++k) {
      db[b].values[k] = n(rng);
      analytic += db[b].values[k] * gb[b].values[k];
    }
  auto shifted = [&](double t) {
    auto q = p;
    auto qb = q.blocks();
    for (std::size_t b = 0; b < qb.size(); ++b)
      for (std::size_t k = 0; k < qb[b].values.size(); ++k) qb[b].values[k] += t * db[b].values[k];
    return loss(q);
  };
  double numeric = (shifted(1e-5) - shifted(-1e-5)) / 2e-5;
  EXPECT_LT(lesanet::testing::relative_error(analytic, numeric), 1e-4);
}

TEST(Backward, ReluSubgradientIsZeroAtZero) {
  auto p = ModelParams::init({1, 1, 1, 1}, 0);
  p.w1(0, 0) = 1.0;
  p.b1(0) = 0.0;
  Matrix x = Matrix::Zero(1, 1);
  auto c = forward(p, x);
  auto g = backward(p, c, {Matrix::Ones(1, 1), {}, {}});
  EXPECT_EQ(g.b1(0), 0.0);
}

TEST(Predict, DecisionsAreExpanded) {
  auto onto = LabelOntology::build(read_ontology_file(lesanet::testing::data_path("chest_abdomen.onto")));
  LabelId rml = *onto.find("right mid lung");
  Matrix probs = Matrix::Constant(1, static_cast<Eigen::Index>(onto.size()), 0.1);
  probs(0, rml) = 0.9;
  std::vector<double> thresholds(onto.size(), 0.5);
  auto d = decide(probs, thresholds, onto);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0], onto.expand(onto.set_of({rml})));
  EXPECT_EQ(d[0].count(), 4u);
}

TEST(Predict, ThresholdIsInclusive) {
  auto onto = LabelOntology::build(read_ontology_file(lesanet::testing::data_path("chest_abdomen.onto")));
  Matrix probs = Matrix::Constant(1, static_cast<Eigen::Index>(onto.size()), 0.5);
  std::vector<double> thresholds(onto.size(), 0.5);
  EXPECT_EQ(decide(probs, thresholds, onto)[0].count(), onto.size());
}

TEST(Checkpoint, RoundTripIsExact) {
  Checkpoint ck;
  ck.params = ModelParams::init({4, 6, 3, 2}, 9);
  ck.params.w(0, 1) = 0.1 + 0.2;
  ck.label_remap = {0, 4, 7};
  ck.thresholds = {0.25, 1.0 / 3.0, std::nextafter(1.0, 2.0)};
  ck.use_refined = false;
  std::ostringstream out;
  write_checkpoint(out, ck);
  std::istringstream in(out.str());
  auto back = read_checkpoint(in);
  EXPECT_EQ(back.params.w1, ck.params.w1);
  EXPECT_EQ(back.params.w, ck.params.w);
  EXPECT_EQ(back.params.be, ck.params.be);
  EXPECT_EQ(back.label_remap, ck.label_remap);
  EXPECT_EQ(back.thresholds, ck.thresholds);
  EXPECT_FALSE(back.use_refined);
  std::ostringstream again;
  write_checkpoint(again, back);
  EXPECT_EQ(again.str(), out.str());
}

TEST(Checkpoint, TruncatedFileIsRejected) {
  Checkpoint ck;
  ck.params = ModelParams::init({4, 6, 3, 2}, 9);
  ck.label_remap = {0, 1, 2};
  ck.thresholds = {0.5, 0.5, 0.5};
  std::ostringstream out;
  write_checkpoint(out, ck);
  std::string text = out.str();
  std::istringstream in(text.substr(0, text.size() / 2));
  EXPECT_ANY_THROW(read_checkpoint(in));
}
