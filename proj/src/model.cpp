#include "lesanet/model.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "lesanet/dataset.hpp"
#include "lesanet/random.hpp"

namespace lesanet {

ModelParams ModelParams::init(const ModelDims& d, std::uint64_t seed) {
  if (d.input == 0 || d.hidden == 0 || d.labels == 0 || d.embedding == 0)
    throw ModelError("model dimensions must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](std::size_t rows, std::size_t cols, double scale) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * normal(rng);
    return m;
  };
  ModelParams p;
  p.w1 = gaussian(d.input, d.hidden, std::sqrt(2.0 / static_cast<double>(d.input)));
  p.b1 = RowVector::Zero(static_cast<Eigen::Index>(d.hidden));
  p.ws = gaussian(d.hidden, d.labels, 0.1 / std::sqrt(static_cast<double>(d.hidden)));
  p.bs = RowVector::Zero(static_cast<Eigen::Index>(d.labels));
  p.w = Matrix::Identity(static_cast<Eigen::Index>(d.labels), static_cast<Eigen::Index>(d.labels));
  p.we = gaussian(d.hidden, d.embedding, 1.0 / std::sqrt(static_cast<double>(d.hidden)));
  p.be = RowVector::Zero(static_cast<Eigen::Index>(d.embedding));
  return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& p) {
  ModelParams z;
  z.w1 = Matrix::Zero(p.w1.rows(), p.w1.cols());
  z.b1 = RowVector::Zero(p.b1.size());
  z.ws = Matrix::Zero(p.ws.rows(), p.ws.cols());
  z.bs = RowVector::Zero(p.bs.size());
  z.w = Matrix::Zero(p.w.rows(), p.w.cols());
  z.we = Matrix::Zero(p.we.rows(), p.we.cols());
  z.be = RowVector::Zero(p.be.size());
  return z;
}

ModelDims ModelParams::dims() const {
  return {static_cast<std::size_t>(w1.rows()), static_cast<std::size_t>(w1.cols()),
          static_cast<std::size_t>(ws.cols()), static_cast<std::size_t>(we.cols())};
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks()) n += b.values.size();
  return n;
}

namespace {

template <class M>
std::span<double> span_of(M& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}
template <class M>
std::span<const double> cspan_of(const M& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw ModelError(std::string("non-finite values in ") + what);
}

}  // namespace

std::vector<ParamBlock> ModelParams::blocks() {
  return {{"w1", span_of(w1)}, {"b1", span_of(b1)}, {"ws", span_of(ws)}, {"bs", span_of(bs)},
          {"w", span_of(w)},   {"we", span_of(we)}, {"be", span_of(be)}};
}

std::vector<ConstParamBlock> ModelParams::blocks() const {
  return {{"w1", cspan_of(w1)}, {"b1", cspan_of(b1)}, {"ws", cspan_of(ws)}, {"bs", cspan_of(bs)},
          {"w", cspan_of(w)},   {"we", cspan_of(we)}, {"be", cspan_of(be)}};
}

Matrix sigmoid(const Matrix& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

ForwardCache forward(const ModelParams& p, const Matrix& batch) {
  const auto d = p.dims();
  if (static_cast<std::size_t>(batch.cols()) != d.input)
    throw ModelError("batch has " + std::to_string(batch.cols()) + " features, model expects " +
                     std::to_string(d.input));
  if (p.b1.size() != p.w1.cols() || p.ws.rows() != p.w1.cols() || p.bs.size() != p.ws.cols() ||
      p.w.rows() != p.ws.cols() || p.w.cols() != p.ws.cols() || p.we.rows() != p.w1.cols() ||
      p.be.size() != p.we.cols())
    throw ModelError("inconsistent parameter shapes");
  require_finite(batch, "input batch");

  ForwardCache c;
  c.input = batch;
  c.hidden_pre = (batch * p.w1).rowwise() + p.b1;
  c.hidden = c.hidden_pre.cwiseMax(0.0);
  c.scores = (c.hidden * p.ws).rowwise() + p.bs;
  c.probs = sigmoid(c.scores);
  c.refined = c.scores * p.w.transpose();
  c.refined_probs = sigmoid(c.refined);
  c.embedding_raw = (c.hidden * p.we).rowwise() + p.be;
  c.embedding_norm = c.embedding_raw.rowwise().norm().transpose();
  c.embedding = c.embedding_raw;
  for (Eigen::Index i = 0; i < c.embedding.rows(); ++i)
    if (c.embedding_norm(i) > 0.0) c.embedding.row(i) /= c.embedding_norm(i);
  return c;
}

ParamGrads backward(const ModelParams& p, const ForwardCache& c, const Upstream& up) {
  ParamGrads g = ModelParams::zeros_like(p);
  const Eigen::Index batch = c.scores.rows();
  auto sized = [batch](const Matrix& m, Eigen::Index cols) {
    return m.size() == 0 || (m.rows() == batch && m.cols() == cols);
  };
  if (!sized(up.d_scores, c.scores.cols()) || !sized(up.d_refined, c.refined.cols()) ||
      !sized(up.d_embedding, c.embedding.cols()))
    throw ModelError("upstream gradient shape does not match the forward cache");

  Matrix d_scores = up.d_scores.size() ? up.d_scores : Matrix::Zero(batch, c.scores.cols());
  if (up.d_refined.size()) {
    g.w = up.d_refined.transpose() * c.scores;
    d_scores += up.d_refined * p.w;
  }

  Matrix d_hidden = d_scores * p.ws.transpose();
  g.ws = c.hidden.transpose() * d_scores;
  g.bs = d_scores.colwise().sum();

  if (up.d_embedding.size()) {
    Matrix d_raw = Matrix::Zero(batch, c.embedding.cols());
    for (Eigen::Index i = 0; i < batch; ++i) {
      double norm = c.embedding_norm(i);
      if (norm <= 0.0) continue;
      auto e = c.embedding.row(i);
      auto de = up.d_embedding.row(i);
      d_raw.row(i) = (de - e * e.dot(de)) / norm;
    }
    g.we = c.hidden.transpose() * d_raw;
    g.be = d_raw.colwise().sum();
    d_hidden += d_raw * p.we.transpose();
  }

  Matrix d_pre = d_hidden.cwiseProduct(
      c.hidden_pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
  g.w1 = c.input.transpose() * d_pre;
  g.b1 = d_pre.colwise().sum();
  return g;
}

std::vector<LabelSet> decide(const Matrix& probs, std::span<const double> thresholds,
                             const LabelOntology& ontology) {
  const auto n_labels = static_cast<std::size_t>(probs.cols());
  if (thresholds.size() != n_labels || ontology.size() != n_labels)
    throw ModelError("threshold count does not match label count");
  std::vector<LabelSet> out;
  out.reserve(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    LabelSet s(n_labels);
    for (std::size_t c = 0; c < n_labels; ++c)
      if (probs(i, static_cast<Eigen::Index>(c)) >= thresholds[c]) s.set(static_cast<LabelId>(c));
    out.push_back(ontology.expand(s));
  }
  return out;
}

Prediction predict(const ModelParams& params, const Matrix& features,
                   std::span<const double> thresholds, const LabelOntology& ontology,
                   bool use_refined) {
  auto cache = forward(params, features);
  Prediction p;
  p.probs = use_refined ? std::move(cache.refined_probs) : std::move(cache.probs);
  p.decided = decide(p.probs, thresholds, ontology);
  return p;
}

namespace {

constexpr std::string_view kMagic = "lesanet-checkpoint";
constexpr int kVersion = 1;

void write_values(std::ostream& out, std::span<const double> v, std::size_t per_line) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    out << format_double(v[i]);
    out << (((i + 1) % per_line == 0 || i + 1 == v.size()) ? '\n' : ' ');
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  const auto d = ck.params.dims();
  out << kMagic << ' ' << kVersion << '\n';
  out << "dims " << d.input << ' ' << d.hidden << ' ' << d.labels << ' ' << d.embedding << '\n';
  out << "use_refined " << (ck.use_refined ? 1 : 0) << '\n';
  out << "remap " << ck.label_remap.size();
  for (auto id : ck.label_remap) out << ' ' << id;
  out << '\n';
  out << "thresholds " << ck.thresholds.size() << '\n';
  if (!ck.thresholds.empty()) write_values(out, ck.thresholds, ck.thresholds.size());
  for (const auto& b : ck.params.blocks()) {
    out << "block " << b.name << ' ' << b.values.size() << '\n';
    std::size_t per_line = b.name == "w1" ? d.hidden : b.name == "ws" || b.name == "w" ? d.labels
                         : b.name == "we" ? d.embedding : b.values.size();
    write_values(out, b.values, per_line);
  }
}

Checkpoint read_checkpoint(std::istream& in, const std::string& source) {
  auto fail = [&](const std::string& what) { return ModelError(source + ": " + what); };
  std::string word;
  int version = 0;
  if (!(in >> word >> version) || word != kMagic) throw fail("not a lesanet checkpoint");
  if (version != kVersion) throw fail("unsupported checkpoint version " + std::to_string(version));
  ModelDims d;
  if (!(in >> word >> d.input >> d.hidden >> d.labels >> d.embedding) || word != "dims")
    throw fail("missing dims");
  Checkpoint ck;
  ck.params = ModelParams::zeros_like(ModelParams::init(d, 0));
  ck.params.w.setZero();
  int refined = 1;
  if (!(in >> word >> refined) || word != "use_refined") throw fail("missing use_refined");
  ck.use_refined = refined != 0;
  std::size_t n = 0;
  if (!(in >> word >> n) || word != "remap") throw fail("missing remap");
  ck.label_remap.resize(n);
  for (auto& id : ck.label_remap)
    if (!(in >> id)) throw fail("truncated remap");
  if (!(in >> word >> n) || word != "thresholds") throw fail("missing thresholds");
  auto read_double = [&](double& v) {
    std::string tok;
    if (!(in >> tok)) throw fail("truncated values");
    auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (r.ec != std::errc() || r.ptr != tok.data() + tok.size()) throw fail("bad value '" + tok + "'");
  };
  ck.thresholds.resize(n);
  for (auto& t : ck.thresholds) read_double(t);
  for (auto& b : ck.params.blocks()) {
    std::string name;
    if (!(in >> word >> name >> n) || word != "block" || name != b.name || n != b.values.size())
      throw fail("expected block " + std::string(b.name));
    for (auto& v : b.values) read_double(v);
  }
  return ck;
}

}  // namespace lesanet
