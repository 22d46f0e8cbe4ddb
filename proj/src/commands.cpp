#include "lesanet/commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "lesanet/text.hpp"

namespace lesanet {

namespace fs = std::filesystem;

namespace {

std::ifstream open_in(const std::string& path, const char* what) {
  if (path.empty()) throw std::runtime_error(std::string("no ") + what + " path configured");
  std::ifstream in(path);
  if (!in) throw std::runtime_error(std::string("cannot open ") + what + " '" + path + "'");
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

std::vector<LabelSet> label_sets(const Dataset& ds, std::span<const std::size_t> idx, LabelView view) {
  std::vector<LabelSet> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(labels_of(ds[i], view));
  return out;
}

const Matrix& scored(const ForwardCache& c, bool use_refined) { return use_refined ? c.refined_probs : c.probs; }

}  // namespace

std::shared_ptr<const LabelOntology> load_ontology(const std::string& path) {
  auto in = open_in(path, "ontology");
  return std::make_shared<const LabelOntology>(LabelOntology::build(parse_ontology(in, path)));
}

Dataset load_dataset(const std::string& path, std::shared_ptr<const LabelOntology> ontology) {
  auto in = open_in(path, "dataset");
  return read_dataset(in, std::move(ontology), path);
}

std::size_t apply_mined_labels(Dataset& ds, const std::vector<MinedLabelRow>& rows, bool relevance_filter) {
  std::vector<LabelSet> sets(ds.size(), ds.ontology().empty_set());
  std::size_t unknown = 0;
  for (const auto& r : rows) {
    auto idx = ds.find(r.lesion_id);
    if (!idx) {
      ++unknown;
      continue;
    }
    if (r.label >= ds.ontology().size() || ds.ontology().name(r.label) != r.label_name)
      throw DatasetError("mined label row for " + r.lesion_id + " does not match the ontology: " +
                         std::to_string(r.label) + " " + r.label_name);
    if (relevance_filter && r.relevance == Relevance::kIrrelevant) continue;
    sets[*idx].set(r.label);
  }
  for (std::size_t i = 0; i < ds.size(); ++i) ds.set_mined_labels(i, sets[i]);
  return unknown;
}

FitResult fit(const Dataset& source, const RunConfig& cfg) {
  cfg.validate();
  auto filtered = filter_vocabulary(source, cfg.vocab);
  const Dataset& ds = filtered.dataset;

  ModelDims dims;
  dims.input = ds.dim();
  dims.hidden = cfg.hidden;
  dims.labels = ds.ontology().size();
  dims.embedding = cfg.embedding;

  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed + 1;
  auto trained = train(ds, ModelParams::init(dims, cfg.seed), tc);

  auto val = ds.indices(Split::kVal);
  if (val.empty()) throw DatasetError("validation split is empty; thresholds cannot be calibrated");
  auto cache = forward(trained.params, feature_matrix(ds, val));
  auto truth = label_sets(ds, val, LabelView::kExpanded);
  auto thresholds = calibrate_thresholds(scored(cache, cfg.eval.use_refined), truth);

  FitResult out;
  out.checkpoint.params = std::move(trained.params);
  out.checkpoint.label_remap = std::move(filtered.remap);
  out.checkpoint.thresholds = std::move(thresholds.values);
  out.checkpoint.use_refined = cfg.eval.use_refined;
  out.log = std::move(trained.log);
  return out;
}

Evaluation evaluate_checkpoint(const Dataset& source, const Checkpoint& ckpt, const RunConfig& cfg) {
  Dataset ds = apply_remap(source, ckpt.label_remap);
  const auto& onto = ds.ontology();
  auto test = ds.indices(Split::kTest);
  if (test.empty()) throw DatasetError("test split is empty");
  auto gallery = ds.indices(Split::kTrain);

  auto cache = forward(ckpt.params, feature_matrix(ds, test));
  const Matrix& probs = scored(cache, ckpt.use_refined);
  auto decided = decide(probs, ckpt.thresholds, onto);
  auto gallery_emb = forward(ckpt.params, feature_matrix(ds, gallery)).embedding;
  std::vector<std::string> gallery_patients;
  for (std::size_t i : gallery) gallery_patients.push_back(ds[i].patient_id);

  auto report_for = [&](LabelView view, const char* name) {
    std::vector<LabelSet> truth;
    for (std::size_t i : test) truth.push_back(onto.expand(labels_of(ds[i], view)));
    auto r = evaluate(probs, decided, truth, ckpt.thresholds, onto, name);
    double acg_sum = 0.0;
    for (std::size_t q = 0; q < test.size(); ++q) {
      auto hits = retrieve(cache.embedding.row(static_cast<Eigen::Index>(q)), ds[test[q]].patient_id, gallery_emb,
                           gallery_patients, cfg.eval.acg_k);
      std::vector<LabelSet> got;
      for (std::size_t h : hits.indices) got.push_back(onto.expand(labels_of(ds[gallery[h]], view)));
      acg_sum += acg(truth[q], got, cfg.eval.acg_k);
    }
    r.acg = acg_sum / static_cast<double>(test.size());
    r.acg_k = cfg.eval.acg_k;
    return r;
  };

  Evaluation out{report_for(LabelView::kExpanded, "mined"), std::nullopt};
  bool have_clean = std::all_of(test.begin(), test.end(), [&](std::size_t i) { return ds[i].clean_labels; }) &&
                    std::all_of(gallery.begin(), gallery.end(), [&](std::size_t i) { return ds[i].clean_labels; });
  if (have_clean) out.clean = report_for(LabelView::kClean, "clean");
  return out;
}

void prepare_run_dir(const fs::path& out_dir, const RunConfig& cfg) {
  if (fs::exists(out_dir)) {
    if (!fs::is_directory(out_dir)) throw std::runtime_error("'" + out_dir.string() + "' is not a directory");
    if (!fs::is_empty(out_dir))
      throw std::runtime_error("output directory '" + out_dir.string() + "' is not empty");
  } else {
    fs::create_directories(out_dir);
  }
  auto out = open_out(out_dir / "resolved_config.ini");
  write_run_config(out, cfg);
}

int cmd_ontology(OntologyAction action, const std::string& ontology_path, const std::string& sets_path,
                 std::ostream& out, std::ostream& err) {
  OntologyDefinition def;
  try {
    auto in = open_in(ontology_path, "ontology");
    def = parse_ontology(in, ontology_path);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  auto report = validate(def);
  if (!report.ok()) {
    err << ontology_path << ": invalid ontology\n";
    report.print(err);
    return 1;
  }
  auto onto = LabelOntology::build(std::move(def));

  switch (action) {
    case OntologyAction::kValidate:
      out << "ok: " << onto.size() << " labels, " << onto.definition().parent_edges.size() << " parent edges, "
          << onto.definition().exclusive_pairs.size() << " exclusive pairs, " << onto.exclusivity_closure().size()
          << " closure pairs\n";
      return 0;
    case OntologyAction::kClosure:
      for (const auto& p : onto.exclusivity_closure())
        out << onto.name(p.first) << " <-> " << onto.name(p.second) << '\n';
      return 0;
    case OntologyAction::kExpand: {
      std::ifstream in(sets_path);
      if (!in) {
        err << "error: cannot open label sets '" << sets_path << "'\n";
        return 2;
      }
      std::string line;
      std::size_t line_no = 0;
      std::ostringstream buf;
      while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (normalize_name(line).empty()) continue;
        LabelSet set = onto.empty_set();
        std::stringstream items(line);
        std::string item;
        while (std::getline(items, item, ',')) {
          if (normalize_name(item).empty()) continue;
          auto id = onto.find(item);
          if (!id) {
            err << sets_path << ":" << line_no << ": unknown label '" << normalize_name(item) << "'\n";
            return 2;
          }
          set.set(*id);
        }
        std::string joined;
        for (LabelId id : onto.expand(set).ids()) {
          if (!joined.empty()) joined += ", ";
          joined += onto.name(id);
        }
        buf << joined << '\n';
      }
      out << buf.str();
      return 0;
    }
  }
  return 2;
}

int cmd_mine(const std::string& sentences_path, const std::string& ontology_path, const std::string& out_path,
             std::ostream& err) {
  return guarded(err, [&] {
    auto onto = load_ontology(ontology_path);
    auto in = open_in(sentences_path, "sentences file");
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
    auto stats = mine_file(in, *onto, out, err);
    err << "mined " << stats.rows << " rows from " << stats.lines << " lines, " << stats.skipped << " skipped\n";
    return 0;
  });
}

int cmd_gen(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto onto = load_ontology(cfg.paths.ontology);
    GeneratorConfig g = cfg.gen;
    g.seed = cfg.seed;
    prepare_run_dir(out_dir, cfg);
    auto ds = generate_synthetic(onto, g);
    auto file = open_out(out_dir / "dataset.tsv");
    write_dataset(file, ds);
    out << "generated " << ds.size() << " lesions (train " << ds.indices(Split::kTrain).size() << ", val "
        << ds.indices(Split::kVal).size() << ", test " << ds.indices(Split::kTest).size() << ") -> "
        << (out_dir / "dataset.tsv").string() << '\n';
    return 0;
  });
}

int cmd_train(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto onto = load_ontology(cfg.paths.ontology);
    auto ds = load_dataset(cfg.paths.dataset, onto);
    if (!cfg.paths.mined_labels.empty()) {
      auto in = open_in(cfg.paths.mined_labels, "mined label file");
      auto unknown = apply_mined_labels(ds, read_mined_labels(in, cfg.paths.mined_labels), cfg.relevance_filter);
      if (unknown) err << "warning: " << unknown << " mined rows name lesions not in the dataset\n";
    }
    prepare_run_dir(out_dir, cfg);
    auto result = fit(ds, cfg);

    auto log = open_out(out_dir / "train_log.tsv");
    write_train_log_header(log);
    for (const auto& row : result.log) {
      write_train_log_row(log, row);
      out << "epoch " << row.epoch << " loss " << fixed6(row.mean.total) << '\n';
    }
    auto ck = open_out(out_dir / "checkpoint.txt");
    write_checkpoint(ck, result.checkpoint);
    out << "trained " << result.checkpoint.label_remap.size() << " labels -> "
        << (out_dir / "checkpoint.txt").string() << '\n';
    return 0;
  });
}

int cmd_eval(const RunConfig& cfg, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto onto = load_ontology(cfg.paths.ontology);
    auto ds = load_dataset(cfg.paths.dataset, onto);
    auto in = open_in(cfg.paths.checkpoint, "checkpoint");
    auto ckpt = read_checkpoint(in, cfg.paths.checkpoint);
    prepare_run_dir(out_dir, cfg);
    auto ev = evaluate_checkpoint(ds, ckpt, cfg);

    auto text = open_out(out_dir / "report.txt");
    auto kv = open_out(out_dir / "report.kv");
    write_report_text(text, ev.mined);
    write_report_kv(kv, ev.mined);
    if (ev.clean) {
      text << '\n';
      write_report_text(text, *ev.clean);
      write_report_kv(kv, *ev.clean);
    }
    for (const EvalReport* r : {&ev.mined, ev.clean ? &*ev.clean : nullptr}) {
      if (!r) continue;
      out << r->truth_name << ": macro_auc " << fixed6(r->macro_auc) << " macro_f1 " << fixed6(r->macro_f1)
          << " macro_recall " << fixed6(r->macro_recall) << '\n';
    }
    return 0;
  });
}

int cmd_retrieve(const RunConfig& cfg, const fs::path& out_dir, std::size_t k, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, [&] {
    if (k == 0) throw ConfigError("k must be positive");
    auto onto = load_ontology(cfg.paths.ontology);
    auto source = load_dataset(cfg.paths.dataset, onto);
    auto in = open_in(cfg.paths.checkpoint, "checkpoint");
    auto ckpt = read_checkpoint(in, cfg.paths.checkpoint);
    prepare_run_dir(out_dir, cfg);

    Dataset ds = apply_remap(source, ckpt.label_remap);
    auto queries = ds.indices(Split::kTest);
    auto gallery = ds.indices(Split::kTrain);
    if (queries.empty()) throw DatasetError("test split is empty");
    auto q_emb = forward(ckpt.params, feature_matrix(ds, queries)).embedding;
    auto g_emb = forward(ckpt.params, feature_matrix(ds, gallery)).embedding;
    std::vector<std::string> patients;
    for (std::size_t i : gallery) patients.push_back(ds[i].patient_id);

    auto file = open_out(out_dir / "retrieval.tsv");
    file << "query\trank\tlesion\tdistance\toverlap\n";
    double total = 0.0;
    std::size_t short_count = 0;
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const Sample& query = ds[queries[q]];
      RowVector e = q_emb.row(static_cast<Eigen::Index>(q));
      auto hits = retrieve(e, query.patient_id, g_emb, patients, k);
      if (hits.short_gallery) ++short_count;
      std::vector<LabelSet> got;
      for (std::size_t r = 0; r < hits.indices.size(); ++r) {
        const Sample& g = ds[gallery[hits.indices[r]]];
        got.push_back(g.expanded_labels);
        double d = (g_emb.row(static_cast<Eigen::Index>(hits.indices[r])) - e).norm();
        file << query.lesion_id << '\t' << r + 1 << '\t' << g.lesion_id << '\t' << fixed6(d) << '\t'
             << query.expanded_labels.intersection_count(g.expanded_labels) << '\n';
      }
      total += acg(query.expanded_labels, got, k);
    }
    if (short_count) err << "warning: " << short_count << " queries had fewer than " << k << " candidates\n";
    out << "ACG@" << k << " = " << fixed6(total / static_cast<double>(queries.size())) << " over "
        << queries.size() << " queries\n";
    return 0;
  });
}

}  // namespace lesanet
