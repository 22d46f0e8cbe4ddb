#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

#include "lesanet/commands.hpp"
#include "lesanet/text.hpp"

namespace py = pybind11;
using namespace lesanet;

namespace {

// pybind11 holders cannot be shared_ptr<const T>; the object is never mutated.
using OntologyPtr = std::shared_ptr<LabelOntology>;

OntologyPtr mutable_ptr(std::shared_ptr<const LabelOntology> p) { return std::const_pointer_cast<LabelOntology>(p); }

LabelSet names_to_set(const LabelOntology& o, const std::vector<std::string>& names) {
  LabelSet s = o.empty_set();
  for (const auto& n : names) {
    auto id = o.find(n);
    if (!id) throw py::key_error("unknown label: " + n);
    s.set(*id);
  }
  return s;
}

std::vector<std::string> set_to_names(const LabelOntology& o, const LabelSet& s) {
  std::vector<std::string> out;
  for (LabelId id : s.ids()) out.push_back(o.name(id));
  return out;
}

std::vector<std::uint8_t> as_bytes(const std::vector<bool>& v) { return {v.begin(), v.end()}; }

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["truth"] = r.truth_name;
  d["samples"] = r.samples;
  d["macro_auc"] = r.macro_auc;
  d["macro_precision"] = r.macro_precision;
  d["macro_recall"] = r.macro_recall;
  d["macro_f1"] = r.macro_f1;
  d["evaluated"] = r.evaluated;
  if (r.acg) d[py::str("acg@" + std::to_string(r.acg_k))] = *r.acg;
  py::dict per;
  for (const auto& l : r.labels) {
    py::dict m;
    m["positives"] = l.positives;
    m["auc"] = l.auc ? py::cast(*l.auc) : py::none();
    m["threshold"] = l.threshold;
    m["precision"] = l.prf.precision;
    m["recall"] = l.prf.recall;
    m["f1"] = l.prf.f1;
    per[py::str(l.name)] = m;
  }
  d["labels"] = per;
  return d;
}

template <class F>
py::tuple run_captured(F&& f) {
  std::ostringstream out, err;
  int rc = f(out, err);
  return py::make_tuple(rc, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_lesanet, m) {
  m.doc() = "Lesion label ontology, mining, training and evaluation";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DatasetError>(m, "DatasetError", PyExc_ValueError);
  py::register_exception<MiningError>(m, "MiningError", PyExc_ValueError);

  py::class_<LabelOntology, OntologyPtr>(m, "Ontology")
      .def_static(
          "load", [](const std::string& path) { return mutable_ptr(load_ontology(path)); }, py::arg("path"))
      .def_static(
          "parse",
          [](const std::string& text) {
            std::istringstream in(text);
            return std::make_shared<LabelOntology>(LabelOntology::build(parse_ontology(in, "<string>")));
          },
          py::arg("text"))
      .def("__len__", &LabelOntology::size)
      .def_property_readonly("names",
                             [](const LabelOntology& o) {
                               std::vector<std::string> out;
                               for (LabelId i = 0; i < o.size(); ++i) out.push_back(o.name(i));
                               return out;
                             })
      .def("find", &LabelOntology::find, py::arg("name"))
      .def("category", [](const LabelOntology& o, LabelId id) { return std::string(to_string(o.category(id))); })
      .def("parents",
           [](const LabelOntology& o, const std::string& name) {
             auto id = o.find(name);
             if (!id) throw py::key_error("unknown label: " + name);
             std::vector<std::string> out;
             for (LabelId p : o.parents(*id)) out.push_back(o.name(p));
             return out;
           })
      .def(
          "expand",
          [](const LabelOntology& o, const std::vector<std::string>& names) {
            return set_to_names(o, o.expand(names_to_set(o, names)));
          },
          py::arg("names"))
      .def("closure",
           [](const LabelOntology& o) {
             std::vector<std::pair<std::string, std::string>> out;
             for (const auto& [a, b] : o.exclusivity_closure()) out.emplace_back(o.name(a), o.name(b));
             return out;
           })
      .def(
          "reliable_negatives",
          [](const LabelOntology& o, const std::vector<std::string>& names) {
            return set_to_names(o, o.reliable_negatives(names_to_set(o, names)));
          },
          py::arg("positives"));

  m.def(
      "validate_ontology",
      [](const std::string& text) {
        std::istringstream in(text);
        std::vector<std::string> out;
        for (const auto& v : validate(parse_ontology(in, "<string>")).violations)
          out.push_back(std::string(to_string(v.kind)) + ": " + v.message);
        return out;
      },
      py::arg("text"), "Violation messages; empty when the ontology is valid.");

  m.def("lemmatize", [](const std::string& w) { return lemmatize(w); });
  m.def("tokenize", [](const std::string& s, bool keep) { return tokenize(s, keep); }, py::arg("sentence"),
        py::arg("keep_delimiters") = false);
  m.def(
      "mine_sentence",
      [](const std::string& sentence, const LabelOntology& o) {
        MentionMatcher matcher(o);
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& lr : classify_relevance(mine_sentence(sentence, matcher)))
          out.emplace_back(o.name(lr.label), std::string(to_string(lr.relevance)));
        return out;
      },
      py::arg("sentence"), py::arg("ontology"));

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init([](const std::vector<std::string>& overrides) { return run_config_from_overrides(overrides); }),
           py::arg("overrides") = std::vector<std::string>{})
      .def_static("load", &load_run_config, py::arg("path"), py::arg("overrides") = std::vector<std::string>{})
      .def_static("ablation", &ablation_overrides, py::arg("no_spl") = false, py::arg("no_rhem") = false,
                  py::arg("no_expand") = false, py::arg("no_relevance_filter") = false,
                  py::arg("no_triplet") = false, py::arg("rhem_all_negatives") = false,
                  "Override strings for the ablation switches.")
      .def_readwrite("seed", &RunConfig::seed)
      .def_property(
          "ontology_path", [](const RunConfig& c) { return c.paths.ontology; },
          [](RunConfig& c, const std::string& p) { c.paths.ontology = p; })
      .def_property(
          "dataset_path", [](const RunConfig& c) { return c.paths.dataset; },
          [](RunConfig& c, const std::string& p) { c.paths.dataset = p; })
      .def_property(
          "checkpoint_path", [](const RunConfig& c) { return c.paths.checkpoint; },
          [](RunConfig& c, const std::string& p) { c.paths.checkpoint = p; })
      .def("to_ini", [](const RunConfig& c) {
        std::ostringstream out;
        write_run_config(out, c);
        return out.str();
      });

  py::class_<Dataset>(m, "Dataset")
      .def_static(
          "load", [](const std::string& path, OntologyPtr o) { return load_dataset(path, std::move(o)); },
          py::arg("path"), py::arg("ontology"))
      .def("__len__", &Dataset::size)
      .def_property_readonly("dim", &Dataset::dim)
      .def_property_readonly("ontology", [](const Dataset& d) { return mutable_ptr(d.ontology_ptr()); })
      .def("lesion_ids",
           [](const Dataset& d) {
             std::vector<std::string> out;
             for (const auto& s : d.samples()) out.push_back(s.lesion_id);
             return out;
           })
      .def("splits",
           [](const Dataset& d) {
             std::vector<std::string> out;
             for (const auto& s : d.samples()) out.emplace_back(to_string(s.split));
             return out;
           })
      .def("features",
           [](const Dataset& d) {
             Matrix x(static_cast<Eigen::Index>(d.size()), static_cast<Eigen::Index>(d.dim()));
             for (std::size_t i = 0; i < d.size(); ++i)
               for (std::size_t j = 0; j < d.dim(); ++j)
                 x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d[i].features[j];
             return x;
           })
      .def(
          "labels",
          [](const Dataset& d, const std::string& view) {
            LabelView v = view == "mined"      ? LabelView::kMined
                          : view == "expanded" ? LabelView::kExpanded
                          : view == "clean"    ? LabelView::kClean
                                               : throw py::value_error("view must be mined, expanded or clean");
            std::vector<std::vector<std::string>> out;
            for (const auto& s : d.samples()) {
              if (v == LabelView::kClean && !s.clean_labels) throw py::value_error("sample has no clean labels");
              out.push_back(set_to_names(d.ontology(), labels_of(s, v)));
            }
            return out;
          },
          py::arg("view") = "mined")
      .def("to_tsv", [](const Dataset& d) {
        std::ostringstream out;
        write_dataset(out, d);
        return out.str();
      });

  m.def(
      "generate",
      [](OntologyPtr o, const RunConfig& cfg) {
        GeneratorConfig g = cfg.gen;
        g.seed = cfg.seed;
        return generate_synthetic(std::move(o), g);
      },
      py::arg("ontology"), py::arg("config"), "Synthetic dataset seeded by config.seed.");

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_readonly("thresholds", &Checkpoint::thresholds)
      .def_readonly("label_remap", &Checkpoint::label_remap)
      .def_readonly("use_refined", &Checkpoint::use_refined)
      .def_property_readonly("propagation", [](const Checkpoint& c) { return c.params.w; })
      .def("to_text",
           [](const Checkpoint& c) {
             std::ostringstream out;
             write_checkpoint(out, c);
             return out.str();
           })
      .def_static("from_text", [](const std::string& text) {
        std::istringstream in(text);
        return read_checkpoint(in, "<string>");
      });

  m.def(
      "fit",
      [](const Dataset& d, const RunConfig& cfg) {
        py::gil_scoped_release nogil;
        return fit(d, cfg).checkpoint;
      },
      py::arg("dataset"), py::arg("config"), "Vocabulary filter, training and validation calibration.");
  m.def(
      "evaluate",
      [](const Dataset& d, const Checkpoint& c, const RunConfig& cfg) {
        Evaluation e = [&] {
          py::gil_scoped_release nogil;
          return evaluate_checkpoint(d, c, cfg);
        }();
        py::dict out;
        out["mined"] = report_dict(e.mined);
        if (e.clean) out["clean"] = report_dict(*e.clean);
        return out;
      },
      py::arg("dataset"), py::arg("checkpoint"), py::arg("config"));

  m.def(
      "auc",
      [](const std::vector<double>& s, const std::vector<bool>& y) { return auc(s, as_bytes(y)); },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "calibrate_threshold",
      [](const std::vector<double>& s, const std::vector<bool>& y) { return calibrate_threshold(s, as_bytes(y)); },
      py::arg("scores"), py::arg("labels"));
  m.def("f1_from_counts", &f1_from_counts, py::arg("tp"), py::arg("fp"), py::arg("fn"));
  m.attr("NEVER_FIRES") = kNeverFires;
  m.def(
      "acg",
      [](const std::vector<LabelId>& query, const std::vector<std::vector<LabelId>>& retrieved, std::size_t k,
         std::size_t width) {
        std::vector<LabelSet> sets;
        for (const auto& r : retrieved) sets.push_back(LabelSet::of(width, r));
        return acg(LabelSet::of(width, query), sets, k);
      },
      py::arg("query"), py::arg("retrieved"), py::arg("k"), py::arg("num_labels"));
  m.def(
      "retrieve",
      [](const RowVector& q, const std::string& patient, const Matrix& gallery,
         const std::vector<std::string>& patients, std::size_t k) {
        if (static_cast<std::size_t>(gallery.rows()) != patients.size())
          throw py::value_error("one patient id per gallery row");
        return retrieve(q, patient, gallery, patients, k).indices;
      },
      py::arg("query"), py::arg("query_patient"), py::arg("gallery"), py::arg("gallery_patients"), py::arg("k"));

  // Command wrappers return (exit_status, stdout, stderr).
  m.def(
      "cmd_ontology",
      [](const std::string& action, const std::string& onto, const std::string& sets) {
        OntologyAction a = action == "validate" ? OntologyAction::kValidate
                           : action == "expand" ? OntologyAction::kExpand
                           : action == "closure"
                               ? OntologyAction::kClosure
                               : throw py::value_error("action must be validate, expand or closure");
        return run_captured([&](std::ostream& o, std::ostream& e) { return cmd_ontology(a, onto, sets, o, e); });
      },
      py::arg("action"), py::arg("ontology"), py::arg("sets") = "");
  m.def(
      "cmd_mine",
      [](const std::string& sentences, const std::string& onto, const std::string& out) {
        return run_captured([&](std::ostream&, std::ostream& e) { return cmd_mine(sentences, onto, out, e); });
      },
      py::arg("sentences"), py::arg("ontology"), py::arg("out"));
  m.def("cmd_gen", [](const RunConfig& c, const std::filesystem::path& dir) {
    return run_captured([&](std::ostream& o, std::ostream& e) { return cmd_gen(c, dir, o, e); });
  });
  m.def("cmd_train", [](const RunConfig& c, const std::filesystem::path& dir) {
    return run_captured([&](std::ostream& o, std::ostream& e) { return cmd_train(c, dir, o, e); });
  });
  m.def("cmd_eval", [](const RunConfig& c, const std::filesystem::path& dir) {
    return run_captured([&](std::ostream& o, std::ostream& e) { return cmd_eval(c, dir, o, e); });
  });
  m.def(
      "cmd_retrieve",
      [](const RunConfig& c, const std::filesystem::path& dir, std::size_t k) {
        return run_captured([&](std::ostream& o, std::ostream& e) { return cmd_retrieve(c, dir, k, o, e); });
      },
      py::arg("config"), py::arg("out_dir"), py::arg("k") = 5);
}
