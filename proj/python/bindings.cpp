// Python surface of the core library. Structured values cross the boundary
// as JSON text; the gforge package decodes them.

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gforge/corpus.hpp"
#include "gforge/error.hpp"
#include "gforge/guidelines.hpp"
#include "gforge/llm_gateway.hpp"
#include "gforge/metrics.hpp"
#include "gforge/moderation.hpp"
#include "gforge/prompting.hpp"
#include "gforge/report.hpp"
#include "gforge/run_config.hpp"
#include "gforge/serialization.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

json corpus_json(const gforge::Corpus& corpus) {
  json docs = json::array();
  for (const auto& d : corpus.documents()) {
    const auto gold = corpus.gold(d.doc_id());
    docs.push_back(json{{"doc_id", d.doc_id()},
                        {"title", d.title()},
                        {"abstract", d.abstract()},
                        {"mentions", std::vector<gforge::Annotation>(gold.begin(), gold.end())}});
  }
  return docs;
}

gforge::MatchMode mode_arg(const std::string& name) {
  const auto m = gforge::parse_mode(name);
  if (!m) throw gforge::Error(gforge::Errc::InvalidArgument, "unknown match mode \"" + name + "\"");
  return *m;
}

std::vector<gforge::Annotation> annotations_arg(const std::string& text) {
  return json::parse(text).get<std::vector<gforge::Annotation>>();
}

// A Python callable answering prompts. Engine threads call it, so every
// touch of the Python object takes the GIL, including its destruction.
using Responder = std::optional<py::function>;

gforge::Engine::BackendFactory factory_for(const Responder& responder) {
  if (!responder) return {};
  auto fn = std::shared_ptr<py::function>(new py::function(*responder), [](py::function* p) {
    py::gil_scoped_acquire gil;
    delete p;
  });
  return [fn](const gforge::BackendConfig& c) -> std::unique_ptr<gforge::ChatBackend> {
    return std::make_unique<gforge::FunctionBackend>(
        [fn](const std::string& prompt) {
          py::gil_scoped_acquire gil;
          try {
            return (*fn)(prompt).cast<std::string>();
          } catch (py::error_already_set& e) {
            throw gforge::Error(gforge::Errc::BackendError, std::string("responder raised: ") + e.what());
          }
        },
        c.model, c.temperature);
  };
}

gforge::Engine make_engine(const std::string& store, const Responder& responder) {
  gforge::Engine::Options o;
  o.backend_factory = factory_for(responder);
  return gforge::Engine(gforge::RunStore(store), o);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "gforge core";

  // Deliberately leaked: lives as long as the interpreter.
  static PyObject* error_type = PyErr_NewException("gforge._core.GforgeError", PyExc_RuntimeError, nullptr);
  m.attr("GforgeError") = py::handle(error_type);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const gforge::Error& e) {
      py::object exc = py::handle(error_type)(py::str(e.what()));
      exc.attr("code") = py::str(std::string(gforge::errc_name(e.code())));
      exc.attr("detail") = py::str(e.detail());
      PyErr_SetObject(error_type, exc.ptr());
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def("version", [] { return std::string(GFORGE_VERSION); });

  // corpus
  m.def("load_corpus", [](const std::vector<std::filesystem::path>& paths) {
    return corpus_json(gforge::load_pubtator(paths)).dump();
  });
  m.def("parse_pubtator", [](const std::string& text) { return corpus_json(gforge::parse_pubtator(text)).dump(); });
  m.def("normalize_pubtator",
        [](const std::string& text) { return gforge::serialize_pubtator(gforge::parse_pubtator(text)); });
  m.def("corpus_stats", [](const std::vector<std::filesystem::path>& paths) {
    const gforge::Corpus c = gforge::load_pubtator(paths);
    return std::make_pair(c.size(), c.mention_count());
  });
  m.def("batch_permutation", &gforge::batch_permutation, py::arg("n"), py::arg("seed"));

  // metrics
  m.def("match_count", [](const std::string& pred, const std::string& gold, const std::string& mode) {
    return gforge::match_annotations(annotations_arg(pred), annotations_arg(gold), mode_arg(mode)).pairs.size();
  });
  m.def("score", [](const std::string& pred, const std::string& gold) {
    const auto scores = gforge::score_all_modes(annotations_arg(pred), annotations_arg(gold));
    json out = json::object();
    for (gforge::MatchMode mode : gforge::kAllModes) out[std::string(gforge::mode_name(mode))] = scores[gforge::mode_index(mode)];
    return out.dump();
  });
  m.def("format_score", &gforge::format_score);
  m.def(
      "evaluate",
      [](const std::filesystem::path& pred, const std::filesystem::path& gold, const std::string& format,
         const std::string& method) {
        const auto eval = gforge::evaluate_corpus(gforge::load_pubtator(pred), gforge::load_pubtator(gold));
        const std::vector<gforge::MethodScores> rows{gforge::method_scores(method, eval)};
        const auto f = format == "csv" ? gforge::TableFormat::Csv : gforge::TableFormat::Text;
        return gforge::render_overall_table(rows, f) + "\n" + gforge::render_category_table(rows, f);
      },
      py::arg("pred"), py::arg("gold"), py::arg("format") = "text", py::arg("method") = "LLM");

  // guidelines
  m.def("parse_guideline", [](const std::string& text) {
    const gforge::GuidelineDoc g = gforge::parse_guideline(text);
    json j = gforge::guideline_to_json(g);
    j["text"] = gforge::render(g);
    return j.dump();
  });
  m.def("apply_revision", [](const std::string& guideline_text, const std::string& revision) {
    const gforge::GuidelineDoc base = gforge::parse_guideline(guideline_text);
    const gforge::GuidelineDoc child = gforge::apply_revision(base, json::parse(revision).get<gforge::Revision>());
    json j = gforge::guideline_to_json(child);
    j["text"] = gforge::render(child);
    j["diff"] = gforge::render_diff(gforge::diff(base, child));
    return j.dump();
  });

  // prompting
  m.def(
      "annotator_prompt",
      [](const std::string& doc_id, const std::string& title, const std::string& abstract,
         const std::optional<std::string>& guideline_text) {
        const gforge::Document doc(doc_id, title, abstract);
        if (!guideline_text) return gforge::build_annotator_prompt(doc, nullptr);
        const gforge::GuidelineDoc g = gforge::parse_guideline(*guideline_text);
        return gforge::build_annotator_prompt(doc, &g);
      },
      py::arg("doc_id"), py::arg("title"), py::arg("abstract"), py::arg("guideline") = std::nullopt);
  m.def("parse_annotator_output", [](const std::string& raw, const std::string& doc_id, const std::string& title,
                                     const std::string& abstract) {
    const auto out = gforge::parse_annotator_output(raw, gforge::Document(doc_id, title, abstract));
    return json{{"annotations", out.annotations}, {"warnings", out.warnings}}.dump();
  });
  m.def("prompt_digest", &gforge::prompt_digest, py::arg("prompt"), py::arg("model") = "gpt-4o",
        py::arg("temperature") = 0.0);

  // runs
  m.def(
      "run",
      [](const std::filesystem::path& config_path, const std::string& store, const std::string& run_id,
         const std::vector<std::pair<std::string, std::string>>& overrides, const Responder& responder) {
        gforge::RunConfig config = gforge::load_run_config(config_path);
        for (const auto& [k, v] : overrides) gforge::apply_config_setting(config, k, v, std::filesystem::current_path());
        gforge::Engine engine = make_engine(store, responder);
        const std::string id = run_id.empty() ? gforge::make_run_id() : run_id;
        py::gil_scoped_release nogil;
        return gforge::run_to_json(engine.run(config, id)).dump();
      },
      py::arg("config"), py::arg("store"), py::arg("run_id") = "",
      py::arg("overrides") = std::vector<std::pair<std::string, std::string>>{}, py::arg("responder") = py::none());
  m.def(
      "resume",
      [](const std::string& store, const std::string& run_id, const Responder& responder) {
        gforge::Engine engine = make_engine(store, responder);
        py::gil_scoped_release nogil;
        return gforge::run_to_json(engine.resume(run_id)).dump();
      },
      py::arg("store"), py::arg("run_id"), py::arg("responder") = py::none());
  m.def(
      "review",
      [](const std::string& store, const std::string& run_id, const std::string& decision,
         const std::optional<std::string>& revision) {
        gforge::ReviewDecision d;
        const auto kind = gforge::parse_review_kind(decision);
        if (!kind) throw gforge::Error(gforge::Errc::InvalidArgument, "unknown decision \"" + decision + "\"");
        d.kind = *kind;
        if (revision) d.revision = json::parse(*revision).get<gforge::Revision>();
        gforge::Engine engine = make_engine(store, std::nullopt);
        return gforge::run_to_json(engine.apply_review(run_id, d)).dump();
      },
      py::arg("store"), py::arg("run_id"), py::arg("decision"), py::arg("revision") = std::nullopt);
  m.def("load_run", [](const std::string& store, const std::string& run_id) {
    return gforge::run_to_json(gforge::RunStore(store).load(run_id)).dump();
  });
  m.def("list_runs", [](const std::string& store) { return gforge::RunStore(store).list(); });
  m.def("guideline_lineage", [](const std::string& store, const std::string& run_id) {
    json out = json::array();
    for (const auto& e : gforge::RunStore(store).versions(run_id).lineage()) {
      out.push_back(json{{"version_id", e.version_id},
                         {"parent_version", e.parent_version ? json(*e.parent_version) : json(nullptr)}});
    }
    return out.dump();
  });
}
