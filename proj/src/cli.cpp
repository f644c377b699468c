#include "gforge/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "gforge/error.hpp"
#include "gforge/fsutil.hpp"
#include "gforge/moderation.hpp"
#include "gforge/report.hpp"
#include "gforge/serialization.hpp"
#include "gforge/service.hpp"

namespace gforge {

namespace {

struct BackendFlags {
  std::optional<std::string> backend;
  std::optional<std::string> cassette;
  std::optional<std::string> endpoint;
  std::optional<std::string> model;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--backend", backend, "live, replay or record")->check(CLI::IsMember({"live", "replay", "record"}));
    cmd->add_option("--cassette", cassette, "cassette file for replay/record");
    cmd->add_option("--endpoint", endpoint, "chat-completions URL for live/record");
    cmd->add_option("--model", model, "model name");
  }

  void apply(RunConfig& c, const std::filesystem::path& base) const {
    if (backend) apply_config_setting(c, "backend", *backend, base);
    if (cassette) apply_config_setting(c, "cassette", *cassette, base);
    if (endpoint) apply_config_setting(c, "endpoint", *endpoint, base);
    if (model) apply_config_setting(c, "model", *model, base);
  }
};

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string percent(double share) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", share * 100.0);
  return buf;
}

std::string short_version(const std::string& v) { return v.empty() ? "-" : v.substr(0, 12); }

std::string decision_text(const IterationResult& it) {
  if (it.phase != IterationPhase::Decided) return std::string(phase_name(it.phase));
  std::string out;
  if (!it.report) {
    out = "pass";
  } else if (it.review) {
    out = std::string(review_kind_name(it.review->kind));
  } else {
    out = "auto";
  }
  if (it.applied_revision) out += " -> " + short_version(*it.next_guideline_version);
  return out;
}

std::string render_trajectory(const RunRecord& r) {
  std::string out = "run " + r.run_id + ": " + std::string(run_status_name(r.status)) + ", " +
                    std::to_string(r.iterations.size()) + " iteration(s) over " + std::to_string(r.total_batches) +
                    " batch(es), threshold " + fixed2(r.config.gate_threshold) + "\n";
  if (r.error) out += "error: " + *r.error + "\n";
  out += "batch  iter  guideline     gate  discrepancies  decision\n";
  for (const auto& it : r.iterations) {
    char line[256];
    std::snprintf(line, sizeof line, "%-5zu  %-4zu  %-12s  %-4s  %-13zu  %s\n", it.batch_index + 1,
                  it.iteration_index + 1, short_version(it.guideline_version).c_str(),
                  it.gate ? fixed2(*it.gate).c_str() : "-", it.discrepancies.size(), decision_text(it).c_str());
    out += line;
  }
  return out;
}

std::string render_factors(const RunRecord& r) {
  ModerationReport all;
  for (const auto& it : r.iterations) {
    if (it.report) all.items.insert(all.items.end(), it.report->items.begin(), it.report->items.end());
  }
  if (all.items.empty()) return "influencing factors: no report items\n";
  std::string out = "influencing factors (" + std::to_string(all.items.size()) + " report items)\n";
  for (const auto& [factor, share] : classify_report_factors(all)) {
    char line[256];
    std::snprintf(line, sizeof line, "  %-62s %6s\n", std::string(factor_name(factor)).c_str(), percent(share).c_str());
    out += line;
  }
  return out;
}

std::string run_summary(const RunRecord& r) {
  std::string out = "run " + r.run_id + ": " + std::string(run_status_name(r.status)) + " after " +
                    std::to_string(r.iterations.size()) + " iteration(s)\n";
  if (r.status == RunStatus::AwaitingReview) {
    out += "iteration " + std::to_string(r.iterations.size() - 1) + " awaits review: gforge review " + r.run_id +
           " approve|reject|edit\n";
  }
  return out;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Guideline moderation workbench for LLM entity annotation", "gforge"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gforge 0.3.0");

  // validate
  std::vector<std::string> validate_paths;
  auto* validate = app.add_subcommand("validate", "parse a PubTator corpus and print its size");
  validate->add_option("corpus", validate_paths, "corpus files (merged in order)")->required();

  // annotate
  std::string annotate_corpus;
  std::optional<std::string> guideline_flag;
  std::string mode_flag = "guideline";
  std::optional<std::string> output_flag;
  std::optional<std::string> templates_flag;
  BackendFlags annotate_backend;
  auto* annotate = app.add_subcommand("annotate", "one-shot annotation of a corpus file (PubTator out)");
  annotate->add_option("corpus", annotate_corpus, "PubTator file")->required();
  annotate->add_option("--guideline", guideline_flag, "guideline file");
  annotate->add_option("--mode", mode_flag, "baseline or guideline")->check(CLI::IsMember({"baseline", "guideline"}));
  annotate->add_option("--output,-o", output_flag, "write predictions here instead of stdout");
  annotate->add_option("--templates", templates_flag, "directory overriding prompt templates");
  annotate_backend.add_to(annotate);

  // evaluate
  std::string pred_path;
  std::string gold_path;
  std::string format_flag = "text";
  std::string method_flag = "LLM";
  std::string table_flag = "both";
  auto* evaluate = app.add_subcommand("evaluate", "score predictions against gold under all four criteria");
  evaluate->add_option("pred", pred_path, "predicted PubTator file")->required();
  evaluate->add_option("gold", gold_path, "gold PubTator file")->required();
  evaluate->add_option("--format", format_flag, "text or csv")->check(CLI::IsMember({"text", "csv"}));
  evaluate->add_option("--method", method_flag, "row label");
  evaluate->add_option("--table", table_flag, "overall, category or both")
      ->check(CLI::IsMember({"overall", "category", "both"}));

  // run
  std::string config_path;
  std::string store_flag = "runs";
  std::optional<std::string> run_id_flag;
  std::optional<std::string> run_guideline, run_mode, run_review, run_threshold;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::size_t> run_batch_size;
  BackendFlags run_backend;
  auto* run = app.add_subcommand("run", "run the moderation loop from a config file");
  run->add_option("config", config_path, "key = value config file")->required();
  run->add_option("--store", store_flag, "run store directory");
  run->add_option("--run-id", run_id_flag, "run id (default: generated)");
  run->add_option("--guideline", run_guideline, "guideline file");
  run->add_option("--mode", run_mode, "baseline or guideline")->check(CLI::IsMember({"baseline", "guideline"}));
  run->add_option("--review", run_review, "auto or hitl")->check(CLI::IsMember({"auto", "hitl"}));
  run->add_option("--threshold", run_threshold, "gate threshold in (0, 1]");
  run->add_option("--seed", run_seed, "batch sampling seed");
  run->add_option("--batch-size", run_batch_size, "documents per batch");
  run_backend.add_to(run);

  // resume
  std::string run_id;
  auto* resume = app.add_subcommand("resume", "continue a stopped or failed run");
  resume->add_option("run_id", run_id, "run id")->required();
  resume->add_option("--store", store_flag, "run store directory");

  // review
  std::string decision_flag;
  std::optional<std::string> revision_flag;
  bool no_resume = false;
  auto* review = app.add_subcommand("review", "decide on the revision a run is waiting on");
  review->add_option("run_id", run_id, "run id")->required();
  review->add_option("decision", decision_flag, "approve, reject or edit")
      ->required()
      ->check(CLI::IsMember({"approve", "reject", "edit"}));
  review->add_option("--revision", revision_flag, "revision JSON file (edit)");
  review->add_option("--store", store_flag, "run store directory");
  review->add_flag("--no-resume", no_resume, "record the decision without continuing the run");

  // report
  auto* report = app.add_subcommand("report", "trajectory summary and influencing-factor distribution");
  report->add_option("run_id", run_id, "run id")->required();
  report->add_option("--store", store_flag, "run store directory");

  // serve
  ApiSession session;
  std::optional<std::string> static_flag;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP API over a run store (no authentication)");
  serve_cmd->add_option("--store", store_flag, "run store directory");
  serve_cmd->add_option("--host", session.host, "bind address (default loopback)");
  serve_cmd->add_option("--port", session.port, "port");
  serve_cmd->add_flag("--read-only", session.read_only, "reject mutating requests");
  serve_cmd->add_option("--static", static_flag, "directory of console assets served at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  const auto cwd = std::filesystem::current_path();
  try {
    if (validate->parsed()) {
      std::vector<std::filesystem::path> paths(validate_paths.begin(), validate_paths.end());
      const Corpus corpus = load_pubtator(paths);
      out << corpus.size() << " documents, " << corpus.mention_count() << " mentions\n";
      return 0;
    }

    if (annotate->parsed()) {
      RunConfig c;  // only the backend part matters here
      annotate_backend.apply(c, cwd);
      const Corpus corpus = load_pubtator(std::filesystem::path(annotate_corpus));
      std::optional<GuidelineDoc> guideline;
      if (mode_flag == "guideline") {
        if (!guideline_flag) throw Error(Errc::InvalidArgument, "guideline mode needs --guideline");
        guideline = load_guideline(*guideline_flag);
      }
      const PromptTemplates templates =
          templates_flag ? PromptTemplates::load(*templates_flag) : PromptTemplates::defaults();
      Gateway gateway(c.backend);
      Corpus predicted;
      for (const Document& doc : corpus.documents()) {
        predicted.add_document(doc);
        const Exchange ex = gateway.complete(build_annotator_prompt(doc, guideline ? &*guideline : nullptr, templates));
        ParsedOutput parsed;
        try {
          parsed = parse_annotator_output(ex.response, doc);
        } catch (const Error& e) {
          if (e.code() != Errc::Unparseable) throw;
          err << "warning: " << doc.doc_id() << ": " << e.detail() << "\n";
        }
        for (const auto& w : parsed.warnings) err << "warning: " << doc.doc_id() << ": " << w.reason << "\n";
        for (auto& a : parsed.annotations) predicted.add_annotation(std::move(a));
      }
      const std::string text = serialize_pubtator(predicted);
      if (output_flag) {
        fsutil::write_file_atomic(*output_flag, text);
      } else {
        out << text;
      }
      return 0;
    }

    if (evaluate->parsed()) {
      const Corpus pred = load_pubtator(std::filesystem::path(pred_path));
      const Corpus gold = load_pubtator(std::filesystem::path(gold_path));
      const std::vector<MethodScores> rows{method_scores(method_flag, evaluate_corpus(pred, gold))};
      const TableFormat format = *parse_table_format(format_flag);
      if (table_flag != "category") out << render_overall_table(rows, format);
      if (table_flag == "both") out << "\n";
      if (table_flag != "overall") out << render_category_table(rows, format);
      return 0;
    }

    if (run->parsed()) {
      RunConfig c = load_run_config(config_path);
      if (run_guideline) apply_config_setting(c, "guideline", *run_guideline, cwd);
      if (run_mode) apply_config_setting(c, "mode", *run_mode, cwd);
      if (run_review) apply_config_setting(c, "review", *run_review, cwd);
      if (run_threshold) apply_config_setting(c, "threshold", *run_threshold, cwd);
      if (run_seed) c.seed = *run_seed;
      if (run_batch_size) c.batch_size = *run_batch_size;
      run_backend.apply(c, cwd);
      Engine engine{RunStore(store_flag)};
      const RunRecord r = engine.run(c, run_id_flag.value_or(make_run_id()));
      out << run_summary(r);
      return 0;
    }

    if (resume->parsed()) {
      Engine engine{RunStore(store_flag)};
      out << run_summary(engine.resume(run_id));
      return 0;
    }

    if (review->parsed()) {
      ReviewDecision decision;
      decision.kind = *parse_review_kind(decision_flag);
      if (decision.kind == ReviewKind::Edit) {
        if (!revision_flag) throw Error(Errc::InvalidArgument, "edit needs --revision <file>");
        try {
          decision.revision = nlohmann::json::parse(fsutil::read_file(*revision_flag)).get<Revision>();
        } catch (const nlohmann::json::exception& e) {
          throw Error(Errc::InvalidArgument, *revision_flag + ": " + e.what());
        }
      }
      Engine engine{RunStore(store_flag)};
      RunRecord r = engine.apply_review(run_id, decision);
      if (!no_resume) r = engine.resume(run_id);
      out << run_summary(r);
      return 0;
    }

    if (report->parsed()) {
      const RunRecord r = RunStore(store_flag).load(run_id);
      out << render_trajectory(r) << "\n" << render_factors(r);
      return 0;
    }

    if (serve_cmd->parsed()) {
      session.store_root = store_flag;
      if (static_flag) session.static_dir = *static_flag;
      ApiServer server(session);
      const int port = server.bind();
      err << "serving " << session.store_root.string() << " on http://" << session.host << ":" << port
          << (session.read_only ? " (read-only)" : "") << "\n";
      server.listen();
      return 0;
    }
  } catch (const Error& e) {
    err << "gforge: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "gforge: Io: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace gforge
