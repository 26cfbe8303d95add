// Python bindings for the main operations: sampling plans, prompt assembly,
// answer parsing, fixture generation, cue rendering, and the evaluation
// harness. Reports and run configurations cross the boundary as JSON text;
// the package wrapper turns them into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazemark/backends.hpp"
#include "gazemark/dataset.hpp"
#include "gazemark/errors.hpp"
#include "gazemark/evaluator.hpp"
#include "gazemark/frame_sampler.hpp"
#include "gazemark/prompting.hpp"
#include "gazemark/strategy.hpp"

namespace py = pybind11;

namespace {

using namespace gazemark;

nlohmann::json parse_json(const std::string& text, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string(what) + " is not valid JSON: " + e.what());
  }
}

RunConfig config_from_json(const nlohmann::json& doc,
                           const std::filesystem::path& suite_dir) {
  RunConfig config;
  config.strategy = parse_strategy(doc.value("strategy", "som_gaze"));
  config.sampling.lambda = doc.value("lambda", 0.1);
  config.sampling.sample_size = doc.value("n", 15);
  config.seed = doc.value("seed", std::uint64_t{0});
  config.concurrency = doc.value("concurrency", 4);
  config.cache_dir = doc.value("cache_dir", std::string{});
  config.work_dir = doc.value("work_dir", std::string{});
  config.masks_endpoint = doc.value("masks_endpoint", std::string{});
  config.masks_timeout_seconds = doc.value("masks_timeout", 30.0);

  const nlohmann::json backend = doc.value("backend",
                                           nlohmann::json::object());
  config.backend.kind =
      parse_backend_kind(backend.value("kind", "mock_random"));
  config.backend.endpoint = backend.value("endpoint", std::string{});
  config.backend.model_id = backend.value("model", std::string{});
  config.backend.api_key_env = backend.value("api_key_env", std::string{});
  config.backend.temperature = backend.value("temperature", 0.0);
  config.backend.timeout_seconds = backend.value("timeout", 30.0);
  config.backend.max_retries = backend.value("retries", 3);
  config.backend.requests_per_minute = backend.value("rpm", 0.0);
  config.backend.fps = backend.value("fps", 0.0);
  config.backend.encoder_path = backend.value("encoder",
                                              std::string{"ffmpeg"});
  config.backend.fixed_response = backend.value("fixed_response",
                                                std::string{});
  config.backend.script_path = backend.value("script", std::string{});
  if (config.backend.kind == BackendKind::mock_scripted &&
      config.backend.script_path.empty()) {
    config.backend.script_path = oracle_script_path(suite_dir);
  }
  return config;
}

GridSpec grid_from_json(const nlohmann::json& doc, BackendKind kind) {
  if (doc.contains("preset")) {
    return expand_preset(doc.at("preset").get<std::string>(),
                         kind == BackendKind::video_fps);
  }
  GridSpec grid;
  for (const auto& name :
       doc.value("strategies", std::vector<std::string>{})) {
    grid.strategies.push_back(parse_strategy(name));
  }
  grid.lambdas = doc.value("lambdas", std::vector<double>{});
  grid.sample_sizes = doc.value("sample_sizes", std::vector<int>{});
  grid.fps_values = doc.value("fps_values", std::vector<double>{});
  return grid;
}

std::string run_eval_json(const std::filesystem::path& suite_dir,
                          const std::string& config_json) {
  const auto doc = parse_json(config_json, "run configuration");
  const RunConfig config = config_from_json(doc, suite_dir);
  const auto records = load_manifest(manifest_path(suite_dir));
  Evaluator evaluator(suite_dir, config);
  const Report report = evaluator.run_eval(records);
  return emit_report(report, ReportFormat::json);
}

std::string run_grid_json(const std::filesystem::path& suite_dir,
                          const std::string& config_json) {
  const auto doc = parse_json(config_json, "grid configuration");
  RunConfig config = config_from_json(doc, suite_dir);
  const GridSpec grid = grid_from_json(doc, config.backend.kind);
  if (config.backend.kind == BackendKind::video_fps &&
      !(config.backend.fps > 0.0) && !grid.fps_values.empty()) {
    config.backend.fps = grid.fps_values.front();
  }
  const auto records = load_manifest(manifest_path(suite_dir));
  Evaluator evaluator(suite_dir, config);
  const Report report = evaluator.run_grid(records, grid);
  return emit_report(report, ReportFormat::json);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Gaze-trail and region-mark cue compositing with a multiple-choice "
      "VQA evaluation harness";
  m.attr("__version__") = kArtifactVersion;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<EnvironmentError>(m, "EnvironmentFault",
                                           PyExc_RuntimeError);
  py::register_exception<NetworkError>(m, "NetworkError",
                                       PyExc_ConnectionError);
  py::register_exception<ContractError>(m, "ContractError",
                                        PyExc_RuntimeError);

  m.def(
      "sample_plan",
      [](int frames, double lambda_, int n, std::uint64_t seed) {
        SamplingConfig config;
        config.lambda = lambda_;
        config.sample_size = n;
        config.seed = seed;
        const SamplingPlan plan = draw_plan(frames, config);
        py::dict out;
        out["indices"] = plan.frame_indices;
        out["probabilities"] = plan.probabilities;
        return out;
      },
      py::arg("frames"), py::arg("lambda_") = 0.1, py::arg("n") = 15,
      py::arg("seed") = 0,
      "Draw a frame sampling plan: recency-biased selection that always "
      "keeps the final frame.");

  m.def("selection_probabilities", &compute_weights, py::arg("frames"),
        py::arg("lambda_"),
        "Per-frame selection probabilities over indices 0..frames-2.");

  m.def(
      "build_prompt",
      [](const std::string& question, const std::vector<std::string>& candidates,
         const std::string& strategy) {
        QuestionRecord record;
        record.question_text = question;
        record.candidates = candidates;
        return build_prompt(record, parse_strategy(strategy)).text;
      },
      py::arg("question"), py::arg("candidates"),
      py::arg("strategy") = "som_gaze",
      "Assemble the strategy-conditioned prompt text.");

  m.def(
      "parse_answer",
      [](const std::string& text, const std::vector<std::string>& candidates) {
        return parse_answer(text, candidates);
      },
      py::arg("text"), py::arg("candidates"),
      "Map model output to a candidate index, or None to abstain.");

  m.def(
      "normalize_answer_text",
      [](const std::string& text) { return normalize_answer_text(text); },
      py::arg("text"),
      "Lowercase, strip punctuation and leading articles, collapse spaces.");

  m.def(
      "make_fixtures",
      [](const std::filesystem::path& out_dir, int count,
         std::uint64_t seed) {
        return make_synthetic_suite(count, seed, out_dir).size();
      },
      py::arg("out_dir"), py::arg("count") = 1000, py::arg("seed") = 0,
      py::call_guard<py::gil_scoped_release>(),
      "Generate a deterministic synthetic question suite; returns the "
      "question count.");

  m.def(
      "validate_suite",
      [](const std::filesystem::path& suite_dir) {
        const SuiteValidation result = validate_suite(suite_dir);
        py::dict out;
        out["question_count"] = result.question_count;
        out["warnings"] = result.warnings;
        return out;
      },
      py::arg("suite_dir"), "Check every clip, frame, and gaze track loads.");

  m.def(
      "render_cues",
      [](const std::filesystem::path& suite_dir, const std::string& clip_id,
         const std::filesystem::path& out_dir, const std::string& strategy,
         double lambda_, int n, std::uint64_t seed, bool all_frames) {
        SamplingConfig sampling;
        sampling.lambda = lambda_;
        sampling.sample_size = n;
        sampling.seed = seed;
        return render_cue_frames(suite_dir, clip_id, out_dir,
                                 parse_strategy(strategy), sampling,
                                 all_frames);
      },
      py::arg("suite_dir"), py::arg("clip_id"), py::arg("out_dir"),
      py::arg("strategy") = "som_gaze", py::arg("lambda_") = 0.1,
      py::arg("n") = 15, py::arg("seed") = 0, py::arg("all_frames") = false,
      py::call_guard<py::gil_scoped_release>(),
      "Composite one clip's cue frames to numbered PNGs; returns the "
      "rendered frame indices.");

  m.def("run_eval_json", &run_eval_json, py::arg("suite_dir"),
        py::arg("config_json"), py::call_guard<py::gil_scoped_release>(),
        "Evaluate one cell; returns the report as JSON text.");

  m.def("run_grid_json", &run_grid_json, py::arg("suite_dir"),
        py::arg("config_json"), py::call_guard<py::gil_scoped_release>(),
        "Run an ablation grid; returns the report as JSON text.");

  m.def(
      "expand_preset_json",
      [](const std::string& preset, bool video_backend) {
        const GridSpec grid = expand_preset(preset, video_backend);
        nlohmann::json doc;
        auto strategies = nlohmann::json::array();
        for (const auto& strategy : grid.strategies) {
          strategies.push_back(strategy_name(strategy));
        }
        doc["strategies"] = strategies;
        doc["lambdas"] = grid.lambdas;
        doc["sample_sizes"] = grid.sample_sizes;
        doc["fps_values"] = grid.fps_values;
        return doc.dump();
      },
      py::arg("preset"), py::arg("video_backend") = false,
      "Expand a named grid (table1..table4) to its axes, as JSON text.");

  m.def(
      "convert_report",
      [](const std::string& report_json, const std::string& format) {
        return emit_report(parse_report_json(report_json),
                           parse_report_format(format));
      },
      py::arg("report_json"), py::arg("format"),
      "Re-emit a JSON report as json, csv, or markdown.");
}
