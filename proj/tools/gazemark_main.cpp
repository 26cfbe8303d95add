// Command-line front end: fixture generation, sampling-plan inspection,
// cue-frame rendering, prompt preview, single evaluations, ablation grids,
// and report conversion. Exit codes: 0 success, 1 validation or
// configuration error, 2 runtime failure, 3 finished but degraded.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gazemark/backends.hpp"
#include "gazemark/dataset.hpp"
#include "gazemark/errors.hpp"
#include "gazemark/evaluator.hpp"
#include "gazemark/frame_sampler.hpp"
#include "gazemark/image.hpp"
#include "gazemark/masks.hpp"
#include "gazemark/prompting.hpp"
#include "gazemark/strategy.hpp"
#include "gazemark/visual_prompting.hpp"

namespace {

using namespace gazemark;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitDegraded = 3;

void emit_error(bool as_json, const std::string& kind,
                const std::string& message) {
  if (as_json) {
    nlohmann::json doc;
    doc["error"] = message;
    doc["kind"] = kind;
    std::cerr << doc.dump() << "\n";
  } else {
    std::cerr << "gazemark: error: " << message << "\n";
  }
}

// Runs one subcommand body, translating exceptions into exit codes:
// bad inputs or settings are usage errors, everything environmental is a
// runtime failure.
int guarded(bool as_json, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    emit_error(as_json, "config", e.what());
    return kExitUsage;
  } catch (const FormatError& e) {
    emit_error(as_json, "format", e.what());
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    emit_error(as_json, "invalid_argument", e.what());
    return kExitUsage;
  } catch (const std::domain_error& e) {
    emit_error(as_json, "invalid_argument", e.what());
    return kExitUsage;
  } catch (const IoError& e) {
    emit_error(as_json, "io", e.what());
    return kExitRuntime;
  } catch (const NetworkError& e) {
    emit_error(as_json, "network", e.what());
    return kExitRuntime;
  } catch (const EnvironmentError& e) {
    emit_error(as_json, "environment", e.what());
    return kExitRuntime;
  } catch (const ContractError& e) {
    emit_error(as_json, "contract", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    emit_error(as_json, "runtime", e.what());
    return kExitRuntime;
  }
}

void write_output(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw IoError("cannot open output file: " + out_path);
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing output file: " + out_path);
}

struct FixturesOptions {
  std::string out;
  int count = 1000;
  std::uint64_t seed = 0;
};

struct SampleOptions {
  int frames = 0;
  double lambda = 0.1;
  int n = 15;
  std::uint64_t seed = 0;
};

struct RenderOptions {
  std::string suite;
  std::string clip;
  std::string strategy = "som_gaze";
  std::string out;
  double lambda = 0.1;
  int n = 15;
  std::uint64_t seed = 0;
  bool all_frames = false;
};

struct PromptOptions {
  std::string suite;
  std::string question;
  std::string strategy = "som_gaze";
};

// Options shared by `run` and `grid`; the axis/strategy fields are
// registered only on the subcommand they belong to.
struct EvalOptions {
  std::string suite;
  std::string strategy = "som_gaze";
  std::string backend = "mock_random";
  std::string endpoint;
  std::string model;
  std::string api_key_env;
  std::string encoder = "ffmpeg";
  std::string script;
  std::string fixed_response;
  std::string masks_endpoint;
  std::string cache_dir;
  std::string work_dir;
  std::string out;
  std::string format = "json";
  std::string trace;
  std::string preset;
  std::vector<std::string> strategies;
  std::vector<double> lambdas;
  std::vector<int> sample_sizes;
  std::vector<double> fps_grid;
  double lambda = 0.1;
  double fps = 0.0;
  double temperature = 0.0;
  double timeout = 30.0;
  double masks_timeout = 30.0;
  double rpm = 0.0;
  int n = 15;
  int retries = 3;
  int concurrency = 4;
  std::uint64_t seed = 0;
};

struct ReportOptions {
  std::string in;
  std::string out;
  std::string format = "markdown";
};

void add_eval_flags(CLI::App* cmd, EvalOptions& o) {
  cmd->add_option("--suite", o.suite,
                  "suite directory (manifest.jsonl + clips/)")
      ->required();
  cmd->add_option("--backend", o.backend,
                  "backend kind: frame_list, video_fps, mock_fixed, "
                  "mock_random, mock_scripted")
      ->capture_default_str();
  cmd->add_option("--endpoint", o.endpoint,
                  "inference service base URL, e.g. http://host:port");
  cmd->add_option("--model", o.model, "model identifier sent to the service");
  cmd->add_option("--api-key-env", o.api_key_env,
                  "name of the environment variable holding the API key "
                  "(the key itself never appears in any config)");
  cmd->add_option("--temperature", o.temperature, "sampling temperature")
      ->capture_default_str();
  cmd->add_option("--timeout", o.timeout, "HTTP timeout in seconds")
      ->capture_default_str();
  cmd->add_option("--retries", o.retries,
                  "retry budget for transient failures")
      ->capture_default_str();
  cmd->add_option("--rpm", o.rpm,
                  "request rate limit per minute (0 = unlimited)")
      ->capture_default_str();
  cmd->add_option("--encoder", o.encoder,
                  "video encoder executable (video_fps backends)")
      ->capture_default_str();
  cmd->add_option("--script", o.script,
                  "mock_scripted response file "
                  "(default: the suite's oracle script)");
  cmd->add_option("--fixed-response", o.fixed_response,
                  "mock_fixed canned response text");
  cmd->add_option("--masks-endpoint", o.masks_endpoint,
                  "segmentation service URL "
                  "(default: masks are read from the suite)");
  cmd->add_option("--masks-timeout", o.masks_timeout,
                  "segmentation request timeout in seconds")
      ->capture_default_str();
  cmd->add_option("--seed", o.seed,
                  "run seed; every per-question draw derives from it")
      ->capture_default_str();
  cmd->add_option("--concurrency", o.concurrency,
                  "questions evaluated in parallel within a cell")
      ->capture_default_str();
  cmd->add_option("--cache-dir", o.cache_dir,
                  "response cache directory (unset = caching off)");
  cmd->add_option("--work-dir", o.work_dir,
                  "video staging directory (unset = system temp)");
  cmd->add_option("--out", o.out, "write the report here instead of stdout");
  cmd->add_option("--format", o.format, "report format: json, csv, markdown")
      ->capture_default_str();
  cmd->add_option("--trace", o.trace,
                  "append JSONL progress events to this file");
}

RunConfig make_run_config(const EvalOptions& o) {
  RunConfig config;
  config.backend.kind = parse_backend_kind(o.backend);
  config.backend.endpoint = o.endpoint;
  config.backend.model_id = o.model;
  config.backend.api_key_env = o.api_key_env;
  config.backend.temperature = o.temperature;
  config.backend.timeout_seconds = o.timeout;
  config.backend.max_retries = o.retries;
  config.backend.requests_per_minute = o.rpm;
  config.backend.encoder_path = o.encoder;
  config.backend.fps = o.fps;
  config.backend.fixed_response = o.fixed_response;
  config.backend.script_path = o.script;
  if (config.backend.kind == BackendKind::mock_scripted && o.script.empty()) {
    config.backend.script_path = oracle_script_path(o.suite);
  }
  config.seed = o.seed;
  config.concurrency = o.concurrency;
  if (!o.cache_dir.empty()) config.cache_dir = o.cache_dir;
  if (!o.work_dir.empty()) config.work_dir = o.work_dir;
  config.masks_endpoint = o.masks_endpoint;
  config.masks_timeout_seconds = o.masks_timeout;
  return config;
}

// Opens the trace file when one was requested.
std::ofstream attach_trace(const std::string& path) {
  std::ofstream stream;
  if (path.empty()) return stream;
  stream.open(path, std::ios::app);
  if (!stream) throw IoError("cannot open trace file: " + path);
  return stream;
}

int cmd_fixtures(const FixturesOptions& o) {
  const auto records = make_synthetic_suite(o.count, o.seed, o.out);
  nlohmann::json doc;
  doc["suite"] = o.out;
  doc["questions"] = records.size();
  doc["seed"] = o.seed;
  std::cout << doc.dump() << "\n";
  return kExitOk;
}

int cmd_sample(const SampleOptions& o) {
  SamplingConfig config;
  config.lambda = o.lambda;
  config.sample_size = o.n;
  config.seed = o.seed;
  const SamplingPlan plan = draw_plan(o.frames, config);
  nlohmann::json doc;
  doc["indices"] = plan.frame_indices;
  doc["probabilities"] = plan.probabilities;
  doc["lambda"] = o.lambda;
  doc["n"] = o.n;
  doc["seed"] = o.seed;
  std::cout << doc.dump() << "\n";
  return kExitOk;
}

int cmd_render(const RenderOptions& o) {
  const StrategyFlags strategy = parse_strategy(o.strategy);
  SamplingConfig sampling;
  sampling.lambda = o.lambda;
  sampling.sample_size = o.n;
  sampling.seed = o.seed;
  const std::vector<int> indices = render_cue_frames(
      o.suite, o.clip, o.out, strategy, sampling, o.all_frames);

  nlohmann::json doc;
  doc["dir"] = o.out;
  doc["written"] = indices.size();
  doc["frame_indices"] = indices;
  doc["strategy"] = strategy_name(strategy);
  std::cout << doc.dump() << "\n";
  return kExitOk;
}

int cmd_prompt(const PromptOptions& o) {
  const auto records = load_manifest(manifest_path(o.suite));
  if (records.empty()) throw ConfigError("suite manifest has no questions");
  const QuestionRecord* record = nullptr;
  if (o.question.empty()) {
    record = &records.front();
  } else {
    for (const auto& candidate : records) {
      if (candidate.id == o.question) {
        record = &candidate;
        break;
      }
    }
    if (!record) {
      throw ConfigError("question id not found in manifest: " + o.question);
    }
  }
  const PromptBundle bundle = build_prompt(*record,
                                           parse_strategy(o.strategy));
  std::cout << bundle.text << "\n";
  return kExitOk;
}

int cmd_run(const EvalOptions& o) {
  RunConfig config = make_run_config(o);
  config.strategy = parse_strategy(o.strategy);
  config.sampling.lambda = o.lambda;
  config.sampling.sample_size = o.n;

  const auto records = load_manifest(manifest_path(o.suite));
  Evaluator evaluator(o.suite, config);
  std::ofstream trace_stream = attach_trace(o.trace);
  if (trace_stream.is_open()) {
    evaluator.set_trace_sink([&trace_stream](const std::string& line) {
      trace_stream << line << '\n';
    });
  }
  const Report report = evaluator.run_eval(records);
  write_output(emit_report(report, parse_report_format(o.format)), o.out);
  return report.degraded ? kExitDegraded : kExitOk;
}

int cmd_grid(const EvalOptions& o) {
  RunConfig config = make_run_config(o);

  GridSpec grid;
  const bool custom_axes = !o.strategies.empty() || !o.lambdas.empty() ||
                           !o.sample_sizes.empty() || !o.fps_grid.empty();
  if (!o.preset.empty()) {
    if (custom_axes) {
      throw ConfigError("--preset cannot be combined with custom axis flags");
    }
    grid = expand_preset(o.preset,
                         config.backend.kind == BackendKind::video_fps);
  } else {
    if (!custom_axes) {
      throw ConfigError(
          "grid needs --preset or custom axes (--strategies plus either "
          "--lambdas/--sample-sizes or --fps-grid)");
    }
    for (const auto& name : o.strategies) {
      grid.strategies.push_back(parse_strategy(name));
    }
    grid.lambdas = o.lambdas;
    grid.sample_sizes = o.sample_sizes;
    grid.fps_values = o.fps_grid;
  }

  // A video backend validates fps at construction; grid cells each override
  // the rate, so seed the client with the first axis value.
  if (config.backend.kind == BackendKind::video_fps &&
      !(config.backend.fps > 0.0) && !grid.fps_values.empty()) {
    config.backend.fps = grid.fps_values.front();
  }

  const auto records = load_manifest(manifest_path(o.suite));
  Evaluator evaluator(o.suite, config);
  std::ofstream trace_stream = attach_trace(o.trace);
  if (trace_stream.is_open()) {
    evaluator.set_trace_sink([&trace_stream](const std::string& line) {
      trace_stream << line << '\n';
    });
  }
  const Report report = evaluator.run_grid(records, grid);
  write_output(emit_report(report, parse_report_format(o.format)), o.out);
  return report.degraded ? kExitDegraded : kExitOk;
}

int cmd_report(const ReportOptions& o) {
  std::ifstream in(o.in, std::ios::binary);
  if (!in) throw IoError("cannot open report: " + o.in);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const Report report = parse_report_json(buffer.str());
  write_output(emit_report(report, parse_report_format(o.format)), o.out);
  return kExitOk;
}

bool argv_has_json_flag(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::string_view(argv[i]) == "--json") return true;
  }
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "gaze-trail and region-mark cue compositing with a multiple-choice "
      "VQA evaluation harness"};
  app.require_subcommand(1);

  bool json_errors = false;
  bool dump_config = false;
  app.add_flag("--json", json_errors,
               "emit errors as single-line JSON on stderr");
  app.add_flag("--dump-config", dump_config,
               "print the effective configuration after merging config file "
               "and flags, then exit");
  app.set_config("--config", "",
                 "TOML config file; command-line flags win over file values");

  FixturesOptions fixtures_options;
  auto* fixtures_cmd = app.add_subcommand(
      "fixtures", "generate a deterministic synthetic question suite");
  fixtures_cmd->add_option("--out", fixtures_options.out,
                           "suite directory to create")
      ->required();
  fixtures_cmd->add_option("--count", fixtures_options.count,
                           "number of questions")
      ->capture_default_str();
  fixtures_cmd->add_option("--seed", fixtures_options.seed, "generator seed")
      ->capture_default_str();

  SampleOptions sample_options;
  auto* sample_cmd = app.add_subcommand(
      "sample", "draw a frame sampling plan and print it as JSON");
  sample_cmd->add_option("--frames", sample_options.frames,
                         "total frames in the clip")
      ->required();
  sample_cmd->add_option("--lambda", sample_options.lambda,
                         "recency bias strength, in [0, 1]")
      ->capture_default_str();
  sample_cmd->add_option("--n", sample_options.n, "frames to select")
      ->capture_default_str();
  sample_cmd->add_option("--seed", sample_options.seed, "sampling seed")
      ->capture_default_str();

  RenderOptions render_options;
  auto* render_cmd = app.add_subcommand(
      "render", "composite visual cues for one clip and write PNG frames");
  render_cmd->add_option("--suite", render_options.suite, "suite directory")
      ->required();
  render_cmd->add_option("--clip", render_options.clip, "clip id")
      ->required();
  render_cmd->add_option("--strategy", render_options.strategy,
                         "cue strategy: vllm_only, som, gaze, som_gaze")
      ->capture_default_str();
  render_cmd->add_option("--out", render_options.out, "output directory")
      ->required();
  render_cmd->add_option("--lambda", render_options.lambda,
                         "recency bias strength, in [0, 1]")
      ->capture_default_str();
  render_cmd->add_option("--n", render_options.n, "frames to select")
      ->capture_default_str();
  render_cmd->add_option("--seed", render_options.seed, "sampling seed")
      ->capture_default_str();
  render_cmd->add_flag("--all-frames", render_options.all_frames,
                       "render every frame instead of a sampled plan");

  PromptOptions prompt_options;
  auto* prompt_cmd = app.add_subcommand(
      "prompt", "print the strategy-conditioned prompt for a question");
  prompt_cmd->add_option("--suite", prompt_options.suite, "suite directory")
      ->required();
  prompt_cmd->add_option("--question", prompt_options.question,
                         "question id (default: first in the manifest)");
  prompt_cmd->add_option("--strategy", prompt_options.strategy,
                         "cue strategy: vllm_only, som, gaze, som_gaze")
      ->capture_default_str();

  EvalOptions run_options;
  auto* run_cmd = app.add_subcommand(
      "run", "evaluate one strategy/sampling cell over a question suite");
  add_eval_flags(run_cmd, run_options);
  run_cmd->add_option("--strategy", run_options.strategy,
                      "cue strategy: vllm_only, som, gaze, som_gaze")
      ->capture_default_str();
  run_cmd->add_option("--lambda", run_options.lambda,
                      "recency bias strength, in [0, 1]")
      ->capture_default_str();
  run_cmd->add_option("--n", run_options.n, "frames to select per question")
      ->capture_default_str();
  run_cmd->add_option("--fps", run_options.fps,
                      "video sampling rate (video_fps backends)")
      ->capture_default_str();

  EvalOptions grid_options;
  auto* grid_cmd = app.add_subcommand(
      "grid", "run an ablation grid and report every cell");
  add_eval_flags(grid_cmd, grid_options);
  grid_cmd->add_option("--preset", grid_options.preset,
                       "named grid: table1, table2, table3, table4");
  grid_cmd->add_option("--strategies", grid_options.strategies,
                       "comma-separated strategy axis")
      ->delimiter(',');
  grid_cmd->add_option("--lambdas", grid_options.lambdas,
                       "comma-separated recency bias axis")
      ->delimiter(',');
  grid_cmd->add_option("--sample-sizes", grid_options.sample_sizes,
                       "comma-separated frame count axis")
      ->delimiter(',');
  grid_cmd->add_option("--fps-grid", grid_options.fps_grid,
                       "comma-separated video rate axis")
      ->delimiter(',');

  ReportOptions report_options;
  auto* report_cmd = app.add_subcommand(
      "report", "convert a JSON report to another format");
  report_cmd->add_option("--in", report_options.in, "report JSON file")
      ->required();
  report_cmd->add_option("--format", report_options.format,
                         "output format: json, csv, markdown")
      ->capture_default_str();
  report_cmd->add_option("--out", report_options.out,
                         "write here instead of stdout");

  for (auto* cmd : app.get_subcommands({})) {
    cmd->fallthrough();
    cmd->configurable();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (argv_has_json_flag(argc, argv)) {
      emit_error(true, "usage", e.what());
    } else {
      app.exit(e);
    }
    return kExitUsage;
  }

  if (dump_config) {
    std::cout << app.config_to_str(true, false);
    return kExitOk;
  }

  if (fixtures_cmd->parsed()) {
    return guarded(json_errors, [&] { return cmd_fixtures(fixtures_options); });
  }
  if (sample_cmd->parsed()) {
    return guarded(json_errors, [&] { return cmd_sample(sample_options); });
  }
  if (render_cmd->parsed()) {
    return guarded(json_errors, [&] { return cmd_render(render_options); });
  }
  if (prompt_cmd->parsed()) {
    return guarded(json_errors, [&] { return cmd_prompt(prompt_options); });
  }
  if (run_cmd->parsed()) {
    return guarded(json_errors, [&] { return cmd_run(run_options); });
  }
  if (grid_cmd->parsed()) {
    return guarded(json_errors, [&] { return cmd_grid(grid_options); });
  }
  if (report_cmd->parsed()) {
    return guarded(json_errors, [&] { return cmd_report(report_options); });
  }
  emit_error(json_errors, "usage", "no subcommand given");
  return kExitUsage;
}
