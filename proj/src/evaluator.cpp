#include "gazemark/evaluator.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "gazemark/digest.hpp"
#include "gazemark/errors.hpp"
#include "gazemark/prompting.hpp"
#include "gazemark/rng.hpp"

namespace gazemark {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string utc_now_rfc3339() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

}  // namespace

FileMaskSource::FileMaskSource(std::filesystem::path suite_dir)
    : suite_dir_(std::move(suite_dir)) {}

MaskSet FileMaskSource::do_fetch(const std::string& clip_id,
                                 const Frame& final_frame) {
  (void)final_frame;
  return load_masks_rle(final_masks_path(suite_dir_, clip_id));
}

RemoteMaskSource::RemoteMaskSource(std::string endpoint,
                                   double timeout_seconds,
                                   std::shared_ptr<TokenBucket> limiter)
    : endpoint_(std::move(endpoint)),
      timeout_seconds_(timeout_seconds),
      limiter_(std::move(limiter)) {}

MaskSet RemoteMaskSource::do_fetch(const std::string& clip_id,
                                   const Frame& final_frame) {
  (void)clip_id;
  if (limiter_) limiter_->acquire();
  return fetch_masks_remote(endpoint_, final_frame, timeout_seconds_);
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) {
    throw IoError("cannot create cache directory " + dir_.string() + ": " +
                  ec.message());
  }
}

std::optional<std::string> ResponseCache::lookup(const std::string& key) const {
  std::ifstream in(dir_ / (key + ".json"));
  if (!in) return std::nullopt;
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error&) {
    return std::nullopt;  // torn or foreign file: treat as a miss
  }
  if (!doc.is_object() || !doc.contains("text") || !doc["text"].is_string()) {
    return std::nullopt;
  }
  return doc["text"].get<std::string>();
}

void ResponseCache::store(const std::string& key, const std::string& text) {
  static std::atomic<std::uint64_t> counter{0};
  const auto tmp = dir_ / ("tmp_" + std::to_string(::getpid()) + "_" +
                           std::to_string(counter.fetch_add(1)));
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write cache entry: " + tmp.string());
    nlohmann::json doc;
    doc["text"] = text;
    out << doc.dump();
  }
  std::error_code ec;
  std::filesystem::rename(tmp, dir_ / (key + ".json"), ec);
  if (ec) {
    throw IoError("cannot finalize cache entry: " + ec.message());
  }
}

std::string cache_key(const BackendConfig& backend, double cell_fps,
                      std::uint64_t run_seed, const std::string& question_id,
                      const std::string& prompt,
                      const std::vector<std::string>& image_digests) {
  Sha256 hash;
  hash.update("kind=" + backend_kind_name(backend.kind) + "\n");
  hash.update("model=" + backend.model_id + "\n");
  hash.update("temperature=" + format_double(backend.temperature) + "\n");
  if (cell_fps > 0.0) {
    hash.update("fps=" + format_double(cell_fps) + "\n");
  }
  if (is_mock_kind(backend.kind)) {
    hash.update("seed=" + std::to_string(run_seed) + "\n");
    hash.update("question=" + question_id + "\n");
  }
  hash.update("prompt_bytes=" + std::to_string(prompt.size()) + "\n");
  hash.update(prompt);
  hash.update("\nimages=" + std::to_string(image_digests.size()) + "\n");
  for (const auto& digest : image_digests) {
    hash.update(digest + "\n");
  }
  return hash.hex_digest();
}

bool reports_equivalent(const Report& a, const Report& b) {
  return a.cells == b.cells && a.seed == b.seed &&
         a.backend_kind == b.backend_kind && a.model_id == b.model_id &&
         a.version == b.version && a.degraded == b.degraded;
}

std::vector<int> render_cue_frames(const std::filesystem::path& suite_dir,
                                   const std::string& clip_id,
                                   const std::filesystem::path& out_dir,
                                   StrategyFlags strategy,
                                   const SamplingConfig& sampling,
                                   bool all_frames) {
  const ClipRef clip = open_clip(suite_dir, clip_id);

  std::vector<int> indices;
  if (all_frames) {
    indices.resize(clip.frame_count);
    std::iota(indices.begin(), indices.end(), 0);
  } else {
    indices = draw_plan(clip.frame_count, sampling).frame_indices;
  }
  const std::vector<Frame> frames = resolve_frames(clip, indices);

  GazeTrack track;
  if (strategy.gaze) {
    track = load_gaze_track(gaze_path(suite_dir, clip_id), clip_id);
  }
  MaskSet masks;
  const MaskSet* final_masks = nullptr;
  if (strategy.som) {
    masks = load_masks_rle(final_masks_path(suite_dir, clip_id));
    final_masks = &masks;
  }
  const std::vector<Frame> cues =
      compose_cue_frames(frames, track, final_masks, strategy,
                         GazeOverlayConfig{}, SomOverlayConfig{});

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw IoError("cannot create output directory: " + out_dir.string() +
                  ": " + ec.message());
  }
  for (std::size_t k = 0; k < cues.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.png", k);
    save_png(cues[k], out_dir / name);
  }
  return indices;
}

GridSpec expand_preset(std::string_view preset, bool video_backend) {
  const std::vector<StrategyFlags> all_strategies = {kVllmOnly, kSomOnly,
                                                     kGazeOnly, kSomGaze};
  const std::vector<double> lambda_grid = {0.0, 0.01, 0.02, 0.04, 0.1, 1.0};

  GridSpec grid;
  if (preset == "table1") {
    grid.strategies = {kVllmOnly, kSomGaze};
    if (video_backend) {
      grid.fps_values = {2.0};
    } else {
      grid.lambdas = {0.1};
      grid.sample_sizes = {15};
    }
  } else if (preset == "table2") {
    grid.strategies = all_strategies;
    grid.lambdas = lambda_grid;
    grid.sample_sizes = {15};
  } else if (preset == "table3") {
    grid.strategies = {kSomGaze};
    grid.lambdas = lambda_grid;
    grid.sample_sizes = {5, 10, 15, 20, 25, 30};
  } else if (preset == "table4") {
    grid.strategies = all_strategies;
    grid.fps_values = {1.0, 2.0, 4.0, 8.0, 16.0};
  } else {
    throw ConfigError("unknown grid preset: " + std::string(preset));
  }
  return grid;
}

Evaluator::Evaluator(std::filesystem::path suite_dir, RunConfig config,
                     std::shared_ptr<BackendClient> backend,
                     std::shared_ptr<MaskSource> masks)
    : suite_dir_(std::move(suite_dir)), config_(std::move(config)) {
  if (config_.concurrency < 1) {
    throw ConfigError("concurrency must be >= 1");
  }
  if (config_.backend.kind != BackendKind::video_fps) {
    if (config_.sampling.sample_size < 1) {
      throw ConfigError("sampling.sample_size must be >= 1");
    }
    if (!(config_.sampling.lambda >= 0.0 && config_.sampling.lambda <= 1.0)) {
      throw ConfigError("sampling.lambda must be within [0, 1]");
    }
  }

  backend_ = backend ? std::move(backend)
                     : std::make_shared<BackendClient>(config_.backend);
  if (masks) {
    masks_ = std::move(masks);
  } else if (!config_.masks_endpoint.empty()) {
    masks_ = std::make_shared<RemoteMaskSource>(config_.masks_endpoint,
                                                config_.masks_timeout_seconds,
                                                backend_->rate_limiter());
  } else {
    masks_ = std::make_shared<FileMaskSource>(suite_dir_);
  }
  if (!config_.cache_dir.empty()) {
    cache_ = std::make_unique<ResponseCache>(config_.cache_dir);
  }
  backend_->set_event_sink([this](const std::string& line) { trace(line); });
}

void Evaluator::set_trace_sink(std::function<void(const std::string&)> sink) {
  std::lock_guard<std::mutex> lock(sink_mutex_);
  sink_ = std::move(sink);
}

void Evaluator::trace(const std::string& line) {
  std::lock_guard<std::mutex> lock(sink_mutex_);
  if (sink_) sink_(line);
}

CellKey Evaluator::base_cell_key() const {
  CellKey cell;
  cell.strategy = config_.strategy;
  if (config_.backend.kind == BackendKind::video_fps) {
    cell.video = true;
    cell.fps = config_.backend.fps;
  } else {
    cell.lambda = config_.sampling.lambda;
    cell.sample_size = config_.sampling.sample_size;
  }
  return cell;
}

Prediction Evaluator::run_question(const QuestionRecord& record) {
  return run_question_at(record, base_cell_key());
}

Prediction Evaluator::run_question_at(const QuestionRecord& record,
                                      const CellKey& cell) {
  Prediction prediction;
  prediction.question_id = record.id;
  const double started = now_seconds();
  try {
    const ClipRef clip = open_clip(suite_dir_, record.clip_id);

    std::vector<int> indices;
    if (cell.video) {
      indices.resize(clip.frame_count);
      std::iota(indices.begin(), indices.end(), 0);
    } else {
      SamplingConfig sampling = config_.sampling;
      sampling.lambda = cell.lambda;
      sampling.sample_size = cell.sample_size;
      sampling.seed = derive_seed(config_.seed, "plan/" + record.id);
      indices = draw_plan(clip.frame_count, sampling).frame_indices;
    }
    const std::vector<Frame> frames = resolve_frames(clip, indices);

    GazeTrack track;
    if (cell.strategy.gaze) {
      track = load_gaze_track(gaze_path(suite_dir_, record.clip_id),
                              record.clip_id);
    }
    MaskSet masks;
    const MaskSet* final_masks = nullptr;
    if (cell.strategy.som) {
      masks = masks_->fetch(record.clip_id, frames.back());
      final_masks = &masks;
    }
    const std::vector<Frame> cues =
        compose_cue_frames(frames, track, final_masks, cell.strategy,
                           config_.gaze_overlay, config_.som_overlay);

    const PromptBundle bundle = build_prompt(record, cell.strategy);
    std::vector<std::string> digests;
    digests.reserve(cues.size());
    for (const auto& frame : cues) digests.push_back(frame_digest(frame));

    const std::string key =
        cache_key(config_.backend, cell.video ? cell.fps : 0.0, config_.seed,
                  record.id, bundle.text, digests);

    std::optional<std::string> cached;
    if (cache_) cached = cache_->lookup(key);
    if (cached) {
      prediction.raw_text = *cached;
      prediction.cache_hit = true;
    } else {
      InferenceResponse response;
      if (is_mock_kind(config_.backend.kind)) {
        MockContext context;
        context.question_id = record.id;
        context.candidates = record.candidates;
        context.correct_index = record.correct_index;
        context.run_seed = config_.seed;
        response = backend_->mock_infer(bundle.text, context);
      } else if (config_.backend.kind == BackendKind::frame_list) {
        response = backend_->infer_frames(bundle.text, cues);
      } else {
        const auto work_dir = config_.work_dir.empty()
                                  ? std::filesystem::temp_directory_path() /
                                        "gazemark_video"
                                  : config_.work_dir;
        response = backend_->infer_video(bundle.text, cues, clip.fps,
                                         work_dir, cell.fps);
      }
      prediction.raw_text = response.text;
      if (cache_) cache_->store(key, response.text);
    }

    prediction.chosen_index = parse_answer(prediction.raw_text,
                                           record.candidates);
    prediction.correct = prediction.chosen_index.has_value() &&
                         *prediction.chosen_index == record.correct_index;
  } catch (const std::exception& e) {
    prediction.failed = true;
    prediction.failure_reason = e.what();
    prediction.correct = false;
    prediction.chosen_index = std::nullopt;
  }
  prediction.latency = now_seconds() - started;
  return prediction;
}

CellStats Evaluator::run_cell(const std::vector<QuestionRecord>& records,
                              const CellKey& cell) {
  {
    nlohmann::json event;
    event["event"] = "cell_started";
    event["strategy"] = strategy_name(cell.strategy);
    if (cell.video) {
      event["fps"] = cell.fps;
    } else {
      event["lambda"] = cell.lambda;
      event["sample_size"] = cell.sample_size;
    }
    trace(event.dump());
  }

  std::vector<Prediction> predictions(records.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= records.size()) break;
      {
        nlohmann::json event;
        event["event"] = "question_started";
        event["question"] = records[i].id;
        trace(event.dump());
      }
      predictions[i] = run_question_at(records[i], cell);
      {
        const Prediction& p = predictions[i];
        nlohmann::json event;
        event["event"] = "question_finished";
        event["question"] = p.question_id;
        event["correct"] = p.correct;
        event["cache_hit"] = p.cache_hit;
        event["abstain"] = !p.failed && !p.chosen_index.has_value();
        event["failed"] = p.failed;
        if (p.failed) event["reason"] = p.failure_reason;
        trace(event.dump());
      }
    }
  };

  const int workers = std::min<int>(config_.concurrency,
                                    static_cast<int>(records.size()));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  CellStats stats;
  stats.total = static_cast<int>(records.size());
  for (const auto& p : predictions) {
    if (p.correct) ++stats.correct_count;
    if (p.failed) {
      ++stats.failure_count;
    } else if (!p.chosen_index.has_value()) {
      ++stats.abstain_count;
    }
  }
  stats.accuracy =
      static_cast<double>(stats.correct_count) / static_cast<double>(stats.total);

  {
    nlohmann::json event;
    event["event"] = "cell_finished";
    event["strategy"] = strategy_name(cell.strategy);
    event["accuracy"] = stats.accuracy;
    event["failures"] = stats.failure_count;
    trace(event.dump());
  }
  return stats;
}

Report Evaluator::run_eval(const std::vector<QuestionRecord>& records) {
  if (records.empty()) {
    throw std::invalid_argument("run_eval requires at least one question");
  }
  Report report;
  report.seed = config_.seed;
  report.backend_kind = backend_kind_name(config_.backend.kind);
  report.model_id = config_.backend.model_id;
  report.started_at = utc_now_rfc3339();

  const CellKey cell = base_cell_key();
  const CellStats stats = run_cell(records, cell);
  report.cells.push_back({cell, stats});
  report.degraded = stats.failure_count * 2 > stats.total;
  report.finished_at = utc_now_rfc3339();
  return report;
}

Report Evaluator::run_grid(const std::vector<QuestionRecord>& records,
                           const GridSpec& grid) {
  if (records.empty()) {
    throw std::invalid_argument("run_grid requires at least one question");
  }
  if (grid.strategies.empty()) {
    throw std::invalid_argument("grid needs at least one strategy");
  }
  const bool frame_axes = !grid.lambdas.empty() || !grid.sample_sizes.empty();
  const bool video_axes = !grid.fps_values.empty();
  if (frame_axes == video_axes) {
    throw std::invalid_argument(
        "grid must set either (lambdas, sample_sizes) or fps_values");
  }
  if (frame_axes && (grid.lambdas.empty() || grid.sample_sizes.empty())) {
    throw std::invalid_argument(
        "frame-oriented grids need both lambdas and sample_sizes");
  }
  if (frame_axes && config_.backend.kind == BackendKind::video_fps) {
    throw ConfigError(
        "a video backend cannot honor per-frame sampling axes");
  }
  if (video_axes && config_.backend.kind == BackendKind::frame_list) {
    throw ConfigError("a frame-list backend cannot honor an fps axis");
  }

  Report report;
  report.seed = config_.seed;
  report.backend_kind = backend_kind_name(config_.backend.kind);
  report.model_id = config_.backend.model_id;
  report.started_at = utc_now_rfc3339();

  for (const auto& strategy : grid.strategies) {
    if (frame_axes) {
      for (const int sample_size : grid.sample_sizes) {
        for (const double lambda : grid.lambdas) {
          CellKey cell;
          cell.strategy = strategy;
          cell.lambda = lambda;
          cell.sample_size = sample_size;
          const CellStats stats = run_cell(records, cell);
          report.cells.push_back({cell, stats});
          report.degraded = report.degraded ||
                            stats.failure_count * 2 > stats.total;
        }
      }
    } else {
      for (const double fps : grid.fps_values) {
        CellKey cell;
        cell.strategy = strategy;
        cell.video = true;
        cell.fps = fps;
        const CellStats stats = run_cell(records, cell);
        report.cells.push_back({cell, stats});
        report.degraded = report.degraded ||
                          stats.failure_count * 2 > stats.total;
      }
    }
  }
  report.finished_at = utc_now_rfc3339();
  return report;
}

ReportFormat parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::json;
  if (name == "csv") return ReportFormat::csv;
  if (name == "markdown") return ReportFormat::markdown;
  throw ConfigError("unknown report format: " + std::string(name));
}

namespace {

nlohmann::json report_to_json(const Report& report) {
  nlohmann::json doc;
  doc["version"] = report.version;
  doc["seed"] = report.seed;
  doc["backend"] = {{"kind", report.backend_kind},
                    {"model_id", report.model_id}};
  doc["started_at"] = report.started_at;
  doc["finished_at"] = report.finished_at;
  doc["degraded"] = report.degraded;
  doc["cells"] = nlohmann::json::array();
  for (const auto& cell : report.cells) {
    nlohmann::json entry;
    entry["strategy"] = strategy_name(cell.key.strategy);
    if (cell.key.video) {
      entry["lambda"] = nullptr;
      entry["sample_size"] = nullptr;
      entry["fps"] = cell.key.fps;
    } else {
      entry["lambda"] = cell.key.lambda;
      entry["sample_size"] = cell.key.sample_size;
      entry["fps"] = nullptr;
    }
    entry["accuracy"] = cell.stats.accuracy;
    entry["correct_count"] = cell.stats.correct_count;
    entry["total"] = cell.stats.total;
    entry["abstain_count"] = cell.stats.abstain_count;
    entry["failure_count"] = cell.stats.failure_count;
    doc["cells"].push_back(std::move(entry));
  }
  return doc;
}

std::string report_to_csv(const Report& report) {
  std::string out =
      "strategy,lambda,sample_size,fps,accuracy,correct_count,total,"
      "abstain_count,failure_count\n";
  for (const auto& cell : report.cells) {
    out += strategy_name(cell.key.strategy);
    out += ',';
    if (cell.key.video) {
      out += ",,";
      out += format_double(cell.key.fps);
    } else {
      out += format_double(cell.key.lambda);
      out += ',';
      out += std::to_string(cell.key.sample_size);
      out += ',';
    }
    out += ',';
    out += format_double(cell.stats.accuracy);
    out += ',';
    out += std::to_string(cell.stats.correct_count);
    out += ',';
    out += std::to_string(cell.stats.total);
    out += ',';
    out += std::to_string(cell.stats.abstain_count);
    out += ',';
    out += std::to_string(cell.stats.failure_count);
    out += '\n';
  }
  return out;
}

std::string format_axis_value(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", value);
  return buf;
}

std::string report_to_markdown(const Report& report) {
  const bool video = report.cells.front().key.video;

  // Rows: (strategy, sample_size) pairs in first-seen order. Columns:
  // lambda (or fps) values in first-seen order.
  std::vector<std::pair<std::string, int>> rows;
  std::vector<double> columns;
  for (const auto& cell : report.cells) {
    const std::pair<std::string, int> row = {strategy_name(cell.key.strategy),
                                             cell.key.sample_size};
    if (std::find(rows.begin(), rows.end(), row) == rows.end()) {
      rows.push_back(row);
    }
    const double column = video ? cell.key.fps : cell.key.lambda;
    if (std::find(columns.begin(), columns.end(), column) == columns.end()) {
      columns.push_back(column);
    }
  }
  bool multiple_sizes = false;
  for (const auto& row : rows) {
    if (row.second != rows.front().second) multiple_sizes = true;
  }

  std::string out = "| strategy |";
  for (const double column : columns) {
    out += video ? " " + format_axis_value(column) + " fps |"
                 : " lambda=" + format_axis_value(column) + " |";
  }
  out += "\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out += "---:|";
  out += "\n";

  for (const auto& row : rows) {
    out += "| " + row.first;
    if (multiple_sizes) out += " (n=" + std::to_string(row.second) + ")";
    out += " |";
    for (const double column : columns) {
      const ReportCell* found = nullptr;
      for (const auto& cell : report.cells) {
        const double cell_column = video ? cell.key.fps : cell.key.lambda;
        if (strategy_name(cell.key.strategy) == row.first &&
            cell.key.sample_size == row.second && cell_column == column) {
          found = &cell;
          break;
        }
      }
      if (found) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%.3f", found->stats.accuracy);
        out += " " + std::string(buf) + " |";
      } else {
        out += " - |";
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace

std::string emit_report(const Report& report, ReportFormat format) {
  if (report.cells.empty()) {
    throw std::invalid_argument("report has no cells");
  }
  switch (format) {
    case ReportFormat::json:
      return report_to_json(report).dump(2) + "\n";
    case ReportFormat::csv:
      return report_to_csv(report);
    case ReportFormat::markdown:
      return report_to_markdown(report);
  }
  throw std::invalid_argument("unknown report format");
}

Report parse_report_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("report is not valid JSON: ") + e.what());
  }
  try {
    Report report;
    report.version = doc.at("version").get<std::string>();
    report.seed = doc.at("seed").get<std::uint64_t>();
    report.backend_kind = doc.at("backend").at("kind").get<std::string>();
    report.model_id = doc.at("backend").at("model_id").get<std::string>();
    report.started_at = doc.at("started_at").get<std::string>();
    report.finished_at = doc.at("finished_at").get<std::string>();
    report.degraded = doc.at("degraded").get<bool>();
    for (const auto& entry : doc.at("cells")) {
      ReportCell cell;
      cell.key.strategy = parse_strategy(entry.at("strategy").get<std::string>());
      if (!entry.at("fps").is_null()) {
        cell.key.video = true;
        cell.key.fps = entry.at("fps").get<double>();
      } else {
        cell.key.lambda = entry.at("lambda").get<double>();
        cell.key.sample_size = entry.at("sample_size").get<int>();
      }
      cell.stats.accuracy = entry.at("accuracy").get<double>();
      cell.stats.correct_count = entry.at("correct_count").get<int>();
      cell.stats.total = entry.at("total").get<int>();
      cell.stats.abstain_count = entry.at("abstain_count").get<int>();
      cell.stats.failure_count = entry.at("failure_count").get<int>();
      report.cells.push_back(std::move(cell));
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("report JSON is missing fields: ") +
                      e.what());
  }
}

}  // namespace gazemark
