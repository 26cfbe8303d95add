#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gazemark/backends.hpp"
#include "gazemark/dataset.hpp"
#include "gazemark/frame_sampler.hpp"
#include "gazemark/masks.hpp"
#include "gazemark/strategy.hpp"
#include "gazemark/visual_prompting.hpp"

namespace gazemark {

inline constexpr std::string_view kArtifactVersion = "0.1.0";

// Everything one evaluation cell needs: the cue strategy, the sampler
// settings (frame-oriented backends) or the backend's fps (video-oriented
// backends), the backend, and run-wide plumbing.
struct RunConfig {
  StrategyFlags strategy = kVllmOnly;
  SamplingConfig sampling;
  BackendConfig backend;
  std::uint64_t seed = 0;
  int concurrency = 4;
  std::filesystem::path cache_dir;   // empty disables response caching
  std::filesystem::path work_dir;    // video staging; empty = system temp
  std::string masks_endpoint;        // empty = load masks from suite files
  double masks_timeout_seconds = 30.0;
  GazeOverlayConfig gaze_overlay;
  SomOverlayConfig som_overlay;
};

// Where final-frame region masks come from. fetch() counts calls so tests
// can prove the provider is never consulted when the strategy leaves the
// region overlay off.
class MaskSource {
 public:
  virtual ~MaskSource() = default;

  MaskSet fetch(const std::string& clip_id, const Frame& final_frame) {
    calls_.fetch_add(1);
    return do_fetch(clip_id, final_frame);
  }
  std::uint64_t call_count() const { return calls_.load(); }

 private:
  virtual MaskSet do_fetch(const std::string& clip_id,
                           const Frame& final_frame) = 0;
  std::atomic<std::uint64_t> calls_{0};
};

// Reads clips/<clip_id>/masks/final.json from a suite directory.
class FileMaskSource : public MaskSource {
 public:
  explicit FileMaskSource(std::filesystem::path suite_dir);

 private:
  MaskSet do_fetch(const std::string& clip_id,
                   const Frame& final_frame) override;
  std::filesystem::path suite_dir_;
};

// Posts the final frame to a segmentation service; shares the backend's
// rate limiter when one is supplied.
class RemoteMaskSource : public MaskSource {
 public:
  RemoteMaskSource(std::string endpoint, double timeout_seconds,
                   std::shared_ptr<TokenBucket> limiter = nullptr);

 private:
  MaskSet do_fetch(const std::string& clip_id,
                   const Frame& final_frame) override;
  std::string endpoint_;
  double timeout_seconds_;
  std::shared_ptr<TokenBucket> limiter_;
};

// Content-addressed file store mapping cache keys to raw response text.
// Writes are atomic (write to a temp name, then rename) so concurrent
// workers and resumed runs never observe torn entries.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> lookup(const std::string& key) const;
  void store(const std::string& key, const std::string& text);
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

// Key over everything the response can depend on: backend kind, model,
// temperature, fps when the backend consumes video, the exact prompt text,
// and the digests of the exact pixels sent. Sampler settings and endpoint
// URLs are deliberately absent: two configurations that produce the same
// prompt and images share one entry. Mock backends answer from the question
// id and run seed, so for them those two values join the key as decoding
// parameters.
std::string cache_key(const BackendConfig& backend, double cell_fps,
                      std::uint64_t run_seed, const std::string& question_id,
                      const std::string& prompt,
                      const std::vector<std::string>& image_digests);

struct Prediction {
  std::string question_id;
  std::optional<int> chosen_index;  // nullopt = abstain
  std::string raw_text;
  bool correct = false;
  bool cache_hit = false;
  bool failed = false;
  std::string failure_reason;
  double latency = 0.0;
};

// One grid coordinate. Frame-oriented cells carry (lambda, sample_size);
// video-oriented cells carry fps.
struct CellKey {
  StrategyFlags strategy = kVllmOnly;
  double lambda = 0.0;
  int sample_size = 0;
  double fps = 0.0;
  bool video = false;

  bool operator==(const CellKey&) const = default;
};

struct CellStats {
  double accuracy = 0.0;  // correct_count / total, exactly
  int correct_count = 0;
  int total = 0;
  int abstain_count = 0;
  int failure_count = 0;

  bool operator==(const CellStats&) const = default;
};

struct ReportCell {
  CellKey key;
  CellStats stats;

  bool operator==(const ReportCell&) const = default;
};

struct Report {
  std::vector<ReportCell> cells;  // grid expansion order
  std::uint64_t seed = 0;
  std::string backend_kind;
  std::string model_id;
  std::string started_at;   // UTC, RFC 3339
  std::string finished_at;  // UTC, RFC 3339
  std::string version{kArtifactVersion};
  bool degraded = false;  // some cell had failures on >50% of its questions
};

// Field equality ignoring the wall-clock metadata.
bool reports_equivalent(const Report& a, const Report& b);

// Axes of a grid run: cells are strategies x sample_sizes x lambdas for
// frame-oriented backends, strategies x fps_values for video-oriented ones.
// Exactly one of (lambdas+sample_sizes, fps_values) may be populated.
// Composites one clip's cue frames (a sampled plan, or every frame when
// all_frames is set) and writes them as numbered PNGs under out_dir, which
// is created if needed. Returns the source frame indices rendered.
std::vector<int> render_cue_frames(const std::filesystem::path& suite_dir,
                                   const std::string& clip_id,
                                   const std::filesystem::path& out_dir,
                                   StrategyFlags strategy,
                                   const SamplingConfig& sampling,
                                   bool all_frames = false);

struct GridSpec {
  std::vector<StrategyFlags> strategies;
  std::vector<double> lambdas;
  std::vector<int> sample_sizes;
  std::vector<double> fps_values;
};

// Named grids matching the published ablation shapes:
//   table1: baseline vs. full cue stack at the best-known operating point
//           (2 cells; lambda/n for frame backends, fps for video backends)
//   table2: 4 strategies x 6 lambdas at n=15 (24 cells)
//   table3: som_gaze at 6 sample sizes x 6 lambdas (36 cells)
//   table4: 4 strategies x 5 frame rates (20 cells, video axis)
// Throws ConfigError for unknown names.
GridSpec expand_preset(std::string_view preset, bool video_backend);

// Orchestrates runs over a fixture-suite directory. The backend client and
// mask source can be injected for tests; by default they are built from the
// config (remote mask source iff masks_endpoint is set, sharing the
// backend's rate limiter).
class Evaluator {
 public:
  Evaluator(std::filesystem::path suite_dir, RunConfig config,
            std::shared_ptr<BackendClient> backend = nullptr,
            std::shared_ptr<MaskSource> masks = nullptr);

  const RunConfig& config() const { return config_; }
  const std::shared_ptr<BackendClient>& backend() const { return backend_; }
  const std::shared_ptr<MaskSource>& mask_source() const { return masks_; }

  // Receives one line-delimited JSON event per pipeline step (question
  // started/finished, cache hits, backend retries). Thread-safe.
  void set_trace_sink(std::function<void(const std::string&)> sink);

  // Full pipeline for one question at the configured operating point:
  // sample (or take the whole clip for video backends), compose cues,
  // build the prompt, infer (through the cache), parse. Stage errors are
  // captured in the Prediction, never thrown.
  Prediction run_question(const QuestionRecord& record);

  // One cell over all records with bounded concurrency.
  Report run_eval(const std::vector<QuestionRecord>& records);

  // Cartesian grid, cells sequential, questions within a cell concurrent.
  Report run_grid(const std::vector<QuestionRecord>& records,
                  const GridSpec& grid);

 private:
  CellKey base_cell_key() const;
  Prediction run_question_at(const QuestionRecord& record,
                             const CellKey& cell);
  CellStats run_cell(const std::vector<QuestionRecord>& records,
                     const CellKey& cell);
  void trace(const std::string& line);

  std::filesystem::path suite_dir_;
  RunConfig config_;
  std::shared_ptr<BackendClient> backend_;
  std::shared_ptr<MaskSource> masks_;
  std::unique_ptr<ResponseCache> cache_;
  std::function<void(const std::string&)> sink_;
  std::mutex sink_mutex_;
};

enum class ReportFormat { json, csv, markdown };

ReportFormat parse_report_format(std::string_view name);

// Renders the report: json carries the full structure and metadata, csv is
// one row per cell, markdown lays strategies out as rows and lambda (or
// fps) values as columns; when several sample sizes are present each
// (strategy, n) pair gets its own row. Throws std::invalid_argument for
// reports with no cells.
std::string emit_report(const Report& report, ReportFormat format);

// Parses the JSON emitted by emit_report back into a Report.
Report parse_report_json(const std::string& text);

}  // namespace gazemark
