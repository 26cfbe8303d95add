#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gazemark/image.hpp"

namespace gazemark {

enum class BackendKind {
  frame_list,    // multimodal chat endpoint taking ordered images
  video_fps,     // upload-then-generate endpoint taking a whole video
  mock_fixed,
  mock_random,
  mock_scripted,
};

std::string backend_kind_name(BackendKind kind);
BackendKind parse_backend_kind(std::string_view name);
bool is_mock_kind(BackendKind kind);

struct BackendConfig {
  BackendKind kind = BackendKind::mock_fixed;
  std::string endpoint;       // base URL, network kinds only
  std::string model_id;
  std::string api_key_env;    // env var holding the credential; empty = none
  double temperature = 0.0;
  double timeout_seconds = 30.0;
  int max_retries = 3;
  double retry_base_delay_seconds = 0.5;
  double retry_max_delay_seconds = 8.0;
  double requests_per_minute = 0.0;  // 0 disables rate limiting
  double fps = 0.0;                  // video_fps only
  std::string encoder_path = "ffmpeg";
  std::string fixed_response;          // mock_fixed
  std::filesystem::path script_path;   // mock_scripted: JSON {id: response}
};

struct InferenceResponse {
  std::string text;
  double latency = 0.0;  // seconds, wall clock including retries
  int attempt_count = 1;
};

// What a mock needs to know about the question it is answering.
struct MockContext {
  std::string question_id;
  std::vector<std::string> candidates;
  int correct_index = 0;
  std::uint64_t run_seed = 0;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

// Wire seam: one implementation speaks real HTTP, tests substitute a
// capturing fake. Implementations throw NetworkError (retryable) when the
// peer cannot be reached at all.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const std::string& content_type,
                            const HttpHeaders& headers) = 0;
};

class HttplibTransport : public Transport {
 public:
  explicit HttplibTransport(double timeout_seconds);
  HttpResponse post(const std::string& url, const std::string& body,
                    const std::string& content_type,
                    const HttpHeaders& headers) override;

 private:
  double timeout_seconds_;
};

// Deterministic retry delays: base_delay doubling per attempt, capped at
// max_delay, each scaled by a seeded jitter factor in [0.5, 1.0].
std::vector<double> backoff_schedule(int max_retries, double base_delay,
                                     double max_delay, std::uint64_t seed);

// Uniform decimation of frame_count source frames (shot at clip_fps) down
// to max(1, floor(duration * target_fps)) frames; index k maps to
// floor(k * frame_count / count). Indices repeat when target_fps exceeds
// clip_fps. Throws std::domain_error on non-positive rates or counts.
std::vector<int> decimate_indices(int frame_count, double clip_fps,
                                  double target_fps);

// Blocking token-bucket limiter. Clock and sleeper are injectable so tests
// run on virtual time.
class TokenBucket {
 public:
  using Clock = std::function<double()>;
  using Sleeper = std::function<void(double)>;

  TokenBucket(double per_minute, double burst = 1.0, Clock clock = {},
              Sleeper sleeper = {});

  // Returns once a token is available; zero-rate buckets never block.
  void acquire();

 private:
  double rate_per_second_;
  double burst_;
  double tokens_;
  double last_refill_;
  std::mutex mutex_;
  Clock clock_;
  Sleeper sleeper_;
};

// One inference backend: dispatches by config.kind, retries transient
// transport failures with seeded backoff, applies the shared rate limiter,
// and counts inference invocations so cache tests can prove a warm run
// stays offline. Shareable across worker threads.
class BackendClient {
 public:
  explicit BackendClient(BackendConfig config,
                         std::shared_ptr<Transport> transport = nullptr);

  const BackendConfig& config() const { return config_; }
  std::uint64_t invocation_count() const { return invocations_.load(); }
  std::shared_ptr<TokenBucket> rate_limiter() const { return limiter_; }

  // Line-oriented JSON event stream (retry notices); optional.
  void set_event_sink(std::function<void(const std::string&)> sink);

  // kind == frame_list. Sends one chat request with the prompt followed by
  // the frames, in order, as PNG data URIs.
  InferenceResponse infer_frames(const std::string& prompt,
                                 const std::vector<Frame>& frames);

  // kind == video_fps. Decimates cue_frames to the target rate (fps_override
  // when positive, config.fps otherwise), encodes them via the external
  // encoder under work_dir, uploads, then generates.
  InferenceResponse infer_video(const std::string& prompt,
                                const std::vector<Frame>& cue_frames,
                                double clip_fps,
                                const std::filesystem::path& work_dir,
                                double fps_override = 0.0);

  // kind in the mocks.
  InferenceResponse mock_infer(const std::string& prompt,
                               const MockContext& context);

 private:
  InferenceResponse run_with_retries(
      const std::string& what,
      const std::function<HttpResponse()>& attempt_fn,
      const std::function<std::string(const HttpResponse&)>& extract_fn);

  BackendConfig config_;
  std::string api_key_;
  std::shared_ptr<Transport> transport_;
  std::shared_ptr<TokenBucket> limiter_;
  std::map<std::string, std::string> script_;
  std::atomic<std::uint64_t> invocations_{0};
  std::function<void(const std::string&)> event_sink_;
};

}  // namespace gazemark
