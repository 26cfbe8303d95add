#include "gazemark/backends.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gazemark/errors.hpp"
#include "gazemark/rng.hpp"

namespace gazemark {

std::string backend_kind_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::frame_list: return "frame_list";
    case BackendKind::video_fps: return "video_fps";
    case BackendKind::mock_fixed: return "mock_fixed";
    case BackendKind::mock_random: return "mock_random";
    case BackendKind::mock_scripted: return "mock_scripted";
  }
  return "unknown";
}

BackendKind parse_backend_kind(std::string_view name) {
  if (name == "frame_list") return BackendKind::frame_list;
  if (name == "video_fps") return BackendKind::video_fps;
  if (name == "mock_fixed") return BackendKind::mock_fixed;
  if (name == "mock_random") return BackendKind::mock_random;
  if (name == "mock_scripted") return BackendKind::mock_scripted;
  throw ConfigError("unknown backend kind: " + std::string(name));
}

bool is_mock_kind(BackendKind kind) {
  return kind == BackendKind::mock_fixed || kind == BackendKind::mock_random ||
         kind == BackendKind::mock_scripted;
}

namespace {

std::string base64_encode(const std::uint8_t* data, std::size_t len) {
  static const char alphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= len; i += 3) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out += alphabet[(v >> 18) & 0x3f];
    out += alphabet[(v >> 12) & 0x3f];
    out += alphabet[(v >> 6) & 0x3f];
    out += alphabet[v & 0x3f];
  }
  if (i + 1 == len) {
    const std::uint32_t v = data[i] << 16;
    out += alphabet[(v >> 18) & 0x3f];
    out += alphabet[(v >> 12) & 0x3f];
    out += "==";
  } else if (i + 2 == len) {
    const std::uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
    out += alphabet[(v >> 18) & 0x3f];
    out += alphabet[(v >> 12) & 0x3f];
    out += alphabet[(v >> 6) & 0x3f];
    out += '=';
  }
  return out;
}

std::string strip_trailing_slash(std::string url) {
  while (!url.empty() && url.back() == '/') url.pop_back();
  return url;
}

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("endpoint must include a scheme: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    return {url, "/"};
  }
  return {url.substr(0, path_start), url.substr(path_start)};
}

bool executable_exists(const std::string& name) {
  if (name.find('/') != std::string::npos) {
    return ::access(name.c_str(), X_OK) == 0;
  }
  const char* path_env = std::getenv("PATH");
  if (!path_env) return false;
  std::istringstream paths(path_env);
  std::string dir;
  while (std::getline(paths, dir, ':')) {
    if (dir.empty()) continue;
    if (::access((dir + "/" + name).c_str(), X_OK) == 0) return true;
  }
  return false;
}

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

HttplibTransport::HttplibTransport(double timeout_seconds)
    : timeout_seconds_(timeout_seconds) {}

HttpResponse HttplibTransport::post(const std::string& url,
                                    const std::string& body,
                                    const std::string& content_type,
                                    const HttpHeaders& headers) {
  const auto [base, path] = split_url(url);
  httplib::Client client(base);
  const auto secs = static_cast<time_t>(timeout_seconds_);
  const auto usecs =
      static_cast<time_t>((timeout_seconds_ - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);
  auto res = client.Post(path, hdrs, body, content_type);
  if (!res) {
    throw NetworkError("request to " + url + " failed: " +
                           httplib::to_string(res.error()),
                       true);
  }
  return {res->status, res->body};
}

std::vector<double> backoff_schedule(int max_retries, double base_delay,
                                     double max_delay, std::uint64_t seed) {
  if (max_retries < 0 || base_delay < 0.0 || max_delay < base_delay) {
    throw std::invalid_argument("invalid backoff parameters");
  }
  std::mt19937_64 rng(splitmix64(seed));
  std::vector<double> delays(max_retries);
  double delay = base_delay;
  for (int k = 0; k < max_retries; ++k) {
    const double jitter = 0.5 + 0.5 * uniform01(rng);
    delays[k] = delay * jitter;
    delay = std::min(max_delay, delay * 2.0);
  }
  return delays;
}

std::vector<int> decimate_indices(int frame_count, double clip_fps,
                                  double target_fps) {
  if (frame_count < 1) {
    throw std::domain_error("frame_count must be >= 1");
  }
  if (!(clip_fps > 0.0) || !(target_fps > 0.0)) {
    throw std::domain_error("frame rates must be positive");
  }
  const double duration = frame_count / clip_fps;
  const int count = std::max(
      1, static_cast<int>(std::floor(duration * target_fps)));
  std::vector<int> indices(count);
  for (int k = 0; k < count; ++k) {
    indices[k] = static_cast<int>(
        std::floor(static_cast<double>(k) * frame_count / count));
  }
  return indices;
}

TokenBucket::TokenBucket(double per_minute, double burst, Clock clock,
                         Sleeper sleeper)
    : rate_per_second_(per_minute / 60.0),
      burst_(burst < 1.0 ? 1.0 : burst),
      tokens_(burst_),
      clock_(clock ? std::move(clock) : Clock(now_seconds)),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper([](double s) {
        std::this_thread::sleep_for(std::chrono::duration<double>(s));
      })) {
  if (per_minute < 0.0) {
    throw std::invalid_argument("rate must be non-negative");
  }
  last_refill_ = clock_();
}

void TokenBucket::acquire() {
  if (rate_per_second_ <= 0.0) return;
  double wait = 0.0;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    const double now = clock_();
    tokens_ = std::min(burst_,
                       tokens_ + (now - last_refill_) * rate_per_second_);
    last_refill_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
    } else {
      wait = (1.0 - tokens_) / rate_per_second_;
      tokens_ = 0.0;
      last_refill_ = now + wait;
    }
  }
  if (wait > 0.0) sleeper_(wait);
}

BackendClient::BackendClient(BackendConfig config,
                             std::shared_ptr<Transport> transport)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      limiter_(std::make_shared<TokenBucket>(config_.requests_per_minute)) {
  if (config_.temperature < 0.0) {
    throw ConfigError("temperature must be non-negative");
  }
  if (config_.max_retries < 0) {
    throw ConfigError("max_retries must be non-negative");
  }

  const bool network = config_.kind == BackendKind::frame_list ||
                       config_.kind == BackendKind::video_fps;
  if (network) {
    if (config_.endpoint.empty()) {
      throw ConfigError("backend kind " + backend_kind_name(config_.kind) +
                        " requires an endpoint");
    }
    if (config_.model_id.empty()) {
      throw ConfigError("backend kind " + backend_kind_name(config_.kind) +
                        " requires a model_id");
    }
    if (!config_.api_key_env.empty()) {
      const char* key = std::getenv(config_.api_key_env.c_str());
      if (!key || !*key) {
        throw ConfigError("credential variable " + config_.api_key_env +
                          " is not set in the environment");
      }
      api_key_ = key;
    }
    if (!transport_) {
      transport_ = std::make_shared<HttplibTransport>(config_.timeout_seconds);
    }
  }

  if (config_.kind == BackendKind::video_fps) {
    if (!(config_.fps > 0.0)) {
      throw ConfigError("video_fps backend requires a positive fps");
    }
    if (!executable_exists(config_.encoder_path)) {
      throw EnvironmentError(
          "video encoder '" + config_.encoder_path +
          "' not found; install it or point encoder_path at one");
    }
  }

  if (config_.kind == BackendKind::mock_scripted) {
    if (config_.script_path.empty()) {
      throw ConfigError("mock_scripted requires script_path");
    }
    std::ifstream in(config_.script_path);
    if (!in) {
      throw IoError("failed to open script: " + config_.script_path.string());
    }
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::parse_error&) {
      throw FormatError("script is not valid JSON: " +
                        config_.script_path.string());
    }
    if (!doc.is_object()) {
      throw FormatError("script must be a JSON object of id -> response");
    }
    for (const auto& [id, value] : doc.items()) {
      if (!value.is_string()) {
        throw FormatError("script response for " + id + " must be a string");
      }
      script_[id] = value.get<std::string>();
    }
  }
}

void BackendClient::set_event_sink(std::function<void(const std::string&)> sink) {
  event_sink_ = std::move(sink);
}

InferenceResponse BackendClient::run_with_retries(
    const std::string& what, const std::function<HttpResponse()>& attempt_fn,
    const std::function<std::string(const HttpResponse&)>& extract_fn) {
  const auto delays =
      backoff_schedule(config_.max_retries, config_.retry_base_delay_seconds,
                       config_.retry_max_delay_seconds, fnv1a64(what));
  const double started = now_seconds();
  std::vector<std::string> attempt_log;
  for (int attempt = 0;; ++attempt) {
    limiter_->acquire();
    try {
      HttpResponse res = attempt_fn();
      if (res.status == 401 || res.status == 403) {
        throw NetworkError(what + ": authentication rejected (status " +
                               std::to_string(res.status) + ")",
                           false);
      }
      if (res.status < 200 || res.status >= 300) {
        const bool retryable = res.status >= 500 || res.status == 429 ||
                               res.status == 408;
        throw NetworkError(what + ": status " + std::to_string(res.status),
                           retryable);
      }
      InferenceResponse out;
      out.text = extract_fn(res);
      out.latency = now_seconds() - started;
      out.attempt_count = attempt + 1;
      return out;
    } catch (const NetworkError& e) {
      attempt_log.push_back("attempt " + std::to_string(attempt + 1) + ": " +
                            e.what());
      if (!e.retryable() || attempt >= config_.max_retries) {
        std::string log;
        for (const auto& entry : attempt_log) {
          if (!log.empty()) log += "; ";
          log += entry;
        }
        throw NetworkError(what + " failed after " +
                               std::to_string(attempt + 1) + " attempt(s): " +
                               log,
                           false);
      }
      if (event_sink_) {
        nlohmann::json event;
        event["event"] = "backend_retry";
        event["operation"] = what;
        event["attempt"] = attempt + 1;
        event["delay"] = delays[attempt];
        event["error"] = e.what();
        event_sink_(event.dump());
      }
      if (delays[attempt] > 0.0) {
        std::this_thread::sleep_for(
            std::chrono::duration<double>(delays[attempt]));
      }
    }
  }
}

InferenceResponse BackendClient::infer_frames(const std::string& prompt,
                                              const std::vector<Frame>& frames) {
  if (config_.kind != BackendKind::frame_list) {
    throw ConfigError("infer_frames requires a frame_list backend");
  }
  if (frames.empty()) {
    throw std::invalid_argument("infer_frames requires at least one frame");
  }
  invocations_.fetch_add(1);

  nlohmann::json content = nlohmann::json::array();
  content.push_back({{"type", "text"}, {"text", prompt}});
  for (const auto& frame : frames) {
    const auto png = encode_png(frame);
    content.push_back(
        {{"type", "image_url"},
         {"image_url",
          {{"url", "data:image/png;base64," +
                       base64_encode(png.data(), png.size())}}}});
  }
  nlohmann::json body;
  body["model"] = config_.model_id;
  body["temperature"] = config_.temperature;
  body["messages"] = nlohmann::json::array(
      {{{"role", "user"}, {"content", std::move(content)}}});

  HttpHeaders headers;
  if (!api_key_.empty()) {
    headers.emplace_back("Authorization", "Bearer " + api_key_);
  }
  const std::string url =
      strip_trailing_slash(config_.endpoint) + "/v1/chat/completions";
  const std::string payload = body.dump();

  return run_with_retries(
      "chat",
      [&] { return transport_->post(url, payload, "application/json", headers); },
      [](const HttpResponse& res) {
        nlohmann::json doc;
        try {
          doc = nlohmann::json::parse(res.body);
        } catch (const nlohmann::json::parse_error&) {
          throw FormatError("chat response is not valid JSON");
        }
        if (!doc.contains("choices") || !doc["choices"].is_array() ||
            doc["choices"].empty() ||
            !doc["choices"][0].contains("message") ||
            !doc["choices"][0]["message"].contains("content") ||
            !doc["choices"][0]["message"]["content"].is_string()) {
          throw FormatError("chat response missing choices[0].message.content");
        }
        return doc["choices"][0]["message"]["content"].get<std::string>();
      });
}

InferenceResponse BackendClient::infer_video(
    const std::string& prompt, const std::vector<Frame>& cue_frames,
    double clip_fps, const std::filesystem::path& work_dir,
    double fps_override) {
  if (config_.kind != BackendKind::video_fps) {
    throw ConfigError("infer_video requires a video_fps backend");
  }
  if (cue_frames.empty()) {
    throw std::invalid_argument("infer_video requires at least one frame");
  }
  const double target_fps = fps_override > 0.0 ? fps_override : config_.fps;
  invocations_.fetch_add(1);
  const double started = now_seconds();

  static std::atomic<std::uint64_t> call_counter{0};
  const std::uint64_t call_id = call_counter.fetch_add(1);
  const auto stage_dir =
      work_dir / ("encode_" + std::to_string(::getpid()) + "_" +
                  std::to_string(call_id));
  const auto video_path = stage_dir / "clip.mp4";
  try {
    std::filesystem::create_directories(stage_dir);
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoError("cannot create staging directory: " + std::string(e.what()));
  }

  const auto indices = decimate_indices(static_cast<int>(cue_frames.size()),
                                        clip_fps, target_fps);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.png", k);
    save_png(cue_frames[indices[k]], stage_dir / name);
  }

  char command[1024];
  std::snprintf(command, sizeof(command),
                "%s -y -loglevel error -framerate %g -i \"%s/%%06d.png\" "
                "-pix_fmt yuv420p \"%s\"",
                config_.encoder_path.c_str(), target_fps,
                stage_dir.string().c_str(), video_path.string().c_str());
  const int status = std::system(command);
  if (status != 0 || !std::filesystem::exists(video_path)) {
    std::filesystem::remove_all(stage_dir);
    throw EnvironmentError("video encoder failed (exit status " +
                           std::to_string(status) + "); command: " + command);
  }

  std::string video_bytes;
  {
    std::ifstream in(video_path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    video_bytes = buf.str();
  }
  std::filesystem::remove_all(stage_dir);

  HttpHeaders headers;
  if (!api_key_.empty()) {
    headers.emplace_back("Authorization", "Bearer " + api_key_);
  }
  const std::string base = strip_trailing_slash(config_.endpoint);

  const InferenceResponse upload = run_with_retries(
      "upload",
      [&] {
        return transport_->post(base + "/v1/files", video_bytes, "video/mp4",
                                headers);
      },
      [](const HttpResponse& res) {
        nlohmann::json doc;
        try {
          doc = nlohmann::json::parse(res.body);
        } catch (const nlohmann::json::parse_error&) {
          throw FormatError("upload response is not valid JSON");
        }
        if (!doc.contains("file_id") || !doc["file_id"].is_string()) {
          throw FormatError("upload response missing file_id");
        }
        return doc["file_id"].get<std::string>();
      });

  nlohmann::json body;
  body["model"] = config_.model_id;
  body["prompt"] = prompt;
  body["file_id"] = upload.text;
  body["fps"] = target_fps;
  body["temperature"] = config_.temperature;
  const std::string payload = body.dump();

  InferenceResponse out = run_with_retries(
      "generate",
      [&] {
        return transport_->post(base + "/v1/generate", payload,
                                "application/json", headers);
      },
      [](const HttpResponse& res) {
        nlohmann::json doc;
        try {
          doc = nlohmann::json::parse(res.body);
        } catch (const nlohmann::json::parse_error&) {
          throw FormatError("generate response is not valid JSON");
        }
        if (!doc.contains("text") || !doc["text"].is_string()) {
          throw FormatError("generate response missing text");
        }
        return doc["text"].get<std::string>();
      });
  out.latency = now_seconds() - started;
  return out;
}

InferenceResponse BackendClient::mock_infer(const std::string& prompt,
                                            const MockContext& context) {
  (void)prompt;
  if (!is_mock_kind(config_.kind)) {
    throw ConfigError("mock_infer requires a mock backend");
  }
  invocations_.fetch_add(1);

  InferenceResponse out;
  out.latency = 0.0;
  out.attempt_count = 1;
  switch (config_.kind) {
    case BackendKind::mock_fixed:
      out.text = config_.fixed_response;
      break;
    case BackendKind::mock_random: {
      if (context.candidates.empty()) {
        throw std::invalid_argument("mock_random requires candidates");
      }
      std::mt19937_64 rng(
          derive_seed(context.run_seed, "mock/" + context.question_id));
      out.text = context.candidates[pick_index(rng, context.candidates.size())];
      break;
    }
    case BackendKind::mock_scripted: {
      const auto it = script_.find(context.question_id);
      if (it == script_.end()) {
        throw ConfigError("script has no response for question " +
                          context.question_id);
      }
      out.text = it->second;
      break;
    }
    default:
      break;
  }
  return out;
}

}  // namespace gazemark
