#include "gazemark/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gazemark/errors.hpp"
#include "gazemark/masks.hpp"
#include "gazemark/prompting.hpp"
#include "gazemark/rng.hpp"

namespace gazemark {

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::string out;
  for (const auto& issue : issues) {
    if (!out.empty()) out += "; ";
    out += issue;
  }
  return out;
}

}  // namespace

std::vector<QuestionRecord> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("failed to open manifest: " + path.string());
  }
  std::vector<QuestionRecord> records;
  std::vector<std::string> issues;
  std::set<std::string> seen_ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      issues.push_back("line " + std::to_string(line_no) + ": invalid JSON");
      continue;
    }
    if (!doc.is_object() || !doc.contains("id") || !doc.contains("clip_id") ||
        !doc.contains("question") || !doc.contains("candidates") ||
        !doc.contains("correct_index") || !doc["id"].is_string() ||
        !doc["clip_id"].is_string() || !doc["question"].is_string() ||
        !doc["candidates"].is_array() ||
        !doc["correct_index"].is_number_integer()) {
      issues.push_back("line " + std::to_string(line_no) +
                       ": expected {id, clip_id, question, candidates, "
                       "correct_index}");
      continue;
    }
    QuestionRecord rec;
    rec.id = doc["id"].get<std::string>();
    rec.clip_id = doc["clip_id"].get<std::string>();
    rec.question_text = doc["question"].get<std::string>();
    rec.correct_index = doc["correct_index"].get<int>();
    bool candidates_ok = true;
    for (const auto& c : doc["candidates"]) {
      if (!c.is_string()) {
        candidates_ok = false;
        break;
      }
      rec.candidates.push_back(c.get<std::string>());
    }
    if (!candidates_ok || rec.candidates.size() != 5) {
      issues.push_back("line " + std::to_string(line_no) +
                       ": candidates must be exactly 5 strings");
      continue;
    }
    if (rec.correct_index < 0 || rec.correct_index > 4) {
      issues.push_back("line " + std::to_string(line_no) +
                       ": correct_index out of range");
      continue;
    }
    std::set<std::string> normalized;
    for (const auto& c : rec.candidates) {
      normalized.insert(normalize_answer_text(c));
    }
    if (normalized.size() != 5) {
      issues.push_back("line " + std::to_string(line_no) +
                       ": candidates collide after normalization");
      continue;
    }
    if (!seen_ids.insert(rec.id).second) {
      issues.push_back("line " + std::to_string(line_no) + ": duplicate id " +
                       rec.id);
      continue;
    }
    records.push_back(std::move(rec));
  }
  if (!issues.empty()) {
    throw FormatError("manifest " + path.string() + " invalid: " +
                      join_issues(issues));
  }
  return records;
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<QuestionRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("failed to open manifest for write: " + path.string());
  }
  for (const auto& rec : records) {
    nlohmann::json doc;
    doc["id"] = rec.id;
    doc["clip_id"] = rec.clip_id;
    doc["question"] = rec.question_text;
    doc["candidates"] = rec.candidates;
    doc["correct_index"] = rec.correct_index;
    out << doc.dump() << '\n';
  }
  if (!out) {
    throw IoError("failed while writing manifest: " + path.string());
  }
}

GazeTrack load_gaze_track(const std::filesystem::path& path,
                          const std::string& clip_id, int* clamped_rows) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("failed to open gaze track: " + path.string());
  }
  GazeTrack track;
  track.clip_id = clip_id;
  int clamped = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "timestamp,x,y") {
        throw FormatError(path.string() + " line 1: expected header "
                          "timestamp,x,y");
      }
      continue;
    }
    std::istringstream row(line);
    std::string cell;
    double values[3];
    for (int i = 0; i < 3; ++i) {
      if (!std::getline(row, cell, ',')) {
        throw FormatError(path.string() + " line " + std::to_string(line_no) +
                          ": expected 3 columns");
      }
      try {
        std::size_t used = 0;
        values[i] = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw FormatError(path.string() + " line " + std::to_string(line_no) +
                          ": non-numeric cell '" + cell + "'");
      }
    }
    if (std::getline(row, cell, ',')) {
      throw FormatError(path.string() + " line " + std::to_string(line_no) +
                        ": expected 3 columns");
    }
    if (values[0] < 0.0) {
      throw FormatError(path.string() + " line " + std::to_string(line_no) +
                        ": negative timestamp");
    }
    GazeFixation fix;
    fix.timestamp = values[0];
    fix.x = std::clamp(values[1], 0.0, 1.0);
    fix.y = std::clamp(values[2], 0.0, 1.0);
    if (fix.x != values[1] || fix.y != values[2]) ++clamped;
    track.fixations.push_back(fix);
  }
  std::stable_sort(track.fixations.begin(), track.fixations.end(),
                   [](const GazeFixation& a, const GazeFixation& b) {
                     return a.timestamp < b.timestamp;
                   });
  if (clamped_rows) *clamped_rows = clamped;
  return track;
}

namespace {

std::string frame_file_name(int index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d.%s", index, ext);
  return buf;
}

}  // namespace

std::vector<Frame> resolve_frames(const ClipRef& clip,
                                  const std::vector<int>& indices) {
  std::vector<Frame> frames;
  frames.reserve(indices.size());
  for (int index : indices) {
    if (index < 0 || index >= clip.frame_count) {
      throw std::out_of_range("frame index " + std::to_string(index) +
                              " outside [0, " +
                              std::to_string(clip.frame_count) + ") for clip " +
                              clip.clip_id);
    }
    std::filesystem::path path = clip.frames_dir / frame_file_name(index, "png");
    if (!std::filesystem::exists(path)) {
      const auto jpg = clip.frames_dir / frame_file_name(index, "jpg");
      if (std::filesystem::exists(jpg)) {
        path = jpg;
      } else {
        throw IoError("clip " + clip.clip_id + ": frame " +
                      std::to_string(index) + " missing under " +
                      clip.frames_dir.string());
      }
    }
    Frame frame = load_image(path);
    frame.timestamp = static_cast<double>(index) / clip.fps;
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::filesystem::path manifest_path(const std::filesystem::path& suite_dir) {
  return suite_dir / "manifest.jsonl";
}

std::filesystem::path clip_dir_path(const std::filesystem::path& suite_dir,
                                    const std::string& clip_id) {
  return suite_dir / "clips" / clip_id;
}

std::filesystem::path clip_meta_path(const std::filesystem::path& suite_dir,
                                     const std::string& clip_id) {
  return clip_dir_path(suite_dir, clip_id) / "meta.json";
}

std::filesystem::path frames_dir_path(const std::filesystem::path& suite_dir,
                                      const std::string& clip_id) {
  return clip_dir_path(suite_dir, clip_id) / "frames";
}

std::filesystem::path gaze_path(const std::filesystem::path& suite_dir,
                                const std::string& clip_id) {
  return clip_dir_path(suite_dir, clip_id) / "gaze.csv";
}

std::filesystem::path final_masks_path(const std::filesystem::path& suite_dir,
                                       const std::string& clip_id) {
  return clip_dir_path(suite_dir, clip_id) / "masks" / "final.json";
}

std::filesystem::path oracle_script_path(const std::filesystem::path& suite_dir) {
  return suite_dir / "oracle_responses.json";
}

ClipRef open_clip(const std::filesystem::path& suite_dir,
                  const std::string& clip_id) {
  const auto meta_path = clip_meta_path(suite_dir, clip_id);
  std::ifstream in(meta_path);
  if (!in) {
    throw IoError("failed to open clip metadata: " + meta_path.string());
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error&) {
    throw FormatError("clip metadata is not valid JSON: " + meta_path.string());
  }
  if (!doc.is_object() || !doc.contains("fps") || !doc.contains("frame_count") ||
      !doc["fps"].is_number() || !doc["frame_count"].is_number_integer()) {
    throw FormatError("clip metadata must be {fps, frame_count}: " +
                      meta_path.string());
  }
  ClipRef clip;
  clip.clip_id = clip_id;
  clip.frames_dir = frames_dir_path(suite_dir, clip_id);
  clip.fps = doc["fps"].get<double>();
  clip.frame_count = doc["frame_count"].get<int>();
  if (!(clip.fps > 0.0) || clip.frame_count < 1) {
    throw FormatError("clip metadata out of range: " + meta_path.string());
  }
  return clip;
}

namespace {

constexpr int kSuiteFrameSize = 64;
constexpr int kSuiteFrameCount = 10;
constexpr double kSuiteFps = 2.0;
constexpr int kSuiteGazePoints = 8;

const std::vector<std::string>& suite_vocabulary() {
  static const std::vector<std::string> vocab = {
      "The lid.",        "The pot with handle.", "The egg.",
      "The pan.",        "The glass bowl.",      "The kettle.",
      "The wooden spoon.", "The cutting board.", "The mug.",
      "The sponge.",
  };
  return vocab;
}

struct SyntheticClipPlan {
  int rect_x = 0;
  int rect_y = 0;
  int rect_w = 0;
  int rect_h = 0;
  Rgb rect_color;
  int bg_offset_r = 0;
  int bg_offset_g = 0;
};

Frame synthetic_frame(const SyntheticClipPlan& plan, int t) {
  Frame f;
  f.width = kSuiteFrameSize;
  f.height = kSuiteFrameSize;
  f.timestamp = static_cast<double>(t) / kSuiteFps;
  f.pixels.resize(static_cast<std::size_t>(kSuiteFrameSize) * kSuiteFrameSize * 3);
  for (int y = 0; y < kSuiteFrameSize; ++y) {
    for (int x = 0; x < kSuiteFrameSize; ++x) {
      f.set(x, y,
            {static_cast<std::uint8_t>((x * 3 + t * 5 + plan.bg_offset_r) % 256),
             static_cast<std::uint8_t>((y * 3 + t * 7 + plan.bg_offset_g) % 256),
             static_cast<std::uint8_t>(((x + y) * 2 + t * 11) % 256)});
    }
  }
  for (int y = plan.rect_y; y < plan.rect_y + plan.rect_h; ++y) {
    for (int x = plan.rect_x; x < plan.rect_x + plan.rect_w; ++x) {
      f.set(x, y, plan.rect_color);
    }
  }
  return f;
}

std::string format_fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::vector<QuestionRecord> make_synthetic_suite(
    int count, std::uint64_t seed, const std::filesystem::path& out_dir) {
  if (count < 1) {
    throw std::invalid_argument("suite question count must be >= 1");
  }
  try {
    std::filesystem::create_directories(out_dir);
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoError("cannot create suite directory " + out_dir.string() + ": " +
                  e.what());
  }

  const auto& vocab = suite_vocabulary();
  std::vector<QuestionRecord> records;
  nlohmann::json oracle = nlohmann::json::object();

  for (int q = 0; q < count; ++q) {
    std::mt19937_64 rng(derive_seed(seed, "suite/q" + std::to_string(q)));
    char id_buf[32];
    std::snprintf(id_buf, sizeof(id_buf), "q%06d", q);
    char clip_buf[32];
    std::snprintf(clip_buf, sizeof(clip_buf), "clip%06d", q);

    QuestionRecord rec;
    rec.id = id_buf;
    rec.clip_id = clip_buf;
    rec.question_text = std::string(kBaseQuestion);

    // one correct object plus four distinct negatives, order shuffled
    const std::size_t correct_vocab = pick_index(rng, vocab.size());
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      if (i != correct_vocab) pool.push_back(i);
    }
    std::vector<std::size_t> chosen = {correct_vocab};
    for (int k = 0; k < 4; ++k) {
      const std::size_t at = pick_index(rng, pool.size());
      chosen.push_back(pool[at]);
      pool.erase(pool.begin() + at);
    }
    for (std::size_t i = chosen.size() - 1; i > 0; --i) {
      std::swap(chosen[i], chosen[pick_index(rng, i + 1)]);
    }
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      rec.candidates.push_back(vocab[chosen[i]]);
      if (chosen[i] == correct_vocab) rec.correct_index = static_cast<int>(i);
    }

    SyntheticClipPlan plan;
    plan.rect_x = 8 + static_cast<int>(pick_index(rng, 32));
    plan.rect_y = 8 + static_cast<int>(pick_index(rng, 32));
    plan.rect_w = 8 + static_cast<int>(pick_index(rng, 9));
    plan.rect_h = 8 + static_cast<int>(pick_index(rng, 9));
    plan.rect_color = {static_cast<std::uint8_t>(128 + pick_index(rng, 128)),
                       static_cast<std::uint8_t>(pick_index(rng, 128)),
                       static_cast<std::uint8_t>(64 + pick_index(rng, 128))};
    plan.bg_offset_r = static_cast<int>(pick_index(rng, 256));
    plan.bg_offset_g = static_cast<int>(pick_index(rng, 256));

    const auto frames_dir = frames_dir_path(out_dir, rec.clip_id);
    try {
      std::filesystem::create_directories(frames_dir);
      std::filesystem::create_directories(
          final_masks_path(out_dir, rec.clip_id).parent_path());
    } catch (const std::filesystem::filesystem_error& e) {
      throw IoError("cannot create clip directories: " + std::string(e.what()));
    }

    for (int t = 0; t < kSuiteFrameCount; ++t) {
      save_png(synthetic_frame(plan, t), frames_dir / frame_file_name(t, "png"));
    }

    nlohmann::json meta;
    meta["fps"] = kSuiteFps;
    meta["frame_count"] = kSuiteFrameCount;
    std::ofstream meta_out(clip_meta_path(out_dir, rec.clip_id),
                           std::ios::binary);
    if (!meta_out) {
      throw IoError("cannot write clip metadata for " + rec.clip_id);
    }
    meta_out << meta.dump() << '\n';

    // gaze path: drift from a corner onto the target's center pixel
    const double duration = (kSuiteFrameCount - 1) / kSuiteFps;
    const double end_x =
        (plan.rect_x + plan.rect_w / 2) / double(kSuiteFrameSize - 1);
    const double end_y =
        (plan.rect_y + plan.rect_h / 2) / double(kSuiteFrameSize - 1);
    const double start_x = pick_index(rng, 2) == 0 ? 0.05 : 0.95;
    const double start_y = pick_index(rng, 2) == 0 ? 0.05 : 0.95;
    std::ofstream gaze_out(gaze_path(out_dir, rec.clip_id), std::ios::binary);
    if (!gaze_out) {
      throw IoError("cannot write gaze track for " + rec.clip_id);
    }
    gaze_out << "timestamp,x,y\n";
    for (int k = 0; k < kSuiteGazePoints; ++k) {
      const double s = static_cast<double>(k) / (kSuiteGazePoints - 1);
      const double ts = s * duration;
      const double gx = k == kSuiteGazePoints - 1
                            ? end_x
                            : start_x + (end_x - start_x) * s;
      const double gy = k == kSuiteGazePoints - 1
                            ? end_y
                            : start_y + (end_y - start_y) * s;
      gaze_out << format_fixed(ts) << ',' << format_fixed(gx) << ','
               << format_fixed(gy) << '\n';
    }
    gaze_out.close();

    // final-frame regions: the target plus two distractors
    MaskSet masks;
    masks.width = kSuiteFrameSize;
    masks.height = kSuiteFrameSize;
    const auto rect_region = [&](int id, int x0, int y0, int w, int h) {
      std::vector<std::uint8_t> bitmap(
          static_cast<std::size_t>(kSuiteFrameSize) * kSuiteFrameSize, 0);
      for (int y = y0; y < std::min(y0 + h, kSuiteFrameSize); ++y) {
        for (int x = x0; x < std::min(x0 + w, kSuiteFrameSize); ++x) {
          bitmap[static_cast<std::size_t>(y) * kSuiteFrameSize + x] = 1;
        }
      }
      return region_from_bitmap(id, bitmap, kSuiteFrameSize, kSuiteFrameSize);
    };
    masks.regions.push_back(
        rect_region(1, plan.rect_x, plan.rect_y, plan.rect_w, plan.rect_h));
    masks.regions.push_back(rect_region(2, static_cast<int>(pick_index(rng, 48)),
                                        static_cast<int>(pick_index(rng, 48)),
                                        10, 10));
    masks.regions.push_back(rect_region(3, static_cast<int>(pick_index(rng, 48)),
                                        static_cast<int>(pick_index(rng, 48)),
                                        12, 8));
    std::ofstream masks_out(final_masks_path(out_dir, rec.clip_id),
                            std::ios::binary);
    if (!masks_out) {
      throw IoError("cannot write masks for " + rec.clip_id);
    }
    masks_out << serialize_masks_rle(masks) << '\n';

    oracle[rec.id] = rec.candidates[rec.correct_index];
    records.push_back(std::move(rec));
  }

  write_manifest(manifest_path(out_dir), records);
  std::ofstream oracle_out(oracle_script_path(out_dir), std::ios::binary);
  if (!oracle_out) {
    throw IoError("cannot write oracle script under " + out_dir.string());
  }
  oracle_out << oracle.dump() << '\n';
  return records;
}

SuiteValidation validate_suite(const std::filesystem::path& suite_dir) {
  SuiteValidation result;
  const auto records = load_manifest(manifest_path(suite_dir));
  result.question_count = static_cast<int>(records.size());

  std::set<std::string> clip_ids;
  for (const auto& rec : records) clip_ids.insert(rec.clip_id);

  for (const auto& clip_id : clip_ids) {
    const ClipRef clip = open_clip(suite_dir, clip_id);
    for (int i = 0; i < clip.frame_count; ++i) {
      const auto png = clip.frames_dir / frame_file_name(i, "png");
      const auto jpg = clip.frames_dir / frame_file_name(i, "jpg");
      if (!std::filesystem::exists(png) && !std::filesystem::exists(jpg)) {
        throw IoError("clip " + clip_id + ": frame " + std::to_string(i) +
                      " missing under " + clip.frames_dir.string());
      }
    }
    const auto track = load_gaze_track(gaze_path(suite_dir, clip_id), clip_id);
    const double clip_end = (clip.frame_count - 1) / clip.fps;
    if (track.fixations.empty()) {
      result.warnings.push_back("clip " + clip_id + ": gaze track is empty");
    } else if (clip_end - track.fixations.back().timestamp > 0.5) {
      result.warnings.push_back("clip " + clip_id +
                                ": gaze coverage ends more than 0.5s before "
                                "the clip does");
    }
    if (!std::filesystem::exists(final_masks_path(suite_dir, clip_id))) {
      result.warnings.push_back("clip " + clip_id +
                                ": no final-frame masks; som strategies will "
                                "not run");
    }
  }
  return result;
}

}  // namespace gazemark
