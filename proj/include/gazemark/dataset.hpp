#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gazemark/gaze.hpp"
#include "gazemark/image.hpp"

namespace gazemark {

struct QuestionRecord {
  std::string id;
  std::string clip_id;
  std::string question_text;
  std::vector<std::string> candidates;  // exactly 5, distinct once normalized
  int correct_index = 0;                // in [0, 4]
};

struct ClipRef {
  std::string clip_id;
  std::filesystem::path frames_dir;
  double fps = 0.0;
  int frame_count = 0;  // N_v
};

// Line-delimited JSON, one {id, clip_id, question, candidates, correct_index}
// object per line. Throws FormatError listing every offending line number.
std::vector<QuestionRecord> load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    const std::vector<QuestionRecord>& records);

// CSV with header timestamp,x,y. Rows are sorted by timestamp (stable) and
// coordinates clamped to [0, 1]; *clamped_rows (if given) receives the
// number of rows touched by clamping. Throws FormatError naming the line on
// non-numeric cells or negative timestamps.
GazeTrack load_gaze_track(const std::filesystem::path& path,
                          const std::string& clip_id,
                          int* clamped_rows = nullptr);

// Loads exactly the requested frames; frame k gets timestamp index/fps.
// Throws std::out_of_range for indices outside [0, frame_count) and IoError
// naming the index for missing files.
std::vector<Frame> resolve_frames(const ClipRef& clip,
                                  const std::vector<int>& indices);

// Fixture-suite layout helpers. A suite directory holds manifest.jsonl plus
// clips/<clip_id>/{meta.json, frames/NNNNNN.png, gaze.csv, masks/final.json}.
std::filesystem::path manifest_path(const std::filesystem::path& suite_dir);
std::filesystem::path clip_dir_path(const std::filesystem::path& suite_dir,
                                    const std::string& clip_id);
std::filesystem::path clip_meta_path(const std::filesystem::path& suite_dir,
                                     const std::string& clip_id);
std::filesystem::path frames_dir_path(const std::filesystem::path& suite_dir,
                                      const std::string& clip_id);
std::filesystem::path gaze_path(const std::filesystem::path& suite_dir,
                                const std::string& clip_id);
std::filesystem::path final_masks_path(const std::filesystem::path& suite_dir,
                                       const std::string& clip_id);
// Path of the generated id -> correct-candidate response script.
std::filesystem::path oracle_script_path(const std::filesystem::path& suite_dir);

// Reads clips/<clip_id>/meta.json ({fps, frame_count}) into a ClipRef.
ClipRef open_clip(const std::filesystem::path& suite_dir,
                  const std::string& clip_id);

// Generates a deterministic procedural suite: per-question clips of small
// frames, a gaze track that ends on the correct object, rectangle masks for
// the final frame, a manifest, and an oracle response script. Byte-identical
// across runs with the same arguments. Throws std::invalid_argument if
// count < 1, IoError if the directory cannot be written.
std::vector<QuestionRecord> make_synthetic_suite(
    int count, std::uint64_t seed, const std::filesystem::path& out_dir);

struct SuiteValidation {
  int question_count = 0;
  std::vector<std::string> warnings;
};

// Verifies that every referenced clip opens, every frame file exists, and
// every gaze track loads; warns (not errors) when gaze coverage stops more
// than half a second before the clip ends.
SuiteValidation validate_suite(const std::filesystem::path& suite_dir);

}  // namespace gazemark
