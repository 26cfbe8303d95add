#include "gazemark/evaluator.hpp"

#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gazemark/dataset.hpp"
#include "gazemark/errors.hpp"
#include "support/fixtures.hpp"
#include "support/stub_http.hpp"

using namespace gazemark;
using gazemark::testing::StubServer;
using gazemark::testing::TempDir;

namespace {

// 250-question suite shared by the statistics-heavy cases; generated once.
const std::filesystem::path& big_suite() {
  static TempDir dir;
  static const auto records = make_synthetic_suite(250, 4242, dir.path());
  return dir.path();
}

const std::vector<QuestionRecord>& big_suite_records() {
  static const auto records = load_manifest(manifest_path(big_suite()));
  return records;
}

// Small suite for fast pipeline/grid/cache cases.
const std::filesystem::path& small_suite() {
  static TempDir dir;
  static const auto records = make_synthetic_suite(8, 7, dir.path());
  return dir.path();
}

const std::vector<QuestionRecord>& small_suite_records() {
  static const auto records = load_manifest(manifest_path(small_suite()));
  return records;
}

RunConfig oracle_config(const std::filesystem::path& suite) {
  RunConfig config;
  config.strategy = kSomGaze;
  config.sampling.lambda = 0.1;
  config.sampling.sample_size = 15;
  config.backend.kind = BackendKind::mock_scripted;
  config.backend.script_path = oracle_script_path(suite);
  config.seed = 11;
  config.concurrency = 4;
  return config;
}

RunConfig random_mock_config(std::uint64_t seed) {
  RunConfig config;
  config.strategy = kGazeOnly;
  config.sampling.lambda = 0.1;
  config.sampling.sample_size = 15;
  config.backend.kind = BackendKind::mock_random;
  config.seed = seed;
  config.concurrency = 4;
  return config;
}

}  // namespace

TEST_CASE("oracle scripted mock answers every question correctly") {
  Evaluator evaluator(big_suite(), oracle_config(big_suite()));
  const Report report = evaluator.run_eval(big_suite_records());

  REQUIRE(report.cells.size() == 1);
  const CellStats& stats = report.cells[0].stats;
  CHECK(stats.accuracy == 1.0);
  CHECK(stats.correct_count == 250);
  CHECK(stats.total == 250);
  CHECK(stats.abstain_count == 0);
  CHECK(stats.failure_count == 0);
  CHECK_FALSE(report.degraded);
  CHECK(report.backend_kind == "mock_scripted");
  CHECK(report.version == std::string(kArtifactVersion));
  CHECK(report.cells[0].key.lambda == 0.1);
  CHECK(report.cells[0].key.sample_size == 15);
  CHECK_FALSE(report.cells[0].key.video);
}

TEST_CASE("single-question pipeline fills the prediction fields") {
  Evaluator evaluator(big_suite(), oracle_config(big_suite()));
  const QuestionRecord& record = big_suite_records().front();
  const Prediction prediction = evaluator.run_question(record);
  CHECK(prediction.question_id == record.id);
  REQUIRE(prediction.chosen_index.has_value());
  CHECK(*prediction.chosen_index == record.correct_index);
  CHECK(prediction.correct);
  CHECK_FALSE(prediction.failed);
  CHECK_FALSE(prediction.cache_hit);
  CHECK(prediction.raw_text == record.candidates[record.correct_index]);
}

TEST_CASE("uniform random mock lands near chance level") {
  Evaluator evaluator(big_suite(), random_mock_config(123));
  const Report report = evaluator.run_eval(big_suite_records());
  const CellStats& stats = report.cells[0].stats;
  CHECK(stats.total == 250);
  // 3-sigma binomial band around 1/5 for 250 draws.
  CHECK(stats.accuracy > 0.124);
  CHECK(stats.accuracy < 0.276);
  CHECK(stats.failure_count == 0);
  CHECK(stats.correct_count + stats.abstain_count <= stats.total);
}

TEST_CASE("an answer matching no candidate scores as an abstention") {
  RunConfig config;
  config.strategy = kVllmOnly;
  config.sampling.sample_size = 15;
  config.backend.kind = BackendKind::mock_fixed;
  config.backend.fixed_response = "I cannot tell.";
  config.seed = 5;
  Evaluator evaluator(big_suite(), config);
  const Report report = evaluator.run_eval(big_suite_records());
  const CellStats& stats = report.cells[0].stats;
  CHECK(stats.accuracy == 0.0);
  CHECK(stats.correct_count == 0);
  CHECK(stats.abstain_count == 250);
  CHECK(stats.failure_count == 0);
  CHECK_FALSE(report.degraded);  // abstentions are answers, not failures
}

TEST_CASE("mask provider is consulted only when the region overlay is on") {
  auto no_som = random_mock_config(9);
  no_som.strategy = kGazeOnly;
  Evaluator gaze_only(small_suite(), no_som);
  gaze_only.run_eval(small_suite_records());
  CHECK(gaze_only.mask_source()->call_count() == 0);

  auto with_som = random_mock_config(9);
  with_som.strategy = kSomGaze;
  Evaluator som_gaze(small_suite(), with_som);
  som_gaze.run_eval(small_suite_records());
  CHECK(som_gaze.mask_source()->call_count() == small_suite_records().size());
}

TEST_CASE("equal seeds reproduce the report; runs are order-independent") {
  auto config = random_mock_config(321);
  Evaluator a(small_suite(), config);
  Evaluator b(small_suite(), config);
  const Report first = a.run_eval(small_suite_records());
  const Report second = b.run_eval(small_suite_records());
  CHECK(reports_equivalent(first, second));

  auto serial = config;
  serial.concurrency = 1;
  auto wide = config;
  wide.concurrency = 8;
  Evaluator c(small_suite(), serial);
  Evaluator d(small_suite(), wide);
  CHECK(reports_equivalent(c.run_eval(small_suite_records()),
                           d.run_eval(small_suite_records())));

  // A different run seed steers the random mock to different picks.
  Evaluator e(small_suite(), random_mock_config(99999));
  bool any_difference = false;
  for (const auto& record : small_suite_records()) {
    if (e.run_question(record).raw_text != a.run_question(record).raw_text) {
      any_difference = true;
      break;
    }
  }
  CHECK(any_difference);
}

TEST_CASE("cache keys react to content, not configuration labels") {
  BackendConfig backend;
  backend.kind = BackendKind::frame_list;
  backend.endpoint = "http://a.example";
  backend.model_id = "model-x";
  backend.temperature = 0.0;

  const std::vector<std::string> digests = {"d1", "d2"};
  const std::string base = cache_key(backend, 0.0, 1, "q1", "prompt", digests);
  CHECK(cache_key(backend, 0.0, 1, "q1", "prompt", digests) == base);

  // Endpoint, run seed, and question id are not part of a network key.
  auto moved = backend;
  moved.endpoint = "http://b.example";
  CHECK(cache_key(moved, 0.0, 2, "q2", "prompt", digests) == base);

  auto warmer = backend;
  warmer.temperature = 0.7;
  CHECK(cache_key(warmer, 0.0, 1, "q1", "prompt", digests) != base);

  auto other_model = backend;
  other_model.model_id = "model-y";
  CHECK(cache_key(other_model, 0.0, 1, "q1", "prompt", digests) != base);

  CHECK(cache_key(backend, 0.0, 1, "q1", "prompt!", digests) != base);
  CHECK(cache_key(backend, 0.0, 1, "q1", "prompt", {"d1", "d3"}) != base);
  CHECK(cache_key(backend, 2.0, 1, "q1", "prompt", digests) != base);

  // Mock backends answer from (seed, question), so those join the key.
  BackendConfig mock;
  mock.kind = BackendKind::mock_random;
  const std::string mock_base = cache_key(mock, 0.0, 1, "q1", "p", digests);
  CHECK(cache_key(mock, 0.0, 1, "q1", "p", digests) == mock_base);
  CHECK(cache_key(mock, 0.0, 2, "q1", "p", digests) != mock_base);
  CHECK(cache_key(mock, 0.0, 1, "q2", "p", digests) != mock_base);
}

TEST_CASE("a warm rerun answers from the cache without backend calls") {
  TempDir cache_dir;
  auto config = random_mock_config(777);
  config.cache_dir = cache_dir.path() / "responses";

  Evaluator cold(small_suite(), config);
  const Report cold_report = cold.run_eval(small_suite_records());
  CHECK(cold.backend()->invocation_count() == small_suite_records().size());

  Evaluator warm(small_suite(), config);
  const Report warm_report = warm.run_eval(small_suite_records());
  CHECK(warm.backend()->invocation_count() == 0);
  CHECK(reports_equivalent(cold_report, warm_report));
  CHECK(warm_report.cells == cold_report.cells);

  // The per-question view reports the hit.
  Evaluator probe(small_suite(), config);
  const Prediction prediction =
      probe.run_question(small_suite_records().front());
  CHECK(prediction.cache_hit);
  CHECK(probe.backend()->invocation_count() == 0);
}

TEST_CASE("per-question failures are counted, never thrown") {
  TempDir dir;
  const auto records = make_synthetic_suite(6, 31, dir.path());
  // Break four clips so their questions fail at the resolve stage.
  for (int i = 0; i < 4; ++i) {
    std::filesystem::remove(clip_meta_path(dir.path(), records[i].clip_id));
  }

  Evaluator evaluator(dir.path(), oracle_config(dir.path()));
  const Report report = evaluator.run_eval(records);
  const CellStats& stats = report.cells[0].stats;
  CHECK(stats.total == 6);
  CHECK(stats.failure_count == 4);
  CHECK(stats.correct_count == 2);  // surviving questions still score
  CHECK(report.degraded);           // 4 of 6 > 50%
}

TEST_CASE("a broken gaze file fails only the strategies that read it") {
  TempDir dir;
  const auto records = make_synthetic_suite(2, 13, dir.path());
  gazemark::testing::write_text_file(gaze_path(dir.path(), records[0].clip_id),
                                     "timestamp,x,y\nnot,a,number\n");

  auto config = oracle_config(dir.path());
  config.strategy = kVllmOnly;
  Evaluator without_gaze(dir.path(), config);
  CHECK(without_gaze.run_eval(records).cells[0].stats.failure_count == 0);

  config.strategy = kGazeOnly;
  Evaluator with_gaze(dir.path(), config);
  const Report report = with_gaze.run_eval(records);
  CHECK(report.cells[0].stats.failure_count == 1);
  const Prediction failed = with_gaze.run_question(records[0]);
  CHECK(failed.failed);
  CHECK_FALSE(failed.failure_reason.empty());
}

TEST_CASE("remote mask source serves the region overlay over HTTP") {
  StubServer stub;
  std::atomic<int> hits{0};
  stub.server().Post("/masks", [&](const httplib::Request& req,
                                   httplib::Response& res) {
    hits.fetch_add(1);
    CHECK(req.get_header_value("Content-Type") == "image/png");
    MaskSet masks;
    masks.width = 64;
    masks.height = 64;
    std::vector<std::uint8_t> bitmap(64 * 64, 0);
    for (int y = 4; y < 20; ++y) {
      for (int x = 4; x < 20; ++x) bitmap[y * 64 + x] = 1;
    }
    masks.regions.push_back(region_from_bitmap(1, bitmap, 64, 64));
    res.set_content(serialize_masks_rle(masks), "application/json");
  });

  TempDir dir;
  const auto records = make_synthetic_suite(3, 17, dir.path());
  auto config = oracle_config(dir.path());
  config.strategy = kSomGaze;
  config.masks_endpoint = stub.base_url() + "/masks";
  Evaluator evaluator(dir.path(), config);
  const Report report = evaluator.run_eval(records);
  CHECK(report.cells[0].stats.failure_count == 0);
  CHECK(report.cells[0].stats.accuracy == 1.0);
  CHECK(hits.load() == 3);
  CHECK(evaluator.mask_source()->call_count() == 3);
}

TEST_CASE("trace sink receives well-formed pipeline events") {
  auto config = random_mock_config(55);
  config.concurrency = 1;
  Evaluator evaluator(small_suite(), config);
  std::vector<std::string> lines;
  evaluator.set_trace_sink([&](const std::string& line) {
    lines.push_back(line);
  });
  evaluator.run_eval(small_suite_records());

  REQUIRE_FALSE(lines.empty());
  std::set<std::string> events;
  for (const auto& line : lines) {
    const auto doc = nlohmann::json::parse(line);
    events.insert(doc.at("event").get<std::string>());
  }
  CHECK(events.count("cell_started") == 1);
  CHECK(events.count("question_started") == 1);
  CHECK(events.count("question_finished") == 1);
  CHECK(events.count("cell_finished") == 1);
}

TEST_CASE("grid presets expand to the published ablation shapes") {
  const GridSpec table2 = expand_preset("table2", false);
  CHECK(table2.strategies.size() == 4);
  CHECK(table2.lambdas == std::vector<double>{0.0, 0.01, 0.02, 0.04, 0.1, 1.0});
  CHECK(table2.sample_sizes == std::vector<int>{15});

  const GridSpec table3 = expand_preset("table3", false);
  CHECK(table3.strategies == std::vector<StrategyFlags>{kSomGaze});
  CHECK(table3.sample_sizes == std::vector<int>{5, 10, 15, 20, 25, 30});

  const GridSpec table4 = expand_preset("table4", false);
  CHECK(table4.strategies.size() == 4);
  CHECK(table4.fps_values == std::vector<double>{1.0, 2.0, 4.0, 8.0, 16.0});
  CHECK(table4.lambdas.empty());

  const GridSpec table1_frames = expand_preset("table1", false);
  CHECK(table1_frames.strategies ==
        std::vector<StrategyFlags>{kVllmOnly, kSomGaze});
  CHECK(table1_frames.lambdas == std::vector<double>{0.1});
  CHECK(table1_frames.sample_sizes == std::vector<int>{15});
  CHECK(table1_frames.fps_values.empty());

  const GridSpec table1_video = expand_preset("table1", true);
  CHECK(table1_video.fps_values == std::vector<double>{2.0});
  CHECK(table1_video.lambdas.empty());

  CHECK_THROWS_AS(expand_preset("table9", false), ConfigError);
}

TEST_CASE("grid runs produce one cell per combination, in row order") {
  Evaluator evaluator(small_suite(), random_mock_config(2024));
  const Report report = evaluator.run_grid(small_suite_records(),
                                           expand_preset("table2", false));
  REQUIRE(report.cells.size() == 24);

  CHECK(report.cells[0].key.strategy == kVllmOnly);
  CHECK(report.cells[0].key.lambda == 0.0);
  CHECK(report.cells[0].key.sample_size == 15);
  CHECK(report.cells[5].key.lambda == 1.0);
  CHECK(report.cells[23].key.strategy == kSomGaze);
  CHECK(report.cells[23].key.lambda == 1.0);
  for (const auto& cell : report.cells) {
    CHECK(cell.stats.total == 8);
    CHECK(cell.stats.failure_count == 0);
  }

  // With n=15 > clip length every lambda samples the same (whole) frame
  // set, so a shared cache collapses all six lambda cells of a strategy.
  std::set<std::pair<std::string, double>> seen;
  for (const auto& cell : report.cells) {
    seen.insert({strategy_name(cell.key.strategy), cell.key.lambda});
  }
  CHECK(seen.size() == 24);
}

TEST_CASE("table3 and table4 grids have 36 and 20 cells") {
  Evaluator frames(small_suite(), random_mock_config(61));
  const Report table3 = frames.run_grid(small_suite_records(),
                                        expand_preset("table3", false));
  CHECK(table3.cells.size() == 36);

  Evaluator video(small_suite(), random_mock_config(62));
  const Report table4 = video.run_grid(small_suite_records(),
                                       expand_preset("table4", false));
  CHECK(table4.cells.size() == 20);
  for (const auto& cell : table4.cells) {
    CHECK(cell.key.video);
    CHECK(cell.key.fps > 0.0);
  }
}

TEST_CASE("grid axes are validated against the backend family") {
  Evaluator evaluator(small_suite(), random_mock_config(1));
  GridSpec empty;
  CHECK_THROWS_AS(evaluator.run_grid(small_suite_records(), empty),
                  std::invalid_argument);

  GridSpec no_axes;
  no_axes.strategies = {kVllmOnly};
  CHECK_THROWS_AS(evaluator.run_grid(small_suite_records(), no_axes),
                  std::invalid_argument);

  GridSpec mixed;
  mixed.strategies = {kVllmOnly};
  mixed.lambdas = {0.1};
  mixed.sample_sizes = {5};
  mixed.fps_values = {2.0};
  CHECK_THROWS_AS(evaluator.run_grid(small_suite_records(), mixed),
                  std::invalid_argument);

  GridSpec half;
  half.strategies = {kVllmOnly};
  half.lambdas = {0.1};
  CHECK_THROWS_AS(evaluator.run_grid(small_suite_records(), half),
                  std::invalid_argument);

  CHECK_THROWS_AS(evaluator.run_grid({}, expand_preset("table2", false)),
                  std::invalid_argument);
}

TEST_CASE("markdown reports lay strategies out as rows and axes as columns") {
  Evaluator evaluator(small_suite(), random_mock_config(88));
  const Report table2 = evaluator.run_grid(small_suite_records(),
                                           expand_preset("table2", false));
  const std::string markdown = emit_report(table2, ReportFormat::markdown);

  std::vector<std::string> lines;
  std::istringstream stream(markdown);
  for (std::string line; std::getline(stream, line);) lines.push_back(line);
  REQUIRE(lines.size() == 6);  // header + separator + 4 strategy rows
  CHECK(lines[0].find("| strategy |") == 0);
  CHECK(lines[0].find("lambda=0 ") != std::string::npos);
  CHECK(lines[0].find("lambda=1 ") != std::string::npos);
  CHECK(lines[2].find("| vllm_only |") == 0);
  CHECK(lines[5].find("| som_gaze |") == 0);
  // 6 lambda columns -> 8 pipe characters per data row.
  CHECK(std::count(lines[2].begin(), lines[2].end(), '|') == 8);

  Evaluator video(small_suite(), random_mock_config(89));
  const Report table4 = video.run_grid(small_suite_records(),
                                       expand_preset("table4", false));
  const std::string video_md = emit_report(table4, ReportFormat::markdown);
  CHECK(video_md.find("2 fps") != std::string::npos);
  CHECK(video_md.find("16 fps") != std::string::npos);

  Evaluator sizes(small_suite(), random_mock_config(90));
  const Report table3 = sizes.run_grid(small_suite_records(),
                                       expand_preset("table3", false));
  const std::string sizes_md = emit_report(table3, ReportFormat::markdown);
  CHECK(sizes_md.find("som_gaze (n=5)") != std::string::npos);
  CHECK(sizes_md.find("som_gaze (n=30)") != std::string::npos);
}

TEST_CASE("report serialization round-trips and formats agree") {
  Evaluator evaluator(small_suite(), random_mock_config(404));
  const Report report = evaluator.run_grid(small_suite_records(),
                                           expand_preset("table1", false));

  const std::string json_text = emit_report(report, ReportFormat::json);
  const Report parsed = parse_report_json(json_text);
  CHECK(reports_equivalent(parsed, report));
  CHECK(parsed.started_at == report.started_at);
  CHECK(parsed.cells == report.cells);

  const std::string csv_text = emit_report(report, ReportFormat::csv);
  std::vector<std::string> rows;
  std::istringstream stream(csv_text);
  for (std::string line; std::getline(stream, line);) rows.push_back(line);
  REQUIRE(rows.size() == report.cells.size() + 1);
  CHECK(rows[0] ==
        "strategy,lambda,sample_size,fps,accuracy,correct_count,total,"
        "abstain_count,failure_count");
  for (std::size_t i = 0; i < report.cells.size(); ++i) {
    // Accuracy is the fifth field; %.17g makes the double round-trip exact.
    std::istringstream row(rows[i + 1]);
    std::string field;
    for (int f = 0; f < 5; ++f) std::getline(row, field, ',');
    CHECK(std::stod(field) == report.cells[i].stats.accuracy);
  }

  Report empty;
  CHECK_THROWS_AS(emit_report(empty, ReportFormat::json),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_report_json("not json"), FormatError);
  CHECK_THROWS_AS(parse_report_json("{}"), FormatError);

  CHECK(parse_report_format("json") == ReportFormat::json);
  CHECK(parse_report_format("csv") == ReportFormat::csv);
  CHECK(parse_report_format("markdown") == ReportFormat::markdown);
  CHECK_THROWS_AS(parse_report_format("pdf"), ConfigError);
}

TEST_CASE("evaluator constructor validates its configuration") {
  auto config = random_mock_config(1);
  config.concurrency = 0;
  CHECK_THROWS_AS(Evaluator(small_suite(), config), ConfigError);

  config = random_mock_config(1);
  config.sampling.sample_size = 0;
  CHECK_THROWS_AS(Evaluator(small_suite(), config), ConfigError);

  config = random_mock_config(1);
  config.sampling.lambda = 1.5;
  CHECK_THROWS_AS(Evaluator(small_suite(), config), ConfigError);
}
