#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gelboot/mc.hpp"

using namespace gelboot;

namespace {

McConfig tiny_config() {
  McConfig cfg;
  cfg.dgp.name = DgpName::C1;
  cfg.dgp.n = 60;
  cfg.R = 8;
  cfg.estimators = {Estimator::EL, Estimator::GMM};
  cfg.gel_schemes = {McScheme::L, McScheme::BN};
  cfg.levels = {0.90, 0.95};
  cfg.seed = 404;
  return cfg;
}

const McCell* find_cell(const McTable& t, const std::string& label) {
  for (const McCell& c : t.cells)
    if (c.label() == label) return &c;
  return nullptr;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("warp-speed table: cells, bounds and coverage monotonicity") {
  const McTable table = run_warp_speed(tiny_config());

  // EL contributes Asymp MR/C plus one boot cell per scheme; GMM contributes
  // Asymp-C and (when the draw succeeds) Boot-C-HH
  CHECK(find_cell(table, "Asymp-EL-MR") != nullptr);
  CHECK(find_cell(table, "Asymp-EL-C") != nullptr);
  CHECK(find_cell(table, "Boot-EL-MR-L") != nullptr);
  CHECK(find_cell(table, "Boot-EL-MR-BN") != nullptr);
  CHECK(find_cell(table, "Asymp-GMM-C") != nullptr);
  CHECK(table.centers_used.at(Estimator::EL) == 0.4);

  for (const McCell& c : table.cells) {
    REQUIRE(c.coverage.size() == 2);
    for (double p : c.coverage) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
    }
    // levels are (0.90, 0.95): the wider critical value can only cover more
    CHECK(c.coverage[1] >= c.coverage[0]);
    CHECK(c.mean_width[1] >= c.mean_width[0]);
    for (double w : c.mean_width) CHECK(w >= 0.0);
    CHECK(c.reps_used + c.failures == 8);
    CHECK(c.j_rejection >= 0.0);
    CHECK(c.j_rejection <= 1.0);
    // with R=8 every coverage estimate is a multiple of 1/reps_used
    if (c.reps_used > 0) {
      const double scaled = c.coverage[0] * c.reps_used;
      CHECK(std::fabs(scaled - std::round(scaled)) < 1e-9);
    }
  }
  CHECK(table.seconds > 0.0);
}

TEST_CASE("warp-speed run is deterministic across thread counts") {
  McConfig cfg = tiny_config();
  const McTable a = run_warp_speed(cfg);
  cfg.threads = 4;
  const McTable b = run_warp_speed(cfg);
  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].label() == b.cells[i].label());
    CHECK(a.cells[i].coverage == b.cells[i].coverage);
    CHECK(a.cells[i].mean_width == b.cells[i].mean_width);
    CHECK(a.cells[i].j_rejection == b.cells[i].j_rejection);
    CHECK(a.cells[i].reps_used == b.cells[i].reps_used);
  }
}

TEST_CASE("different master seeds change the results") {
  McConfig cfg = tiny_config();
  const McTable a = run_warp_speed(cfg);
  cfg.seed = 405;
  const McTable b = run_warp_speed(cfg);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.cells.size() && i < b.cells.size(); ++i)
    if (a.cells[i].coverage != b.cells[i].coverage ||
        a.cells[i].mean_width != b.cells[i].mean_width)
      any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("R=1 coverage is zero or one") {
  McConfig cfg = tiny_config();
  cfg.R = 1;
  cfg.estimators = {Estimator::EL};
  cfg.gel_schemes = {McScheme::L};
  const McTable table = run_warp_speed(cfg);
  for (const McCell& c : table.cells)
    for (double p : c.coverage) CHECK((p == 0.0 || p == 1.0));
}

TEST_CASE("csv emit/parse round trip is bit exact") {
  const McTable table = run_warp_speed(tiny_config());
  const std::string path = temp_path("gelboot_mc_roundtrip.csv");
  emit_table(table, path, TableFormat::Csv);

  std::vector<double> levels;
  std::uint64_t seed = 0;
  std::string version;
  const std::vector<McCell> cells = parse_table_csv(path, &levels, &seed, &version);
  CHECK(version == kVersion);
  CHECK(seed == table.config.seed);
  CHECK(levels == table.config.levels);
  REQUIRE(cells.size() == table.cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    CHECK(cells[i].label() == table.cells[i].label());
    CHECK(cells[i].coverage == table.cells[i].coverage);
    CHECK(cells[i].mc_se == table.cells[i].mc_se);
    CHECK(cells[i].mean_width == table.cells[i].mean_width);
    CHECK(cells[i].j_rejection == table.cells[i].j_rejection);
    CHECK(cells[i].reps_used == table.cells[i].reps_used);
    CHECK(cells[i].failures == table.cells[i].failures);
    CHECK(cells[i].flagged == table.cells[i].flagged);
  }
  std::filesystem::remove(path);
}

TEST_CASE("markdown table has one row per cell plus the header") {
  const McTable table = run_warp_speed(tiny_config());
  const std::string path = temp_path("gelboot_mc_table.md");
  emit_table(table, path, TableFormat::Markdown);
  const std::string text = slurp(path);
  std::size_t pipe_rows = 0;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line))
    if (!line.empty() && line.front() == '|') ++pipe_rows;
  CHECK(pipe_rows == table.cells.size() + 2);  // header + separator
  CHECK(text.find(kVersion) != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("manifest echoes the configuration") {
  const McTable table = run_warp_speed(tiny_config());
  const std::string path = temp_path("gelboot_mc_manifest.json");
  emit_manifest(table, path);
  const std::string text = slurp(path);
  CHECK(text.find("\"name\": \"C1\"") != std::string::npos);
  CHECK(text.find("\"R\": 8") != std::string::npos);
  CHECK(text.find("\"seed\": 404") != std::string::npos);
  CHECK(text.find("Boot-EL-MR-L") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("invalid configurations are rejected") {
  McConfig cfg = tiny_config();
  cfg.R = 0;
  CHECK_THROWS_AS((void)run_warp_speed(cfg), std::invalid_argument);
  cfg = tiny_config();
  cfg.dgp.T = 2;
  CHECK_THROWS_AS((void)run_warp_speed(cfg), std::invalid_argument);
}
