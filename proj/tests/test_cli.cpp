#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cli.hpp"
#include "freqdoc/error.hpp"
#include "freqdoc/image.hpp"
#include "freqdoc/synthetic.hpp"
#include "freqdoc/tensor.hpp"
#include "oracles.hpp"

using namespace freqdoc;
namespace fs = std::filesystem;

namespace {

constexpr const char* kToyIni = R"([pipeline]
canvas_side = 128
quality = 50
seed = 7

[encoder]
embed_dim = 8
depths = 2,2,2,2
heads = 2,4,8,16
window = 4
llm_dim = 6
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

struct Fixture {
  fs::path dir;
  fs::path config;
  fs::path page;

  explicit Fixture(const std::string& name) : dir(oracle::temp_dir("cli_" + name)) {
    config = dir / "toy.ini";
    spit(config, kToyIni);
    page = dir / "page.png";
    save_png(page, synthetic_document(200, 150, 1));
  }
};

}  // namespace

TEST(Config, ParsesSections) {
  const cli::RunConfig cfg = cli::parse_config(kToyIni);
  EXPECT_EQ(cfg.canvas_side, 128);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.encoder.embed_dim, 8);
  EXPECT_EQ(cfg.encoder.heads, (std::array<int, 4>{2, 4, 8, 16}));
  EXPECT_EQ(cfg.encoder.llm_dim, 6);
  EXPECT_NO_THROW(cfg.validate());
  const cli::RunConfig defaults = cli::parse_config("");
  EXPECT_EQ(defaults.canvas_side, 2560);
  EXPECT_EQ(defaults.encoder.token_dim(), 1024);
}

TEST(Config, Errors) {
  EXPECT_THROW(cli::parse_config("[pipeline]\nbogus = 1\n"), ValidationError);
  EXPECT_THROW(cli::parse_config("[pipeline]\ncanvas_side = abc\n"), ValidationError);
  EXPECT_THROW(cli::parse_config("[encoder]\ndepths = 1,2,3\n"), ValidationError);
  EXPECT_THROW(cli::parse_config("[pipeline]\ncube_mode = jpeg\n"), ValidationError);
  EXPECT_THROW(cli::parse_config("[other]\nx = 1\n"), ValidationError);
  EXPECT_THROW(cli::parse_config("[pipeline]\ncanvas_side = 100\n").validate(), ValidationError);
  EXPECT_THROW(cli::parse_config("[dataset]\nbatch_size = 7\n").validate(), ValidationError);
}

TEST(Config, HashIgnoresWorkers) {
  cli::RunConfig a = cli::parse_config(kToyIni);
  cli::RunConfig b = a;
  b.workers = 8;
  EXPECT_EQ(cli::config_hash(a), cli::config_hash(b));
  EXPECT_EQ(cli::config_hash(a).size(), 16u);
  b.seed = 8;
  EXPECT_NE(cli::config_hash(a), cli::config_hash(b));
  EXPECT_NE(cli::config_hash(a), cli::config_hash(a, {{"command", "x"}}));
}

TEST(Tokenize, WritesCubeTokensAndManifest) {
  Fixture f("tokenize");
  const fs::path out = f.dir / "out";
  ASSERT_EQ(cli::run({"tokenize", f.page.string(), "--out", out.string(), "--config", f.config.string(), "--emit",
                      "cube,tokens,projected"}),
            0);
  const Tensor cube = read_tensor(out / "page.cube.fqc");
  EXPECT_EQ(cube.dims, (std::vector<std::uint32_t>{192, 16, 16}));
  const Tensor tokens = read_tensor(out / "page.tokens.fqc");
  EXPECT_EQ(tokens.dims, (std::vector<std::uint32_t>{4, 64}));
  EXPECT_EQ(read_tensor(out / "page.projected.fqc").dims, (std::vector<std::uint32_t>{4, 6}));
  EXPECT_FALSE(fs::exists(out / "page.adapter.fqc"));

  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["command"], "tokenize");
  EXPECT_EQ(manifest["items"][0]["outputs"]["tokens"]["shape"], nlohmann::json::array({4, 64}));
  EXPECT_TRUE(manifest["failures"].empty());

  // same config reruns deterministically, with a different worker count
  const std::string first = slurp(out / "page.tokens.fqc");
  ASSERT_EQ(cli::run({"tokenize", f.page.string(), "--out", out.string(), "--config", f.config.string(), "--emit",
                      "cube,tokens,projected", "--workers", "2"}),
            0);
  EXPECT_EQ(slurp(out / "page.tokens.fqc"), first);
}

TEST(Tokenize, RefusesOtherConfigWithoutForce) {
  Fixture f("force");
  const fs::path out = f.dir / "out";
  const std::vector<std::string> base{"tokenize", f.page.string(), "--out", out.string(), "--config",
                                      f.config.string(), "--emit", "cube"};
  ASSERT_EQ(cli::run(base), 0);
  auto other = base;
  other.insert(other.end(), {"--seed", "99"});
  EXPECT_EQ(cli::run(other), 1);
  other.push_back("--force");
  EXPECT_EQ(cli::run(other), 0);
}

TEST(Tokenize, RgbFlattenMode) {
  Fixture f("rgb");
  const fs::path out = f.dir / "out";
  ASSERT_EQ(cli::run({"tokenize", f.page.string(), "--out", out.string(), "--config", f.config.string(), "--mode",
                      "rgb_flatten", "--emit", "cube,adapter,tokens"}),
            0);
  EXPECT_EQ(read_tensor(out / "page.cube.fqc").dims, (std::vector<std::uint32_t>{192, 16, 16}));
  EXPECT_EQ(read_tensor(out / "page.adapter.fqc").dims, (std::vector<std::uint32_t>{8, 16, 16}));
  EXPECT_EQ(read_tensor(out / "page.tokens.fqc").dims, (std::vector<std::uint32_t>{4, 64}));
}

TEST(Tokenize, BadImageGivesPartialExit) {
  Fixture f("partial");
  const fs::path bad = f.dir / "broken.png";
  spit(bad, "not an image at all");
  const fs::path out = f.dir / "out";
  EXPECT_EQ(cli::run({"tokenize", f.page.string(), bad.string(), "--out", out.string(), "--config",
                      f.config.string(), "--emit", "cube"}),
            2);
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["items"].size(), 1u);
  EXPECT_EQ(manifest["failures"].size(), 1u);
  EXPECT_TRUE(fs::exists(out / "page.cube.fqc"));
}

TEST(Tokenize, UsageErrors) {
  Fixture f("usage");
  EXPECT_EQ(cli::run({"tokenize", f.page.string(), "--out", (f.dir / "o").string(), "--emit", "pixels"}), 1);
  EXPECT_EQ(cli::run({"tokenize", "--out", (f.dir / "o").string()}), 1);
  EXPECT_EQ(cli::run({"nosuch"}), 1);
  EXPECT_EQ(cli::run({}), 1);
}

TEST(Reconstruct, RoundTripWithPsnr) {
  Fixture f("reconstruct");
  const fs::path out = f.dir / "out";
  ASSERT_EQ(cli::run({"tokenize", f.page.string(), "--out", out.string(), "--config", f.config.string(), "--emit",
                      "cube"}),
            0);
  testing::internal::CaptureStdout();
  const int code = cli::run({"reconstruct", (out / "page.cube.fqc").string(), "--out", (f.dir / "r.png").string(),
                             "--reference", f.page.string()});
  const std::string text = testing::internal::GetCapturedStdout();
  ASSERT_EQ(code, 0);
  EXPECT_EQ(load_image(f.dir / "r.png").width(), 128);
  ASSERT_EQ(text.rfind("psnr_luma_db=", 0), 0u) << text;
  EXPECT_GT(std::stod(text.substr(13)), 30.0);
}

TEST(Reconstruct, QuantizedNeedsQuality) {
  Fixture f("recq");
  const fs::path ini = f.dir / "q.ini";
  spit(ini, "[pipeline]\ncanvas_side = 128\ncube_mode = quantized\n");
  const fs::path out = f.dir / "out";
  ASSERT_EQ(cli::run({"tokenize", f.page.string(), "--out", out.string(), "--config", ini.string(), "--emit", "cube"}),
            0);
  const std::string cube = (out / "page.cube.fqc").string();
  EXPECT_EQ(cli::run({"reconstruct", cube, "--out", (f.dir / "a.png").string(), "--cube-mode", "quantized"}), 1);
  EXPECT_EQ(cli::run({"reconstruct", cube, "--out", (f.dir / "a.png").string(), "--cube-mode", "quantized",
                      "--quality", "50"}),
            0);
}

TEST(Reconstruct, RejectsNonCube) {
  Fixture f("recbad");
  write_tensor(f.dir / "t.fqc", Tensor({4, 64}));
  EXPECT_EQ(cli::run({"reconstruct", (f.dir / "t.fqc").string(), "--out", (f.dir / "x.png").string()}), 1);
  spit(f.dir / "junk.fqc", "FQC9garbage");
  EXPECT_EQ(cli::run({"reconstruct", (f.dir / "junk.fqc").string(), "--out", (f.dir / "x.png").string()}), 1);
}

TEST(BuildDataset, WritesRecordsStatsAndBatches) {
  Fixture f("dataset");
  std::string lines;
  for (const auto& l : synthetic_annotations(60, 3)) lines += l + "\n";
  spit(f.dir / "ann.jsonl", lines);
  const fs::path out = f.dir / "out";
  ASSERT_EQ(cli::run({"build-dataset", (f.dir / "ann.jsonl").string(), "--out", out.string(), "--stage", "finetune",
                      "--seed", "5"}),
            0);
  const auto stats = nlohmann::json::parse(slurp(out / "stats.json"));
  EXPECT_EQ(stats["stage"], "finetune");
  EXPECT_EQ(stats["annotations"], 60);
  EXPECT_EQ(stats["rejects"], 0);
  EXPECT_EQ(stats["tasks"]["caption"], 0);
  EXPECT_GT(stats["tasks"]["understand"].get<int>(), 0);
  EXPECT_EQ(stats["mix"]["perception_per_batch"], 4);

  std::istringstream recs(slurp(out / "records.jsonl"));
  std::map<std::string, bool> perception;
  std::string line;
  while (std::getline(recs, line)) {
    const auto j = nlohmann::json::parse(line);
    const std::string task = j["task"];
    perception[j["id"]] = task != "caption" && task != "understand";
  }
  EXPECT_EQ(perception.size(), stats["records"].get<std::size_t>());

  std::istringstream batches(slurp(out / "batches.jsonl"));
  std::size_t n = 0;
  while (std::getline(batches, line)) {
    const auto j = nlohmann::json::parse(line);
    ASSERT_EQ(j["ids"].size(), 8u);
    int p = 0;
    for (const auto& id : j["ids"]) p += perception.at(id.get<std::string>());
    EXPECT_EQ(p, 4);
    ++n;
  }
  EXPECT_EQ(n, stats["mix"]["full_batches"].get<std::size_t>());

  const std::string first = slurp(out / "records.jsonl");
  ASSERT_EQ(cli::run({"build-dataset", (f.dir / "ann.jsonl").string(), "--out", out.string(), "--stage", "finetune",
                      "--seed", "5", "--workers", "4"}),
            0);
  EXPECT_EQ(slurp(out / "records.jsonl"), first);
}

TEST(BuildDataset, RejectsGivePartialExit) {
  Fixture f("dsrej");
  spit(f.dir / "ann.jsonl", synthetic_annotations(1, 1)[0] + "\n{bad json\n");
  const fs::path out = f.dir / "out";
  EXPECT_EQ(cli::run({"build-dataset", (f.dir / "ann.jsonl").string(), "--out", out.string()}), 2);
  const auto rej = nlohmann::json::parse(slurp(out / "rejects.jsonl"));
  EXPECT_EQ(rej["line_number"], 2);
  EXPECT_EQ(cli::run({"build-dataset", (f.dir / "missing.jsonl").string(), "--out", out.string()}), 1);
}

TEST(Eval, ReportAndExitCodes) {
  Fixture f("eval");
  spit(f.dir / "r.jsonl",
       R"({"id":"1","dataset":"A","ground_truth":"ladies night","response":"The event is Ladies Night."})"
       "\n"
       R"({"id":"2","dataset":"A","ground_truth":"9.99","response":"9.98"})"
       "\n"
       R"({"id":"3","dataset":"B","ground_truths":["x","y"],"response":"y"})"
       "\n");
  testing::internal::CaptureStdout();
  ASSERT_EQ(cli::run({"eval", (f.dir / "r.jsonl").string(), "--out", (f.dir / "out").string()}), 0);
  const std::string table = testing::internal::GetCapturedStdout();
  EXPECT_NE(table.find("75.00"), std::string::npos);
  const auto report = nlohmann::json::parse(slurp(f.dir / "out" / "report.json"));
  EXPECT_DOUBLE_EQ(report["macro_average"].get<double>(), 75.0);
  EXPECT_EQ(report["datasets"][0]["name"], "A");

  testing::internal::CaptureStdout();
  ASSERT_EQ(cli::run({"eval", (f.dir / "r.jsonl").string(), "--out", (f.dir / "strict").string(), "--strict"}), 0);
  testing::internal::GetCapturedStdout();
  EXPECT_DOUBLE_EQ(nlohmann::json::parse(slurp(f.dir / "strict" / "report.json"))["macro_average"].get<double>(), 50.0);

  spit(f.dir / "mixed.jsonl", slurp(f.dir / "r.jsonl") + "{\"dataset\":\"A\"}\n");
  testing::internal::CaptureStdout();
  EXPECT_EQ(cli::run({"eval", (f.dir / "mixed.jsonl").string(), "--out", (f.dir / "m").string()}), 2);
  testing::internal::GetCapturedStdout();

  spit(f.dir / "none.jsonl", "{\"dataset\":\"A\"}\n");
  EXPECT_EQ(cli::run({"eval", (f.dir / "none.jsonl").string(), "--out", (f.dir / "n").string()}), 1);
  EXPECT_FALSE(fs::exists(f.dir / "n" / "report.json"));
}

TEST(Bench, ReportsBothModes) {
  Fixture f("bench");
  const fs::path out = f.dir / "bench.json";
  ASSERT_EQ(cli::run({"bench", "--config", f.config.string(), "--repetitions", "1", "--out", out.string()}), 0);
  const auto j = nlohmann::json::parse(slurp(out));
  EXPECT_EQ(j["resolution"], 128);
  EXPECT_EQ(j["expected_tokens"], 4);
  for (const char* mode : {"dct", "rgb_flatten"}) {
    EXPECT_EQ(j["modes"][mode]["tokens"], 4) << mode;
    EXPECT_EQ(j["modes"][mode]["token_dim"], 64) << mode;
    EXPECT_EQ(j["modes"][mode]["stages"]["encoder"]["samples_ms"].size(), 1u);
  }
  EXPECT_TRUE(j["modes"]["dct"]["stages"].contains("dct"));
  EXPECT_TRUE(j["modes"]["rgb_flatten"]["stages"].contains("flatten"));
  EXPECT_EQ(cli::run({"bench", "--config", f.config.string(), "--repetitions", "0"}), 1);
}
