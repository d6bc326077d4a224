#include "cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "freqdoc/error.hpp"
#include "freqdoc/eval.hpp"
#include "freqdoc/image.hpp"
#include "freqdoc/instructions.hpp"
#include "freqdoc/rng.hpp"
#include "freqdoc/synthetic.hpp"

namespace freqdoc::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::shared_ptr<spdlog::logger> logger() {
  if (auto existing = spdlog::get("freqdoc")) return existing;
  auto log = spdlog::stderr_color_mt("freqdoc");
  log->set_pattern("[%l] %v");
  log->set_level(spdlog::level::info);
  if (const char* env = std::getenv("FREQDOC_LOG")) {
    std::string name(env);
    if (name == "warning") name = "warn";
    if (name == "error") name = "err";
    const auto lvl = spdlog::level::from_str(name);
    if (lvl != spdlog::level::off || name == "off") {
      log->set_level(lvl);
    } else {
      log->warn("ignoring unknown FREQDOC_LOG level '{}'", env);
    }
  }
  return log;
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config key " + key + " expects an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config key " + key + " expects a number, got '" + value + "'");
  }
}

std::array<int, kNumStages> parse_stage_list(const std::string& key, const std::string& value) {
  std::array<int, kNumStages> out{};
  std::stringstream ss(value);
  std::string item;
  int n = 0;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (n >= kNumStages) break;
    out[n++] = parse_int(key, item);
  }
  if (n != kNumStages || std::getline(ss, item, ',')) {
    throw ValidationError("config key " + key + " expects exactly 4 comma-separated integers");
  }
  return out;
}

std::string join_stages(const std::array<int, kNumStages>& v) {
  std::string s;
  for (int i = 0; i < kNumStages; ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string tensor_shape(const Tensor& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.dims.size(); ++i) s += (i ? "," : "") + std::to_string(t.dims[i]);
  return s + "]";
}

ojson config_json(const std::vector<std::pair<std::string, std::string>>& pairs) {
  ojson j = ojson::object();
  for (const auto& [k, v] : pairs) j[k] = v;
  return j;
}

// Refuses to reuse an output directory produced under a different config.
void guard_manifest(const fs::path& dir, const std::string& hash, bool force) {
  const fs::path manifest = dir / "manifest.json";
  if (!fs::exists(manifest)) return;
  std::string existing;
  try {
    std::ifstream in(manifest);
    existing = nlohmann::json::parse(in).value("config_hash", "");
  } catch (const std::exception&) {
    existing = "";
  }
  if (existing == hash) return;
  if (!force) {
    throw ValidationError("output directory " + dir.string() + " holds results for config " +
                          (existing.empty() ? std::string("<unreadable>") : existing) + ", current config is " +
                          hash + "; pass --force to overwrite");
  }
  logger()->warn("overwriting outputs from config {} (--force)", existing);
}

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t threads = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1,
                                                      std::max<std::size_t>(n, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Pipeline {
  RunConfig cfg;
  QuantTables tables;
  AdapterWeights adapter;
  std::optional<ParamSet<float>> params;

  Pipeline(const RunConfig& c, bool need_encoder, const std::optional<fs::path>& params_dir)
      : cfg(c),
        tables(build_quant_tables(c.quality)),
        adapter(AdapterWeights::init(c.encoder.embed_dim, splitmix64(c.seed ^ 0xada9ULL))) {
    if (!need_encoder) return;
    if (params_dir) {
      params = load_params(*params_dir);
    } else {
      EncoderConfig ec = c.encoder;
      ec.seed = c.seed;
      params = init_params(ec).cast<float>();
    }
  }

  Tensor cube(const RgbImage& canvas) const {
    if (cfg.input_mode == InputMode::kRgbFlatten) return rgb_flatten_cube(canvas);
    return canvas_to_cube(canvas, tables, cfg.cube_mode, cfg.channel_order).tensor;
  }
};

// -- tokenize --

int cmd_tokenize(const RunConfig& cfg, const std::vector<std::string>& images, const fs::path& out_dir,
                 const std::string& emit_list, const std::optional<fs::path>& params_dir, bool force) {
  static const std::set<std::string> kKinds{"cube", "adapter", "tokens", "projected"};
  std::set<std::string> emit;
  {
    std::stringstream ss(emit_list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      if (!kKinds.count(item)) {
        throw ValidationError("unknown --emit entry '" + item + "' (expected cube, adapter, tokens, projected)");
      }
      emit.insert(item);
    }
  }
  if (emit.empty()) throw ValidationError("--emit selects nothing");
  if (images.empty()) throw ValidationError("tokenize needs at least one image");

  std::vector<std::pair<std::string, std::string>> extra{{"command", "tokenize"}, {"emit", emit_list}};
  if (params_dir) extra.emplace_back("params", fs::absolute(*params_dir).string());
  const std::string hash = config_hash(cfg, extra);
  fs::create_directories(out_dir);
  guard_manifest(out_dir, hash, force);

  const bool need_encoder = emit.count("tokens") || emit.count("projected");
  const Pipeline pipe(cfg, need_encoder, params_dir);

  std::vector<std::string> stems(images.size());
  {
    std::map<std::string, int> seen;
    for (std::size_t i = 0; i < images.size(); ++i) {
      std::string stem = fs::path(images[i]).stem().string();
      if (seen[stem]++) stem += "_" + std::to_string(i);
      stems[i] = stem;
    }
  }

  struct Item {
    std::vector<std::pair<std::string, std::pair<std::string, std::string>>> outputs;  // kind -> (file, shape)
    std::optional<std::string> error;
  };
  std::vector<Item> items(images.size());

  parallel_for(images.size(), cfg.workers, [&](std::size_t i) {
    try {
      const RgbImage img = load_image(images[i]);
      const CanvasResult canvas = resize_and_pad(img, cfg.canvas_side);
      const Tensor cube = pipe.cube(canvas.canvas);
      auto save = [&](const std::string& kind, const Tensor& t) {
        if (!emit.count(kind)) return;
        const std::string file = stems[i] + "." + kind + ".fqc";
        write_tensor(out_dir / file, t);
        items[i].outputs.push_back({kind, {file, tensor_shape(t)}});
      };
      save("cube", cube);
      if (!emit.count("adapter") && !need_encoder) return;
      const Tensor features = adapter_project(cube, pipe.adapter);
      save("adapter", features);
      if (!need_encoder) return;
      const VisualTokens tokens = encode(features, *pipe.params, cfg.encoder);
      save("tokens", to_tensor(tokens.data));
      save("projected", to_tensor(tokens.projected));
      logger()->info("{}: {} tokens x {}", images[i], tokens.count, tokens.dim);
    } catch (const std::exception& e) {
      items[i].error = e.what();
      logger()->error("{}: {}", images[i], e.what());
    }
  });

  ojson manifest;
  manifest["command"] = "tokenize";
  manifest["config_hash"] = hash;
  manifest["config"] = config_json(cfg.canonical());
  manifest["items"] = ojson::array();
  manifest["failures"] = ojson::array();
  std::size_t failures = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (items[i].error) {
      ++failures;
      manifest["failures"].push_back({{"image", images[i]}, {"reason", *items[i].error}});
      continue;
    }
    ojson outputs = ojson::object();
    for (const auto& [kind, fileshape] : items[i].outputs) {
      outputs[kind] = {{"file", fileshape.first}, {"shape", nlohmann::json::parse(fileshape.second)}};
    }
    manifest["items"].push_back({{"image", images[i]}, {"outputs", outputs}});
  }
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return failures ? static_cast<int>(ExitCode::kPartial) : 0;
}

// -- reconstruct --

int cmd_reconstruct(const RunConfig& cfg, const fs::path& cube_file, const fs::path& out_png,
                    std::optional<std::string> mode_name, std::optional<std::string> order_name,
                    std::optional<int> quality, const std::optional<fs::path>& reference) {
  FrequencyCube cube;
  cube.tensor = read_tensor(cube_file);
  if (cube.tensor.dims.size() != 3 || cube.tensor.dims[0] != kCubeChannels ||
      cube.tensor.dims[1] != cube.tensor.dims[2]) {
    throw ValidationError("reconstruct expects a {192, S, S} cube, got " + tensor_shape(cube.tensor));
  }
  cube.mode = mode_name ? parse_cube_mode(*mode_name) : cfg.cube_mode;
  cube.order = order_name ? parse_channel_order(*order_name) : cfg.channel_order;
  std::optional<QuantTables> tables;
  if (cube.mode == CubeMode::kQuantized) {
    if (!quality) throw ValidationError("a quantized cube needs --quality to restore coefficient scale");
    tables = build_quant_tables(*quality);
  }
  const RgbImage recon = reconstruct_canvas(cube, tables);
  if (out_png.has_parent_path()) fs::create_directories(out_png.parent_path());
  save_png(out_png, recon);
  logger()->info("wrote {} ({}x{})", out_png.string(), recon.width(), recon.height());

  if (reference) {
    const CanvasResult ref = resize_and_pad(load_image(*reference), recon.width());
    const Plane a = rgb_to_ycbcr(ref.canvas).y;
    const Plane b = rgb_to_ycbcr(recon).y;
    double se = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
      const double d = static_cast<double>(a.data[i]) - b.data[i];
      se += d * d;
    }
    const double mse = se / static_cast<double>(a.data.size());
    const double psnr = mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(255.0 * 255.0 / mse);
    std::cout << "psnr_luma_db=" << fmt::format("{:.3f}", psnr) << "\n";
  }
  return 0;
}

// -- build-dataset --

int cmd_build_dataset(const RunConfig& cfg, const fs::path& annotations, Stage stage, const fs::path& out_dir,
                      bool force) {
  const std::vector<std::pair<std::string, std::string>> extra{{"command", "build-dataset"},
                                                               {"stage", std::string(to_string(stage))}};
  const std::string hash = config_hash(cfg, extra);
  const std::vector<std::string> lines = read_lines(annotations);
  fs::create_directories(out_dir);
  guard_manifest(out_dir, hash, force);

  const DatasetResult result = build_dataset(lines, default_bank(), stage, cfg.seed, cfg.canvas_side, cfg.workers);

  std::string records;
  for (const auto& r : result.records) records += to_jsonl(r) + "\n";
  write_text(out_dir / "records.jsonl", records);
  std::string rejects;
  for (const auto& r : result.rejects) rejects += to_jsonl(r) + "\n";
  write_text(out_dir / "rejects.jsonl", rejects);

  std::vector<InstructionRecord> perception;
  std::vector<InstructionRecord> comprehension;
  for (const auto& r : result.records) (is_perception(r.task) ? perception : comprehension).push_back(r);
  const MixPlan plan{cfg.batch_size, cfg.perception_fraction, cfg.seed};
  MixReport mix;
  const auto batches = mix_batches(perception, comprehension, plan, &mix);

  std::string batch_lines;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    ojson line;
    line["batch"] = b;
    line["ids"] = ojson::array();
    for (const auto& r : batches[b]) line["ids"].push_back(r.id);
    batch_lines += line.dump() + "\n";
  }
  write_text(out_dir / "batches.jsonl", batch_lines);

  const auto counts = count_tasks(result.records);
  ojson stats;
  stats["stage"] = to_string(stage);
  stats["annotations"] = std::count_if(lines.begin(), lines.end(), [](const std::string& l) {
    return l.find_first_not_of(" \t\r\n") != std::string::npos;
  });
  stats["records"] = result.records.size();
  stats["rejects"] = result.rejects.size();
  stats["tasks"] = ojson::object();
  for (std::size_t t = 0; t < kAllTasks.size(); ++t) stats["tasks"][std::string(to_string(kAllTasks[t]))] = counts[t];
  stats["mix"] = {{"batch_size", plan.batch_size},
                  {"perception_per_batch", plan.perception_per_batch()},
                  {"comprehension_per_batch", plan.batch_size - plan.perception_per_batch()},
                  {"full_batches", mix.full_batches},
                  {"dropped_partial_batches", mix.dropped_partial_batches},
                  {"dropped_perception", mix.dropped_perception},
                  {"dropped_comprehension", mix.dropped_comprehension},
                  {"exhausted", mix.exhausted}};
  write_text(out_dir / "stats.json", stats.dump(2) + "\n");

  ojson manifest;
  manifest["command"] = "build-dataset";
  manifest["config_hash"] = hash;
  manifest["config"] = config_json(cfg.canonical());
  manifest["input"] = annotations.string();
  manifest["files"] = {"records.jsonl", "rejects.jsonl", "batches.jsonl", "stats.json"};
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");

  logger()->info("{} records, {} rejects, {} batches", result.records.size(), result.rejects.size(), batches.size());
  return result.rejects.empty() ? 0 : static_cast<int>(ExitCode::kPartial);
}

// -- eval --

int cmd_eval(const fs::path& responses, const fs::path& out_dir, bool strict) {
  const std::vector<std::string> lines = read_lines(responses);
  std::vector<EvalSample> samples;
  std::vector<RejectEntry> rejects;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      samples.push_back(parse_eval_sample(lines[i]));
    } catch (const ValidationError& e) {
      rejects.push_back({i + 1, e.what()});
    }
  }
  if (samples.empty()) {
    throw ValidationError("no valid samples in " + responses.string());
  }
  const EvalReport report = evaluate(samples, strict ? MatchMode::kStrict : MatchMode::kNormalized);
  fs::create_directories(out_dir);
  write_text(out_dir / "report.json", report_to_json(report) + "\n");
  write_text(out_dir / "report.txt", report_to_table(report));
  std::string reject_text;
  for (const auto& r : rejects) reject_text += to_jsonl(r) + "\n";
  write_text(out_dir / "rejects.jsonl", reject_text);
  std::cout << report_to_table(report);
  return rejects.empty() ? 0 : static_cast<int>(ExitCode::kPartial);
}

// -- bench --

int cmd_bench(const RunConfig& cfg, const std::optional<fs::path>& image, int repetitions,
              const std::optional<std::string>& only_mode, const std::optional<fs::path>& out_file) {
  if (repetitions < 1) throw ValidationError("--repetitions must be >= 1");
  std::vector<std::uint8_t> bytes;
  if (image) {
    std::ifstream in(*image, std::ios::binary);
    if (!in) throw IoError("cannot open " + image->string());
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  } else {
    bytes = encode_jpeg(synthetic_document(cfg.canvas_side, cfg.canvas_side * 5 / 4, cfg.seed), 90);
  }

  std::vector<InputMode> modes{InputMode::kDct, InputMode::kRgbFlatten};
  if (only_mode) modes = {parse_input_mode(*only_mode)};

  ojson report;
  report["resolution"] = cfg.canvas_side;
  report["repetitions"] = repetitions;
  report["expected_tokens"] = token_count(cfg.canvas_side, TokenMode::kDct);
  report["modes"] = ojson::object();

  for (InputMode mode : modes) {
    RunConfig mc = cfg;
    mc.input_mode = mode;
    const Pipeline pipe(mc, true, std::nullopt);
    std::vector<std::string> names = mode == InputMode::kDct
                                         ? std::vector<std::string>{"decode", "resize", "colorspace", "dct", "adapter",
                                                                    "encoder"}
                                         : std::vector<std::string>{"decode", "resize", "flatten", "adapter", "encoder"};
    std::map<std::string, std::vector<double>> samples;
    int tokens = 0;
    int dim = 0;
    for (int rep = 0; rep < repetitions; ++rep) {
      auto t0 = std::chrono::steady_clock::now();
      const RgbImage img = decode_image(bytes);
      samples["decode"].push_back(seconds_since(t0));

      t0 = std::chrono::steady_clock::now();
      const CanvasResult canvas = resize_and_pad(img, mc.canvas_side);
      samples["resize"].push_back(seconds_since(t0));

      Tensor cube;
      if (mode == InputMode::kDct) {
        t0 = std::chrono::steady_clock::now();
        const YcbcrPlanes planes = subsample_chroma(rgb_to_ycbcr(canvas.canvas));
        samples["colorspace"].push_back(seconds_since(t0));
        t0 = std::chrono::steady_clock::now();
        cube = extract_frequency_cube(planes, pipe.tables, mc.cube_mode, mc.channel_order).tensor;
        samples["dct"].push_back(seconds_since(t0));
      } else {
        t0 = std::chrono::steady_clock::now();
        cube = rgb_flatten_cube(canvas.canvas);
        samples["flatten"].push_back(seconds_since(t0));
      }

      t0 = std::chrono::steady_clock::now();
      const Tensor features = adapter_project(cube, pipe.adapter);
      samples["adapter"].push_back(seconds_since(t0));

      t0 = std::chrono::steady_clock::now();
      const VisualTokens vt = encode(features, *pipe.params, mc.encoder);
      samples["encoder"].push_back(seconds_since(t0));
      tokens = vt.count;
      dim = vt.dim;
    }
    ojson stages = ojson::object();
    for (const auto& name : names) {
      ojson ms = ojson::array();
      for (double s : samples[name]) ms.push_back(s * 1e3);
      stages[name] = {{"median_ms", median(samples[name]) * 1e3}, {"samples_ms", ms}};
    }
    report["modes"][std::string(to_string(mode))] = {{"stages", stages}, {"tokens", tokens}, {"token_dim", dim}};
    logger()->info("{}: {} tokens, encoder median {:.1f} ms", to_string(mode), tokens,
                   median(samples["encoder"]) * 1e3);
  }

  const std::string text = report.dump(2) + "\n";
  if (out_file) {
    if (out_file->has_parent_path()) fs::create_directories(out_file->parent_path());
    write_text(*out_file, text);
  } else {
    std::cout << text;
  }
  return 0;
}

}  // namespace

std::string_view to_string(InputMode m) { return m == InputMode::kDct ? "dct" : "rgb_flatten"; }

InputMode parse_input_mode(std::string_view s) {
  if (s == "dct") return InputMode::kDct;
  if (s == "rgb_flatten") return InputMode::kRgbFlatten;
  throw ValidationError("unknown input mode " + std::string(s) + " (expected dct or rgb_flatten)");
}

void RunConfig::validate() const {
  if (canvas_side <= 0 || canvas_side % 64 != 0) {
    throw ValidationError("canvas_side must be a positive multiple of 64, got " + std::to_string(canvas_side));
  }
  if (quality < 1 || quality > 100) throw ValidationError("quality must be in 1..100");
  if (workers < 1) throw ValidationError("workers must be >= 1");
  encoder.validate();
  MixPlan{batch_size, perception_fraction, seed}.validate();
}

std::vector<std::pair<std::string, std::string>> RunConfig::canonical() const {
  std::vector<std::pair<std::string, std::string>> kv{
      {"dataset.batch_size", std::to_string(batch_size)},
      {"dataset.perception_fraction", fmt::format("{}", perception_fraction)},
      {"encoder.depths", join_stages(encoder.depths)},
      {"encoder.embed_dim", std::to_string(encoder.embed_dim)},
      {"encoder.heads", join_stages(encoder.heads)},
      {"encoder.llm_dim", std::to_string(encoder.llm_dim)},
      {"encoder.mlp_ratio", fmt::format("{}", encoder.mlp_ratio)},
      {"encoder.window", std::to_string(encoder.window)},
      {"pipeline.canvas_side", std::to_string(canvas_side)},
      {"pipeline.channel_order", std::string(freqdoc::to_string(channel_order))},
      {"pipeline.cube_mode", std::string(freqdoc::to_string(cube_mode))},
      {"pipeline.input_mode", std::string(cli::to_string(input_mode))},
      {"pipeline.quality", std::to_string(quality)},
      {"pipeline.seed", std::to_string(seed)},
  };
  return kv;
}

std::string config_hash(const RunConfig& cfg, const std::vector<std::pair<std::string, std::string>>& extra) {
  auto kv = cfg.canonical();
  kv.insert(kv.end(), extra.begin(), extra.end());
  std::sort(kv.begin(), kv.end());
  std::uint64_t h = kFnvOffset;
  for (const auto& [k, v] : kv) h = fnv1a(k + "=" + v + "\n", h);
  return fmt::format("{:016x}", h);
}

RunConfig parse_config(std::string_view ini_text) {
  boost::property_tree::ptree tree;
  std::istringstream in{std::string(ini_text)};
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError(std::string("config parse error: ") + e.what());
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ValidationError("config key '" + section + "' must live inside a section");
    for (const auto& [key, node] : body) {
      const std::string name = section + "." + key;
      const std::string value = node.get_value<std::string>();
      if (name == "pipeline.canvas_side") {
        cfg.canvas_side = parse_int(name, value);
      } else if (name == "pipeline.quality") {
        cfg.quality = parse_int(name, value);
      } else if (name == "pipeline.cube_mode") {
        cfg.cube_mode = parse_cube_mode(value);
      } else if (name == "pipeline.channel_order") {
        cfg.channel_order = parse_channel_order(value);
      } else if (name == "pipeline.input_mode") {
        cfg.input_mode = parse_input_mode(value);
      } else if (name == "pipeline.seed") {
        try {
          cfg.seed = std::stoull(value);
        } catch (const std::exception&) {
          throw ValidationError("config key pipeline.seed expects an unsigned integer");
        }
      } else if (name == "pipeline.workers") {
        cfg.workers = parse_int(name, value);
      } else if (name == "encoder.embed_dim") {
        cfg.encoder.embed_dim = parse_int(name, value);
      } else if (name == "encoder.depths") {
        cfg.encoder.depths = parse_stage_list(name, value);
      } else if (name == "encoder.heads") {
        cfg.encoder.heads = parse_stage_list(name, value);
      } else if (name == "encoder.window") {
        cfg.encoder.window = parse_int(name, value);
      } else if (name == "encoder.mlp_ratio") {
        cfg.encoder.mlp_ratio = parse_double(name, value);
      } else if (name == "encoder.llm_dim") {
        cfg.encoder.llm_dim = parse_int(name, value);
      } else if (name == "dataset.batch_size") {
        cfg.batch_size = parse_int(name, value);
      } else if (name == "dataset.perception_fraction") {
        cfg.perception_fraction = parse_double(name, value);
      } else {
        throw ValidationError("unknown config key " + name);
      }
    }
  }
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

int run(int argc, const char* const* argv) {
  auto log = logger();
  CLI::App app{"Frequency-domain document tokenizer and OCR instruction toolkit", "freqdoc"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string mode;
  std::string stage_name = "pretrain";
  std::string out;
  bool force = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Global seed");
    sub->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  };

  auto* tok = app.add_subcommand("tokenize", "Images -> frequency cubes and visual tokens");
  add_common(tok);
  std::vector<std::string> images;
  std::string emit = "cube,tokens";
  std::string params_dir;
  tok->add_option("images", images, "Input PNG/JPEG files")->required();
  tok->add_option("--out", out, "Output directory")->required();
  tok->add_option("--mode", mode, "Input mode")->check(CLI::IsMember({"dct", "rgb_flatten"}));
  tok->add_option("--emit", emit, "Comma list of cube, adapter, tokens, projected");
  tok->add_option("--params", params_dir, "Encoder checkpoint directory")->check(CLI::ExistingDirectory);
  tok->add_flag("--force", force, "Overwrite outputs made with another config");

  auto* rec = app.add_subcommand("reconstruct", "Cube -> PNG via inverse DCT");
  add_common(rec);
  std::string cube_file;
  std::string cube_mode;
  std::string channel_order;
  int quality = 0;
  std::string reference;
  rec->add_option("cube", cube_file, "Cube FQC1 file")->required()->check(CLI::ExistingFile);
  rec->add_option("--out", out, "Output PNG path")->required();
  auto* mode_opt = rec->add_option("--cube-mode", cube_mode, "raw, quantized or dequantized");
  auto* order_opt = rec->add_option("--channel-order", channel_order, "zigzag or row_major");
  auto* quality_opt = rec->add_option("--quality", quality, "Quality used to build the cube (1-100)");
  auto* ref_opt = rec->add_option("--reference", reference, "Original image; prints luma PSNR")
                      ->check(CLI::ExistingFile);

  auto* ds = app.add_subcommand("build-dataset", "Annotations JSONL -> instruction records");
  add_common(ds);
  std::string annotations;
  ds->add_option("annotations", annotations, "Annotation JSONL")->required()->check(CLI::ExistingFile);
  ds->add_option("--out", out, "Output directory")->required();
  ds->add_option("--stage", stage_name, "pretrain or finetune")->check(CLI::IsMember({"pretrain", "finetune"}));
  ds->add_flag("--force", force, "Overwrite outputs made with another config");

  auto* ev = app.add_subcommand("eval", "Score responses by containment accuracy");
  std::string responses;
  bool strict = false;
  ev->add_option("responses", responses, "Responses JSONL")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", out, "Output directory")->required();
  ev->add_flag("--strict", strict, "Byte-exact containment, no normalization");

  auto* bench = app.add_subcommand("bench", "Per-stage timing for dct and rgb_flatten");
  add_common(bench);
  std::string bench_image;
  int repetitions = 3;
  bench->add_option("image", bench_image, "Fixture image (synthetic page if omitted)")->check(CLI::ExistingFile);
  bench->add_option("--repetitions", repetitions, "Repetitions per mode");
  bench->add_option("--mode", mode, "Only this input mode")->check(CLI::IsMember({"dct", "rgb_flatten"}));
  bench->add_option("--out", out, "Write the JSON report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kValidation);
  }

  try {
    auto resolve = [&](CLI::App* sub) {
      RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
      if (sub->count("--seed")) cfg.seed = seed;
      if (sub->count("--workers")) cfg.workers = workers;
      if (sub->get_option_no_throw("--mode") && sub->count("--mode")) cfg.input_mode = parse_input_mode(mode);
      cfg.validate();
      return cfg;
    };

    if (*tok) {
      const RunConfig cfg = resolve(tok);
      return cmd_tokenize(cfg, images, out, emit,
                          params_dir.empty() ? std::nullopt : std::optional<fs::path>(params_dir), force);
    }
    if (*rec) {
      const RunConfig cfg = resolve(rec);
      return cmd_reconstruct(cfg, cube_file, out, mode_opt->count() ? std::optional(cube_mode) : std::nullopt,
                             order_opt->count() ? std::optional(channel_order) : std::nullopt,
                             quality_opt->count() ? std::optional(quality) : std::nullopt,
                             ref_opt->count() ? std::optional<fs::path>(reference) : std::nullopt);
    }
    if (*ds) {
      const RunConfig cfg = resolve(ds);
      return cmd_build_dataset(cfg, annotations, parse_stage(stage_name), out, force);
    }
    if (*ev) {
      return cmd_eval(responses, out, strict);
    }
    if (*bench) {
      const RunConfig cfg = resolve(bench);
      return cmd_bench(cfg, bench_image.empty() ? std::nullopt : std::optional<fs::path>(bench_image), repetitions,
                       bench->count("--mode") ? std::optional(mode) : std::nullopt,
                       out.empty() ? std::nullopt : std::optional<fs::path>(out));
    }
  } catch (const ValidationError& e) {
    log->error("{}", e.what());
    return static_cast<int>(ExitCode::kValidation);
  } catch (const FormatError& e) {
    log->error("{}", e.what());
    return static_cast<int>(ExitCode::kValidation);
  } catch (const IoError& e) {
    log->error("{}", e.what());
    return static_cast<int>(ExitCode::kValidation);
  }
  return static_cast<int>(ExitCode::kValidation);
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"freqdoc"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace freqdoc::cli
