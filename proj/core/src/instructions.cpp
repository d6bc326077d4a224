#include "freqdoc/instructions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <numeric>
#include <thread>
#include <tuple>

#include "freqdoc/error.hpp"

namespace freqdoc {

namespace {

constexpr std::array<std::string_view, 7> kTaskNames{"detect", "recognize", "spot",      "read_paragraph",
                                                     "read_full", "caption", "understand"};

std::size_t task_index(Task t) { return static_cast<std::size_t>(t); }

std::string json_string(std::string_view s) {
  return nlohmann::json(std::string(s)).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string require_string(const nlohmann::json& j, const char* key, const char* where) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw ValidationError(std::string(where) + " is missing string field \"" + key + "\"");
  }
  return j[key].get<std::string>();
}

std::vector<TextRegion> parse_regions(const nlohmann::json& j, const char* key, const Annotation& ann) {
  std::vector<TextRegion> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) throw ValidationError(std::string("\"") + key + "\" must be an array");
  for (const auto& item : j[key]) {
    if (!item.is_object()) throw ValidationError(std::string("entries of \"") + key + "\" must be objects");
    TextRegion r;
    r.text = require_string(item, "text", key);
    if (r.text.empty()) throw ValidationError(std::string("empty text in \"") + key + "\"");
    if (!item.contains("box") || !item["box"].is_array() || item["box"].size() != 4) {
      throw ValidationError(std::string("entries of \"") + key + "\" need a 4-number box");
    }
    for (int i = 0; i < 4; ++i) {
      if (!item["box"][i].is_number()) throw ValidationError("box coordinates must be numbers");
      r.box[i] = item["box"][i].get<double>();
    }
    const auto [x1, y1, x2, y2] = r.box;
    if (!(x1 < x2) || !(y1 < y2)) throw ValidationError(std::string("degenerate box in \"") + key + "\"");
    if (x1 < 0 || y1 < 0 || x2 > ann.width || y2 > ann.height) {
      throw ValidationError(std::string("box outside image bounds in \"") + key + "\"");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string record_id(const Annotation& ann, Task task, int template_index, std::uint64_t draw, std::size_t item) {
  std::uint64_t h = kFnvOffset;
  auto mix = [&h](std::string_view s) {
    h = fnv1a(s, h);
    h = fnv1a(std::string_view("\x1f", 1), h);
  };
  mix(ann.id);
  mix(ann.image);
  mix(to_string(task));
  mix(std::to_string(template_index));
  mix(std::to_string(draw));
  mix(std::to_string(item));
  return hex64(h);
}

std::vector<NormBox> mapped_boxes(const std::vector<TextRegion>& regions, const std::vector<std::size_t>& order,
                                  const CanvasTransform& t) {
  std::vector<NormBox> out;
  out.reserve(order.size());
  for (std::size_t i : order) out.push_back(map_box(regions[i].box, t));
  return out;
}

std::vector<std::size_t> flatten_rows(const std::vector<std::vector<std::size_t>>& rows) {
  std::vector<std::size_t> out;
  for (const auto& row : rows) out.insert(out.end(), row.begin(), row.end());
  return out;
}

void check_collapsed(const std::vector<TextRegion>& regions, const CanvasTransform& t, const char* what) {
  for (const auto& r : regions) {
    const NormBox b = map_box(r.box, t);
    if (!(b.coords[0] < b.coords[2]) || !(b.coords[1] < b.coords[3])) {
      throw ValidationError(std::string(what) + " box collapses to zero size at 3-decimal precision");
    }
  }
}

}  // namespace

std::string_view to_string(Task t) { return kTaskNames[task_index(t)]; }

std::string_view to_string(Stage s) { return s == Stage::kPretrain ? "pretrain" : "finetune"; }

Task parse_task(std::string_view s) {
  for (Task t : kAllTasks) {
    if (to_string(t) == s) return t;
  }
  throw ValidationError("unknown task " + std::string(s));
}

Stage parse_stage(std::string_view s) {
  if (s == "pretrain") return Stage::kPretrain;
  if (s == "finetune") return Stage::kFinetune;
  throw ValidationError("unknown stage " + std::string(s) + " (expected pretrain or finetune)");
}

bool is_perception(Task t) { return t != Task::kCaption && t != Task::kUnderstand; }

Annotation parse_annotation(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("annotation must be a JSON object");

  Annotation ann;
  ann.image = require_string(j, "image", "annotation");
  if (j.contains("id")) {
    if (j["id"].is_string()) {
      ann.id = j["id"].get<std::string>();
    } else if (j["id"].is_number_integer()) {
      ann.id = j["id"].dump();
    } else {
      throw ValidationError("\"id\" must be a string or integer");
    }
  } else {
    ann.id = ann.image;
  }
  for (const char* key : {"width", "height"}) {
    if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<long long>() <= 0) {
      throw ValidationError(std::string("annotation needs a positive integer \"") + key + "\"");
    }
  }
  ann.width = j["width"].get<int>();
  ann.height = j["height"].get<int>();
  ann.words = parse_regions(j, "words", ann);
  ann.paragraphs = parse_regions(j, "paragraphs", ann);
  if (j.contains("qa")) {
    if (!j["qa"].is_array()) throw ValidationError("\"qa\" must be an array");
    for (const auto& item : j["qa"]) {
      QaPair qa{require_string(item, "question", "qa entry"), require_string(item, "answer", "qa entry")};
      if (qa.question.empty() || qa.answer.empty()) throw ValidationError("qa entries need non-empty text");
      ann.qa.push_back(std::move(qa));
    }
  }
  if (j.contains("caption") && !j["caption"].is_null()) {
    ann.caption = require_string(j, "caption", "annotation");
    if (ann.caption->empty()) throw ValidationError("caption must be non-empty");
  }
  if (ann.words.empty() && ann.paragraphs.empty() && ann.qa.empty() && !ann.caption) {
    throw ValidationError("annotation has no words, paragraphs, qa or caption");
  }
  return ann;
}

const std::vector<std::string>& TemplateBank::for_task(Task t) const {
  switch (t) {
    case Task::kDetect:
      return detect;
    case Task::kRecognize:
      return recognize;
    case Task::kSpot:
      return spot;
    case Task::kReadParagraph:
      return read_paragraph;
    case Task::kReadFull:
      return read_full;
    case Task::kCaption:
      return caption;
    case Task::kUnderstand:
      break;
  }
  throw ValidationError("understand records use the question as the instruction");
}

std::vector<Task> eligible_tasks(const Annotation& ann) {
  std::vector<Task> out;
  if (!ann.words.empty()) {
    out.insert(out.end(), {Task::kDetect, Task::kRecognize, Task::kSpot});
  }
  if (!ann.paragraphs.empty()) out.push_back(Task::kReadParagraph);
  if (!ann.words.empty() || !ann.paragraphs.empty()) out.push_back(Task::kReadFull);
  return out;
}

std::optional<Task> sample_task(const Annotation& ann, Rng& rng) {
  const auto tasks = eligible_tasks(ann);
  if (tasks.empty()) return std::nullopt;
  return tasks[rng.uniform_index(tasks.size())];
}

std::string fill_template(std::string_view tmpl, std::string_view term, const NormBox* box) {
  std::string out(tmpl);
  auto replace_all = [&out](std::string_view key, const std::string& value) {
    for (std::size_t pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size())) {
      out.replace(pos, key.size(), value);
    }
  };
  replace_all("<term>", std::string(term));
  if (box) replace_all("<box>", format_box(*box));
  return out;
}

RenderedInstruction render_instruction(Task task, const TemplateBank& bank, const std::vector<NormBox>& boxes,
                                       Rng& rng) {
  const auto& templates = bank.for_task(task);
  if (templates.empty() || bank.determiners.empty() || bank.nouns.empty()) {
    throw ValidationError("template bank has no entries for task " + std::string(to_string(task)));
  }
  if (task == Task::kReadParagraph && boxes.size() != 1) {
    throw ValidationError("paragraph reading needs exactly one box");
  }
  RenderedInstruction r;
  r.template_index = static_cast<int>(rng.uniform_index(templates.size()));
  const std::string& det = bank.determiners[rng.uniform_index(bank.determiners.size())];
  const std::string& noun = bank.nouns[rng.uniform_index(bank.nouns.size())];
  r.text = fill_template(templates[r.template_index], det + " " + noun,
                         task == Task::kReadParagraph ? &boxes.front() : nullptr);
  return r;
}

std::vector<std::vector<std::size_t>> reading_rows(const std::vector<TextRegion>& regions) {
  std::vector<std::size_t> order(regions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ba = regions[a].box;
    const auto& bb = regions[b].box;
    return std::tie(ba[1], ba[0], ba[3], ba[2]) < std::tie(bb[1], bb[0], bb[3], bb[2]);
  });

  std::vector<std::vector<std::size_t>> rows;
  for (std::size_t i : order) {
    const auto& b = regions[i].box;
    if (!rows.empty()) {
      const auto& anchor = regions[rows.back().front()].box;
      const double overlap = std::min(anchor[3], b[3]) - std::max(anchor[1], b[1]);
      const double shorter = std::min(anchor[3] - anchor[1], b[3] - b[1]);
      if (overlap >= 0.5 * shorter) {
        rows.back().push_back(i);
        continue;
      }
    }
    rows.push_back({i});
  }
  for (auto& row : rows) {
    std::stable_sort(row.begin(), row.end(),
                     [&](std::size_t a, std::size_t b) { return regions[a].box[0] < regions[b].box[0]; });
  }
  return rows;
}

std::string render_response(Task task, const Annotation& ann, const CanvasTransform& t, std::size_t item) {
  auto need = [&](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string(to_string(task)) + " needs " + what);
  };
  std::string out;
  auto append_line = [&out](const std::string& s) {
    if (!out.empty()) out += '\n';
    out += s;
  };

  switch (task) {
    case Task::kDetect:
    case Task::kRecognize:
    case Task::kSpot: {
      need(!ann.words.empty(), "words");
      for (std::size_t i : flatten_rows(reading_rows(ann.words))) {
        const auto& w = ann.words[i];
        if (task == Task::kDetect) {
          append_line(format_box(map_box(w.box, t)));
        } else if (task == Task::kRecognize) {
          append_line(w.text);
        } else {
          append_line(w.text + " " + format_box(map_box(w.box, t)));
        }
      }
      return out;
    }
    case Task::kReadParagraph:
      need(item < ann.paragraphs.size(), "a paragraph");
      return ann.paragraphs[item].text;
    case Task::kReadFull: {
      need(!ann.words.empty() || !ann.paragraphs.empty(), "words or paragraphs");
      const auto& regions = ann.words.empty() ? ann.paragraphs : ann.words;
      for (const auto& row : reading_rows(regions)) {
        std::string line;
        for (std::size_t i : row) {
          if (!line.empty()) line += ' ';
          line += regions[i].text;
        }
        append_line(line);
      }
      return out;
    }
    case Task::kCaption:
      need(ann.caption.has_value(), "a caption");
      return *ann.caption;
    case Task::kUnderstand:
      need(item < ann.qa.size(), "a qa pair");
      return ann.qa[item].answer;
  }
  throw ValidationError("unknown task");
}

std::string to_jsonl(const InstructionRecord& r) {
  std::string out = "{\"id\":" + json_string(r.id) + ",\"image\":" + json_string(r.image) +
                    ",\"task\":" + json_string(to_string(r.task)) + ",\"instruction\":" + json_string(r.instruction) +
                    ",\"response\":" + json_string(r.response) + ",\"stage\":" + json_string(to_string(r.stage)) +
                    ",\"boxes\":[";
  for (std::size_t i = 0; i < r.boxes.size(); ++i) {
    if (i) out += ',';
    out += format_box(r.boxes[i]);
  }
  out += "]}";
  return out;
}

std::string to_jsonl(const RejectEntry& r) {
  return "{\"line_number\":" + std::to_string(r.line_number) + ",\"reason\":" + json_string(r.reason) + "}";
}

std::vector<InstructionRecord> build_records(const Annotation& ann, const TemplateBank& bank, Stage stage,
                                             std::uint64_t seed, int canvas_side) {
  const CanvasTransform t = make_canvas_transform(ann.width, ann.height, canvas_side);
  check_collapsed(ann.words, t, "word");
  check_collapsed(ann.paragraphs, t, "paragraph");

  Rng rng(splitmix64(fnv1a(ann.id) ^ splitmix64(seed)));
  std::vector<InstructionRecord> out;

  if (auto task = sample_task(ann, rng)) {
    const std::uint64_t draw = rng.next();
    std::size_t item = 0;
    std::vector<NormBox> boxes;
    if (*task == Task::kReadParagraph) {
      item = rng.uniform_index(ann.paragraphs.size());
      boxes.push_back(map_box(ann.paragraphs[item].box, t));
    } else if (*task == Task::kDetect || *task == Task::kSpot) {
      boxes = mapped_boxes(ann.words, flatten_rows(reading_rows(ann.words)), t);
    }
    const RenderedInstruction ins = render_instruction(*task, bank, boxes, rng);
    out.push_back({record_id(ann, *task, ins.template_index, draw, item), ann.image, *task, ins.text,
                   render_response(*task, ann, t, item), stage, std::move(boxes)});
  }

  if (stage == Stage::kPretrain && ann.caption) {
    const std::uint64_t draw = rng.next();
    const RenderedInstruction ins = render_instruction(Task::kCaption, bank, {}, rng);
    out.push_back({record_id(ann, Task::kCaption, ins.template_index, draw, 0), ann.image, Task::kCaption, ins.text,
                   *ann.caption, stage, {}});
  }

  if (stage == Stage::kFinetune) {
    for (std::size_t q = 0; q < ann.qa.size(); ++q) {
      const std::uint64_t draw = rng.next();
      out.push_back({record_id(ann, Task::kUnderstand, -1, draw, q), ann.image, Task::kUnderstand,
                     ann.qa[q].question, ann.qa[q].answer, stage, {}});
    }
  }

  if (out.empty()) {
    throw ValidationError("annotation supports no task in the " + std::string(to_string(stage)) + " stage");
  }
  return out;
}

DatasetResult build_dataset(const std::vector<std::string>& lines, const TemplateBank& bank, Stage stage,
                            std::uint64_t seed, int canvas_side, int workers) {
  struct Slot {
    std::vector<InstructionRecord> records;
    std::optional<std::string> error;
  };
  std::vector<Slot> slots(lines.size());

  auto process = [&](std::size_t i) {
    const std::string& line = lines[i];
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) return;
    try {
      slots[i].records = build_records(parse_annotation(line), bank, stage, seed, canvas_side);
    } catch (const ValidationError& e) {
      slots[i].error = e.what();
    }
  };

  const std::size_t n_workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, std::max<std::size_t>(lines.size(), 1));
  if (n_workers == 1) {
    for (std::size_t i = 0; i < lines.size(); ++i) process(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < lines.size(); i += n_workers) process(i);
      });
    }
    for (auto& th : pool) th.join();
  }

  DatasetResult result;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].error) {
      result.rejects.push_back({i + 1, *slots[i].error});
    }
    for (auto& r : slots[i].records) result.records.push_back(std::move(r));
  }
  std::stable_sort(result.records.begin(), result.records.end(),
                   [](const InstructionRecord& a, const InstructionRecord& b) { return a.id < b.id; });
  return result;
}

void MixPlan::validate() const {
  if (batch_size < 2 || batch_size % 2 != 0) throw ValidationError("batch_size must be a positive even integer");
  if (!(perception_fraction >= 0.0 && perception_fraction <= 1.0)) {
    throw ValidationError("perception_fraction must lie in [0, 1]");
  }
  const double n = perception_fraction * batch_size;
  if (std::abs(n - std::round(n)) > 1e-9) {
    throw ValidationError("perception_fraction * batch_size must be an integer");
  }
}

int MixPlan::perception_per_batch() const { return static_cast<int>(std::lround(perception_fraction * batch_size)); }

std::vector<std::vector<InstructionRecord>> mix_batches(const std::vector<InstructionRecord>& perception,
                                                        const std::vector<InstructionRecord>& comprehension,
                                                        const MixPlan& plan, MixReport* report) {
  plan.validate();
  const std::size_t np = plan.perception_per_batch();
  const std::size_t nc = plan.batch_size - np;
  std::vector<std::vector<InstructionRecord>> batches;
  std::size_t pi = 0;
  std::size_t ci = 0;
  while (pi + np <= perception.size() && ci + nc <= comprehension.size()) {
    std::vector<InstructionRecord> batch;
    batch.reserve(plan.batch_size);
    batch.insert(batch.end(), perception.begin() + pi, perception.begin() + pi + np);
    batch.insert(batch.end(), comprehension.begin() + ci, comprehension.begin() + ci + nc);
    pi += np;
    ci += nc;
    Rng rng(splitmix64(plan.seed ^ splitmix64(batches.size())));
    for (std::size_t i = batch.size(); i > 1; --i) {
      std::swap(batch[i - 1], batch[rng.uniform_index(i)]);
    }
    batches.push_back(std::move(batch));
  }
  if (report) {
    report->full_batches = batches.size();
    report->dropped_perception = perception.size() - pi;
    report->dropped_comprehension = comprehension.size() - ci;
    report->dropped_partial_batches = report->dropped_perception + report->dropped_comprehension > 0 ? 1 : 0;
    const bool p_out = pi + np > perception.size();
    const bool c_out = ci + nc > comprehension.size();
    report->exhausted = p_out && c_out ? "both" : p_out ? "perception" : c_out ? "comprehension" : "none";
  }
  return batches;
}

std::array<std::size_t, kAllTasks.size()> count_tasks(const std::vector<InstructionRecord>& records) {
  std::array<std::size_t, kAllTasks.size()> counts{};
  for (const auto& r : records) ++counts[task_index(r.task)];
  return counts;
}

}  // namespace freqdoc
