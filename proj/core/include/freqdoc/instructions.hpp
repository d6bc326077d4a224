#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "freqdoc/image.hpp"
#include "freqdoc/rng.hpp"

namespace freqdoc {

enum class Task { kDetect, kRecognize, kSpot, kReadParagraph, kReadFull, kCaption, kUnderstand };
inline constexpr std::array<Task, 7> kAllTasks{Task::kDetect,   Task::kRecognize, Task::kSpot,      Task::kReadParagraph,
                                               Task::kReadFull, Task::kCaption,   Task::kUnderstand};

enum class Stage { kPretrain, kFinetune };

std::string_view to_string(Task t);
std::string_view to_string(Stage s);
Task parse_task(std::string_view s);
Stage parse_stage(std::string_view s);

/// True for the five OCR tasks.
bool is_perception(Task t);

struct TextRegion {
  std::string text;
  std::array<double, 4> box{};  // pixel rect in the original image
};

struct QaPair {
  std::string question;
  std::string answer;
};

struct Annotation {
  std::string id;  // "id" field, or the image path when absent
  std::string image;
  int width = 0;
  int height = 0;
  std::vector<TextRegion> words;
  std::vector<TextRegion> paragraphs;
  std::vector<QaPair> qa;
  std::optional<std::string> caption;
};

/// Parses one JSONL line. Throws ValidationError with a readable reason.
Annotation parse_annotation(std::string_view line);

struct TemplateBank {
  std::vector<std::string> recognize;
  std::vector<std::string> detect;
  std::vector<std::string> spot;
  std::vector<std::string> read_paragraph;
  std::vector<std::string> read_full;
  std::vector<std::string> caption;
  std::vector<std::string> determiners;
  std::vector<std::string> nouns;

  /// Templates for an instruction-bearing task. Throws for kUnderstand.
  const std::vector<std::string>& for_task(Task t) const;
};

const TemplateBank& default_bank();

/// OCR tasks the annotation can support.
std::vector<Task> eligible_tasks(const Annotation& ann);

/// Uniform draw over eligible_tasks; nullopt if none applies.
std::optional<Task> sample_task(const Annotation& ann, Rng& rng);

/// Replaces "<term>" and, if given, "<box>".
std::string fill_template(std::string_view tmpl, std::string_view term, const NormBox* box);

struct RenderedInstruction {
  std::string text;
  int template_index = 0;
};

/// Draws a template, then a determiner, then a noun. The paragraph task needs
/// exactly one box.
RenderedInstruction render_instruction(Task task, const TemplateBank& bank, const std::vector<NormBox>& boxes,
                                       Rng& rng);

/// Rows of region indices, top to bottom; each row left to right. Two boxes
/// share a row when their vertical overlap is at least half the shorter box.
std::vector<std::vector<std::size_t>> reading_rows(const std::vector<TextRegion>& regions);

/// `item` selects the paragraph (read_paragraph) or qa pair (understand).
std::string render_response(Task task, const Annotation& ann, const CanvasTransform& t, std::size_t item = 0);

struct InstructionRecord {
  std::string id;
  std::string image;
  Task task = Task::kDetect;
  std::string instruction;
  std::string response;
  Stage stage = Stage::kPretrain;
  std::vector<NormBox> boxes;
};

/// One JSON object with keys in fixed order, no trailing newline.
std::string to_jsonl(const InstructionRecord& r);

struct RejectEntry {
  std::size_t line_number = 0;  // 1-based
  std::string reason;
};
std::string to_jsonl(const RejectEntry& r);

struct DatasetResult {
  std::vector<InstructionRecord> records;  // stably sorted by id
  std::vector<RejectEntry> rejects;
};

/// Records for one annotation. Throws ValidationError if the annotation is
/// unusable for the stage.
std::vector<InstructionRecord> build_records(const Annotation& ann, const TemplateBank& bank, Stage stage,
                                             std::uint64_t seed, int canvas_side);

/// Output is independent of `workers` and of input line order.
DatasetResult build_dataset(const std::vector<std::string>& lines, const TemplateBank& bank, Stage stage,
                            std::uint64_t seed, int canvas_side, int workers = 1);

struct MixPlan {
  int batch_size = 8;
  double perception_fraction = 0.5;
  std::uint64_t seed = 0;

  /// Throws ValidationError.
  void validate() const;
  int perception_per_batch() const;
};

struct MixReport {
  std::size_t full_batches = 0;
  std::size_t dropped_partial_batches = 0;
  std::size_t dropped_perception = 0;
  std::size_t dropped_comprehension = 0;
  std::string exhausted;  // "perception", "comprehension", "both" or "none"
};

std::vector<std::vector<InstructionRecord>> mix_batches(const std::vector<InstructionRecord>& perception,
                                                        const std::vector<InstructionRecord>& comprehension,
                                                        const MixPlan& plan, MixReport* report = nullptr);

/// Record count per task, indexed like kAllTasks.
std::array<std::size_t, kAllTasks.size()> count_tasks(const std::vector<InstructionRecord>& records);

}  // namespace freqdoc
