#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace freqdoc {

/// NFC, lowercase, whitespace runs collapsed to one space, trimmed.
std::string normalize_text(std::string_view s);

enum class MatchMode { kNormalized, kStrict };

struct EvalSample {
  std::string id;
  std::string dataset;
  std::vector<std::string> ground_truths;  // any match counts
  std::string response;
};

/// Parses {id, dataset, ground_truth | ground_truths[], response}.
/// Throws ValidationError.
EvalSample parse_eval_sample(std::string_view line);

/// Whether some ground truth is a substring of the response. kStrict compares
/// raw bytes; kNormalized compares normalize_text of both sides.
bool contains_match(const EvalSample& sample, MatchMode mode = MatchMode::kNormalized);

struct DatasetScore {
  std::string name;
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;  // percent, unrounded
};

struct EvalReport {
  std::vector<DatasetScore> per_dataset;
  double macro_average = 0.0;  // unweighted mean of unrounded accuracies
};

/// All samples must share a dataset name. Throws ValidationError if empty.
DatasetScore score_dataset(const std::vector<EvalSample>& samples, MatchMode mode = MatchMode::kNormalized);

/// Throws ValidationError if empty.
EvalReport aggregate_report(std::vector<DatasetScore> entries);

/// Groups by dataset in order of first appearance, then aggregates.
EvalReport evaluate(const std::vector<EvalSample>& samples, MatchMode mode = MatchMode::kNormalized);

/// Two decimals, e.g. "75.00".
std::string format_percent(double v);

std::string report_to_json(const EvalReport& report);
std::string report_to_table(const EvalReport& report);

}  // namespace freqdoc
