#include "freqdoc/eval.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <cstdio>
#include <nlohmann/json.hpp>

#include "freqdoc/error.hpp"

namespace freqdoc {

std::string normalize_text(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
  icu::UnicodeString text = nfc->normalize(icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), s.size())), status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU normalization failed");
  text.toLower(icu::Locale::getRoot());

  icu::UnicodeString collapsed;
  bool pending_space = false;
  for (int32_t i = 0; i < text.length();) {
    const UChar32 c = text.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      pending_space = !collapsed.isEmpty();
      continue;
    }
    if (pending_space) {
      collapsed.append(static_cast<UChar>(' '));
      pending_space = false;
    }
    collapsed.append(c);
  }
  std::string out;
  collapsed.toUTF8String(out);
  return out;
}

EvalSample parse_eval_sample(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("sample must be a JSON object");
  EvalSample s;
  if (j.contains("id")) s.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
  if (!j.contains("dataset") || !j["dataset"].is_string()) throw ValidationError("sample needs a string \"dataset\"");
  s.dataset = j["dataset"].get<std::string>();
  if (!j.contains("response") || !j["response"].is_string()) {
    throw ValidationError("sample needs a string \"response\"");
  }
  s.response = j["response"].get<std::string>();
  if (j.contains("ground_truths")) {
    if (!j["ground_truths"].is_array()) throw ValidationError("\"ground_truths\" must be an array");
    for (const auto& g : j["ground_truths"]) {
      if (!g.is_string()) throw ValidationError("\"ground_truths\" entries must be strings");
      s.ground_truths.push_back(g.get<std::string>());
    }
  } else if (j.contains("ground_truth") && j["ground_truth"].is_string()) {
    s.ground_truths.push_back(j["ground_truth"].get<std::string>());
  } else {
    throw ValidationError("sample needs \"ground_truth\" or \"ground_truths\"");
  }
  if (s.ground_truths.empty() ||
      std::all_of(s.ground_truths.begin(), s.ground_truths.end(), [](const auto& g) { return g.empty(); })) {
    throw ValidationError("ground truth must be non-empty");
  }
  return s;
}

bool contains_match(const EvalSample& sample, MatchMode mode) {
  const std::string response = mode == MatchMode::kStrict ? sample.response : normalize_text(sample.response);
  for (const auto& truth : sample.ground_truths) {
    const std::string t = mode == MatchMode::kStrict ? truth : normalize_text(truth);
    if (t.empty()) continue;
    if (response.find(t) != std::string::npos) return true;
  }
  return false;
}

DatasetScore score_dataset(const std::vector<EvalSample>& samples, MatchMode mode) {
  if (samples.empty()) throw ValidationError("cannot score an empty dataset");
  DatasetScore score;
  score.name = samples.front().dataset;
  for (const auto& s : samples) {
    if (s.dataset != score.name) throw ValidationError("score_dataset got samples from several datasets");
    if (contains_match(s, mode)) ++score.correct;
    ++score.total;
  }
  score.accuracy = 100.0 * static_cast<double>(score.correct) / static_cast<double>(score.total);
  return score;
}

EvalReport aggregate_report(std::vector<DatasetScore> entries) {
  if (entries.empty()) throw ValidationError("cannot aggregate zero datasets");
  EvalReport report;
  double sum = 0.0;
  for (const auto& e : entries) sum += e.accuracy;
  report.macro_average = sum / static_cast<double>(entries.size());
  report.per_dataset = std::move(entries);
  return report;
}

EvalReport evaluate(const std::vector<EvalSample>& samples, MatchMode mode) {
  std::vector<std::vector<EvalSample>> groups;
  std::vector<std::string> names;
  for (const auto& s : samples) {
    auto it = std::find(names.begin(), names.end(), s.dataset);
    if (it == names.end()) {
      names.push_back(s.dataset);
      groups.emplace_back();
      groups.back().push_back(s);
    } else {
      groups[it - names.begin()].push_back(s);
    }
  }
  std::vector<DatasetScore> entries;
  for (const auto& g : groups) entries.push_back(score_dataset(g, mode));
  return aggregate_report(std::move(entries));
}

std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string report_to_json(const EvalReport& report) {
  std::string out = "{\"datasets\":[";
  for (std::size_t i = 0; i < report.per_dataset.size(); ++i) {
    const auto& d = report.per_dataset[i];
    if (i) out += ',';
    out += "{\"name\":" + nlohmann::json(d.name).dump() + ",\"correct\":" + std::to_string(d.correct) +
           ",\"total\":" + std::to_string(d.total) + ",\"accuracy\":" + format_percent(d.accuracy) + "}";
  }
  out += "],\"macro_average\":" + format_percent(report.macro_average) + "}";
  return out;
}

std::string report_to_table(const EvalReport& report) {
  std::size_t width = 7;
  for (const auto& d : report.per_dataset) width = std::max(width, d.name.size());
  std::string header;
  std::string values;
  auto cell = [width](const std::string& s) {
    std::string c = s;
    c.resize(std::max(width, s.size()) + 2, ' ');
    return c;
  };
  for (const auto& d : report.per_dataset) {
    header += cell(d.name);
    values += cell(format_percent(d.accuracy));
  }
  header += "Avg.";
  values += format_percent(report.macro_average);
  return header + "\n" + values + "\n";
}

}  // namespace freqdoc
