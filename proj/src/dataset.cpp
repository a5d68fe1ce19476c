// SPDX-License-Identifier: Apache-2.0
#include "largepig/dataset.hpp"

#include "largepig/atomic_file.hpp"
#include "largepig/decoder.hpp"
#include "largepig/error.hpp"
#include "largepig/trace.hpp"

#include <json.hpp>

#include <algorithm>
#include <limits>
#include <memory>
#include <string>

namespace largepig::eval {

using nlohmann::json;

std::string_view to_string(BestConvention convention) noexcept {
  switch (convention) {
    case BestConvention::included: return "included";
    case BestConvention::separate: return "separate";
    case BestConvention::mixed: return "mixed";
  }
  return "?";
}

namespace {

[[noreturn]] void bad_field(std::size_t line, std::string_view field, const std::string& why) {
  fail(Errc::schema, "line " + std::to_string(line) + ": field '" + std::string(field) + "': " + why);
}

/// Calls `fn(line_number, object)` for each non-blank line.
template <typename Fn>
void for_each_record(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      fail(Errc::schema, "line " + std::to_string(line_no) + ": not a JSON object");
    }
    fn(line_no, doc);
  }
}

const json& field(const json& doc, std::size_t line, std::string_view name) {
  const auto it = doc.find(name);
  if (it == doc.end()) bad_field(line, name, "missing");
  return *it;
}

std::string text_field(const json& doc, std::size_t line, std::string_view name) {
  const json& v = field(doc, line, name);
  if (!v.is_string()) bad_field(line, name, "expected a string");
  return v.get<std::string>();
}

Candidate candidate(const json& v, std::size_t line, std::string_view name) {
  Candidate c;
  if (v.is_string()) {
    c.text = v.get<std::string>();
    return c;
  }
  if (v.is_array() && !v.empty()) {
    for (const auto& t : v) {
      if (!t.is_number_integer() || t.get<long long>() < 0 ||
          t.get<long long>() > std::numeric_limits<TokenId>::max()) {
        bad_field(line, name, "token ids must be non-negative integers");
      }
      c.tokens.push_back(t.get<TokenId>());
    }
    return c;
  }
  bad_field(line, name, "expected a string or a non-empty array of token ids");
}

std::vector<Candidate> candidate_list(const json& doc, std::size_t line, std::string_view name,
                                      bool allow_empty) {
  const json& v = field(doc, line, name);
  if (!v.is_array()) bad_field(line, name, "expected an array");
  if (v.empty() && !allow_empty) bad_field(line, name, "must not be empty");
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(candidate(v[i], line, std::string(name) + "[" + std::to_string(i) + "]"));
  }
  return out;
}

}  // namespace

McDataset parse_mc(std::string_view text) {
  McDataset ds;
  std::size_t included = 0;
  for_each_record(text, [&](std::size_t line, const json& doc) {
    McItem item;
    const json& content = field(doc, line, "content");
    if (content.is_string()) {
      item.content = content.get<std::string>();
    } else {
      item.content_tokens = candidate(content, line, "content").tokens;
    }
    const Candidate best = candidate(field(doc, line, "best_query"), line, "best_query");
    item.good = candidate_list(doc, line, "good_queries", true);
    item.bad = candidate_list(doc, line, "bad_queries", false);
    const auto it = std::find(item.good.begin(), item.good.end(), best);
    if (it != item.good.end()) {
      item.best = static_cast<std::size_t>(it - item.good.begin());
      item.best_listed_in_good = true;
      ++included;
    } else {
      item.good.insert(item.good.begin(), best);
      item.best = 0;
    }
    ds.items.push_back(std::move(item));
  });
  require(!ds.items.empty(), Errc::schema, "MC dataset has no records");
  ds.convention = included == ds.items.size() ? BestConvention::included
                  : included == 0             ? BestConvention::separate
                                              : BestConvention::mixed;
  return ds;
}

McDataset load_mc(const std::filesystem::path& path) {
  try {
    return parse_mc(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<QaItem> parse_qa(std::string_view text) {
  std::vector<QaItem> items;
  for_each_record(text, [&](std::size_t line, const json& doc) {
    QaItem item;
    item.context = text_field(doc, line, "context");
    item.question = text_field(doc, line, "question");
    const json& answers = field(doc, line, "answers");
    if (!answers.is_array() || answers.empty()) bad_field(line, "answers", "expected a non-empty array");
    for (const auto& a : answers) {
      if (!a.is_string()) bad_field(line, "answers", "answers must be strings");
      item.answers.push_back(a.get<std::string>());
    }
    if (doc.contains("prediction")) item.prediction = text_field(doc, line, "prediction");
    item.length_class = classify_context(item.context);
    items.push_back(std::move(item));
  });
  require(!items.empty(), Errc::schema, "QA dataset has no records");
  return items;
}

std::vector<QaItem> load_qa(const std::filesystem::path& path) {
  try {
    return parse_qa(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<std::string> load_predictions(const std::filesystem::path& path) {
  std::vector<std::string> out;
  const std::string text = read_file(path);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json doc = json::parse(line, nullptr, false);
    if (doc.is_string()) {
      out.push_back(doc.get<std::string>());
    } else if (doc.is_object() && doc.contains("prediction") && doc["prediction"].is_string()) {
      out.push_back(doc["prediction"].get<std::string>());
    } else {
      fail(Errc::schema, path.string() + ": line " + std::to_string(line_no) +
                             ": field 'prediction': expected a JSON string or {\"prediction\": string}");
    }
  }
  return out;
}

std::vector<FactorItem> parse_factor(std::string_view text) {
  std::vector<FactorItem> items;
  for_each_record(text, [&](std::size_t line, const json& doc) {
    FactorItem item;
    const json& prefix = field(doc, line, "prefix");
    if (prefix.is_string()) {
      item.prefix = prefix.get<std::string>();
    } else {
      item.prefix_tokens = candidate(prefix, line, "prefix").tokens;
    }
    item.completions = candidate_list(doc, line, "completions", false);
    if (item.completions.size() < 2) bad_field(line, "completions", "need the correct one and a distractor");
    const json& correct = field(doc, line, "correct_index");
    if (!correct.is_number_integer() || correct.get<long long>() < 0 ||
        correct.get<std::size_t>() >= item.completions.size()) {
      bad_field(line, "correct_index", "expected an index into 'completions'");
    }
    item.correct = correct.get<std::size_t>();
    items.push_back(std::move(item));
  });
  require(!items.empty(), Errc::schema, "FACTOR dataset has no records");
  return items;
}

std::vector<FactorItem> load_factor(const std::filesystem::path& path) {
  try {
    return parse_factor(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void TraceIndex::add(std::size_t item, std::string key, std::filesystem::path file) {
  const auto [it, inserted] = files_.emplace(std::pair{item, key}, file);
  if (!inserted) {
    fail(Errc::schema, "two traces for item " + std::to_string(item) + " candidate '" + key +
                           "': " + it->second.string() + " and " + file.string());
  }
}

std::optional<std::filesystem::path> TraceIndex::find(std::size_t item, const std::string& key) const {
  const auto it = files_.find({item, key});
  if (it == files_.end()) return std::nullopt;
  return it->second;
}

TraceIndex TraceIndex::scan(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir), Errc::io, "trace directory " + dir.string() + " does not exist");
  TraceIndex index;
  const fs::path manifest = dir / "manifest.jsonl";
  if (fs::exists(manifest)) {
    try {
      for_each_record(read_file(manifest), [&](std::size_t line, const json& doc) {
        const json& item = field(doc, line, "item");
        if (!item.is_number_integer() || item.get<long long>() < 0) {
          bad_field(line, "item", "expected a non-negative integer");
        }
        index.add(item.get<std::size_t>(), text_field(doc, line, "candidate"), dir / text_field(doc, line, "file"));
      });
    } catch (const Error& e) {
      throw Error(e.code(), manifest.string() + ": " + e.what());
    }
    return index;
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pigtrace") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    // Only the header line is needed here.
    const std::string text = read_file(file);
    const json header = json::parse(text.substr(0, text.find('\n')), nullptr, false);
    const json* meta = header.is_object() && header.contains("meta") ? &header["meta"] : nullptr;
    if (!meta || !meta->is_object() || !meta->contains("item") || !meta->contains("candidate") ||
        !(*meta)["item"].is_number_integer() || !(*meta)["candidate"].is_string()) {
      fail(Errc::schema, file.string() + ": line 1: field 'meta': needs integer 'item' and string 'candidate'");
    }
    index.add((*meta)["item"].get<std::size_t>(), (*meta)["candidate"].get<std::string>(), file);
  }
  return index;
}

std::vector<std::string> trace_keys(const McItem& item, const CandidateRef& ref) {
  const std::size_t k = ref.index;
  switch (ref.role) {
    case CandidateRole::bad:
      return {"bad/" + std::to_string(k)};
    case CandidateRole::completion:
      return {"completion/" + std::to_string(k)};
    case CandidateRole::good:
      break;
  }
  if (item.best_listed_in_good) {
    std::vector<std::string> keys{"good/" + std::to_string(k)};
    if (k == item.best) keys.push_back("best");
    return keys;
  }
  // The best query was prepended, shifting the file's good list by one.
  if (k == 0) return {"best"};
  return {"good/" + std::to_string(k - 1)};
}

double score_trace(const std::filesystem::path& file, const TokenSeq& tokens, const PigConfig& base,
                   const LayerChoice& layers, bool per_token_average) {
  auto trace = std::make_shared<const TraceFile>(load_trace(file));
  const TokenSeq forced = forced_tokens(*trace);
  require(forced.size() == trace->steps.size(), Errc::schema,
          file.string() + ": scoring traces must force a token at every step");
  if (!tokens.empty() && tokens != forced) {
    fail(Errc::schema, file.string() + ": forced tokens disagree with the dataset candidate");
  }
  TraceSession session(trace);
  const PigConfig config = bind_config(base, layers, session.capabilities());
  try {
    return score_sequence(session, forced, config, per_token_average);
  } catch (const Error& e) {
    throw Error(e.code(), file.string() + ": " + e.what());
  }
}

namespace {

std::filesystem::path locate(const TraceIndex& index, std::size_t item, const std::vector<std::string>& keys) {
  for (const auto& key : keys) {
    if (auto file = index.find(item, key)) return *file;
  }
  fail(Errc::io, "no trace for item " + std::to_string(item) + " candidate '" + keys.front() + "'");
}

}  // namespace

Scorer mc_trace_scorer(const std::vector<McItem>& items, const TraceIndex& index, PigConfig base,
                       LayerChoice layers, bool per_token_average) {
  return [&items, &index, base = std::move(base), layers = std::move(layers),
          per_token_average](const CandidateRef& ref) {
    const McItem& item = items.at(ref.item);
    const Candidate& c = ref.role == CandidateRole::good ? item.good.at(ref.index) : item.bad.at(ref.index);
    return score_trace(locate(index, ref.item, trace_keys(item, ref)), c.tokens, base, layers,
                       per_token_average);
  };
}

Scorer factor_trace_scorer(const std::vector<FactorItem>& items, const TraceIndex& index, PigConfig base,
                           LayerChoice layers, bool per_token_average) {
  return [&items, &index, base = std::move(base), layers = std::move(layers),
          per_token_average](const CandidateRef& ref) {
    const FactorItem& item = items.at(ref.item);
    return score_trace(locate(index, ref.item, {ref.key()}), item.completions.at(ref.index).tokens, base,
                       layers, per_token_average);
  };
}

}  // namespace largepig::eval
