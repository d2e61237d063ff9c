#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "text.hpp"

namespace loganmeta::drain {

inline constexpr std::string_view kWildcard = "<*>";

struct LogRecord {
  std::int64_t timestamp_ms = 0;
  std::string message;
};

struct LogTemplate {
  std::size_t id = 0;
  std::vector<std::string> tokens;
  std::size_t match_count = 0;

  std::string text() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i) out.push_back(' ');
      out += tokens[i];
    }
    return out;
  }

  std::size_t wildcard_count() const {
    return static_cast<std::size_t>(std::count(tokens.begin(), tokens.end(), kWildcard));
  }

  friend bool operator==(const LogTemplate&, const LogTemplate&) = default;
};

/// IPv4 addresses (optional port) and hex literals.
inline std::vector<std::string> default_masks() {
  return {R"(\b(?:\d{1,3}\.){3}\d{1,3}(?::\d+)?\b)", R"(\b0[xX][0-9a-fA-F]+\b)"};
}

struct DrainConfig {
  std::size_t depth = 4;
  double similarity_threshold = 0.4;
  std::size_t max_children = 100;
  std::vector<std::string> masks = default_masks();

  void validate() const {
    if (depth < 3) throw Error(ErrorCode::InvalidConfig, "drain depth must be >= 3");
    if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0))
      throw Error(ErrorCode::InvalidConfig, "similarity threshold must be in (0, 1]");
    if (max_children < 1) throw Error(ErrorCode::InvalidConfig, "max_children must be positive");
  }
};

inline std::vector<std::regex> compile_masks(std::span<const std::string> patterns) {
  std::vector<std::regex> out;
  out.reserve(patterns.size());
  for (const auto& p : patterns) {
    try {
      out.emplace_back(p, std::regex::ECMAScript | std::regex::optimize);
    } catch (const std::regex_error& e) {
      throw Error(ErrorCode::InvalidConfig, "bad mask regex '" + p + "': " + e.what());
    }
  }
  return out;
}

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

/// Applies masks in order (each match becomes "<*>") and splits on whitespace.
inline std::vector<std::string> preprocess(std::string_view line,
                                           std::span<const std::regex> masks) {
  if (trim(line).empty()) throw Error(ErrorCode::EmptyLine, "log line is blank");
  std::string text(line);
  for (const auto& mask : masks) text = std::regex_replace(text, mask, std::string(kWildcard));
  auto tokens = tokenize(text);
  if (tokens.empty()) throw Error(ErrorCode::EmptyLine, "log line has no tokens");
  return tokens;
}

inline std::vector<std::string> preprocess(std::string_view line,
                                           std::span<const std::string> patterns) {
  const auto masks = compile_masks(patterns);
  return preprocess(line, std::span<const std::regex>(masks));
}

/// Fraction of positions where the token equals the template token. A
/// wildcard position never counts as equal.
inline double token_similarity(std::span<const std::string> tokens, const LogTemplate& tmpl) {
  if (tokens.size() != tmpl.tokens.size())
    throw Error(ErrorCode::LengthMismatch, "token count " + std::to_string(tokens.size()) +
                                               " vs template length " +
                                               std::to_string(tmpl.tokens.size()));
  if (tokens.empty()) return 0.0;
  std::size_t equal = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (tmpl.tokens[i] != kWildcard && tokens[i] == tmpl.tokens[i]) ++equal;
  return static_cast<double>(equal) / static_cast<double>(tokens.size());
}

inline bool has_digit(std::string_view token) {
  return std::any_of(token.begin(), token.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

struct TemplateRow {
  std::size_t id = 0;
  std::string text;
  std::size_t count = 0;
};

/// Fixed-depth Drain parse tree. Lines are routed by token count, then by up
/// to `depth - 2` leading tokens, to a leaf group of candidate templates.
class ParseTree {
 public:
  explicit ParseTree(DrainConfig config = {})
      : config_(std::move(config)), masks_(compile_masks(config_.masks)) {
    config_.validate();
  }

  const DrainConfig& config() const noexcept { return config_; }
  const std::vector<LogTemplate>& templates() const noexcept { return templates_; }

  std::vector<std::string> tokens_of(std::string_view message) const {
    return preprocess(message, std::span<const std::regex>(masks_));
  }

  std::size_t parse_line(const LogRecord& record) { return parse_message(record.message); }

  std::size_t parse_message(std::string_view message) {
    const auto tokens = tokens_of(message);
    if (auto id = match(tokens)) {
      auto& tmpl = templates_[*id];
      for (std::size_t i = 0; i < tokens.size(); ++i)
        if (tmpl.tokens[i] != tokens[i]) tmpl.tokens[i] = std::string(kWildcard);
      ++tmpl.match_count;
      return *id;
    }
    return add_template(tokens, 1);
  }

  /// Read-only lookup: the template this message would join, if any.
  std::optional<std::size_t> match(std::span<const std::string> tokens) const {
    const Node* leaf = find_leaf(tokens);
    if (!leaf) return std::nullopt;
    std::optional<std::size_t> best;
    double best_sim = -1.0;
    std::size_t best_wild = 0;
    for (std::size_t id : leaf->group) {
      const auto& tmpl = templates_[id];
      const double sim = token_similarity(tokens, tmpl);
      const std::size_t wild = tmpl.wildcard_count();
      if (sim > best_sim || (sim == best_sim && wild > best_wild)) {
        best = id;
        best_sim = sim;
        best_wild = wild;
      }
    }
    if (best && best_sim >= config_.similarity_threshold) return best;
    return std::nullopt;
  }

  std::vector<TemplateRow> export_templates() const {
    std::vector<TemplateRow> rows;
    rows.reserve(templates_.size());
    for (const auto& t : templates_) rows.push_back({t.id, t.text(), t.match_count});
    return rows;
  }

  /// Rebuilds a tree from an exported table. Rows must carry ids 0..T-1.
  static ParseTree import_templates(std::span<const TemplateRow> rows, DrainConfig config = {}) {
    ParseTree tree(std::move(config));
    std::vector<const TemplateRow*> sorted;
    for (const auto& r : rows) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const TemplateRow* a, const TemplateRow* b) { return a->id < b->id; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (sorted[i]->id != i)
        throw Error(ErrorCode::Format, "template ids are not dense 0..T-1");
      auto tokens = tokenize(sorted[i]->text);
      if (tokens.empty()) throw Error(ErrorCode::Format, "template " + std::to_string(i) + " is empty");
      if (sorted[i]->count < 1) throw Error(ErrorCode::Format, "template count must be >= 1");
      tree.add_template(tokens, sorted[i]->count);
    }
    return tree;
  }

 private:
  struct Node {
    std::map<std::string, std::unique_ptr<Node>, std::less<>> children;
    std::vector<std::size_t> group;
  };

  std::size_t prefix_layers(std::size_t n_tokens) const {
    return std::min(config_.depth - 2, n_tokens);
  }

  const Node* find_leaf(std::span<const std::string> tokens) const {
    const auto it = by_length_.find(tokens.size());
    if (it == by_length_.end()) return nullptr;
    const Node* node = &it->second;
    for (std::size_t i = 0; i < prefix_layers(tokens.size()); ++i) {
      auto child = node->children.find(tokens[i]);
      if (child == node->children.end()) child = node->children.find(kWildcard);
      if (child == node->children.end()) return nullptr;
      node = child->second.get();
    }
    return node;
  }

  Node& child_for_insert(Node& node, const std::string& token) {
    auto& kids = node.children;
    if (auto it = kids.find(token); it != kids.end()) return *it->second;
    const std::string wild(kWildcard);
    auto wildcard_child = [&]() -> Node& {
      auto& slot = kids[wild];
      if (!slot) slot = std::make_unique<Node>();
      return *slot;
    };
    if (has_digit(token)) return wildcard_child();
    const bool has_wild = kids.count(wild) > 0;
    if (has_wild) {
      if (kids.size() < config_.max_children) return *(kids[token] = std::make_unique<Node>());
      return wildcard_child();
    }
    // Reserve the last slot for the wildcard branch.
    if (kids.size() + 1 < config_.max_children) return *(kids[token] = std::make_unique<Node>());
    return wildcard_child();
  }

  std::size_t add_template(const std::vector<std::string>& tokens, std::size_t count) {
    Node* node = &by_length_[tokens.size()];
    for (std::size_t i = 0; i < prefix_layers(tokens.size()); ++i)
      node = &child_for_insert(*node, tokens[i]);
    const std::size_t id = templates_.size();
    templates_.push_back({id, tokens, count});
    node->group.push_back(id);
    return id;
  }

  DrainConfig config_;
  std::vector<std::regex> masks_;
  std::map<std::size_t, Node> by_length_;
  std::vector<LogTemplate> templates_;
};

// ---- file formats ----

inline std::string templates_to_csv(std::span<const TemplateRow> rows) {
  std::string out = "id,template,count\n";
  for (const auto& r : rows)
    out += std::to_string(r.id) + "," + quote_csv(r.text) + "," + std::to_string(r.count) + "\n";
  return out;
}

inline std::vector<TemplateRow> templates_from_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || trim(lines[0]) != "id,template,count")
    throw Error(ErrorCode::Format, "template table must start with header id,template,count");
  std::vector<TemplateRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = split_csv(lines[i]);
    if (f.size() != 3) throw Error(ErrorCode::Format, "template row " + std::to_string(i) + " needs 3 fields");
    rows.push_back({parse_int<std::size_t>(f[0]), f[1], parse_int<std::size_t>(f[2])});
  }
  return rows;
}

struct Assignment {
  std::size_t line = 0;
  std::int64_t timestamp_ms = 0;
  std::size_t template_id = 0;
};

inline std::string assignments_to_csv(std::span<const Assignment> rows) {
  std::string out = "line,timestamp_ms,template_id\n";
  for (const auto& a : rows)
    out += std::to_string(a.line) + "," + std::to_string(a.timestamp_ms) + "," +
           std::to_string(a.template_id) + "\n";
  return out;
}

inline std::vector<Assignment> assignments_from_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || trim(lines[0]) != "line,timestamp_ms,template_id")
    throw Error(ErrorCode::Format, "assignments file must start with header line,timestamp_ms,template_id");
  std::vector<Assignment> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = split_csv(lines[i]);
    if (f.size() != 3) throw Error(ErrorCode::Format, "assignment row " + std::to_string(i) + " needs 3 fields");
    rows.push_back({parse_int<std::size_t>(f[0]), parse_int<std::int64_t>(f[1]),
                    parse_int<std::size_t>(f[2])});
  }
  return rows;
}

// ---- raw log input ----

/// Leading ISO-8601 timestamp (group 1), e.g. "2024-01-01T00:05:00.250Z ".
inline const char* kDefaultTimestampPattern =
    R"(^(\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}:\d{2}(?:\.\d{1,9})?(?:Z|[+-]\d{2}:?\d{2})?)\s+)";

/// Milliseconds since the Unix epoch for an ISO-8601 date-time.
inline std::int64_t parse_iso8601_ms(const std::string& text) {
  using namespace std::chrono;
  static const std::regex re(
      R"(^(\d{4})-(\d{2})-(\d{2})[T ](\d{2}):(\d{2}):(\d{2})(?:\.(\d{1,9}))?(Z|[+-]\d{2}:?\d{2})?$)");
  std::smatch m;
  if (!std::regex_match(text, m, re))
    throw Error(ErrorCode::Format, "not an ISO-8601 timestamp: '" + text + "'");
  const year_month_day ymd{year{std::stoi(m[1])}, month{static_cast<unsigned>(std::stoi(m[2]))},
                           day{static_cast<unsigned>(std::stoi(m[3]))}};
  if (!ymd.ok()) throw Error(ErrorCode::Format, "invalid calendar date in '" + text + "'");
  std::int64_t ms = duration_cast<milliseconds>(sys_days{ymd}.time_since_epoch()).count();
  ms += (std::stoll(m[4]) * 3600 + std::stoll(m[5]) * 60 + std::stoll(m[6])) * 1000;
  if (m[7].matched) {
    std::string frac = m[7].str();
    frac.resize(3, '0');
    ms += std::stoll(frac.substr(0, 3));
  }
  if (m[8].matched && m[8].str() != "Z") {
    std::string off = m[8].str();
    const std::int64_t sign = off[0] == '-' ? -1 : 1;
    off.erase(std::remove(off.begin(), off.end(), ':'), off.end());
    const std::int64_t minutes = std::stoll(off.substr(1, 2)) * 60 + std::stoll(off.substr(3, 2));
    ms -= sign * minutes * 60 * 1000;
  }
  if (ms < 0) throw Error(ErrorCode::Format, "timestamp precedes the epoch: '" + text + "'");
  return ms;
}

struct ParsedLine {
  std::size_t line = 0;
  LogRecord record;
};

/// Splits a log file into records. When a line matches the timestamp pattern
/// (capture group 1 holds the ISO-8601 text) the match is stripped and
/// converted; otherwise the 0-based line index stands in as the timestamp.
/// Blank lines are skipped.
inline std::vector<ParsedLine> read_log_records(
    std::string_view text, const std::string& timestamp_pattern = kDefaultTimestampPattern) {
  std::regex ts;
  try {
    ts = std::regex(timestamp_pattern);
  } catch (const std::regex_error& e) {
    throw Error(ErrorCode::InvalidConfig, "bad timestamp regex: " + std::string(e.what()));
  }
  std::vector<ParsedLine> out;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::string line(lines[i]);
    std::smatch m;
    LogRecord rec;
    if (std::regex_search(line, m, ts, std::regex_constants::match_continuous) && m.size() > 1) {
      rec.timestamp_ms = parse_iso8601_ms(m[1].str());
      rec.message = m.suffix().str();
    } else {
      rec.timestamp_ms = static_cast<std::int64_t>(i);
      rec.message = line;
    }
    if (trim(rec.message).empty()) continue;
    out.push_back({i, std::move(rec)});
  }
  return out;
}

}  // namespace loganmeta::drain
