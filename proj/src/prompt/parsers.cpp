#include "schemaloop/prompt/parsers.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "schemaloop/error.hpp"
#include "schemaloop/util/text.hpp"

namespace schemaloop::prompt {

namespace {

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

// Length of a line-initial "<int>." marker (plus trailing blanks), or 0.
std::size_t marker_length(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  std::size_t digits = i;
  while (i < line.size() && is_digit(line[i])) ++i;
  if (i == digits || i >= line.size() || line[i] != '.') return 0;
  ++i;
  if (i < line.size() && is_digit(line[i])) return 0;  // "3.5 million"
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  return i;
}

std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto nl = s.find('\n', start);
    auto end = nl == std::string_view::npos ? s.size() : nl;
    auto line = s.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

void append_piece(std::string& item, std::string_view piece) {
  auto t = text::trim(piece);
  if (t.empty()) return;
  if (!item.empty()) item.push_back(' ');
  item += t;
}

}  // namespace

std::vector<std::string> parse_numbered_list(std::string_view completion,
                                             std::string_view prompt_primed_with) {
  const auto primed_tail = text::trim(prompt_primed_with);
  const bool primed = primed_tail.size() >= 2 && primed_tail.compare(primed_tail.size() - 2, 2, "1.") == 0;

  std::string preamble;
  std::vector<std::string> items;
  bool seen_marker = false;
  for (auto line : split_lines(completion)) {
    if (auto m = marker_length(line)) {
      seen_marker = true;
      items.emplace_back();
      append_piece(items.back(), line.substr(m));
    } else if (seen_marker) {
      append_piece(items.back(), line);
    } else {
      append_piece(preamble, line);
    }
  }
  if (!preamble.empty() && (primed || !seen_marker)) items.insert(items.begin(), preamble);
  items.erase(std::remove_if(items.begin(), items.end(), [](const auto& s) { return s.empty(); }),
              items.end());
  return items;
}

std::string format_as_numbered(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out.push_back('\n');
    out += std::to_string(i + 1) + ". " + items[i];
  }
  return out;
}

std::vector<std::string> parse_name_list(std::string_view completion,
                                         std::string_view prompt_primed_with) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (auto& item : parse_numbered_list(completion, prompt_primed_with)) {
    auto name = text::to_lower(text::trim(item));
    if (!name.empty() && seen.insert(name).second) out.push_back(std::move(name));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tuples

namespace {

struct KeyHit {
  std::size_t key_pos;
  std::size_t value_pos;
  int field;  // 0 verb, 1 subject, 2 object
};

std::vector<KeyHit> find_keys(std::string_view group) {
  static constexpr std::string_view kKeys[] = {"verb", "subject", "object"};
  std::vector<KeyHit> hits;
  for (std::size_t i = 0; i < group.size(); ++i) {
    if (i > 0 && group[i - 1] != ',' && !std::isspace(static_cast<unsigned char>(group[i - 1])))
      continue;
    for (int f = 0; f < 3; ++f) {
      if (!text::starts_with_ci(group.substr(i), kKeys[f])) continue;
      std::size_t j = i + kKeys[f].size();
      while (j < group.size() && (group[j] == ' ' || group[j] == '\t')) ++j;
      if (j < group.size() && group[j] == ':') {
        hits.push_back({i, j + 1, f});
        i = j;
        break;
      }
    }
  }
  return hits;
}

std::string clean_value(std::string_view v) {
  auto t = text::trim(v);
  while (!t.empty() && t.back() == ',') t = text::trim(std::string_view(t).substr(0, t.size() - 1));
  if (t == "_") t.clear();
  return t;
}

}  // namespace

TupleParse parse_tuples(std::string_view completion) {
  TupleParse result;
  std::size_t pos = 0;
  while (true) {
    auto open = completion.find('[', pos);
    if (open == std::string_view::npos) break;
    auto close = completion.find(']', open + 1);
    if (close == std::string_view::npos) break;
    // a nested '[' restarts the group at the innermost bracket
    auto inner_open = completion.rfind('[', close);
    auto group = completion.substr(inner_open + 1, close - inner_open - 1);
    pos = close + 1;

    auto hits = find_keys(group);
    std::optional<std::string> fields[3];
    for (std::size_t h = 0; h < hits.size(); ++h) {
      auto end = h + 1 < hits.size() ? hits[h + 1].key_pos : group.size();
      if (fields[hits[h].field]) continue;
      fields[hits[h].field] = clean_value(group.substr(hits[h].value_pos, end - hits[h].value_pos));
    }
    auto& verb = fields[0];
    auto& subject = fields[1];
    auto& object = fields[2];
    auto is_none = [](const std::string& s) { return text::to_lower(s) == "none"; };
    if (!verb || verb->empty() || is_none(*verb) || !subject || subject->empty() || is_none(*subject)) {
      result.skipped.emplace_back(group);
      spdlog::debug("skipping tuple group without verb/subject: [{}]", group);
      continue;
    }
    RawTuple t{*subject, *verb, std::nullopt};
    if (object && !object->empty() && !is_none(*object)) t.object = *object;
    result.tuples.push_back(std::move(t));
  }
  if (result.tuples.empty()) throw NoTuplesFound("no [verb, subject, object] tuples in completion");
  return result;
}

// ---------------------------------------------------------------------------
// Relation answers

std::string to_string(Axis axis) { return axis == Axis::Temporal ? "temporal" : "hierarchical"; }

Axis axis_from_string(const std::string& s) {
  if (s == "temporal") return Axis::Temporal;
  if (s == "hierarchical") return Axis::Hierarchical;
  throw InvalidArgument("unknown axis '" + s + "'");
}

std::string to_string(Relation relation) {
  switch (relation) {
    case Relation::Before: return "Before";
    case Relation::After: return "After";
    case Relation::SameTime: return "SameTime";
    case Relation::Parent: return "Parent";
    case Relation::Child: return "Child";
    case Relation::NoRelation: return "NoRelation";
  }
  return "NoRelation";
}

const std::vector<Relation>& options_for(Axis axis) {
  static const std::vector<Relation> temporal{Relation::Before, Relation::After, Relation::SameTime,
                                              Relation::NoRelation};
  static const std::vector<Relation> hierarchical{Relation::Parent, Relation::Child,
                                                  Relation::NoRelation};
  return axis == Axis::Temporal ? temporal : hierarchical;
}

bool legal_for(Axis axis, Relation value) {
  const auto& opts = options_for(axis);
  return std::find(opts.begin(), opts.end(), value) != opts.end();
}

RelationAnswer parse_relation_answer(std::string_view completion, Axis axis, bool lettered_options) {
  struct Phrase {
    std::string_view text;
    Relation value;
  };
  static const std::vector<Phrase> temporal{{"no relation", Relation::NoRelation},
                                            {"not related", Relation::NoRelation},
                                            {"same time", Relation::SameTime},
                                            {"same-time", Relation::SameTime},
                                            {"simultaneously", Relation::SameTime},
                                            {"before", Relation::Before},
                                            {"after", Relation::After}};
  static const std::vector<Phrase> hierarchical{{"no relation", Relation::NoRelation},
                                                {"not related", Relation::NoRelation},
                                                {"parent", Relation::Parent},
                                                {"child", Relation::Child}};
  const auto& phrases = axis == Axis::Temporal ? temporal : hierarchical;
  const auto lower = text::to_lower(completion);

  std::size_t best_pos = std::string::npos;
  std::size_t best_len = 0;
  Relation best = Relation::NoRelation;
  for (const auto& p : phrases) {
    for (auto at = lower.find(p.text); at != std::string::npos; at = lower.find(p.text, at + 1)) {
      bool left_ok = at == 0 || !is_alpha(lower[at - 1]);
      auto end = at + p.text.size();
      bool right_ok = end >= lower.size() || !is_alpha(lower[end]);
      if (!left_ok || !right_ok) continue;
      if (at < best_pos || (at == best_pos && p.text.size() > best_len)) {
        best_pos = at;
        best_len = p.text.size();
        best = p.value;
      }
      break;
    }
  }
  if (best_pos != std::string::npos) return {axis, best};

  if (lettered_options) {
    auto t = text::trim(completion);
    std::size_t i = 0;
    if (i < t.size() && t[i] == '(') ++i;
    if (i < t.size() && t[i] >= 'A' && t[i] <= 'Z') {
      auto idx = static_cast<std::size_t>(t[i] - 'A');
      bool bare = i + 1 >= t.size() || t[i + 1] == ')' || t[i + 1] == '.' || t[i + 1] == ':' ||
                  std::isspace(static_cast<unsigned char>(t[i + 1]));
      const auto& opts = options_for(axis);
      if (bare && idx < opts.size()) return {axis, opts[idx]};
    }
  }
  spdlog::info("relation answer '{}' matched no {} option; defaulting to NoRelation",
               text::collapse_whitespace(completion), to_string(axis));
  return {axis, Relation::NoRelation};
}

}  // namespace schemaloop::prompt
