#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace schemaloop::prompt {

// Numbered-list grammar shared by step and name lists: an item starts at a line
// beginning with "<int>." (space after the dot optional, as in "2.epidemic").
// When the prompt was primed with "1.", the text before the first marker is item 1.
std::vector<std::string> parse_numbered_list(std::string_view completion,
                                             std::string_view prompt_primed_with = "1.");

// "1. a\n2. b\n..." as a completion of an unprimed prompt would read.
std::string format_as_numbered(const std::vector<std::string>& items);

// Candidate names: numbered-list items, lowercased, deduplicated in first-mention order.
std::vector<std::string> parse_name_list(std::string_view completion,
                                         std::string_view prompt_primed_with = "1.");

struct RawTuple {
  std::string subject;
  std::string verb;
  std::optional<std::string> object;

  bool operator==(const RawTuple&) const = default;
};

struct TupleParse {
  std::vector<RawTuple> tuples;
  std::vector<std::string> skipped;  // bracket groups missing a verb or subject
};

// Parses "[verb: V, subject: S, object: O]" groups in any field order.
// Object "None" (any case) or empty becomes absent. Throws NoTuplesFound when
// no group yields a tuple.
TupleParse parse_tuples(std::string_view completion);

enum class Axis { Temporal, Hierarchical };

enum class Relation { Before, After, SameTime, Parent, Child, NoRelation };

std::string to_string(Axis axis);
Axis axis_from_string(const std::string& s);
std::string to_string(Relation relation);

struct RelationAnswer {
  Axis axis = Axis::Temporal;
  Relation value = Relation::NoRelation;

  bool operator==(const RelationAnswer&) const = default;
};

bool legal_for(Axis axis, Relation value);

// Options in their fixed lettered order (A, B, ...).
const std::vector<Relation>& options_for(Axis axis);

// First option word/phrase in the text wins (case-insensitive). When no word
// matches and `lettered_options` is set, a leading bare letter ("B", "(B)", "B.")
// maps through options_for(axis). Anything else is NoRelation.
RelationAnswer parse_relation_answer(std::string_view completion, Axis axis,
                                     bool lettered_options = true);

}  // namespace schemaloop::prompt
