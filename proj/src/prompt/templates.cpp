#include "schemaloop/prompt/templates.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "schemaloop/error.hpp"

namespace schemaloop::prompt {

using nlohmann::json;

std::string to_string(TemplateStage stage) {
  switch (stage) {
    case TemplateStage::StepGeneration: return "step-generation";
    case TemplateStage::NodeExtraction: return "node-extraction";
    case TemplateStage::RelationQuestion: return "relation-question";
    case TemplateStage::GroundingInference: return "grounding-inference";
  }
  return "step-generation";
}

TemplateStage template_stage_from_string(const std::string& s) {
  if (s == "step-generation") return TemplateStage::StepGeneration;
  if (s == "node-extraction") return TemplateStage::NodeExtraction;
  if (s == "relation-question") return TemplateStage::RelationQuestion;
  if (s == "grounding-inference") return TemplateStage::GroundingInference;
  throw MalformedTemplateFile("unknown template stage '" + s + "'");
}

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Returns the end index (one past '}') when body[open] starts a placeholder, else 0.
std::size_t placeholder_end(const std::string& body, std::size_t open) {
  std::size_t i = open + 1;
  if (i >= body.size() || !ident_start(body[i])) return 0;
  while (i < body.size() && ident_char(body[i])) ++i;
  return i < body.size() && body[i] == '}' ? i + 1 : 0;
}

}  // namespace

std::vector<std::string> scan_placeholders(const std::string& body) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] != '{') continue;
    if (auto end = placeholder_end(body, i)) {
      auto name = body.substr(i + 1, end - i - 2);
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
      i = end - 1;
    }
  }
  return names;
}

std::string substitute(const PromptTemplate& tmpl, const Params& params) {
  for (const auto& name : tmpl.placeholders)
    if (!params.count(name)) throw MissingParam(name);
  std::string out;
  out.reserve(tmpl.body.size());
  const auto& body = tmpl.body;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] == '{') {
      if (auto end = placeholder_end(body, i)) {
        auto name = body.substr(i + 1, end - i - 2);
        auto it = params.find(name);
        if (it == params.end()) throw MissingParam(name);
        out += it->second;
        i = end - 1;
        continue;
      }
    }
    out.push_back(body[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

const char* kNodeExtractionBody =
    "For each sentence, extract event verbs and their arguments, categorizing the arguments as "
    "subject or object. Write None if there is no object.\n"
    "Return in [verb: _, subject: _, object: _] format.\n"
    "\n"
    "For example:\n"
    "Q: Isaac ate a cake today and he played football.\n"
    "A: [verb: eat, subject: Isaac, object: cake], [verb: play, subject: Isaac, object: football]\n"
    "\n"
    "Q: The teacher arrived in class and he started teaching.\n"
    "A: [verb: arrive, subject: teacher, object: class], [verb: start, subject: teacher, object: "
    "teaching]\n"
    "\n"
    "Q: Nate and Isaac ate dinner.\n"
    "A: [verb: eat, subject: Nate and Isaac, object: dinner]\n"
    "\n"
    "Q: Justin slept.\n"
    "A: [verb: sleep, subject: Justin, object: None]\n"
    "\n"
    "Q: {sentence}\n"
    "A:";

const char* kGroundingBody =
    "List event names related to the event \"People are infected with this disease\":\n"
    "1.infection\n"
    "2.epidemic\n"
    "3.pandemic\n"
    "\n"
    "List event names related to the event \"It was a robbery-related incident\":\n"
    "1.robbery\n"
    "2.burglary\n"
    "3.theft\n"
    "\n"
    "List event names related to the event \"The first case of the disease have detected and it "
    "has been reported\":\n"
    "1.infection\n"
    "2.epidemic\n"
    "3.pandemic\n"
    "\n"
    "List event names related to the event \"The disease is eventually brought under control\":\n"
    "1.control\n"
    "2.improvement\n"
    "\n"
    "List event names related to the event \"People who are ill have serious symptoms\":\n"
    "1.symptoms\n"
    "\n"
    "List event names related to the event \"The pathogen begins to spread through the "
    "population\":\n"
    "1.transmission\n"
    "2.spread\n"
    "\n"
    "List event names related to the event \"{event}\":\n"
    "1.";

// Option order is fixed: the relation-answer parser maps bare letters by it.
const char* kTemporalBody =
    "Choose the temporal relation between the two events.\n"
    "Event 1: {event_a}\n"
    "Event 2: {event_b}\n"
    "Event 1 happens:\n"
    "A. Before\n"
    "B. After\n"
    "C. Same time\n"
    "D. No relation\n"
    "Answer:";

const char* kHierarchicalBody =
    "Choose the hierarchical relation between the two events.\n"
    "Event 1: {event_a}\n"
    "Event 2: {event_b}\n"
    "Relative to Event 2, Event 1 is the:\n"
    "A. Parent\n"
    "B. Child\n"
    "C. No relation\n"
    "Answer:";

PromptTemplate make(std::string id, TemplateStage stage, std::string body) {
  PromptTemplate t{std::move(id), stage, std::move(body), {}};
  t.placeholders = scan_placeholders(t.body);
  return t;
}

}  // namespace

TemplateLibrary TemplateLibrary::builtin() {
  TemplateLibrary lib;
  lib.add(make("sub-steps", TemplateStage::StepGeneration,
               "List the sub-events involved in {scenario}: 1."));
  lib.add(make("events-before", TemplateStage::StepGeneration, "List the events before {scenario}: 1."));
  lib.add(make("events-after", TemplateStage::StepGeneration, "List the events after {scenario}: 1."));
  lib.add(make("steps-involved", TemplateStage::StepGeneration,
               "List the steps involved in {scenario}: 1."));
  lib.add(make(kStepExpansion, TemplateStage::StepGeneration,
               "List the steps involved {step} in detail:"));
  lib.add(make(kNodeExtraction, TemplateStage::NodeExtraction, kNodeExtractionBody));
  lib.add(make(kTemporalRelation, TemplateStage::RelationQuestion, kTemporalBody));
  lib.add(make(kHierarchicalRelation, TemplateStage::RelationQuestion, kHierarchicalBody));
  lib.add(make(kGroundingInference, TemplateStage::GroundingInference, kGroundingBody));
  return lib;
}

TemplateLibrary TemplateLibrary::from_json(const json& doc) {
  if (!doc.is_array()) throw MalformedTemplateFile("template file must be a JSON array");
  TemplateLibrary lib;
  for (const auto& entry : doc) {
    try {
      PromptTemplate t;
      t.template_id = entry.at("template_id").get<std::string>();
      t.stage = template_stage_from_string(entry.at("stage").get<std::string>());
      t.body = entry.at("body").get<std::string>();
      t.placeholders = entry.at("placeholders").get<std::vector<std::string>>();
      for (const auto& name : scan_placeholders(t.body)) {
        if (std::find(t.placeholders.begin(), t.placeholders.end(), name) == t.placeholders.end())
          throw MalformedTemplateFile("template '" + t.template_id + "' uses undeclared placeholder '" +
                                      name + "'");
      }
      lib.add(std::move(t));
    } catch (const json::exception& e) {
      throw MalformedTemplateFile(std::string("template entry: ") + e.what());
    }
  }
  return lib;
}

TemplateLibrary TemplateLibrary::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MalformedTemplateFile("cannot open template file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw MalformedTemplateFile(path.string() + ": " + e.what());
  }
  return from_json(doc);
}

json TemplateLibrary::to_json() const {
  json out = json::array();
  for (const auto& t : templates_)
    out.push_back({{"template_id", t.template_id},
                   {"stage", to_string(t.stage)},
                   {"body", t.body},
                   {"placeholders", t.placeholders}});
  return out;
}

void TemplateLibrary::add(PromptTemplate tmpl) {
  auto it = std::find_if(templates_.begin(), templates_.end(),
                         [&](const auto& t) { return t.template_id == tmpl.template_id; });
  if (it != templates_.end())
    *it = std::move(tmpl);
  else
    templates_.push_back(std::move(tmpl));
}

const PromptTemplate& TemplateLibrary::get(const std::string& template_id) const {
  for (const auto& t : templates_)
    if (t.template_id == template_id) return t;
  throw UnknownTemplate("unknown template '" + template_id + "'");
}

bool TemplateLibrary::contains(const std::string& template_id) const {
  return std::any_of(templates_.begin(), templates_.end(),
                     [&](const auto& t) { return t.template_id == template_id; });
}

std::vector<std::string> TemplateLibrary::ids() const {
  std::vector<std::string> out;
  for (const auto& t : templates_) out.push_back(t.template_id);
  return out;
}

std::string TemplateLibrary::render(const std::string& template_id, const Params& params) const {
  return substitute(get(template_id), params);
}

}  // namespace schemaloop::prompt
