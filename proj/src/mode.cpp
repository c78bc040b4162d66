#include "docie/mode.hpp"

#include "docie/error.hpp"

namespace docie {

std::string to_string(Task task) {
  switch (task) {
    case Task::kMd: return "md";
    case Task::kEt: return "et";
    case Task::kEd: return "ed";
    case Task::kCoref: return "coref";
    case Task::kRc: return "rc";
  }
  throw ConfigError("unknown task");
}

TrainingMode TrainingMode::parse(const std::string& text) {
  TrainingMode mode;
  if (text == "re") {
    mode.kind = Kind::kRe;
    return mode;
  }
  if (text == "docie") {
    mode.kind = Kind::kDocie;
    return mode;
  }
  const std::string prefix = "subtask:";
  if (text.rfind(prefix, 0) == 0) {
    mode.kind = Kind::kSubtask;
    const std::string task = text.substr(prefix.size());
    if (task == "md") mode.subtask = Task::kMd;
    else if (task == "et") mode.subtask = Task::kEt;
    else if (task == "ed") mode.subtask = Task::kEd;
    else if (task == "coref") mode.subtask = Task::kCoref;
    else if (task == "rc") mode.subtask = Task::kRc;
    else throw ConfigError("unknown subtask '" + task + "'");
    return mode;
  }
  throw ConfigError("unknown mode '" + text +
                    "' (expected re, docie or subtask:<task>)");
}

std::string TrainingMode::str() const {
  switch (kind) {
    case Kind::kRe: return "re";
    case Kind::kDocie: return "docie";
    case Kind::kSubtask: return "subtask:" + to_string(subtask);
  }
  throw ConfigError("unknown mode");
}

}  // namespace docie
