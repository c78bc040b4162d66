#ifndef DOCIE_MODE_HPP_
#define DOCIE_MODE_HPP_

#include <string>

namespace docie {

enum class Task { kMd, kEt, kEd, kCoref, kRc };

std::string to_string(Task task);

// Training / evaluation setting: one subtask in isolation, end-to-end
// relation extraction (no ED), or full document-level closed IE.
struct TrainingMode {
  enum class Kind { kSubtask, kRe, kDocie };

  Kind kind = Kind::kDocie;
  Task subtask = Task::kMd;  // meaningful only for kSubtask

  // "subtask:md", "subtask:et", "subtask:ed", "subtask:coref",
  // "subtask:rc", "re", "docie"
  static TrainingMode parse(const std::string& text);
  std::string str() const;
};

}  // namespace docie

#endif  // DOCIE_MODE_HPP_
