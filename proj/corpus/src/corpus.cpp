#include "oobn/corpus.hpp"

#include <stdexcept>
#include <utility>

namespace oobn::corpus {

namespace detail {
const std::vector<std::pair<std::string_view, std::string_view>>& embedded_files();
}

namespace {

std::vector<Entry> load() {
  std::vector<Entry> out;
  const auto& files = detail::embedded_files();
  for (const auto& [name, text] : files) {
    std::string_view n = name;
    if (n.size() < 5 || n.substr(n.size() - 5) != ".oobn") continue;
    Entry e;
    e.name = std::string(n.substr(0, n.size() - 5));
    e.text = std::string(text);
    if (e.text.rfind("# ", 0) == 0) e.description = e.text.substr(2, e.text.find('\n') - 2);
    for (const auto& [other, json] : files) {
      if (other == e.name + ".json") e.expectations = std::string(json);
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

const std::vector<Entry>& entries() {
  static const std::vector<Entry> all = load();
  return all;
}

const Entry& entry(std::string_view name) {
  for (const auto& e : entries()) {
    if (e.name == name) return e;
  }
  throw std::out_of_range("no corpus entry named " + std::string(name));
}

const std::string& accident_text() { return entry("accident").text; }

dsl::ModelSource accident_model() { return dsl::parse_model_or_throw(accident_text()); }

std::vector<std::string> subclass_suite_names() {
  return {"accident_full", "accident_sports", "accident_rich", "accident_commute"};
}

std::vector<dsl::ModelSource> subclass_suite() {
  std::vector<dsl::ModelSource> out;
  for (const auto& n : subclass_suite_names()) out.push_back(dsl::parse_model_or_throw(entry(n).text));
  return out;
}

}  // namespace oobn::corpus
