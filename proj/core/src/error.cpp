#include "oobn/error.hpp"

namespace oobn {

namespace {

std::string summarize(const std::vector<Diagnostic>& diagnostics) {
  if (diagnostics.empty()) return "unknown error";
  std::string out = diagnostics.front().code + ": " + diagnostics.front().message;
  if (diagnostics.size() > 1) {
    out += " (+" + std::to_string(diagnostics.size() - 1) + " more)";
  }
  return out;
}

}  // namespace

std::string Diagnostic::format(const std::string& file) const {
  std::string out = file;
  if (line > 0) {
    out += ":" + std::to_string(line) + ":" + std::to_string(column);
  }
  out += ": " + code + " " + message;
  return out;
}

Error::Error(std::string code, const std::string& message)
    : Error(std::vector<Diagnostic>{Diagnostic{std::move(code), message, 0, 0}}) {}

Error::Error(std::vector<Diagnostic> diagnostics)
    : std::runtime_error(summarize(diagnostics)), diagnostics_(std::move(diagnostics)) {
  if (diagnostics_.empty()) diagnostics_.push_back({"E_INTERNAL", "empty diagnostic list", 0, 0});
}

}  // namespace oobn
