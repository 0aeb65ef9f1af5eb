#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace oobn {

// Stable error codes. Every user-facing failure carries one of these.
namespace codes {
inline constexpr const char* kParse = "E_PARSE";
inline constexpr const char* kDuplicateName = "E_DUPLICATE_NAME";
inline constexpr const char* kNoSituation = "E_NO_SITUATION";
inline constexpr const char* kUnknownName = "E_UNKNOWN_NAME";
inline constexpr const char* kInfiniteType = "E_INFINITE_TYPE";
inline constexpr const char* kBadMap = "E_BAD_MAP";
inline constexpr const char* kUnknownOutput = "E_UNKNOWN_OUTPUT";
inline constexpr const char* kMissingOutput = "E_MISSING_OUTPUT";
inline constexpr const char* kInterfaceMismatch = "E_INTERFACE_MISMATCH";
inline constexpr const char* kCycleInHierarchy = "E_CYCLE_IN_HIERARCHY";
inline constexpr const char* kOverrideType = "E_OVERRIDE_TYPE";
inline constexpr const char* kDag = "E_DAG";
inline constexpr const char* kAnnotType = "E_ANNOT_TYPE";
inline constexpr const char* kUnusedParent = "E_UNUSED_PARENT";
inline constexpr const char* kCpt = "E_CPT";
inline constexpr const char* kRecursion = "E_RECURSION";
inline constexpr const char* kTypeCompat = "E_TYPE_COMPAT";
inline constexpr const char* kBadChain = "E_BAD_CHAIN";
inline constexpr const char* kUnboundInput = "E_UNBOUND_INPUT";
inline constexpr const char* kTooLarge = "E_TOO_LARGE";
inline constexpr const char* kZeroProb = "E_ZERO_PROB";
inline constexpr const char* kCoverage = "E_COVERAGE";
inline constexpr const char* kBadValue = "E_BAD_VALUE";
inline constexpr const char* kNotCalibrated = "E_NOT_CALIBRATED";
inline constexpr const char* kBadQuery = "E_BAD_QUERY";
inline constexpr const char* kIncompatibleClass = "E_INCOMPATIBLE_CLASS";
inline constexpr const char* kUnknownPath = "E_UNKNOWN_PATH";
inline constexpr const char* kEvidenceOrphaned = "E_EVIDENCE_ORPHANED";
inline constexpr const char* kIconize = "E_ICONIZE";
inline constexpr const char* kBadLog = "E_BAD_LOG";
inline constexpr const char* kInternal = "E_INTERNAL";
}  // namespace codes

struct Diagnostic {
  std::string code;
  std::string message;
  int line = 0;  // 1-based; 0 when the diagnostic has no source position
  int column = 0;

  // `file:line:col: CODE message` (position omitted when unknown).
  std::string format(const std::string& file = "<input>") const;
};

// Thrown by every module for user-level errors. Carries at least one
// diagnostic; code() is the first diagnostic's code.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message);
  explicit Error(std::vector<Diagnostic> diagnostics);

  const std::string& code() const { return diagnostics_.front().code; }
  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

}  // namespace oobn
