#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace oobn {

class TypeDef;
using TypeRef = std::shared_ptr<const TypeDef>;

struct Field {
  std::string label;
  TypeRef type;
};

// A basic (finite enumeration) or structured (labelled tuple) value type.
// Basic types are nominal; structured types compare structurally.
class TypeDef {
 public:
  enum class Kind { kBasic, kStructured };

  static TypeRef basic(std::string name, std::vector<std::string> values);
  static TypeRef structured(std::string name, std::vector<Field> fields);

  Kind kind() const { return kind_; }
  bool is_basic() const { return kind_ == Kind::kBasic; }
  const std::string& name() const { return name_; }

  const std::vector<std::string>& values() const { return values_; }
  int size() const { return static_cast<int>(values_.size()); }
  int value_index(std::string_view value) const;

  const std::vector<Field>& fields() const { return fields_; }
  const Field* field(std::string_view label) const;

  // Human-readable rendering, e.g. <Reliability:{good,bad}, Power:{...}>.
  std::string describe() const;

 private:
  TypeDef() = default;

  Kind kind_ = Kind::kBasic;
  std::string name_;
  std::vector<std::string> values_;
  std::vector<Field> fields_;
};

const TypeRef& boolean_type();

// A total surjective function Val(from) -> Val(to) between basic types.
struct CoarseningMap {
  TypeRef from;
  TypeRef to;
  std::vector<int> image;  // image[i] = index in `to` of from.values()[i]
};

// Declared coarsening maps closed under composition.
class CoarseningSet {
 public:
  // Throws E_BAD_MAP unless the map is total and surjective.
  void add(CoarseningMap map);

  const CoarseningMap* find(const std::string& from, const std::string& to) const;
  size_t size() const { return maps_.size(); }

  // Value index translation for t1 <= t2 (identity when equal). Empty when
  // no such map exists.
  std::vector<int> value_map(const TypeDef& from, const TypeDef& to) const;

 private:
  void close();

  std::map<std::pair<std::string, std::string>, CoarseningMap> maps_;
};

bool types_equal(const TypeDef& a, const TypeDef& b);

bool is_value_subtype(const TypeDef& sub, const TypeDef& super, const CoarseningSet& maps);

struct InterfaceType {
  std::vector<std::pair<std::string, TypeRef>> inputs;
  std::vector<std::pair<std::string, TypeRef>> outputs;

  std::string describe() const;
};

// First violation of the interface subtyping rules, naming the attribute.
std::optional<std::string> interface_violation(const InterfaceType& sub, const InterfaceType& super,
                                               const CoarseningSet& maps);

inline bool is_interface_subtype(const InterfaceType& sub, const InterfaceType& super,
                                 const CoarseningSet& maps) {
  return !interface_violation(sub, super, maps).has_value();
}

}  // namespace oobn
