#include "oobn/flatten.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace oobn {

int FlatBN::find(std::string_view id) const {
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const std::string& v = vars[i].id;
    if (v == id) return static_cast<int>(i);
    std::size_t dot = v.find('.');
    if (dot != std::string::npos && std::string_view(v).substr(dot + 1) == id) return static_cast<int>(i);
  }
  return -1;
}

std::vector<int> FlatBN::sizes() const {
  std::vector<int> out;
  out.reserve(vars.size());
  for (const auto& v : vars) out.push_back(v.size());
  return out;
}

std::vector<std::vector<int>> FlatBN::children() const {
  std::vector<std::vector<int>> out(vars.size());
  for (std::size_t v = 0; v < vars.size(); ++v) {
    for (int p : vars[v].parents) out[p].push_back(static_cast<int>(v));
  }
  return out;
}

Factor FlatBN::cpt_factor(int v) const {
  std::vector<int> scope = vars[v].parents;
  std::vector<int> sizes;
  for (int p : scope) sizes.push_back(vars[p].size());
  scope.push_back(v);
  sizes.push_back(vars[v].size());
  Factor f(scope, sizes, 0.0);
  f.table = vars[v].cpt;
  return f;
}

ChainTarget resolve_chain_target(const GroundModel& gm, int origin, const std::vector<std::string>& chain_in) {
  if (origin < 0 || origin >= static_cast<int>(gm.objects.size())) {
    throw Error(codes::kBadChain, "no object with id " + std::to_string(origin));
  }
  std::vector<std::string> chain = chain_in;
  std::size_t pos = 0;
  int x = origin;
  auto text = [&] {
    std::string out = gm.objects[origin].path;
    for (const auto& l : chain_in) out += "." + l;
    return out;
  };
  for (int guard = 0; guard < 100000; ++guard) {
    const GroundObject& obj = gm.objects[x];
    if (pos == chain.size()) {
      if (obj.simple()) return {x, {}};
      throw Error(codes::kBadChain, text() + " ends at complex object " + obj.path);
    }
    if (obj.simple()) {
      throw Error(codes::kBadChain, text() + ": " + obj.path + " is basic and has no attribute '" + chain[pos] + "'");
    }
    const std::string& head = chain[pos];
    int ai = obj.cls->attr_index(head);
    if (ai >= 0) {
      x = obj.children[ai];
      ++pos;
      continue;
    }
    if (obj.cls->input(head)) {
      if (obj.container < 0) {
        if (gm.free_root_inputs) return {-1, std::vector<std::string>(chain.begin() + static_cast<long>(pos), chain.end())};
        throw Error(codes::kUnboundInput, text() + " escapes through input '" + head + "' of the root");
      }
      const SlotBinding* b = obj.spec().binding(head);
      if (!b) throw Error(codes::kUnboundInput, text() + ": input '" + head + "' of " + obj.path + " is not annotated");
      std::vector<std::string> next = b->chain;
      next.insert(next.end(), chain.begin() + static_cast<long>(pos) + 1, chain.end());
      chain = std::move(next);
      pos = 0;
      x = obj.container;
      continue;
    }
    throw Error(codes::kBadChain, text() + ": '" + head + "' is not an attribute of " + obj.path);
  }
  throw Error(codes::kBadChain, text() + " does not terminate");
}

int resolve_chain(const GroundModel& gm, int origin, const std::vector<std::string>& chain) {
  ChainTarget t = resolve_chain_target(gm, origin, chain);
  if (t.object < 0) {
    throw Error(codes::kUnboundInput, "chain escapes through input '" + t.root_input_chain.front() + "' of the root");
  }
  return t.object;
}

FlatBN build_flat_bn(const GroundModel& gm) {
  FlatBN bn;
  const int nobj = static_cast<int>(gm.objects.size());

  struct Source {
    int object = -1;
    std::string free_id;
    TypeRef type;
  };
  std::vector<std::vector<Source>> sources(nobj);
  std::vector<std::pair<std::string, TypeRef>> free_inputs;
  const ClassDef& root_cls = *gm.root().cls;

  for (int o = 0; o < nobj; ++o) {
    const GroundObject& obj = gm.objects[o];
    if (!obj.simple()) continue;
    for (const auto& b : obj.spec().bindings) {
      ChainTarget t = resolve_chain_target(gm, obj.container, b.chain);
      Source s;
      if (t.object >= 0) {
        s.object = t.object;
        s.type = gm.objects[t.object].spec().type;
      } else {
        std::string why;
        s.type = chain_type(root_cls, t.root_input_chain, &why);
        if (!s.type || !s.type->is_basic()) {
          throw Error(codes::kBadChain, "free input chain does not end at a basic type: " + why);
        }
        s.free_id = gm.root().path;
        for (const auto& l : t.root_input_chain) s.free_id += "." + l;
        auto it = std::find_if(free_inputs.begin(), free_inputs.end(), [&](const auto& f) { return f.first == s.free_id; });
        if (it == free_inputs.end()) free_inputs.emplace_back(s.free_id, s.type);
      }
      sources[o].push_back(std::move(s));
    }
  }

  std::map<std::string, int> free_var;
  for (const auto& [id, type] : free_inputs) {
    FlatVariable v;
    v.id = id;
    v.type = type;
    v.free_input = true;
    v.cpt.assign(static_cast<std::size_t>(type->size()), 1.0 / type->size());
    free_var[id] = static_cast<int>(bn.vars.size());
    bn.vars.push_back(std::move(v));
  }
  bn.object_var.assign(nobj, -1);
  for (int o = 0; o < nobj; ++o) {
    if (!gm.objects[o].simple()) continue;
    bn.object_var[o] = static_cast<int>(bn.vars.size());
    FlatVariable v;
    v.id = gm.objects[o].path;
    v.object = o;
    v.type = gm.objects[o].spec().type;
    bn.vars.push_back(std::move(v));
  }

  for (int o = 0; o < nobj; ++o) {
    if (!gm.objects[o].simple()) continue;
    const int vi = bn.object_var[o];
    FlatVariable& v = bn.vars[vi];
    const ValueAttr& spec = gm.objects[o].spec();
    std::vector<int> slot_parent;
    std::vector<std::vector<int>> slot_map;
    for (std::size_t s = 0; s < spec.bindings.size(); ++s) {
      const Source& src = sources[o][s];
      int pv = src.object >= 0 ? bn.object_var[src.object] : free_var.at(src.free_id);
      if (pv >= vi) throw Error(codes::kInternal, "sigma order is not topological at " + v.id);
      std::vector<int> m = gm.maps->value_map(*src.type, *spec.bindings[s].slot_type);
      if (m.empty()) {
        throw Error(codes::kTypeCompat, v.id + ": " + src.type->name() + " does not map onto " +
                                            spec.bindings[s].slot_type->name());
      }
      auto it = std::find(v.parents.begin(), v.parents.end(), pv);
      int pidx = static_cast<int>(it - v.parents.begin());
      if (it == v.parents.end()) v.parents.push_back(pv);
      slot_parent.push_back(pidx);
      slot_map.push_back(std::move(m));
    }
    const std::size_t k = static_cast<std::size_t>(v.size());
    std::size_t rows = 1;
    for (int p : v.parents) rows *= static_cast<std::size_t>(bn.vars[p].size());
    v.cpt.assign(rows * k, 0.0);
    std::vector<int> pval(v.parents.size(), 0);
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t src_row = 0;
      for (std::size_t s = 0; s < spec.bindings.size(); ++s) {
        src_row = src_row * static_cast<std::size_t>(spec.bindings[s].slot_type->size()) +
                  static_cast<std::size_t>(slot_map[s][pval[slot_parent[s]]]);
      }
      std::copy_n(spec.cpt.begin() + static_cast<long>(src_row * k), k, v.cpt.begin() + static_cast<long>(r * k));
      for (int p = static_cast<int>(pval.size()) - 1; p >= 0; --p) {
        if (++pval[p] < bn.vars[v.parents[p]].size()) break;
        pval[p] = 0;
      }
    }
  }
  return bn;
}

namespace {

// Compensated (Neumaier) accumulator.
struct Accumulator {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + comp; }
};

}  // namespace

Factor enumerate_joint(const FlatBN& bn, const Assignment& evidence, const std::vector<int>& targets,
                       std::uint64_t cap) {
  const int n = static_cast<int>(bn.vars.size());
  double states = 1.0;
  for (const auto& v : bn.vars) states *= v.size();
  if (states > static_cast<double>(cap)) {
    throw Error(codes::kTooLarge, "joint state space of " + std::to_string(static_cast<std::uint64_t>(states)) +
                                      " exceeds the enumeration cap " + std::to_string(cap));
  }
  std::vector<int> fixed(n, -1);
  for (const auto& [var, value] : evidence) {
    if (var < 0 || var >= n) throw Error(codes::kBadQuery, "evidence on unknown variable");
    if (value < 0 || value >= bn.vars[var].size()) {
      throw Error(codes::kBadValue, "value index " + std::to_string(value) + " out of range for " + bn.vars[var].id);
    }
    if (fixed[var] >= 0 && fixed[var] != value) throw Error(codes::kZeroProb, "conflicting evidence on " + bn.vars[var].id);
    fixed[var] = value;
  }
  std::vector<int> tsizes;
  for (int t : targets) {
    if (t < 0 || t >= n) throw Error(codes::kBadQuery, "unknown target variable");
    tsizes.push_back(bn.vars[t].size());
  }
  Factor out(targets, tsizes, 0.0);
  std::vector<Accumulator> cells(out.table.size());
  Accumulator total;

  std::vector<int> value(n, 0);
  std::function<void(int, double)> walk = [&](int v, double p) {
    if (p == 0.0) return;
    if (v == n) {
      std::size_t index = 0;
      for (std::size_t k = 0; k < targets.size(); ++k) {
        index = index * static_cast<std::size_t>(tsizes[k]) + static_cast<std::size_t>(value[targets[k]]);
      }
      cells[index].add(p);
      total.add(p);
      return;
    }
    const FlatVariable& fv = bn.vars[v];
    std::size_t row = 0;
    for (int par : fv.parents) row = row * static_cast<std::size_t>(bn.vars[par].size()) + value[par];
    const std::size_t k = static_cast<std::size_t>(fv.size());
    for (int x = 0; x < fv.size(); ++x) {
      if (fixed[v] >= 0 && fixed[v] != x) continue;
      value[v] = x;
      walk(v + 1, p * fv.cpt[row * k + static_cast<std::size_t>(x)]);
    }
  };
  walk(0, 1.0);
  const double z = total.value();
  if (!(z > 0.0)) throw Error(codes::kZeroProb, "evidence has probability zero");
  for (std::size_t i = 0; i < cells.size(); ++i) out.table[i] = cells[i].value() / z;
  return out;
}

}  // namespace oobn
