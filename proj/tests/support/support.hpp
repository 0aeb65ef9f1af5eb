#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "oobn/factor.hpp"
#include "oobn/flatten.hpp"
#include "oobn/inference.hpp"
#include "oobn/model.hpp"

namespace oobn::test {

inline double max_abs_diff(const Factor& a, const Factor& b) {
  if (a.table.size() != b.table.size()) return INFINITY;
  double d = 0.0;
  for (std::size_t i = 0; i < a.table.size(); ++i) d = std::max(d, std::abs(a.table[i] - b.table[i]));
  return d;
}

inline Factor posterior(const FlatBN& bn, const Assignment& ev, const std::vector<int>& targets) {
  double states = 1.0;
  for (const auto& v : bn.vars) states *= v.size();
  if (states <= double(1 << 22)) return enumerate_joint(bn, ev, targets);
  JunctionTree jt(bn);
  for (auto [v, x] : ev) jt.set_evidence(v, x);
  jt.calibrate();
  return jt.marginal(targets);
}

// Largest gap between P(outputs | inputs) of two classes with the same
// interface, over every assignment of the first class's free inputs.
// Both sides use brute-force enumeration when the joint state space is
// small and a flat junction tree otherwise.
inline double conditional_gap(const ClassRef& a, const ClassRef& b, std::shared_ptr<const CoarseningSet> maps) {
  GroundModel ga = instantiate_class(a, maps);
  GroundModel gb = instantiate_class(b, maps);
  FlatBN ba = build_flat_bn(ga);
  FlatBN bb = build_flat_bn(gb);
  auto suffix = [](const FlatBN& bn, int v, const std::string& root) { return bn.vars[v].id.substr(root.size() + 1); };
  std::vector<int> outs_a, outs_b;
  for (const auto& label : a->output_labels()) {
    outs_a.push_back(ba.find(a->name + "." + label));
    outs_b.push_back(bb.find(b->name + "." + label));
  }
  std::vector<int> free_a;
  std::vector<int> free_b;
  for (std::size_t v = 0; v < ba.vars.size(); ++v) {
    if (!ba.vars[v].free_input) continue;
    free_a.push_back(static_cast<int>(v));
    free_b.push_back(bb.find(b->name + "." + suffix(ba, static_cast<int>(v), a->name)));
  }
  double worst = 0.0;
  std::vector<int> x(free_a.size(), 0);
  while (true) {
    Assignment ea, eb;
    for (std::size_t i = 0; i < x.size(); ++i) {
      ea.emplace_back(free_a[i], x[i]);
      if (free_b[i] >= 0) eb.emplace_back(free_b[i], x[i]);
    }
    worst = std::max(worst, max_abs_diff(posterior(ba, ea, outs_a), posterior(bb, eb, outs_b)));
    int p = static_cast<int>(x.size()) - 1;
    while (p >= 0 && ++x[p] == ba.vars[free_a[p]].size()) x[p--] = 0;
    if (p < 0) break;
  }
  return worst;
}

}  // namespace oobn::test
