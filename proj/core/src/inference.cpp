#include "oobn/inference.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <queue>
#include <tuple>

namespace oobn {

Triangulation triangulate(const std::vector<int>& vars, const std::vector<int>& sizes, const std::vector<int>& rank,
                          const std::vector<std::vector<int>>& families,
                          const std::vector<std::vector<int>>& required) {
  const int n = static_cast<int>(vars.size());
  std::map<int, int> local;
  for (int i = 0; i < n; ++i) local[vars[i]] = i;
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  auto complete = [&](const std::vector<int>& set) {
    for (std::size_t a = 0; a < set.size(); ++a) {
      for (std::size_t b = a + 1; b < set.size(); ++b) {
        int x = local.at(set[a]);
        int y = local.at(set[b]);
        if (x != y) adj[x][y] = adj[y][x] = 1;
      }
    }
  };
  for (const auto& f : families) complete(f);
  for (const auto& r : required) complete(r);

  Triangulation out;
  std::vector<bool> alive(n, true);
  auto by_rank = [&](int a, int b) { return rank[a] < rank[b]; };
  for (int step = 0; step < n; ++step) {
    int best = -1;
    std::tuple<int, double, int> best_key;
    for (int v = 0; v < n; ++v) {
      if (!alive[v]) continue;
      std::vector<int> nb;
      for (int u = 0; u < n; ++u) {
        if (alive[u] && adj[v][u]) nb.push_back(u);
      }
      int fill = 0;
      for (std::size_t a = 0; a < nb.size(); ++a) {
        for (std::size_t b = a + 1; b < nb.size(); ++b) {
          if (!adj[nb[a]][nb[b]]) ++fill;
        }
      }
      double weight = sizes[v];
      for (int u : nb) weight *= sizes[u];
      auto key = std::make_tuple(fill, weight, rank[v]);
      if (best < 0 || key < best_key) {
        best = v;
        best_key = key;
      }
    }
    std::vector<int> clique{best};
    for (int u = 0; u < n; ++u) {
      if (alive[u] && adj[best][u]) clique.push_back(u);
    }
    for (std::size_t a = 1; a < clique.size(); ++a) {
      for (std::size_t b = a + 1; b < clique.size(); ++b) adj[clique[a]][clique[b]] = adj[clique[b]][clique[a]] = 1;
    }
    alive[best] = false;
    out.order.push_back(vars[best]);
    std::sort(clique.begin(), clique.end(), by_rank);
    std::vector<int> global;
    for (int x : clique) global.push_back(vars[x]);
    bool subsumed = false;
    for (const auto& c : out.cliques) {
      if (std::all_of(global.begin(), global.end(),
                      [&](int g) { return std::find(c.begin(), c.end(), g) != c.end(); })) {
        subsumed = true;
        break;
      }
    }
    if (!subsumed) out.cliques.push_back(std::move(global));
  }
  return out;
}

Triangulation triangulate(const FlatBN& bn, const std::vector<std::vector<int>>& required) {
  const int n = static_cast<int>(bn.vars.size());
  std::vector<int> vars(n);
  std::iota(vars.begin(), vars.end(), 0);
  std::vector<int> by_id = vars;
  std::sort(by_id.begin(), by_id.end(), [&](int a, int b) { return bn.vars[a].id < bn.vars[b].id; });
  std::vector<int> rank(n);
  for (int i = 0; i < n; ++i) rank[by_id[i]] = i;
  std::vector<std::vector<int>> families;
  for (int v = 0; v < n; ++v) {
    families.push_back(bn.vars[v].parents);
    families.back().push_back(v);
  }
  return triangulate(vars, bn.sizes(), rank, families, required);
}

int CliqueTree::covering(const std::vector<int>& vars) const {
  for (std::size_t c = 0; c < cliques.size(); ++c) {
    const auto& cl = cliques[c];
    if (std::all_of(vars.begin(), vars.end(), [&](int v) { return std::find(cl.begin(), cl.end(), v) != cl.end(); })) {
      return static_cast<int>(c);
    }
  }
  return -1;
}

CliqueTree build_jt(const std::vector<std::vector<int>>& cliques, const std::vector<std::vector<int>>& families) {
  CliqueTree t;
  t.cliques = cliques;
  const int m = static_cast<int>(cliques.size());
  auto intersect = [&](int i, int j) {
    std::vector<int> s;
    for (int v : cliques[i]) {
      if (std::find(cliques[j].begin(), cliques[j].end(), v) != cliques[j].end()) s.push_back(v);
    }
    return s;
  };
  std::vector<std::tuple<int, int, int>> candidates;  // -weight, i, j
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) candidates.emplace_back(-static_cast<int>(intersect(i, j).size()), i, j);
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<int> uf(m);
  std::iota(uf.begin(), uf.end(), 0);
  std::function<int(int)> root = [&](int x) { return uf[x] == x ? x : uf[x] = root(uf[x]); };
  t.incident.assign(m, {});
  for (const auto& [w, i, j] : candidates) {
    int a = root(i);
    int b = root(j);
    if (a == b) continue;
    uf[a] = b;
    t.incident[i].push_back(static_cast<int>(t.edges.size()));
    t.incident[j].push_back(static_cast<int>(t.edges.size()));
    t.edges.emplace_back(i, j);
    t.separators.push_back(intersect(i, j));
  }
  std::map<int, int> holders;
  for (const auto& c : cliques) {
    for (int v : c) ++holders[v];
  }
  std::map<int, int> links;
  for (const auto& s : t.separators) {
    for (int v : s) ++links[v];
  }
  for (const auto& [v, count] : holders) {
    if (links[v] != count - 1) {
      throw Error(codes::kInternal, "clique tree violates running intersection on variable " + std::to_string(v));
    }
  }
  for (std::size_t f = 0; f < families.size(); ++f) {
    int c = t.covering(families[f]);
    if (c < 0) throw Error(codes::kCoverage, "family " + std::to_string(f) + " is not covered by any clique");
    t.assignment.push_back(c);
  }
  return t;
}

ShaferShenoyTree::ShaferShenoyTree(CliqueTree tree, std::vector<Factor> base, int root)
    : tree_(std::move(tree)), base_(std::move(base)), root_(root) {
  for (const auto& f : base_) {
    for (std::size_t k = 0; k < f.vars.size(); ++k) sizes_[f.vars[k]] = f.sizes[k];
  }
  messages_.resize(tree_.edges.size());
  potential_cache_.resize(base_.size());
  potential_valid_.assign(base_.size(), false);
  orient();
}

void ShaferShenoyTree::orient() {
  const int m = static_cast<int>(tree_.cliques.size());
  order_.clear();
  parent_edge_.assign(m, -1);
  parent_.assign(m, -1);
  if (m == 0) return;
  std::vector<bool> seen(m, false);
  std::queue<int> q;
  q.push(root_);
  seen[root_] = true;
  while (!q.empty()) {
    int c = q.front();
    q.pop();
    order_.push_back(c);
    for (int e : tree_.incident[c]) {
      int o = tree_.edges[e].first == c ? tree_.edges[e].second : tree_.edges[e].first;
      if (seen[o]) continue;
      seen[o] = true;
      parent_edge_[o] = e;
      parent_[o] = c;
      q.push(o);
    }
  }
}

int ShaferShenoyTree::size_of(int var) const {
  auto it = sizes_.find(var);
  if (it == sizes_.end()) throw Error(codes::kBadQuery, "variable " + std::to_string(var) + " is not in this tree");
  return it->second;
}

int ShaferShenoyTree::evidence_clique(int var) const { return tree_.covering({var}); }

bool ShaferShenoyTree::set_evidence(int var, int value) {
  int c = evidence_clique(var);
  if (c < 0) throw Error(codes::kBadQuery, "variable " + std::to_string(var) + " is not in this tree");
  auto it = evidence_.find(var);
  if (it != evidence_.end() && it->second == value) return false;
  evidence_[var] = value;
  potential_valid_[c] = false;
  collect_valid_ = distribute_valid_ = false;
  return true;
}

bool ShaferShenoyTree::retract_evidence(int var) {
  auto it = evidence_.find(var);
  if (it == evidence_.end()) return false;
  evidence_.erase(it);
  potential_valid_[evidence_clique(var)] = false;
  collect_valid_ = distribute_valid_ = false;
  return true;
}

void ShaferShenoyTree::attach(int key, int clique, Factor f) {
  attached_[key] = {clique, std::move(f)};
  collect_valid_ = distribute_valid_ = false;
}

void ShaferShenoyTree::detach(int key) {
  if (attached_.erase(key)) collect_valid_ = distribute_valid_ = false;
}

const Factor* ShaferShenoyTree::attached(int key) const {
  auto it = attached_.find(key);
  return it == attached_.end() ? nullptr : &it->second.second;
}

void ShaferShenoyTree::set_down(Factor f) {
  down_ = std::move(f);
  has_down_ = true;
  distribute_valid_ = false;
}

void ShaferShenoyTree::clear_down() {
  if (!has_down_) return;
  has_down_ = false;
  down_ = Factor();
  distribute_valid_ = false;
}

const Factor& ShaferShenoyTree::potential(int c) const {
  if (!potential_valid_[c]) {
    Factor f = base_[c];
    for (const auto& [var, value] : evidence_) {
      if (evidence_clique(var) == c) restrict_to(f, var, value);
    }
    potential_cache_[c] = std::move(f);
    potential_valid_[c] = true;
  }
  return potential_cache_[c];
}

Factor ShaferShenoyTree::gather(int c, int skip_edge, int skip_key, bool with_down, CostCounter* cost) const {
  Factor f = potential(c);
  for (const auto& [key, entry] : attached_) {
    if (entry.first == c && key != skip_key) multiply_in(f, entry.second, cost);
  }
  if (with_down && has_down_ && c == root_) multiply_in(f, down_, cost);
  for (int e : tree_.incident[c]) {
    if (e == skip_edge) continue;
    int dir = tree_.edges[e].first == c ? 1 : 0;
    multiply_in(f, messages_[e][dir], cost);
  }
  return f;
}

void ShaferShenoyTree::collect(CostCounter* cost) {
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    int c = *it;
    int e = parent_edge_[c];
    if (e < 0) continue;
    int dir = tree_.edges[e].first == c ? 0 : 1;
    messages_[e][dir] = marginalize(gather(c, e, -1, false, cost), tree_.separators[e], cost);
  }
  collect_valid_ = true;
  distribute_valid_ = false;
}

void ShaferShenoyTree::distribute(CostCounter* cost) {
  if (!collect_valid_) throw Error(codes::kNotCalibrated, "distribute before collect");
  for (int c : order_) {
    std::vector<int> out;
    for (int e : tree_.incident[c]) {
      if (e != parent_edge_[c]) out.push_back(e);
    }
    if (out.size() <= 2) {
      for (int e : out) {
        int dir = tree_.edges[e].first == c ? 0 : 1;
        messages_[e][dir] = marginalize(gather(c, e, -1, true, cost), tree_.separators[e], cost);
      }
      continue;
    }
    // Hub cliques: prefix and suffix products keep the work linear in the
    // number of neighbours.
    auto incoming = [&](int e) -> const Factor& { return messages_[e][tree_.edges[e].first == c ? 1 : 0]; };
    const std::size_t n = out.size();
    std::vector<Factor> suffix(n);
    suffix[n - 1] = incoming(out[n - 1]);
    for (std::size_t j = n - 1; j-- > 1;) suffix[j] = multiply(incoming(out[j]), suffix[j + 1], cost);
    Factor prefix = potential(c);
    for (const auto& [key, entry] : attached_) {
      if (entry.first == c) multiply_in(prefix, entry.second, cost);
    }
    if (has_down_ && c == root_) multiply_in(prefix, down_, cost);
    if (parent_edge_[c] >= 0) multiply_in(prefix, incoming(parent_edge_[c]), cost);
    for (std::size_t j = 0; j < n; ++j) {
      int e = out[j];
      int dir = tree_.edges[e].first == c ? 0 : 1;
      Factor f = j + 1 < n ? multiply(prefix, suffix[j + 1], cost) : prefix;
      messages_[e][dir] = marginalize(f, tree_.separators[e], cost);
      if (j + 1 < n) multiply_in(prefix, incoming(e), cost);
    }
  }
  distribute_valid_ = true;
}

std::vector<Factor> ShaferShenoyTree::collect_messages() const {
  std::vector<Factor> out;
  for (int c : order_) {
    int e = parent_edge_[c];
    if (e < 0) continue;
    out.push_back(messages_[e][tree_.edges[e].first == c ? 0 : 1]);
  }
  return out;
}

void ShaferShenoyTree::install_collect_messages(std::vector<Factor> msgs) {
  std::size_t i = 0;
  for (int c : order_) {
    int e = parent_edge_[c];
    if (e < 0) continue;
    messages_[e][tree_.edges[e].first == c ? 0 : 1] = std::move(msgs.at(i++));
  }
  collect_valid_ = true;
  distribute_valid_ = false;
}

Factor ShaferShenoyTree::up_message(const std::vector<int>& scope, CostCounter* cost) const {
  if (!collect_valid_) throw Error(codes::kNotCalibrated, "up message before collect");
  return marginalize(gather(root_, -1, -1, false, cost), scope, cost);
}

Factor ShaferShenoyTree::message_excluding(int key, const std::vector<int>& scope, CostCounter* cost) const {
  if (!collect_valid_ || !distribute_valid_) throw Error(codes::kNotCalibrated, "tree is not calibrated");
  auto it = attached_.find(key);
  int c = it == attached_.end() ? tree_.covering(scope) : it->second.first;
  if (c < 0) throw Error(codes::kInternal, "no clique covers the requested message scope");
  return marginalize(gather(c, -1, key, true, cost), scope, cost);
}

Factor ShaferShenoyTree::belief(int clique, CostCounter* cost) const { return gather(clique, -1, -1, true, cost); }

Factor ShaferShenoyTree::marginal(const std::vector<int>& vars, CostCounter* cost) const {
  if (!collect_valid_ || !distribute_valid_) throw Error(codes::kNotCalibrated, "tree is not calibrated");
  if (vars.empty()) return Factor();
  int c = tree_.covering(vars);
  if (c >= 0) {
    Factor f = marginalize(belief(c, cost), vars, cost);
    f.normalize();
    return f;
  }
  const int m = static_cast<int>(tree_.cliques.size());
  std::vector<bool> terminal(m, false);
  for (int v : vars) {
    int h = tree_.covering({v});
    if (h < 0) throw Error(codes::kBadQuery, "variable " + std::to_string(v) + " is not in this tree");
    terminal[h] = true;
  }
  std::vector<bool> in(m, true);
  std::vector<int> degree(m, 0);
  for (const auto& [a, b] : tree_.edges) {
    ++degree[a];
    ++degree[b];
  }
  bool pruned = true;
  while (pruned) {
    pruned = false;
    for (int x = 0; x < m; ++x) {
      if (!in[x] || terminal[x] || degree[x] > 1) continue;
      in[x] = false;
      pruned = true;
      for (int e : tree_.incident[x]) {
        int o = tree_.edges[e].first == x ? tree_.edges[e].second : tree_.edges[e].first;
        if (in[o]) --degree[o];
      }
    }
  }
  std::vector<Factor> factors;
  for (int x = 0; x < m; ++x) {
    if (!in[x]) continue;
    factors.push_back(potential(x));
    for (const auto& [key, entry] : attached_) {
      if (entry.first == x) factors.push_back(entry.second);
    }
    if (has_down_ && x == root_) factors.push_back(down_);
    for (int e : tree_.incident[x]) {
      int o = tree_.edges[e].first == x ? tree_.edges[e].second : tree_.edges[e].first;
      if (!in[o]) factors.push_back(messages_[e][tree_.edges[e].first == x ? 1 : 0]);
    }
  }
  std::vector<int> sizes;
  for (int v : vars) sizes.push_back(size_of(v));
  Factor f = eliminate(std::move(factors), vars, sizes, cost);
  f.normalize();
  return f;
}

void ShaferShenoyTree::joint_factors(std::vector<Factor>& out, const std::vector<int>& skip_attached_keys,
                                     bool include_down) const {
  for (std::size_t c = 0; c < base_.size(); ++c) out.push_back(potential(static_cast<int>(c)));
  for (const auto& [key, entry] : attached_) {
    if (std::find(skip_attached_keys.begin(), skip_attached_keys.end(), key) == skip_attached_keys.end()) {
      out.push_back(entry.second);
    }
  }
  if (include_down && has_down_) out.push_back(down_);
}

void ShaferShenoyTree::remap(const std::map<int, int>& vars, const std::map<int, int>& keys) {
  auto var = [&](int v) {
    auto it = vars.find(v);
    return it == vars.end() ? v : it->second;
  };
  auto rename = [&](Factor& f) {
    for (int& v : f.vars) v = var(v);
  };
  auto rename_set = [&](std::vector<int>& s) {
    for (int& v : s) v = var(v);
  };
  for (auto& c : tree_.cliques) rename_set(c);
  for (auto& s : tree_.separators) rename_set(s);
  for (auto& f : base_) rename(f);
  for (auto& f : potential_cache_) rename(f);
  for (auto& pair : messages_) {
    rename(pair[0]);
    rename(pair[1]);
  }
  rename(down_);
  std::map<int, int> sizes;
  for (const auto& [v, s] : sizes_) sizes[var(v)] = s;
  sizes_ = std::move(sizes);
  std::map<int, int> evidence;
  for (const auto& [v, x] : evidence_) evidence[var(v)] = x;
  evidence_ = std::move(evidence);
  std::map<int, std::pair<int, Factor>> attached;
  for (auto& [key, entry] : attached_) {
    auto it = keys.find(key);
    rename(entry.second);
    attached[it == keys.end() ? key : it->second] = std::move(entry);
  }
  attached_ = std::move(attached);
}

double ShaferShenoyTree::max_separator_discrepancy() const {
  double worst = 0.0;
  for (std::size_t e = 0; e < tree_.edges.size(); ++e) {
    Factor a = marginalize(belief(tree_.edges[e].first, nullptr), tree_.separators[e]);
    Factor b = marginalize(belief(tree_.edges[e].second, nullptr), tree_.separators[e]);
    for (std::size_t i = 0; i < a.table.size(); ++i) worst = std::max(worst, std::fabs(a.table[i] - b.table[i]));
  }
  return worst;
}

JunctionTree::JunctionTree(const FlatBN& bn, const std::vector<std::vector<int>>& required)
    : bn_(&bn), tri_(triangulate(bn, required)) {
  std::vector<std::vector<int>> families;
  for (std::size_t v = 0; v < bn.vars.size(); ++v) {
    families.push_back(bn.vars[v].parents);
    families.back().push_back(static_cast<int>(v));
  }
  CliqueTree tree = build_jt(tri_.cliques, families);
  std::vector<Factor> base;
  for (const auto& c : tree.cliques) {
    std::vector<int> sizes;
    for (int v : c) sizes.push_back(bn.vars[v].size());
    base.emplace_back(c, sizes, 1.0);
  }
  for (std::size_t v = 0; v < bn.vars.size(); ++v) multiply_in(base[tree.assignment[v]], bn.cpt_factor(static_cast<int>(v)));
  engine_ = ShaferShenoyTree(std::move(tree), std::move(base), 0);
}

void JunctionTree::set_evidence(int var, int value) {
  if (var < 0 || var >= static_cast<int>(bn_->vars.size())) throw Error(codes::kBadQuery, "unknown variable");
  if (value < 0 || value >= bn_->vars[var].size()) {
    throw Error(codes::kBadValue, "value index " + std::to_string(value) + " out of range for " + bn_->vars[var].id);
  }
  engine_.set_evidence(var, value);
}

void JunctionTree::retract_evidence(int var) { engine_.retract_evidence(var); }

void JunctionTree::clear_evidence() {
  std::vector<int> vars;
  for (const auto& [v, x] : engine_.evidence()) vars.push_back(v);
  for (int v : vars) engine_.retract_evidence(v);
}

void JunctionTree::calibrate(CostCounter* cost) {
  if (calibrated()) return;
  engine_.collect(cost);
  if (!(engine_.up_message({}, nullptr).table[0] > 0.0)) {
    throw Error(codes::kZeroProb, "evidence has probability zero");
  }
  engine_.distribute(cost);
}

Factor JunctionTree::marginal(const std::vector<int>& vars, CostCounter* cost) const {
  if (!calibrated()) throw Error(codes::kNotCalibrated, "junction tree is not calibrated");
  return engine_.marginal(vars, cost);
}

Factor JunctionTree::clique_belief(int clique) const {
  if (!calibrated()) throw Error(codes::kNotCalibrated, "junction tree is not calibrated");
  return engine_.belief(clique, nullptr);
}

double JunctionTree::evidence_probability() const {
  if (!engine_.collected()) throw Error(codes::kNotCalibrated, "junction tree is not calibrated");
  return engine_.up_message({}, nullptr).table[0];
}

}  // namespace oobn
