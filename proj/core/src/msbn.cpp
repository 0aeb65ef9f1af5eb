#include "oobn/msbn.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <deque>
#include <limits>
#include <set>
#include <unordered_set>

namespace oobn {

std::vector<int> IOSet::all() const {
  std::vector<int> out = imported;
  out.insert(out.end(), exported.begin(), exported.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

// Complex objects containing the variable, innermost first.
std::vector<int> containers_of(const GroundModel& gm, const FlatBN& bn, int var) {
  std::vector<int> out;
  int o = bn.vars[var].object;
  int x = o < 0 ? 0 : gm.objects[o].container;
  while (x >= 0) {
    out.push_back(x);
    x = gm.objects[x].container;
  }
  return out;
}

void sort_unique(std::vector<int>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

std::string hex_bits(double x) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &x, sizeof bits);
  char buf[20];
  auto res = std::to_chars(buf, buf + sizeof buf, bits, 16);
  return std::string(buf, res.ptr);
}

std::string join(const std::vector<std::string>& parts, std::size_t from) {
  std::string out;
  for (std::size_t i = from; i < parts.size(); ++i) {
    if (i > from) out += '.';
    out += parts[i];
  }
  return out;
}

Factor rename(const Factor& f, const std::vector<int>& from, const std::vector<int>& to) {
  Factor r = f;
  for (int& v : r.vars) {
    auto it = std::find(from.begin(), from.end(), v);
    if (it == from.end()) throw Error(codes::kInternal, "factor variable outside the canonical set");
    v = to[static_cast<std::size_t>(it - from.begin())];
  }
  return r;
}

double max_diff(const Factor& a, const Factor& b) {
  if (a.vars != b.vars || a.table.size() != b.table.size()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t i = 0; i < a.table.size(); ++i) worst = std::max(worst, std::fabs(a.table[i] - b.table[i]));
  return worst;
}

}  // namespace

std::map<int, IOSet> compute_io_sets(const GroundModel& gm, const FlatBN& bn) {
  std::map<int, IOSet> out;
  for (const auto& o : gm.objects) {
    if (!o.simple()) out[o.id].owner = o.id;
  }
  std::vector<std::vector<int>> anc(bn.vars.size());
  for (std::size_t v = 0; v < bn.vars.size(); ++v) anc[v] = containers_of(gm, bn, static_cast<int>(v));
  for (std::size_t v = 0; v < bn.vars.size(); ++v) {
    for (int p : bn.vars[v].parents) {
      const auto& a = anc[v];
      const auto& b = anc[p];
      for (int z : a) {
        if (std::find(b.begin(), b.end(), z) == b.end()) out[z].imported.push_back(p);
      }
      for (int z : b) {
        if (std::find(a.begin(), a.end(), z) == a.end()) out[z].exported.push_back(p);
      }
    }
  }
  for (auto& [id, io] : out) {
    sort_unique(io.imported);
    sort_unique(io.exported);
  }
  return out;
}

bool verify_dsep(const FlatBN& bn, const std::vector<int>& inside, const std::vector<int>& separator) {
  const int n = static_cast<int>(bn.vars.size());
  std::vector<char> observed(n, 0);
  std::vector<char> source(n, 0);
  for (int z : separator) observed[z] = 1;
  for (int x : inside) source[x] = 1;
  const auto children = bn.children();

  // Observed variables and their ancestors.
  std::vector<char> ancestor(n, 0);
  std::deque<int> work(separator.begin(), separator.end());
  while (!work.empty()) {
    int y = work.front();
    work.pop_front();
    if (ancestor[y]) continue;
    ancestor[y] = 1;
    for (int p : bn.vars[y].parents) work.push_back(p);
  }

  // Active-trail reachability; direction 0 = arrived from a child, 1 = from a parent.
  std::vector<std::array<char, 2>> visited(n, {0, 0});
  std::vector<char> reachable(n, 0);
  std::deque<std::pair<int, int>> q;
  for (int x : inside) q.emplace_back(x, 0);
  while (!q.empty()) {
    auto [y, dir] = q.front();
    q.pop_front();
    if (visited[y][dir]) continue;
    visited[y][dir] = 1;
    if (!observed[y]) reachable[y] = 1;
    if (dir == 0 && !observed[y]) {
      for (int p : bn.vars[y].parents) q.emplace_back(p, 0);
      for (int c : children[y]) q.emplace_back(c, 1);
    } else if (dir == 1) {
      if (!observed[y]) {
        for (int c : children[y]) q.emplace_back(c, 1);
      }
      if (ancestor[y]) {
        for (int p : bn.vars[y].parents) q.emplace_back(p, 0);
      }
    }
  }
  for (int v = 0; v < n; ++v) {
    if (reachable[v] && !source[v] && !observed[v]) return false;
  }
  return true;
}

std::shared_ptr<const ClassCache::Collect> ClassCache::find_collect(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = collects_.find(key);
  return it == collects_.end() ? nullptr : it->second;
}

void ClassCache::publish_collect(const std::string& key, std::shared_ptr<const Collect> entry) {
  std::lock_guard lock(mu_);
  collects_[key] = std::move(entry);
}

std::shared_ptr<const ClassCache::Skeleton> ClassCache::find_skeleton(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = skeletons_.find(key);
  return it == skeletons_.end() ? nullptr : it->second;
}

void ClassCache::publish_skeleton(const std::string& key, std::shared_ptr<const Skeleton> entry) {
  std::lock_guard lock(mu_);
  skeletons_[key] = std::move(entry);
}

std::size_t ClassCache::size() const {
  std::lock_guard lock(mu_);
  return collects_.size() + skeletons_.size();
}

void ClassCache::clear() {
  std::lock_guard lock(mu_);
  collects_.clear();
  skeletons_.clear();
}

Hypertree::Hypertree(std::shared_ptr<const GroundModel> gm, std::shared_ptr<const FlatBN> bn,
                     std::shared_ptr<ClassCache> cache, Hypertree* previous)
    : gm_(std::move(gm)), bn_(std::move(bn)), cache_(std::move(cache)) {
  build_structure();
  build_names();
  for (std::size_t s = 0; s < subnets_.size(); ++s) subnets_[s].signature = local_signature(static_cast<int>(s));

  std::map<std::string, int> prev_index;
  std::unordered_map<std::string, int> new_var;
  if (previous) {
    for (std::size_t p = 0; p < previous->subnets_.size(); ++p) prev_index[previous->subnets_[p].path] = static_cast<int>(p);
    for (std::size_t v = 0; v < bn_->vars.size(); ++v) new_var[bn_->vars[v].id] = static_cast<int>(v);
    version_ = previous->version_;
    hits_ = previous->hits_;
    misses_ = previous->misses_;
  }
  std::map<std::string, int> new_index;
  for (std::size_t s = 0; s < subnets_.size(); ++s) new_index[subnets_[s].path] = static_cast<int>(s);

  for (std::size_t si = 0; si < subnets_.size(); ++si) {
    const int s = static_cast<int>(si);
    Subnet& sub = subnets_[s];
    auto it = previous ? prev_index.find(sub.path) : prev_index.end();
    if (it == prev_index.end()) {
      build_tree(s);
      rebuild_.rebuilt.push_back(sub.path);
      continue;
    }
    Subnet& old = previous->subnets_[it->second];
    std::map<int, int> var_map;
    bool mappable = true;
    auto map_factor = [&](const Factor& f) {
      Factor r = f;
      for (int& v : r.vars) {
        auto nv = new_var.find(previous->bn_->vars[v].id);
        if (nv == new_var.end()) {
          mappable = false;
          return r;
        }
        v = nv->second;
      }
      return r;
    };
    if (old.signature != sub.signature) {
      build_tree(s);
      rebuild_.rebuilt.push_back(sub.path);
      Factor prior = map_factor(old.up);
      if (mappable) sub.prior_up = std::make_pair(std::move(prior), old.up_version);
      continue;
    }
    for (int v : old.sigma) var_map[v] = new_var.at(previous->bn_->vars[v].id);
    std::map<int, int> key_map;
    for (std::size_t c = 0; c < old.children.size(); ++c) {
      key_map[old.children[c]] = new_index.at(previous->subnets_[old.children[c]].path);
    }
    sub.tree = std::move(old.tree);
    sub.tree.remap(var_map, key_map);
    sub.child_iface = old.child_iface;
    sub.up = map_factor(old.up);
    sub.up_version = old.up_version;
    sub.epoch = old.epoch;
    sub.down_epoch = old.down_epoch;
    sub.cost = old.cost;
    sub.attached_version.assign(sub.children.size(), 0);
    for (std::size_t c = 0; c < old.children.size(); ++c) {
      const std::string& cpath = previous->subnets_[old.children[c]].path;
      for (std::size_t k = 0; k < sub.children.size(); ++k) {
        if (subnets_[sub.children[k]].path == cpath) sub.attached_version[k] = old.attached_version[c];
      }
    }
    rebuild_.reused.push_back(sub.path);
  }
  if (previous) {
    // Evidence follows its variable id; reused trees already hold it.
    for (const auto& [v, x] : previous->evidence_) {
      auto nv = new_var.find(previous->bn_->vars[v].id);
      if (nv == new_var.end()) continue;
      evidence_[nv->second] = x;
      subnets_[owner_[nv->second]].tree.set_evidence(nv->second, x);
    }
    for (const auto& old : previous->subnets_) {
      if (!new_index.count(old.path)) rebuild_.removed.push_back(old.path);
    }
  }
}

void Hypertree::build_structure() {
  const GroundModel& gm = *gm_;
  const FlatBN& bn = *bn_;
  subnet_of_object_.assign(gm.objects.size(), -1);
  for (const auto& o : gm.objects) {
    if (o.simple()) continue;
    Subnet sub;
    sub.object = o.id;
    sub.path = o.path;
    sub.parent = o.container < 0 ? -1 : subnet_of_object_[o.container];
    subnet_of_object_[o.id] = static_cast<int>(subnets_.size());
    if (sub.parent >= 0) subnets_[sub.parent].children.push_back(static_cast<int>(subnets_.size()));
    subnets_.push_back(std::move(sub));
  }
  auto io = compute_io_sets(gm, bn);
  owner_.assign(bn.vars.size(), 0);
  for (std::size_t v = 0; v < bn.vars.size(); ++v) {
    int o = bn.vars[v].object;
    owner_[v] = o < 0 ? 0 : subnet_of_object_[gm.objects[o].container];
    subnets_[owner_[v]].local.push_back(static_cast<int>(v));
  }
  for (auto& sub : subnets_) sub.io = io.at(sub.object);
  for (auto& sub : subnets_) {
    sub.sigma = sub.local;
    auto add = [&](const IOSet& s) {
      for (int v : s.all()) sub.sigma.push_back(v);
    };
    add(sub.io);
    for (int c : sub.children) add(subnets_[c].io);
    sort_unique(sub.sigma);
    sub.attached_version.assign(sub.children.size(), 0);
  }
}

void Hypertree::build_names() {
  const GroundModel& gm = *gm_;
  const FlatBN& bn = *bn_;
  // Walk every binding chain and record, for each object crossed on the
  // way out, the chain as seen from that object's inputs.
  for (const auto& obj : gm.objects) {
    if (!obj.simple()) continue;
    for (std::size_t bi = 0; bi < obj.spec().bindings.size(); ++bi) {
      std::vector<std::string> chain = obj.spec().bindings[bi].chain;
      std::size_t pos = 0;
      int x = obj.container;
      std::vector<std::pair<int, std::string>> exits;
      int var = -1;
      for (int guard = 0; guard < 100000 && var < 0; ++guard) {
        const GroundObject& cur = gm.objects[x];
        if (pos == chain.size()) {
          var = bn.object_var[x];
          break;
        }
        int ai = cur.cls->attr_index(chain[pos]);
        if (ai >= 0) {
          x = cur.children[ai];
          ++pos;
          continue;
        }
        if (cur.container < 0) {
          var = bn.find(cur.path + "." + join(chain, pos));
          break;
        }
        exits.emplace_back(x, "^" + join(chain, pos));
        const SlotBinding* b = cur.spec().binding(chain[pos]);
        std::vector<std::string> next = b->chain;
        next.insert(next.end(), chain.begin() + static_cast<long>(pos) + 1, chain.end());
        chain = std::move(next);
        pos = 0;
        x = cur.container;
      }
      if (var < 0) continue;
      for (const auto& [z, name] : exits) {
        auto key = std::make_pair(subnet_of_object_[z], var);
        auto it = boundary_names_.find(key);
        if (it == boundary_names_.end() || name < it->second) boundary_names_[key] = name;
      }
    }
  }

  for (std::size_t si = 0; si < subnets_.size(); ++si) {
    Subnet& sub = subnets_[si];
    const int s = static_cast<int>(si);
    auto name_of = [&](int v) -> std::string {
      const FlatVariable& fv = bn.vars[v];
      bool inside = fv.object < 0 ? s == 0 : gm.is_descendant(fv.object, sub.object);
      if (inside) return fv.id.substr(std::min(fv.id.size(), sub.path.size() + 1));
      auto it = boundary_names_.find({s, v});
      return it != boundary_names_.end() ? it->second : "@" + fv.id;
    };
    sub.names.clear();
    for (int v : sub.sigma) sub.names.push_back(name_of(v));
    std::vector<int> io = sub.io.all();
    std::vector<std::pair<std::string, int>> named;
    for (int v : io) named.emplace_back(name_of(v), v);
    std::sort(named.begin(), named.end());
    sub.io_order.clear();
    for (const auto& [n, v] : named) sub.io_order.push_back(v);

    if (!cache_ || s == 0) continue;
    std::string d = "C:" + gm.objects[sub.object].cls->name + ";";
    for (int o : gm.descendants(sub.object)) {
      const GroundObject& g = gm.objects[o];
      std::string rel = g.path.substr(sub.path.size() + 1);
      if (!g.simple()) {
        d += "O:" + rel + "=" + g.cls->name + ";";
        continue;
      }
      const FlatVariable& fv = bn.vars[bn.object_var[o]];
      d += "V:" + rel + "#" + std::to_string(fv.size()) + "(";
      for (int p : fv.parents) d += name_of(p) + "#" + std::to_string(bn.vars[p].size()) + ",";
      d += ")";
      for (double x : fv.cpt) d += hex_bits(x) + ",";
      d += ";";
    }
    std::vector<std::string> exported;
    for (int v : sub.io.exported) exported.push_back(name_of(v));
    std::sort(exported.begin(), exported.end());
    d += "X:";
    for (const auto& e : exported) d += e + ",";
    sub.descriptor = std::move(d);
  }
}

std::string Hypertree::local_signature(int s) const {
  const Subnet& sub = subnets_[s];
  const FlatBN& bn = *bn_;
  std::string sig = "S:";
  for (int v : sub.sigma) sig += bn.vars[v].id + "#" + std::to_string(bn.vars[v].size()) + ",";
  sig += "F:";
  for (int v : sub.local) {
    sig += bn.vars[v].id + "(";
    for (int p : bn.vars[v].parents) sig += bn.vars[p].id + ",";
    sig += ")";
    for (double x : bn.vars[v].cpt) sig += hex_bits(x) + ",";
    sig += ";";
  }
  sig += "I:";
  for (int v : sub.io_order) sig += bn.vars[v].id + ",";
  for (int c : sub.children) {
    sig += "K:" + subnets_[c].path + "=";
    for (int v : subnets_[c].io_order) sig += bn.vars[v].id + ",";
  }
  return sig;
}

void Hypertree::build_tree(int s) {
  Subnet& sub = subnets_[s];
  const FlatBN& bn = *bn_;
  // Canonical rank: order of the names seen from inside the subnet.
  std::vector<int> by_name(sub.sigma.size());
  for (std::size_t i = 0; i < by_name.size(); ++i) by_name[i] = static_cast<int>(i);
  std::sort(by_name.begin(), by_name.end(), [&](int a, int b) { return sub.names[a] < sub.names[b]; });
  std::vector<int> vars;
  std::vector<int> sizes;
  std::vector<int> rank;
  for (std::size_t r = 0; r < by_name.size(); ++r) {
    int v = sub.sigma[by_name[r]];
    vars.push_back(v);
    sizes.push_back(bn.vars[v].size());
    rank.push_back(static_cast<int>(r));
  }
  auto order_by_rank = [&](std::vector<int> set) {
    std::sort(set.begin(), set.end(), [&](int a, int b) {
      return std::find(vars.begin(), vars.end(), a) < std::find(vars.begin(), vars.end(), b);
    });
    return set;
  };

  std::shared_ptr<const ClassCache::Skeleton> skeleton;
  const bool cacheable = cache_ && s != 0;
  if (cacheable) skeleton = cache_->find_skeleton(sub.descriptor);

  CliqueTree tree;
  std::vector<Factor> base;
  int root = 0;
  if (skeleton) {
    auto to_actual = [&](int r) { return vars[r]; };
    tree = skeleton->tree;
    for (auto& c : tree.cliques) std::transform(c.begin(), c.end(), c.begin(), to_actual);
    for (auto& c : tree.separators) std::transform(c.begin(), c.end(), c.begin(), to_actual);
    base = skeleton->base;
    for (auto& f : base) std::transform(f.vars.begin(), f.vars.end(), f.vars.begin(), to_actual);
    root = skeleton->root;
  } else {
    std::vector<int> local = order_by_rank(sub.local);
    std::vector<std::vector<int>> families;
    for (int v : local) {
      families.push_back(bn.vars[v].parents);
      families.back().push_back(v);
    }
    std::vector<std::vector<int>> required;
    if (s != 0) required.push_back(sub.io_order);
    for (int c : sub.children) required.push_back(order_by_rank(subnets_[c].io_order));
    Triangulation tri = triangulate(vars, sizes, rank, families, required);
    if (tri.cliques.empty()) tri.cliques.push_back({});
    tree = build_jt(tri.cliques, families);
    for (const auto& c : tree.cliques) {
      std::vector<int> cs;
      for (int v : c) cs.push_back(bn.vars[v].size());
      base.emplace_back(c, cs, 1.0);
    }
    for (std::size_t f = 0; f < local.size(); ++f) multiply_in(base[tree.assignment[f]], bn.cpt_factor(local[f]));
    root = s == 0 ? 0 : tree.covering(sub.io_order);
    if (root < 0) throw Error(codes::kInternal, "no clique covers the interface of " + sub.path);
    if (cacheable) {
      auto sk = std::make_shared<ClassCache::Skeleton>();
      auto to_rank = [&](int v) { return static_cast<int>(std::find(vars.begin(), vars.end(), v) - vars.begin()); };
      sk->tree = tree;
      for (auto& c : sk->tree.cliques) std::transform(c.begin(), c.end(), c.begin(), to_rank);
      for (auto& c : sk->tree.separators) std::transform(c.begin(), c.end(), c.begin(), to_rank);
      sk->base = base;
      for (auto& f : sk->base) std::transform(f.vars.begin(), f.vars.end(), f.vars.begin(), to_rank);
      sk->root = root;
      cache_->publish_skeleton(sub.descriptor, std::move(sk));
    }
  }
  sub.child_iface.clear();
  for (int c : sub.children) {
    int k = tree.covering(subnets_[c].io_order);
    if (k < 0) throw Error(codes::kInternal, "no clique covers the interface of " + subnets_[c].path);
    sub.child_iface.push_back(k);
  }
  sub.tree = ShaferShenoyTree(std::move(tree), std::move(base), root);
  for (const auto& [v, x] : evidence_) {
    if (owner_[v] == s) sub.tree.set_evidence(v, x);
  }
  sub.up = Factor();
  sub.up_version = 0;
  sub.attached_version.assign(sub.children.size(), 0);
  sub.epoch = 0;
  sub.down_epoch = 0;
}

int Hypertree::subnet_of_object(int object) const {
  if (object < 0 || object >= static_cast<int>(subnet_of_object_.size())) return -1;
  return subnet_of_object_[object];
}

std::vector<int> Hypertree::dsepset(int s) const {
  const Subnet& sub = subnets_[s];
  if (sub.parent < 0) return {};
  const auto& a = subnets_[sub.parent].sigma;
  std::vector<int> out;
  std::set_intersection(a.begin(), a.end(), sub.sigma.begin(), sub.sigma.end(), std::back_inserter(out));
  return out;
}

std::vector<int> Hypertree::subtree(int s) const {
  std::vector<int> pre;
  std::vector<int> stack{s};
  while (!stack.empty()) {
    int t = stack.back();
    stack.pop_back();
    pre.push_back(t);
    const auto& ch = subnets_[t].children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return pre;
}

std::vector<int> Hypertree::canonical_vars(int s) const {
  std::map<std::string, int> named;
  for (int t : subtree(s)) {
    const Subnet& sub = subnets_[t];
    for (std::size_t i = 0; i < sub.sigma.size(); ++i) {
      int v = sub.sigma[i];
      const FlatVariable& fv = bn_->vars[v];
      std::string name;
      if (fv.object >= 0 && gm_->is_descendant(fv.object, subnets_[s].object)) {
        name = fv.id.substr(subnets_[s].path.size() + 1);
      } else {
        auto it = boundary_names_.find({s, v});
        name = it != boundary_names_.end() ? it->second : "@" + fv.id;
      }
      named[name] = v;
    }
  }
  std::vector<int> out;
  for (const auto& [n, v] : named) out.push_back(v);
  return out;
}

void Hypertree::set_evidence(int var, int value) {
  if (var < 0 || var >= static_cast<int>(bn_->vars.size())) throw Error(codes::kBadQuery, "unknown variable");
  if (value < 0 || value >= bn_->vars[var].size()) {
    throw Error(codes::kBadValue, "value index " + std::to_string(value) + " out of range for " + bn_->vars[var].id);
  }
  evidence_[var] = value;
  subnets_[owner_[var]].tree.set_evidence(var, value);
}

void Hypertree::retract_evidence(int var) {
  if (evidence_.erase(var)) subnets_[owner_[var]].tree.retract_evidence(var);
}

std::map<int, int> Hypertree::evidence() const { return evidence_; }

bool Hypertree::stale(int s) const {
  const Subnet& sub = subnets_[s];
  if (!sub.tree.collected()) return true;
  for (std::size_t k = 0; k < sub.children.size(); ++k) {
    int c = sub.children[k];
    if (stale(c) || sub.attached_version[k] != subnets_[c].up_version) return true;
  }
  return false;
}

bool Hypertree::subtree_has_evidence(int s) const {
  for (const auto& [v, x] : evidence_) {
    int t = owner_[v];
    while (t >= 0 && t != s) t = subnets_[t].parent;
    if (t == s) return true;
  }
  return false;
}

void Hypertree::ensure_up(int s) {
  if (!stale(s)) return;
  if (cache_ && s != 0 && !subtree_has_evidence(s)) {
    if (auto entry = cache_->find_collect(subnets_[s].descriptor)) {
      install(s, *entry);
      ++hits_;
      return;
    }
    ++misses_;
    compute_up(s);
    store(s);
    return;
  }
  compute_up(s);
}

namespace {

void settle_up(Hypertree::Subnet& sub, Factor fresh, std::uint64_t& version) {
  if (sub.prior_up && max_diff(sub.prior_up->first, fresh) <= 1e-9) {
    sub.up = std::move(sub.prior_up->first);
    sub.up_version = sub.prior_up->second;
  } else {
    sub.up = std::move(fresh);
    sub.up_version = ++version;
  }
  sub.prior_up.reset();
}

}  // namespace

void Hypertree::compute_up(int s) {
  for (std::size_t k = 0; k < subnets_[s].children.size(); ++k) {
    const int c = subnets_[s].children[k];
    ensure_up(c);
    Subnet& sub = subnets_[s];
    if (sub.attached_version[k] != subnets_[c].up_version) {
      sub.tree.attach(c, sub.child_iface[k], subnets_[c].up);
      sub.attached_version[k] = subnets_[c].up_version;
      updated_.push_back(c);
    }
  }
  Subnet& sub = subnets_[s];
  if (!sub.tree.collected()) {
    CostCounter cost;
    sub.tree.collect(&cost);
    settle_up(sub, sub.tree.up_message(s == 0 ? std::vector<int>{} : sub.io_order, &cost), version_);
    sub.cost.collect += cost.cells;
    touch(s);
  }
}

void Hypertree::install(int s, const ClassCache::Collect& entry) {
  const std::vector<int> actual = canonical_vars(s);
  std::vector<int> canon(actual.size());
  for (std::size_t i = 0; i < canon.size(); ++i) canon[i] = static_cast<int>(i);
  const std::vector<int> sub = subtree(s);
  if (entry.parts.size() != sub.size()) throw Error(codes::kInternal, "cache entry shape mismatch");
  for (std::size_t i = 0; i < sub.size(); ++i) {
    settle_up(subnets_[sub[i]], rename(entry.parts[i].up, canon, actual), version_);
  }
  for (std::size_t i = 0; i < sub.size(); ++i) {
    Subnet& t = subnets_[sub[i]];
    for (std::size_t k = 0; k < t.children.size(); ++k) {
      const int c = t.children[k];
      t.tree.attach(c, t.child_iface[k], subnets_[c].up);
      t.attached_version[k] = subnets_[c].up_version;
    }
    std::vector<Factor> msgs;
    for (const auto& m : entry.parts[i].messages) msgs.push_back(rename(m, canon, actual));
    t.tree.install_collect_messages(std::move(msgs));
  }
}

void Hypertree::store(int s) {
  const std::vector<int> actual = canonical_vars(s);
  std::vector<int> canon(actual.size());
  for (std::size_t i = 0; i < canon.size(); ++i) canon[i] = static_cast<int>(i);
  auto entry = std::make_shared<ClassCache::Collect>();
  for (int t : subtree(s)) {
    ClassCache::Collect::Part part;
    for (const auto& m : subnets_[t].tree.collect_messages()) part.messages.push_back(rename(m, actual, canon));
    part.up = rename(subnets_[t].up, actual, canon);
    entry->parts.push_back(std::move(part));
  }
  cache_->publish_collect(subnets_[s].descriptor, std::move(entry));
}

void Hypertree::touch(int s) {
  if (std::find(touched_.begin(), touched_.end(), s) == touched_.end()) touched_.push_back(s);
}

void Hypertree::collect() {
  ensure_up(0);
  if (!(subnets_[0].up.table.at(0) > 0.0)) throw Error(codes::kZeroProb, "evidence has probability zero");
}

double Hypertree::evidence_probability() {
  collect();
  return subnets_[0].up.table.at(0);
}

void Hypertree::ensure_calibrated(int s) {
  collect();
  std::vector<int> path;
  for (int t = s; t >= 0; t = subnets_[t].parent) path.push_back(t);
  std::reverse(path.begin(), path.end());
  for (int t : path) {
    Subnet& sub = subnets_[t];
    if (sub.parent >= 0) {
      Subnet& par = subnets_[sub.parent];
      if (!sub.tree.has_down() || sub.down_epoch != par.epoch) {
        CostCounter cost;
        sub.tree.set_down(par.tree.message_excluding(t, sub.io_order, &cost));
        par.cost.distribute += cost.cells;
        sub.down_epoch = par.epoch;
      }
    }
    if (!sub.tree.distributed()) {
      CostCounter cost;
      sub.tree.distribute(&cost);
      sub.cost.distribute += cost.cells;
      sub.epoch = ++version_;
      touch(t);
    }
  }
}

void Hypertree::calibrate_all() {
  for (std::size_t s = 0; s < subnets_.size(); ++s) ensure_calibrated(static_cast<int>(s));
}

Factor Hypertree::marginal(const std::vector<int>& vars, CostCounter* cost) {
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i] < 0 || vars[i] >= static_cast<int>(bn_->vars.size())) throw Error(codes::kBadQuery, "unknown variable");
    if (std::find(vars.begin(), vars.begin() + static_cast<long>(i), vars[i]) != vars.begin() + static_cast<long>(i)) {
      throw Error(codes::kBadQuery, "variable " + bn_->vars[vars[i]].id + " requested twice");
    }
  }
  if (vars.empty()) {
    collect();
    return Factor();
  }
  auto holds_all = [&](int s) {
    const auto& sg = subnets_[s].sigma;
    return std::all_of(vars.begin(), vars.end(), [&](int v) { return std::binary_search(sg.begin(), sg.end(), v); });
  };
  int single = -1;
  if (holds_all(owner_[vars[0]])) single = owner_[vars[0]];
  for (std::size_t s = 0; single < 0 && s < subnets_.size(); ++s) {
    if (holds_all(static_cast<int>(s))) single = static_cast<int>(s);
  }
  if (single >= 0) {
    ensure_calibrated(single);
    return subnets_[single].tree.marginal(vars, cost);
  }

  // Steiner subtree of the hypertree over the owners of the variables.
  std::vector<std::vector<int>> paths;
  for (int v : vars) {
    std::vector<int> p;
    for (int t = owner_[v]; t >= 0; t = subnets_[t].parent) p.push_back(t);
    std::reverse(p.begin(), p.end());
    paths.push_back(std::move(p));
  }
  std::size_t common = 0;
  while (true) {
    bool same = std::all_of(paths.begin(), paths.end(),
                            [&](const auto& p) { return common < p.size() && p[common] == paths[0][common]; });
    if (!same) break;
    ++common;
  }
  const int top = paths[0][common - 1];
  std::set<int> steiner;
  for (const auto& p : paths) steiner.insert(p.begin() + static_cast<long>(common - 1), p.end());
  ensure_calibrated(top);
  std::vector<Factor> factors;
  for (int t : steiner) {
    std::vector<int> skip;
    for (int c : subnets_[t].children) {
      if (steiner.count(c)) skip.push_back(c);
    }
    subnets_[t].tree.joint_factors(factors, skip, t == top);
  }
  std::vector<int> sizes;
  for (int v : vars) sizes.push_back(bn_->vars[v].size());
  Factor f = eliminate(std::move(factors), vars, sizes, cost);
  f.normalize();
  return f;
}

double Hypertree::max_shared_discrepancy() {
  calibrate_all();
  double worst = 0.0;
  for (std::size_t a = 0; a < subnets_.size(); ++a) {
    for (std::size_t b = a + 1; b < subnets_.size(); ++b) {
      std::vector<int> shared;
      std::set_intersection(subnets_[a].sigma.begin(), subnets_[a].sigma.end(), subnets_[b].sigma.begin(),
                            subnets_[b].sigma.end(), std::back_inserter(shared));
      for (int v : shared) {
        worst = std::max(worst, max_diff(subnets_[a].tree.marginal({v}, nullptr), subnets_[b].tree.marginal({v}, nullptr)));
      }
    }
  }
  for (std::size_t s = 1; s < subnets_.size(); ++s) {
    const Subnet& sub = subnets_[s];
    if (sub.io_order.empty()) continue;
    worst = std::max(worst, max_diff(subnets_[sub.parent].tree.marginal(sub.io_order, nullptr),
                                     sub.tree.marginal(sub.io_order, nullptr)));
  }
  return worst;
}

void Hypertree::begin_operation() {
  touched_.clear();
  updated_.clear();
}

std::vector<std::string> Hypertree::recalibrated() const {
  std::vector<int> t = touched_;
  std::sort(t.begin(), t.end());
  std::vector<std::string> out;
  for (int s : t) out.push_back(subnets_[s].path);
  return out;
}

std::vector<std::string> Hypertree::messages_updated() const {
  std::vector<std::string> out;
  for (int s : updated_) out.push_back(subnets_[s].path);
  return out;
}

CostReport Hypertree::cost_report() const {
  CostReport r;
  for (const auto& sub : subnets_) {
    r.subnets.push_back({sub.path, sub.cost});
    r.total += sub.cost.total();
  }
  r.cache_hits = hits_;
  r.cache_misses = misses_;
  r.recalibrated = recalibrated();
  return r;
}

void Hypertree::reset_costs() {
  for (auto& sub : subnets_) sub.cost = SubnetCost{};
  hits_ = 0;
  misses_ = 0;
}

}  // namespace oobn
