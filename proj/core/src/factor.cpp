#include "oobn/factor.hpp"

#include <algorithm>
#include <limits>

#include "oobn/error.hpp"

namespace oobn {

namespace {

std::vector<std::size_t> own_strides(const Factor& f) {
  std::vector<std::size_t> s(f.vars.size(), 1);
  for (int k = static_cast<int>(f.vars.size()) - 2; k >= 0; --k) s[k] = s[k + 1] * static_cast<std::size_t>(f.sizes[k + 1]);
  return s;
}

// Stride of each variable of `scope` inside `src` (0 when absent).
std::vector<std::size_t> strides_in(const Factor& src, const std::vector<int>& scope) {
  std::vector<std::size_t> own = own_strides(src);
  std::vector<std::size_t> out(scope.size(), 0);
  for (std::size_t k = 0; k < scope.size(); ++k) {
    int a = src.axis(scope[k]);
    if (a >= 0) out[k] = own[a];
  }
  return out;
}

std::size_t product(const std::vector<int>& sizes) {
  std::size_t n = 1;
  for (int s : sizes) n *= static_cast<std::size_t>(s);
  return n;
}

}  // namespace

Factor::Factor(std::vector<int> v, std::vector<int> s, double fill)
    : vars(std::move(v)), sizes(std::move(s)), table(product(sizes), fill) {}

int Factor::axis(int var) const {
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i] == var) return static_cast<int>(i);
  }
  return -1;
}

double Factor::sum() const {
  double s = 0.0;
  for (double x : table) s += x;
  return s;
}

void Factor::normalize() {
  double s = sum();
  if (!(s > 0.0)) throw Error(codes::kZeroProb, "evidence has probability zero");
  for (double& x : table) x /= s;
}

double Factor::at(const std::vector<int>& assignment) const {
  std::size_t index = 0;
  for (std::size_t k = 0; k < vars.size(); ++k) index = index * static_cast<std::size_t>(sizes[k]) + assignment[k];
  return table[index];
}

Factor multiply(const Factor& a, const Factor& b, CostCounter* cost) {
  std::vector<int> vars = a.vars;
  std::vector<int> sizes = a.sizes;
  for (std::size_t k = 0; k < b.vars.size(); ++k) {
    if (!a.has(b.vars[k])) {
      vars.push_back(b.vars[k]);
      sizes.push_back(b.sizes[k]);
    }
  }
  Factor r(vars, sizes, 0.0);
  const std::vector<std::size_t> sa = strides_in(a, vars);
  const std::vector<std::size_t> sb = strides_in(b, vars);
  const int d = static_cast<int>(vars.size());
  std::vector<int> idx(d, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t c = 0; c < r.table.size(); ++c) {
    r.table[c] = a.table[ia] * b.table[ib];
    for (int k = d - 1; k >= 0; --k) {
      if (++idx[k] < sizes[k]) {
        ia += sa[k];
        ib += sb[k];
        break;
      }
      ia -= sa[k] * static_cast<std::size_t>(sizes[k] - 1);
      ib -= sb[k] * static_cast<std::size_t>(sizes[k] - 1);
      idx[k] = 0;
    }
  }
  if (cost) cost->add(r.table.size());
  return r;
}

void multiply_in(Factor& target, const Factor& f, CostCounter* cost) {
  const std::vector<std::size_t> sf = strides_in(f, target.vars);
  const int d = static_cast<int>(target.vars.size());
  std::vector<int> idx(d, 0);
  std::size_t i = 0;
  for (std::size_t c = 0; c < target.table.size(); ++c) {
    target.table[c] *= f.table[i];
    for (int k = d - 1; k >= 0; --k) {
      if (++idx[k] < target.sizes[k]) {
        i += sf[k];
        break;
      }
      i -= sf[k] * static_cast<std::size_t>(target.sizes[k] - 1);
      idx[k] = 0;
    }
  }
  if (cost) cost->add(target.table.size());
}

Factor marginalize(const Factor& f, const std::vector<int>& keep, CostCounter* cost) {
  std::vector<int> sizes;
  for (int v : keep) {
    int a = f.axis(v);
    if (a < 0) throw Error(codes::kInternal, "marginalize: variable not in scope");
    sizes.push_back(f.sizes[a]);
  }
  Factor r(keep, sizes, 0.0);
  const std::vector<std::size_t> sr = strides_in(r, f.vars);
  const int d = static_cast<int>(f.vars.size());
  std::vector<int> idx(d, 0);
  std::size_t i = 0;
  for (std::size_t c = 0; c < f.table.size(); ++c) {
    r.table[i] += f.table[c];
    for (int k = d - 1; k >= 0; --k) {
      if (++idx[k] < f.sizes[k]) {
        i += sr[k];
        break;
      }
      i -= sr[k] * static_cast<std::size_t>(f.sizes[k] - 1);
      idx[k] = 0;
    }
  }
  if (cost) cost->add(f.table.size());
  return r;
}

Factor reorder(const Factor& f, const std::vector<int>& order) {
  if (order == f.vars) return f;
  std::vector<int> sizes;
  for (int v : order) sizes.push_back(f.sizes[f.axis(v)]);
  Factor r(order, sizes, 0.0);
  const std::vector<std::size_t> sf = strides_in(f, order);
  const int d = static_cast<int>(order.size());
  std::vector<int> idx(d, 0);
  std::size_t i = 0;
  for (std::size_t c = 0; c < r.table.size(); ++c) {
    r.table[c] = f.table[i];
    for (int k = d - 1; k >= 0; --k) {
      if (++idx[k] < sizes[k]) {
        i += sf[k];
        break;
      }
      i -= sf[k] * static_cast<std::size_t>(sizes[k] - 1);
      idx[k] = 0;
    }
  }
  return r;
}

void restrict_to(Factor& f, int var, int value) {
  int a = f.axis(var);
  if (a < 0) return;
  std::vector<std::size_t> s = own_strides(f);
  const std::size_t stride = s[a];
  const std::size_t n = static_cast<std::size_t>(f.sizes[a]);
  for (std::size_t c = 0; c < f.table.size(); ++c) {
    if ((c / stride) % n != static_cast<std::size_t>(value)) f.table[c] = 0.0;
  }
}

Factor eliminate(std::vector<Factor> factors, const std::vector<int>& keep, const std::vector<int>& keep_sizes,
                 CostCounter* cost) {
  std::vector<int> pending;
  std::vector<std::pair<int, int>> domain;  // var, size
  for (const auto& f : factors) {
    for (std::size_t k = 0; k < f.vars.size(); ++k) {
      int v = f.vars[k];
      if (std::find(keep.begin(), keep.end(), v) == keep.end() &&
          std::find(pending.begin(), pending.end(), v) == pending.end()) {
        pending.push_back(v);
      }
      domain.emplace_back(v, f.sizes[k]);
    }
  }
  auto size_of = [&](int v) {
    for (const auto& [x, s] : domain) {
      if (x == v) return s;
    }
    return 1;
  };
  while (!pending.empty()) {
    int best = -1;
    double best_cells = std::numeric_limits<double>::infinity();
    for (int v : pending) {
      std::vector<int> scope;
      for (const auto& f : factors) {
        if (!f.has(v)) continue;
        for (int u : f.vars) {
          if (std::find(scope.begin(), scope.end(), u) == scope.end()) scope.push_back(u);
        }
      }
      double cells = 1.0;
      for (int u : scope) cells *= size_of(u);
      if (cells < best_cells || (cells == best_cells && v < best)) {
        best = v;
        best_cells = cells;
      }
    }
    std::vector<Factor> rest;
    Factor joined;
    bool first = true;
    for (auto& f : factors) {
      if (!f.has(best)) {
        rest.push_back(std::move(f));
        continue;
      }
      if (first) {
        joined = std::move(f);
        first = false;
      } else {
        joined = multiply(joined, f, cost);
      }
    }
    std::vector<int> remain;
    for (int u : joined.vars) {
      if (u != best) remain.push_back(u);
    }
    rest.push_back(marginalize(joined, remain, cost));
    factors = std::move(rest);
    pending.erase(std::find(pending.begin(), pending.end(), best));
  }
  Factor result;
  bool first = true;
  for (auto& f : factors) {
    if (first) {
      result = std::move(f);
      first = false;
    } else {
      result = multiply(result, f, cost);
    }
  }
  for (std::size_t k = 0; k < keep.size(); ++k) {
    if (!result.has(keep[k])) result = multiply(result, Factor({keep[k]}, {keep_sizes[k]}, 1.0), cost);
  }
  return reorder(result, keep);
}

}  // namespace oobn
