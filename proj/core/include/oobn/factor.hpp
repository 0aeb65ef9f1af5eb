#pragma once

#include <cstdint>
#include <vector>

namespace oobn {

// Counts factor-table cells touched: a product touches each result cell,
// a marginalization each input cell.
struct CostCounter {
  std::uint64_t cells = 0;
  void add(std::uint64_t n) { cells += n; }
};

// Dense table over an ordered scope, row-major (last variable fastest).
struct Factor {
  std::vector<int> vars;
  std::vector<int> sizes;
  std::vector<double> table;

  Factor() : table{1.0} {}
  Factor(std::vector<int> vars, std::vector<int> sizes, double fill = 1.0);

  std::size_t cells() const { return table.size(); }
  int axis(int var) const;  // -1 when absent
  bool has(int var) const { return axis(var) >= 0; }
  double sum() const;
  // Throws E_ZERO_PROB when the table sums to zero.
  void normalize();
  // Cell for an assignment given in scope order.
  double at(const std::vector<int>& assignment) const;
};

Factor multiply(const Factor& a, const Factor& b, CostCounter* cost = nullptr);

// target *= f, where f's scope is contained in target's.
void multiply_in(Factor& target, const Factor& f, CostCounter* cost = nullptr);

// Sums out everything not in `keep`; the result scope follows `keep` order.
// Every variable in `keep` must be in f's scope.
Factor marginalize(const Factor& f, const std::vector<int>& keep, CostCounter* cost = nullptr);

// Same table, scope permuted to `order` (a permutation of f.vars).
Factor reorder(const Factor& f, const std::vector<int>& order);

// Zeroes every cell inconsistent with var = value.
void restrict_to(Factor& f, int var, int value);

// Product of `factors` with every variable outside `keep` summed out,
// using a greedy smallest-intermediate elimination order. The result scope
// follows `keep` order; `keep_sizes` supplies domain sizes for keep variables
// that appear in no factor.
Factor eliminate(std::vector<Factor> factors, const std::vector<int>& keep, const std::vector<int>& keep_sizes,
                 CostCounter* cost = nullptr);

}  // namespace oobn
