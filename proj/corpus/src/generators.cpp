#include <algorithm>
#include <deque>
#include <functional>
#include <sstream>

#include "oobn/corpus.hpp"

namespace oobn::corpus {

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
  bool coin(double p) { return std::bernoulli_distribution(p)(gen_); }
  template <class T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), gen_);
  }

 private:
  std::mt19937_64 gen_;
};

// Probability row over `k` values, in thousandths, no zeros and no ties.
std::string prob_row(Rng& rng, int k) {
  if (k == 1) return "1";
  std::vector<int> w(k);
  while (true) {
    std::vector<int> cuts = {0, 1000};
    for (int i = 0; i < k - 1; ++i) cuts.push_back(rng.uniform(1, 999));
    std::sort(cuts.begin(), cuts.end());
    for (int i = 0; i < k; ++i) w[i] = cuts[i + 1] - cuts[i];
    std::vector<int> sorted = w;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() >= 30 && std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end() &&
        std::find(w.begin(), w.end(), 500) == w.end()) {
      break;
    }
  }
  std::ostringstream os;
  for (int i = 0; i < k; ++i) {
    if (i) os << ", ";
    int x = w[i];
    os << "0." << (x < 100 ? (x < 10 ? "00" : "0") : "") << x;
  }
  return os.str();
}

std::string indent_rows(Rng& rng, const std::vector<std::vector<std::string>>& slot_values, int k) {
  std::ostringstream os;
  os << " {\n";
  std::vector<std::size_t> idx(slot_values.size(), 0);
  while (true) {
    os << "    (";
    for (std::size_t s = 0; s < idx.size(); ++s) os << (s ? ", " : "") << slot_values[s][idx[s]];
    os << ") : " << prob_row(rng, k) << ";\n";
    int p = static_cast<int>(idx.size()) - 1;
    while (p >= 0 && ++idx[p] == slot_values[p].size()) idx[p--] = 0;
    if (p < 0) break;
  }
  os << "  }";
  return os.str();
}

const std::vector<std::string> kBool = {"true", "false"};

struct GenClass {
  std::string name;
  int depth = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;  // basic-typed chains visible from outside
  int vars = 0;
  std::string text;
};

class ModelGen {
 public:
  ModelGen(std::uint64_t seed, const RandomModelOptions& opts) : rng_(seed), opts_(opts) {}

  std::string run() {
    int budget = rng_.uniform(std::min(4, opts_.max_vars), opts_.max_vars);
    GenClass sit = make(0, budget, false);
    std::ostringstream os;
    os << "# random model\n\n";
    for (const auto& c : classes_) os << c.text << "\n";
    os << sit.text;
    return os.str();
  }

 private:
  struct Attr {
    std::string label;
    bool output = false;
    bool simple = true;
    std::string type;
    std::vector<std::pair<std::string, std::string>> bindings;
    std::string body;
  };

  GenClass make(int depth, int budget, bool allow_inputs) {
    GenClass c;
    c.depth = depth;
    const bool situation = depth == 0;
    if (!situation && allow_inputs) {
      int n = rng_.uniform(0, opts_.max_inputs);
      for (int i = 1; i <= n; ++i) c.inputs.push_back("I" + std::to_string(i));
    }
    std::vector<std::string> avail = c.inputs;
    std::vector<Attr> attrs;
    const int limit = rng_.uniform(1, 5);
    int simple_count = 0;
    while (c.vars < budget && static_cast<int>(attrs.size()) < limit) {
      const int room = budget - c.vars;
      Attr a;
      if (depth < opts_.max_depth && room >= 2 && rng_.coin(0.4)) {
        const GenClass* sub = nullptr;
        if (rng_.coin(0.5)) {
          for (const auto& k : classes_) {
            if (k.depth == depth + 1 && k.vars <= room && (k.inputs.empty() || !avail.empty())) {
              sub = &k;
              break;
            }
          }
        }
        if (!sub) {
          GenClass fresh = make(depth + 1, rng_.uniform(1, std::min(room, 6)), !avail.empty());
          fresh.name = "R" + std::to_string(classes_.size() + 1);
          finish_text(fresh);
          classes_.push_back(std::move(fresh));
          sub = &classes_.back();
        }
        a.label = "C" + std::to_string(attrs.size());
        a.simple = false;
        a.type = sub->name;
        for (const auto& in : sub->inputs) a.bindings.emplace_back(in, avail[rng_.uniform(0, static_cast<int>(avail.size()) - 1)]);
        a.output = !situation && rng_.coin(0.3);
        for (const auto& o : sub->outputs) {
          avail.push_back(a.label + "." + o);
          if (a.output) c.outputs.push_back(a.label + "." + o);
        }
        c.vars += sub->vars;
        a.body = ";";
      } else {
        a.label = "A" + std::to_string(attrs.size());
        a.type = "Boolean";
        std::vector<std::string> pool = avail;
        rng_.shuffle(pool);
        int k = rng_.uniform(0, std::min<int>(opts_.max_parents, static_cast<int>(pool.size())));
        std::vector<std::vector<std::string>> slots;
        for (int i = 0; i < k; ++i) {
          a.bindings.emplace_back("P" + std::to_string(i + 1), pool[i]);
          slots.push_back(kBool);
        }
        a.output = !situation && rng_.coin(0.5);
        a.body = indent_rows(rng_, slots, 2);
        avail.push_back(a.label);
        if (a.output) c.outputs.push_back(a.label);
        ++c.vars;
        ++simple_count;
      }
      attrs.push_back(std::move(a));
    }
    if (simple_count == 0) {
      Attr a;
      a.label = "A" + std::to_string(attrs.size());
      a.type = "Boolean";
      a.body = indent_rows(rng_, {}, 2);
      attrs.push_back(std::move(a));
      ++c.vars;
    }
    if (!situation && c.outputs.empty()) {
      for (auto it = attrs.rbegin(); it != attrs.rend(); ++it) {
        if (it->simple) {
          it->output = true;
          c.outputs.push_back(it->label);
          break;
        }
      }
    }
    std::ostringstream os;
    for (const auto& in : c.inputs) os << "  input " << in << " : Boolean;\n";
    for (const auto& a : attrs) {
      os << "  " << (a.output ? "output " : "private ") << a.label << " : " << a.type;
      if (!a.bindings.empty()) {
        os << " (";
        for (std::size_t i = 0; i < a.bindings.size(); ++i) {
          os << (i ? ", " : "") << a.bindings[i].first << " <- " << a.bindings[i].second;
        }
        os << ")";
      }
      os << a.body << "\n";
    }
    c.text = os.str();
    if (situation) c.text = "situation {\n" + c.text + "}\n";
    return c;
  }

  static void finish_text(GenClass& c) { c.text = "class " + c.name + " {\n" + c.text + "}\n"; }

  Rng rng_;
  RandomModelOptions opts_;
  std::deque<GenClass> classes_;
};

}  // namespace

std::string generate_family_text(int k, std::uint64_t seed) {
  dsl::ModelSource lib = accident_model();
  lib.situation.reset();
  std::erase_if(lib.classes, [](const dsl::ClassDecl& c) { return c.name == "WEATHER" || c.name == "ROAD"; });
  Rng rng(seed);
  std::ostringstream os;
  os << dsl::render_model(lib) << "\nsituation {\n  private Driver : DRIVER;\n";
  const std::vector<std::string> speeds = {"slow", "moderate", "fast"};
  const std::vector<std::string> braking = {"strong", "medium", "weak"};
  for (int i = 1; i <= k; ++i) {
    std::string car = "Car" + std::to_string(i);
    os << "  private " << car << " : CAR (Owner <- Driver);\n";
    os << "  private Risk" << i << " : Boolean (M <- " << car << ".Max-Speed, B <- " << car << ".Braking-Power)"
       << indent_rows(rng, {speeds, braking}, 2) << "\n";
  }
  os << "}\n";
  return os.str();
}

dsl::ModelSource generate_family(int k, std::uint64_t seed) {
  return dsl::parse_model_or_throw(generate_family_text(k, seed));
}

std::string random_model_text(std::uint64_t seed, const RandomModelOptions& opts) {
  return ModelGen(seed, opts).run();
}

std::string random_class_text(std::uint64_t seed, const std::string& name) {
  Rng rng(seed);
  const std::vector<std::string> three = {"lo", "mid", "hi"};
  auto values = [&](const std::string& type) { return type == "Boolean" ? kBool : three; };
  std::ostringstream os;
  os << "# random class\n\ntype LEVEL = {lo, mid, hi};\n\nclass " << name << " {\n";
  std::vector<std::pair<std::string, std::string>> avail;  // label, type
  const int ninputs = rng.uniform(1, 3);
  std::vector<std::pair<std::string, std::string>> inputs;
  for (int i = 1; i <= ninputs; ++i) {
    std::string type = rng.coin(0.5) ? "Boolean" : "LEVEL";
    inputs.emplace_back("I" + std::to_string(i), type);
    os << "  input I" << i << " : " << type << ";\n";
  }
  avail = inputs;
  const int nattrs = rng.uniform(2, 6);
  bool any_output = false;
  for (int a = 0; a < nattrs; ++a) {
    std::string type = rng.coin(0.6) ? "Boolean" : "LEVEL";
    bool output = rng.coin(0.5) || (a == nattrs - 1 && !any_output);
    any_output = any_output || output;
    std::vector<std::pair<std::string, std::string>> pool = avail;
    rng.shuffle(pool);
    int k = rng.uniform(0, std::min<int>(3, static_cast<int>(pool.size())));
    std::vector<std::vector<std::string>> slots;
    os << "  " << (output ? "output" : "private") << " A" << a << " : " << type;
    if (k > 0) {
      os << " (";
      for (int i = 0; i < k; ++i) {
        os << (i ? ", " : "") << "P" << i + 1 << " <- " << pool[i].first;
        slots.push_back(values(pool[i].second));
      }
      os << ")";
    }
    os << indent_rows(rng, slots, static_cast<int>(values(type).size())) << "\n";
    avail.emplace_back("A" + std::to_string(a), type);
  }
  os << "}\n\nsituation {\n";
  for (const auto& [label, type] : inputs) {
    os << "  private S" << label << " : " << type << indent_rows(rng, {}, static_cast<int>(values(type).size())) << "\n";
  }
  os << "  private X : " << name << " (";
  for (std::size_t i = 0; i < inputs.size(); ++i) os << (i ? ", " : "") << inputs[i].first << " <- S" << inputs[i].first;
  os << ");\n}\n";
  return os.str();
}

TypeLattice random_type_lattice(std::uint64_t seed) {
  Rng rng(seed);
  TypeLattice lat;
  const int base = rng.uniform(2, 5);
  auto make = [&](const std::string& name, int size) {
    std::vector<std::string> vals;
    for (int i = 0; i < size; ++i) vals.push_back("v" + std::to_string(i));
    lat.types.push_back(TypeDef::basic(name, vals));
    return lat.types.back();
  };
  for (int i = 0; i < base; ++i) make("T" + std::to_string(i), rng.uniform(2, 6));
  // Coarsen existing types; coarsened ones may be coarsened again.
  const int steps = rng.uniform(1, 6);
  for (int s = 0; s < steps; ++s) {
    TypeRef from = lat.types[rng.uniform(0, static_cast<int>(lat.types.size()) - 1)];
    if (from->size() < 2) continue;
    int size = rng.uniform(1, from->size() - 1);
    TypeRef to = make(from->name() + "c" + std::to_string(s), size);
    std::vector<int> image(from->size());
    std::vector<int> order(from->size());
    for (int i = 0; i < from->size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (int i = 0; i < from->size(); ++i) image[order[i]] = i < size ? i : rng.uniform(0, size - 1);
    lat.maps.add({from, to, image});
    // Occasionally a second, unrelated type coarsens onto the same target.
    if (rng.coin(0.3)) {
      TypeRef other = make("U" + std::to_string(s), size + rng.uniform(0, 2));
      std::vector<int> img(other->size());
      for (int i = 0; i < other->size(); ++i) img[i] = i < size ? i : rng.uniform(0, size - 1);
      lat.maps.add({other, to, img});
    }
  }
  return lat;
}

std::vector<TypeRef> random_structured_types(const TypeLattice& lattice, std::uint64_t seed, int count) {
  Rng rng(seed);
  const std::vector<std::string> labels = {"a", "b", "c", "d"};
  std::vector<TypeRef> out;
  std::function<TypeRef(int, int)> build = [&](int depth, int id) -> TypeRef {
    std::vector<std::string> pool = labels;
    rng.shuffle(pool);
    int n = rng.uniform(1, 3);
    std::vector<Field> fields;
    for (int i = 0; i < n; ++i) {
      TypeRef t;
      if (depth < 2 && rng.coin(0.25)) {
        t = build(depth + 1, id);
      } else {
        t = lattice.types[rng.uniform(0, static_cast<int>(lattice.types.size()) - 1)];
      }
      fields.push_back({pool[i], t});
    }
    return TypeDef::structured("S" + std::to_string(id) + "_" + std::to_string(depth), fields);
  };
  for (int i = 0; i < count; ++i) out.push_back(build(0, i));
  return out;
}

}  // namespace oobn::corpus
