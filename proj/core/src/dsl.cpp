#include "oobn/dsl.hpp"

#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

namespace oobn::dsl {

namespace {

enum class Tok {
  kName,    // bare word
  kNumber,  // numeric literal (also usable as a name)
  kString,  // quoted name
  kLBrace,
  kRBrace,
  kLParen,
  kRParen,
  kComma,
  kSemi,
  kColon,
  kEquals,
  kDot,
  kLArrow,    // <-
  kArrow,     // ->
  kFatArrow,  // =>
  kEnd,
};

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;
  SourcePos pos;
};

const std::set<std::string_view>& keywords() {
  static const std::set<std::string_view> k = {"type",    "struct",    "map",   "class",
                                               "extends", "situation", "input", "output",
                                               "private", "parents",   "default"};
  return k;
}

bool is_word_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
         c == '$' || c == '+' || c == '-';
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  // Returns false and fills `error` on a lexical error.
  bool run(std::vector<Token>& out, Diagnostic& error) {
    while (true) {
      skip_space();
      SourcePos pos{line_, col_};
      if (at_end()) {
        out.push_back({Tok::kEnd, "", pos});
        return true;
      }
      char c = peek();
      auto single = [&](Tok kind) {
        advance();
        out.push_back({kind, std::string(1, c), pos});
      };
      switch (c) {
        case '{': single(Tok::kLBrace); continue;
        case '}': single(Tok::kRBrace); continue;
        case '(': single(Tok::kLParen); continue;
        case ')': single(Tok::kRParen); continue;
        case ',': single(Tok::kComma); continue;
        case ';': single(Tok::kSemi); continue;
        case ':': single(Tok::kColon); continue;
        case '.': single(Tok::kDot); continue;
        default: break;
      }
      if (c == '<') {
        if (peek(1) != '-') return fail(error, pos, "expected '<-'");
        advance();
        advance();
        out.push_back({Tok::kLArrow, "<-", pos});
        continue;
      }
      if (c == '=') {
        advance();
        if (!at_end() && peek() == '>') {
          advance();
          out.push_back({Tok::kFatArrow, "=>", pos});
        } else {
          out.push_back({Tok::kEquals, "=", pos});
        }
        continue;
      }
      if (c == '-' && peek(1) == '>') {
        advance();
        advance();
        out.push_back({Tok::kArrow, "->", pos});
        continue;
      }
      if (c == '"') {
        std::string value;
        if (!lex_string(value, error, pos)) return false;
        out.push_back({Tok::kString, std::move(value), pos});
        continue;
      }
      if (is_word_start(c)) {
        out.push_back(lex_word(pos));
        continue;
      }
      std::string shown = (static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) >= 0x7f)
                              ? "byte 0x" + hex(static_cast<unsigned char>(c))
                              : std::string("'") + c + "'";
      return fail(error, pos, "unexpected character " + shown);
    }
  }

 private:
  static std::string hex(unsigned char c) {
    const char* digits = "0123456789abcdef";
    return {digits[c >> 4], digits[c & 15]};
  }

  bool at_end() const { return i_ >= text_.size(); }
  char peek(size_t ahead = 0) const { return i_ + ahead < text_.size() ? text_[i_ + ahead] : '\0'; }
  void advance() {
    if (text_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  bool fail(Diagnostic& error, SourcePos pos, std::string message) {
    error = {codes::kParse, std::move(message), pos.line, pos.column};
    return false;
  }

  void skip_space() {
    while (!at_end()) {
      char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '#' || (c == '/' && peek(1) == '/')) {
        while (!at_end() && peek() != '\n') advance();
      } else {
        break;
      }
    }
  }

  bool lex_string(std::string& value, Diagnostic& error, SourcePos pos) {
    advance();  // opening quote
    while (true) {
      if (at_end()) return fail(error, pos, "unterminated string");
      char c = peek();
      if (c == '"') {
        advance();
        return true;
      }
      if (c == '\n') return fail(error, pos, "newline in string");
      if (c == '\\') {
        advance();
        if (at_end()) return fail(error, pos, "unterminated string");
        char e = peek();
        if (e == 'n') {
          value.push_back('\n');
        } else if (e == '"' || e == '\\') {
          value.push_back(e);
        } else {
          return fail(error, SourcePos{line_, col_}, "unknown escape in string");
        }
        advance();
        continue;
      }
      value.push_back(c);
      advance();
    }
  }

  // Word continuation stops before "->" so that `a->b` lexes as three tokens.
  bool word_continues() const {
    if (at_end()) return false;
    char c = peek();
    if (c == '-' && peek(1) == '>') return false;
    return is_word_start(c);
  }

  Token lex_word(SourcePos pos) {
    size_t start = i_;
    if (is_digit(peek())) {
      // Try a numeric literal; fall back to a word if word characters follow.
      size_t j = i_;
      while (j < text_.size() && is_digit(text_[j])) ++j;
      if (j + 1 < text_.size() && text_[j] == '.' && is_digit(text_[j + 1])) {
        ++j;
        while (j < text_.size() && is_digit(text_[j])) ++j;
      }
      if (j < text_.size() && (text_[j] == 'e' || text_[j] == 'E')) {
        size_t k = j + 1;
        if (k < text_.size() && (text_[k] == '+' || text_[k] == '-')) ++k;
        if (k < text_.size() && is_digit(text_[k])) {
          while (k < text_.size() && is_digit(text_[k])) ++k;
          j = k;
        }
      }
      bool followed = j < text_.size() && is_word_start(text_[j]) &&
                      !(text_[j] == '-' && j + 1 < text_.size() && text_[j + 1] == '>');
      bool has_dot = text_.substr(i_, j - i_).find('.') != std::string_view::npos;
      if (!followed || has_dot) {
        while (i_ < j) advance();
        return {Tok::kNumber, std::string(text_.substr(start, j - start)), pos};
      }
    }
    while (word_continues()) advance();
    return {Tok::kName, std::string(text_.substr(start, i_ - start)), pos};
  }

  std::string_view text_;
  size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

class ParseFailure {};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  ModelSource parse() {
    ModelSource model;
    while (cur().kind != Tok::kEnd) {
      const Token& t = cur();
      if (t.kind == Tok::kName && t.text == "type") {
        model.types.push_back(parse_type());
      } else if (t.kind == Tok::kName && t.text == "map") {
        model.maps.push_back(parse_map());
      } else if (t.kind == Tok::kName && t.text == "class") {
        model.classes.push_back(parse_class(false));
      } else if (t.kind == Tok::kName && t.text == "situation") {
        SourcePos pos = t.pos;
        ClassDecl s = parse_class(true);
        if (model.situation) {
          semantic_.push_back({codes::kDuplicateName, "more than one situation declared", pos.line,
                               pos.column});
        } else {
          model.situation = std::move(s);
        }
      } else {
        error(t, "expected 'type', 'map', 'class' or 'situation'");
      }
    }
    return model;
  }

  Diagnostic failure;
  std::vector<Diagnostic> semantic_;

 private:
  const Token& cur() const { return tokens_[pos_]; }
  const Token& next() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }

  [[noreturn]] void error(const Token& t, const std::string& message) {
    std::string got = t.kind == Tok::kEnd ? "end of input" : "'" + t.text + "'";
    failure = {codes::kParse, message + ", got " + got, t.pos.line, t.pos.column};
    throw ParseFailure{};
  }

  void expect(Tok kind, const char* what) {
    if (cur().kind != kind) error(cur(), std::string("expected ") + what);
    next();
  }

  bool accept(Tok kind) {
    if (cur().kind != kind) return false;
    next();
    return true;
  }

  bool at_keyword(std::string_view kw) const {
    return cur().kind == Tok::kName && cur().text == kw;
  }

  // Any name token; keywords are rejected unless quoted.
  std::string name(const char* what) {
    const Token& t = cur();
    if (t.kind == Tok::kString || t.kind == Tok::kNumber ||
        (t.kind == Tok::kName && !keywords().count(t.text))) {
      next();
      return t.text;
    }
    error(t, std::string("expected ") + what);
  }

  double number() {
    const Token& t = cur();
    if (t.kind != Tok::kNumber) error(t, "expected probability");
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc() || ptr != t.text.data() + t.text.size() || !std::isfinite(v)) {
      error(t, "malformed number");
    }
    next();
    return v;
  }

  TypeDecl parse_type() {
    TypeDecl decl;
    decl.pos = cur().pos;
    next();  // type
    decl.name = name("type name");
    expect(Tok::kEquals, "'='");
    if (at_keyword("struct")) {
      next();
      decl.kind = TypeDecl::Kind::kStruct;
      expect(Tok::kLBrace, "'{'");
      do {
        std::string label = name("field label");
        expect(Tok::kColon, "':'");
        std::string type = name("field type");
        decl.fields.emplace_back(std::move(label), std::move(type));
      } while (accept(Tok::kComma));
      expect(Tok::kRBrace, "'}'");
    } else {
      decl.kind = TypeDecl::Kind::kEnum;
      expect(Tok::kLBrace, "'{' or 'struct'");
      do {
        decl.values.push_back(name("value"));
      } while (accept(Tok::kComma));
      expect(Tok::kRBrace, "'}'");
    }
    expect(Tok::kSemi, "';'");
    return decl;
  }

  MapDecl parse_map() {
    MapDecl decl;
    decl.pos = cur().pos;
    next();  // map
    decl.from = name("source type");
    expect(Tok::kArrow, "'->'");
    decl.to = name("target type");
    expect(Tok::kLBrace, "'{'");
    do {
      std::string a = name("value");
      expect(Tok::kFatArrow, "'=>'");
      std::string b = name("value");
      decl.pairs.emplace_back(std::move(a), std::move(b));
    } while (accept(Tok::kComma));
    expect(Tok::kRBrace, "'}'");
    expect(Tok::kSemi, "';'");
    return decl;
  }

  ClassDecl parse_class(bool situation) {
    ClassDecl decl;
    decl.pos = cur().pos;
    next();  // class / situation
    if (situation) {
      decl.name = cur().kind == Tok::kLBrace ? std::string("Situation") : name("situation name");
    } else {
      decl.name = name("class name");
      if (at_keyword("extends")) {
        next();
        decl.parent = name("parent class name");
      }
    }
    expect(Tok::kLBrace, "'{'");
    while (!accept(Tok::kRBrace)) decl.members.push_back(parse_member());
    return decl;
  }

  AttrDecl parse_member() {
    AttrDecl attr;
    attr.pos = cur().pos;
    if (at_keyword("input")) {
      attr.kind = AttrKind::kInput;
    } else if (at_keyword("output")) {
      attr.kind = AttrKind::kOutput;
    } else if (at_keyword("private")) {
      attr.kind = AttrKind::kPrivate;
    } else {
      error(cur(), "expected 'input', 'output', 'private' or '}'");
    }
    next();
    attr.label = name("attribute label");
    expect(Tok::kColon, "':'");
    attr.type = name("type or class name");
    if (attr.kind == AttrKind::kInput) {
      expect(Tok::kSemi, "';'");
      return attr;
    }
    if (accept(Tok::kLParen)) {
      attr.has_bindings = true;
      if (!accept(Tok::kRParen)) {
        do {
          attr.bindings.push_back(parse_binding());
        } while (accept(Tok::kComma));
        expect(Tok::kRParen, "')'");
      }
    }
    if (at_keyword("parents")) {
      next();
      expect(Tok::kLParen, "'('");
      do {
        attr.parents.push_back(name("parent label"));
      } while (accept(Tok::kComma));
      expect(Tok::kRParen, "')'");
    }
    if (accept(Tok::kLBrace)) {
      attr.has_cpt = true;
      while (!accept(Tok::kRBrace)) attr.rows.push_back(parse_row());
    } else {
      expect(Tok::kSemi, "';' or CPT block");
    }
    return attr;
  }

  Binding parse_binding() {
    Binding b;
    b.pos = cur().pos;
    b.slot = name("input slot");
    if (accept(Tok::kColon)) b.type = name("slot type");
    expect(Tok::kLArrow, "'<-'");
    b.chain.push_back(name("attribute"));
    while (accept(Tok::kDot)) b.chain.push_back(name("attribute"));
    return b;
  }

  CptRow parse_row() {
    CptRow row;
    row.pos = cur().pos;
    if (at_keyword("default")) {
      next();
      row.is_default = true;
    } else {
      expect(Tok::kLParen, "'(' or 'default'");
      if (!accept(Tok::kRParen)) {
        do {
          row.key.push_back(name("parent value"));
        } while (accept(Tok::kComma));
        expect(Tok::kRParen, "')'");
      }
    }
    expect(Tok::kColon, "':'");
    do {
      row.probs.push_back(number());
    } while (accept(Tok::kComma));
    expect(Tok::kSemi, "';'");
    return row;
  }

  std::vector<Token> tokens_;
  size_t pos_ = 0;
};

void check_names(const ModelSource& m, std::vector<Diagnostic>& out) {
  auto dup = [&](const SourcePos& pos, const std::string& what) {
    out.push_back({codes::kDuplicateName, what, pos.line, pos.column});
  };
  std::set<std::string> types{"Boolean"};
  for (const auto& t : m.types) {
    if (!types.insert(t.name).second) dup(t.pos, "type '" + t.name + "' declared twice");
    std::set<std::string> seen;
    for (const auto& v : t.values) {
      if (!seen.insert(v).second) dup(t.pos, "value '" + v + "' repeated in type '" + t.name + "'");
    }
    seen.clear();
    for (const auto& [label, _] : t.fields) {
      if (!seen.insert(label).second) {
        dup(t.pos, "field '" + label + "' repeated in type '" + t.name + "'");
      }
    }
  }
  std::set<std::pair<std::string, std::string>> maps;
  for (const auto& mp : m.maps) {
    if (!maps.insert({mp.from, mp.to}).second) {
      dup(mp.pos, "map " + mp.from + " -> " + mp.to + " declared twice");
    }
  }
  std::set<std::string> classes;
  auto check_class = [&](const ClassDecl& c) {
    std::set<std::string> labels;
    for (const auto& a : c.members) {
      if (!labels.insert(a.label).second) {
        dup(a.pos, "attribute '" + a.label + "' declared twice in '" + c.name + "'");
      }
      std::set<std::string> slots;
      for (const auto& b : a.bindings) {
        if (!slots.insert(b.slot).second) {
          dup(b.pos, "input slot '" + b.slot + "' bound twice on '" + a.label + "'");
        }
      }
    }
  };
  for (const auto& c : m.classes) {
    if (!classes.insert(c.name).second) dup(c.pos, "class '" + c.name + "' declared twice");
    check_class(c);
  }
  if (m.situation) check_class(*m.situation);
}

}  // namespace

const char* attr_kind_name(AttrKind kind) {
  switch (kind) {
    case AttrKind::kInput: return "input";
    case AttrKind::kOutput: return "output";
    case AttrKind::kPrivate: return "private";
  }
  return "?";
}

ParseResult parse_model(std::string_view text) {
  ParseResult result;
  std::vector<Token> tokens;
  Diagnostic lex_error;
  if (!Lexer(text).run(tokens, lex_error)) {
    result.diagnostics.push_back(std::move(lex_error));
    return result;
  }
  Parser parser(std::move(tokens));
  ModelSource model;
  try {
    model = parser.parse();
  } catch (const ParseFailure&) {
    result.diagnostics.push_back(parser.failure);
    return result;
  }
  result.diagnostics = std::move(parser.semantic_);
  check_names(model, result.diagnostics);
  if (!model.situation) {
    result.diagnostics.push_back({codes::kNoSituation, "model declares no situation", 0, 0});
  }
  if (result.diagnostics.empty()) result.model = std::move(model);
  return result;
}

ModelSource parse_model_or_throw(std::string_view text) {
  ParseResult r = parse_model(text);
  if (!r.ok()) throw Error(std::move(r.diagnostics));
  return std::move(*r.model);
}

std::string render_name(std::string_view name) {
  bool bare = !name.empty() && !keywords().count(name);
  if (bare) {
    std::vector<Token> tokens;
    Diagnostic ignored;
    bare = Lexer(name).run(tokens, ignored) && tokens.size() == 2 &&
           (tokens[0].kind == Tok::kName || tokens[0].kind == Tok::kNumber) &&
           tokens[0].text == name;
  }
  if (bare) return std::string(name);
  std::string out = "\"";
  for (char c : name) {
    if (c == '"' || c == '\\') {
      out.push_back('\\');
      out.push_back(c);
    } else if (c == '\n') {
      out += "\\n";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

std::string format_probability(double p) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, p);
  return std::string(buf, ptr);
}

std::string render_model(const ModelSource& model) {
  std::ostringstream os;
  auto join = [&](const auto& items, auto&& fn) {
    bool first = true;
    for (const auto& item : items) {
      if (!first) os << ", ";
      first = false;
      fn(item);
    }
  };
  for (const auto& t : model.types) {
    os << "type " << render_name(t.name) << " = ";
    if (t.kind == TypeDecl::Kind::kStruct) {
      os << "struct {";
      join(t.fields, [&](const auto& f) { os << render_name(f.first) << ": " << render_name(f.second); });
    } else {
      os << "{";
      join(t.values, [&](const auto& v) { os << render_name(v); });
    }
    os << "};\n";
  }
  if (!model.types.empty()) os << "\n";
  for (const auto& m : model.maps) {
    os << "map " << render_name(m.from) << " -> " << render_name(m.to) << " {";
    join(m.pairs, [&](const auto& p) { os << render_name(p.first) << " => " << render_name(p.second); });
    os << "};\n";
  }
  if (!model.maps.empty()) os << "\n";

  auto render_class = [&](const ClassDecl& c, bool situation) {
    if (situation) {
      os << "situation " << render_name(c.name) << " {\n";
    } else {
      os << "class " << render_name(c.name);
      if (!c.parent.empty()) os << " extends " << render_name(c.parent);
      os << " {\n";
    }
    for (const auto& a : c.members) {
      os << "  " << attr_kind_name(a.kind) << " " << render_name(a.label) << " : " << render_name(a.type);
      if (a.has_bindings) {
        os << " (";
        join(a.bindings, [&](const Binding& b) {
          os << render_name(b.slot);
          if (!b.type.empty()) os << ": " << render_name(b.type);
          os << " <- ";
          for (size_t i = 0; i < b.chain.size(); ++i) {
            if (i) os << ".";
            os << render_name(b.chain[i]);
          }
        });
        os << ")";
      }
      if (!a.parents.empty()) {
        os << " parents (";
        join(a.parents, [&](const auto& p) { os << render_name(p); });
        os << ")";
      }
      if (a.has_cpt) {
        os << " {\n";
        for (const auto& row : a.rows) {
          os << "    ";
          if (row.is_default) {
            os << "default";
          } else {
            os << "(";
            join(row.key, [&](const auto& v) { os << render_name(v); });
            os << ")";
          }
          os << " : ";
          join(row.probs, [&](double p) { os << format_probability(p); });
          os << ";\n";
        }
        os << "  }\n";
      } else {
        os << ";\n";
      }
    }
    os << "}\n";
  };
  for (const auto& c : model.classes) {
    render_class(c, false);
    os << "\n";
  }
  if (model.situation) render_class(*model.situation, true);
  return os.str();
}

}  // namespace oobn::dsl
