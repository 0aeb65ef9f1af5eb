#include "oobn/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "oobn/api_json.hpp"
#include "oobn/service.hpp"
#include "oobn/session.hpp"

namespace oobn {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot read " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::vector<std::string> read_lines(const std::string& path) {
  std::istringstream is(read_file(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(is, line);) lines.push_back(line);
  return lines;
}

EvidenceItem parse_assignment(const std::string& s) {
  auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("evidence must look like PATH=VALUE, got '" + s + "'");
  return {s.substr(0, eq), s.substr(eq + 1)};
}

void print_tree(const GroundModel& gm, const FlatBN& bn, std::ostream& out) {
  std::size_t width = 0;
  for (std::size_t i = 0; i < gm.objects.size(); ++i) width = std::max(width, gm.sigma_label(static_cast<int>(i)).size());
  for (const auto& o : gm.objects) {
    std::string sigma = gm.sigma_label(o.id);
    out << sigma << std::string(width - sigma.size() + 2, ' ') << std::string(2 * (o.sigma.size() - 1), ' ')
        << o.label << " : ";
    if (o.simple()) {
      out << bn.vars[bn.object_var[o.id]].type->name();
    } else {
      out << (o.container < 0 ? std::string("situation") : o.cls->name);
    }
    if (o.container >= 0 && !o.spec().output) out << "  (private)";
    out << '\n';
  }
}

void print_error(const Error& e, const std::string& file, std::ostream& err) {
  for (const auto& d : e.diagnostics()) err << d.format(file) << '\n';
}

int cmd_check(const std::string& file, std::ostream& out) {
  ModelRef m = compile_text(read_file(file));
  GroundModel gm = instantiate(*m);
  FlatBN bn = build_flat_bn(gm);
  print_tree(gm, bn, out);
  out << gm.objects.size() << " objects, " << bn.vars.size() << " variables, " << m->classes.size()
      << " classes\n";
  return kExitOk;
}

int cmd_flatten(const std::string& file, const std::string& format, std::ostream& out) {
  if (format != "bn-json") throw UsageError("unsupported format '" + format + "' (expected bn-json)");
  ModelRef m = compile_text(read_file(file));
  GroundModel gm = instantiate(*m);
  out << api::bn_json(build_flat_bn(gm)).dump(2) << '\n';
  return kExitOk;
}

int cmd_query(const std::string& file, const std::vector<std::string>& evidence,
              const std::vector<std::string>& targets, const std::string& engine, bool joint, bool stats,
              std::ostream& out) {
  if (targets.empty()) throw UsageError("at least one -q target is required");
  std::vector<EvidenceItem> ev;
  for (const auto& e : evidence) ev.push_back(parse_assignment(e));
  SessionOptions opts;
  opts.engine = parse_engine(engine);
  if (opts.engine == Engine::kMsbn) opts.cache = std::make_shared<ClassCache>();
  Session s(compile_text(read_file(file)), opts);
  if (joint) {
    out << api::query_table(s.query(targets, ev));
  } else {
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (i) out << '\n';
      out << api::query_table(s.query({targets[i]}, ev));
    }
  }
  if (stats) out << api::cost_json(s.cost_report()).dump(2) << '\n';
  return kExitOk;
}

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  for (std::string t; is >> t;) out.push_back(t);
  return out;
}

const char* kReplHelp =
    "commands:\n"
    "  query PATH... [given PATH=VALUE...]   posterior (joint over several targets)\n"
    "  assert PATH=VALUE                     add session evidence\n"
    "  retract PATH                          remove session evidence\n"
    "  evidence                              list session evidence\n"
    "  iconize PATH | deiconize PATH         refine an object\n"
    "  substitute PATH CLASS                 change the class of an object\n"
    "  compatible PATH                       classes SUBSTITUTE would accept\n"
    "  tree                                  print the object tree\n"
    "  stats                                 cost report (JSON)\n"
    "  log                                   session log (JSON lines)\n"
    "  quit\n";

int cmd_repl(const std::string& file, const std::string& engine, std::istream& in, std::ostream& out,
             std::ostream& err) {
  SessionOptions opts;
  opts.engine = parse_engine(engine);
  if (opts.engine == Engine::kMsbn) opts.cache = std::make_shared<ClassCache>();
  Session s(compile_text(read_file(file)), opts);
  out << "loaded " << file << " (" << s.bn().vars.size() << " variables); type 'help' for commands\n";
  for (std::string line; out << "> " << std::flush, std::getline(in, line);) {
    std::vector<std::string> t = tokens(line);
    if (t.empty()) continue;
    const std::string& cmd = t[0];
    try {
      if (cmd == "quit" || cmd == "exit") break;
      if (cmd == "help") {
        out << kReplHelp;
      } else if (cmd == "query" && t.size() >= 2) {
        std::vector<std::string> targets;
        std::vector<EvidenceItem> ev;
        bool given = false;
        for (std::size_t i = 1; i < t.size(); ++i) {
          if (t[i] == "given") {
            given = true;
          } else if (given) {
            ev.push_back(parse_assignment(t[i]));
          } else {
            targets.push_back(t[i]);
          }
        }
        out << api::query_table(s.query(targets, ev));
      } else if (cmd == "assert" && t.size() == 2) {
        EvidenceItem e = parse_assignment(t[1]);
        s.assert_evidence(e.path, e.value);
      } else if (cmd == "retract" && t.size() == 2) {
        s.retract_evidence(t[1]);
      } else if (cmd == "evidence") {
        for (const auto& e : s.evidence()) out << e.path << " = " << e.value << '\n';
      } else if ((cmd == "iconize" || cmd == "deiconize") && t.size() == 2) {
        RefinementOp op{cmd == "iconize" ? RefinementOp::Kind::kIconize : RefinementOp::Kind::kDeiconize, t[1], ""};
        out << api::locality_json(s.apply(op)).dump(2) << '\n';
      } else if (cmd == "substitute" && t.size() == 3) {
        out << api::locality_json(s.apply({RefinementOp::Kind::kSubstitute, t[1], t[2]})).dump(2) << '\n';
      } else if (cmd == "compatible" && t.size() == 2) {
        for (const auto& c : s.compatible_classes(t[1])) out << c << '\n';
      } else if (cmd == "tree") {
        print_tree(s.ground(), s.bn(), out);
      } else if (cmd == "stats") {
        out << api::cost_json(s.cost_report()).dump(2) << '\n';
      } else if (cmd == "log") {
        for (const auto& l : s.log()) out << l << '\n';
      } else {
        err << "unknown command or wrong arguments: " << line << " (try 'help')\n";
      }
    } catch (const Error& e) {
      print_error(e, file, err);
    } catch (const UsageError& e) {
      err << e.what() << '\n';
    }
  }
  return kExitOk;
}

int cmd_replay(const std::string& file, const std::string& log, std::ostream& out) {
  ModelRef m = compile_text(read_file(file));
  ReplayResult r = replay(m, read_lines(log), std::make_shared<ClassCache>());
  for (std::size_t i = 0; i < r.queries.size(); ++i) {
    if (i) out << '\n';
    out << api::query_table(r.queries[i]);
  }
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Object-oriented Bayesian network engine", "oobn"};
  app.require_subcommand(1);

  std::string file, log, format = "bn-json", engine = "msbn", host = "127.0.0.1";
  std::vector<std::string> evidence, targets;
  bool stats = false, joint = false;
  int port = 8080;

  auto* check = app.add_subcommand("check", "parse, type-check and unroll; print the object tree");
  check->add_option("FILE", file, "model file")->required();

  auto* flatten = app.add_subcommand("flatten", "print the flat Bayesian network");
  flatten->add_option("FILE", file, "model file")->required();
  flatten->add_option("--format", format, "output format")->check(CLI::IsMember({"bn-json"}));

  auto* query = app.add_subcommand("query", "posterior distributions");
  query->add_option("FILE", file, "model file")->required();
  query->add_option("-e,--evidence", evidence, "PATH=VALUE (repeatable)");
  query->add_option("-q,--query", targets, "target path (repeatable)");
  query->add_option("--engine", engine, "flat or msbn")->check(CLI::IsMember({"flat", "msbn"}));
  query->add_flag("--joint", joint, "one joint table over all targets");
  query->add_flag("--stats", stats, "print the cost report as JSON");

  auto* repl = app.add_subcommand("repl", "interactive session");
  repl->add_option("FILE", file, "model file")->required();
  repl->add_option("--engine", engine, "flat or msbn")->check(CLI::IsMember({"flat", "msbn"}));

  auto* rep = app.add_subcommand("replay", "replay a session log and print its query results");
  rep->add_option("FILE", file, "model file")->required();
  rep->add_option("LOG", log, "JSON-lines session log")->required();

  auto* serve = app.add_subcommand("serve", "HTTP JSON session service");
  serve->add_option("--port", port, "TCP port");
  serve->add_option("--host", host, "bind address");

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*check) return cmd_check(file, out);
    if (*flatten) return cmd_flatten(file, format, out);
    if (*query) return cmd_query(file, evidence, targets, engine, joint, stats, out);
    if (*repl) return cmd_repl(file, engine, in, out, err);
    if (*rep) return cmd_replay(file, log, out);
    if (*serve) {
      Service service;
      out << "listening on http://" << host << ":" << port << std::endl;
      if (run_http_server(service, host, port) != 0) {
        err << "cannot bind " << host << ":" << port << '\n';
        return kExitUsage;
      }
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    print_error(e, file, err);
    return kExitModelError;
  }
  return kExitUsage;
}

}  // namespace oobn
