#include "vexploit/corpus.hpp"

#include <algorithm>
#include <cstdlib>
#include <toml.hpp>

#include "vexploit/static_analysis.hpp"
#include "vexploit/vex/parser.hpp"

namespace vexploit {

namespace fs = std::filesystem;

namespace {

toml::table parse_manifest(const fs::path& manifest) {
  if (!fs::is_regular_file(manifest)) throw CorpusError(manifest.string() + ": manifest not found");
  try {
    return toml::parse_file(manifest.string());
  } catch (const toml::parse_error& e) {
    throw CorpusError(manifest.string() + ": " + std::string(e.description()));
  }
}

std::string required_string(const toml::table& t, std::string_view key, const fs::path& where) {
  auto v = t[key].value<std::string>();
  if (!v || v->empty()) throw CorpusError(where.string() + ": missing string key '" + std::string(key) + "'");
  return *v;
}

std::vector<std::string> string_array(const toml::table& t, std::string_view key, const fs::path& where) {
  std::vector<std::string> out;
  const toml::node* node = t.get(key);
  if (!node) return out;
  const toml::array* arr = node->as_array();
  if (!arr) throw CorpusError(where.string() + ": '" + std::string(key) + "' must be an array of strings");
  for (const auto& item : *arr) {
    auto s = item.value<std::string>();
    if (!s) throw CorpusError(where.string() + ": '" + std::string(key) + "' must be an array of strings");
    out.push_back(*s);
  }
  return out;
}

void check_keys(const toml::table& t, std::initializer_list<std::string_view> allowed, const fs::path& where) {
  for (const auto& [k, v] : t) {
    bool ok = false;
    for (auto a : allowed) ok |= k.str() == a;
    if (!ok) throw CorpusError(where.string() + ": unknown key '" + std::string(k.str()) + "'");
  }
}

Value rebase(const Value& v, const std::string& root) {
  switch (v.kind()) {
    case ValueKind::File: {
      FileRef f = v.as_file();
      f.root = root;
      return Value::file(std::move(f));
    }
    case ValueKind::List: {
      List items;
      for (const auto& item : v.as_list()) items.push_back(rebase(item, root));
      return Value::list(std::move(items));
    }
    case ValueKind::Record: {
      Record fields;
      for (const auto& [k, item] : v.as_record()) fields.emplace_back(k, rebase(item, root));
      return Value::record(std::move(fields));
    }
    default: return v;
  }
}

std::vector<SourceUnit> library_sources(const Corpus& corpus, const std::string& lib) {
  fs::path dir = corpus.library_dir(lib);
  if (!fs::is_directory(dir)) throw CorpusError("unknown library '" + lib + "'");
  return load_sources(dir);
}

}  // namespace

VulnerabilityRecord load_vulnerability(const fs::path& manifest) {
  toml::table t = parse_manifest(manifest);
  check_keys(t,
             {"id", "library", "vulnerable_function", "exploit", "exploit_entry", "primary_index", "templates",
              "manual", "param_type", "notes", "trigger"},
             manifest);
  VulnerabilityRecord r;
  r.dir = fs::absolute(manifest).parent_path().lexically_normal();
  r.id = required_string(t, "id", manifest);
  r.library = required_string(t, "library", manifest);
  std::string fn = required_string(t, "vulnerable_function", manifest);
  auto q = QualifiedName::parse(fn);
  if (!q) throw CorpusError(manifest.string() + ": bad vulnerable_function '" + fn + "'");
  r.vulnerable_function = *q;
  r.exploit = r.dir / t["exploit"].value_or(std::string("exploit.vex"));
  if (!fs::is_regular_file(r.exploit)) throw CorpusError(manifest.string() + ": missing exploit file " + r.exploit.string());
  r.exploit_entry = t["exploit_entry"].value_or(std::string("main"));
  if (!is_identifier(r.exploit_entry)) throw CorpusError(manifest.string() + ": bad exploit_entry");
  auto pi = t["primary_index"].value_or(std::int64_t{0});
  if (pi < 0) throw CorpusError(manifest.string() + ": primary_index must be non-negative");
  r.primary_index = static_cast<std::size_t>(pi);
  r.templates = string_array(t, "templates", manifest);
  for (const auto& tpl : r.templates) {
    try {
      MigrationRule::make_template(tpl);
    } catch (const std::invalid_argument& e) {
      throw CorpusError(manifest.string() + ": " + e.what());
    }
  }
  r.manual = t["manual"].value_or(false);
  r.param_type = t["param_type"].value_or(std::string());
  r.notes = t["notes"].value_or(std::string());

  const toml::table* trig = t["trigger"].as_table();
  if (!trig) throw CorpusError(manifest.string() + ": missing [trigger] table");
  check_keys(*trig, {"kind", "sql_pattern", "oracle"}, manifest);
  std::string kind = required_string(*trig, "kind", manifest);
  auto k = trigger_kind_from_name(kind);
  if (!k) throw CorpusError(manifest.string() + ": unknown trigger kind '" + kind + "'");
  r.trigger.kind = *k;
  r.trigger.sql_pattern = (*trig)["sql_pattern"].value_or(std::string());
  if (const toml::table* oracle = (*trig)["oracle"].as_table()) {
    check_keys(*oracle, {"kind", "value"}, manifest);
    std::string ok = required_string(*oracle, "kind", manifest);
    auto okind = oracle_kind_from_name(ok);
    if (!okind) throw CorpusError(manifest.string() + ": unknown oracle kind '" + ok + "'");
    OracleSpec spec{*okind, Value()};
    if (*okind != OracleSpec::Kind::NoException) {
      std::string text = required_string(*oracle, "value", manifest);
      auto lit = parse_literal(text);
      if (!lit) throw CorpusError(manifest.string() + ": bad literal '" + text + "'");
      spec.literal = *lit;
    }
    r.trigger.oracle = spec;
  }
  if (std::string why = r.trigger.validate(); !why.empty()) throw CorpusError(manifest.string() + ": " + why);
  return r;
}

ProjectManifest load_project(const fs::path& manifest) {
  toml::table t = parse_manifest(manifest);
  check_keys(t, {"name", "dependencies", "expected", "notes"}, manifest);
  ProjectManifest p;
  p.dir = fs::absolute(manifest).parent_path().lexically_normal();
  p.name = required_string(t, "name", manifest);
  p.dependencies = string_array(t, "dependencies", manifest);
  p.notes = t["notes"].value_or(std::string());
  p.has_tests = fs::is_directory(p.dir / "tests");
  if (const toml::node* node = t.get("expected")) {
    const toml::array* arr = node->as_array();
    if (!arr) throw CorpusError(manifest.string() + ": 'expected' must be an array of tables");
    for (const auto& item : *arr) {
      const toml::table* e = item.as_table();
      if (!e) throw CorpusError(manifest.string() + ": 'expected' must be an array of tables");
      check_keys(*e, {"vuln", "exploitable", "reachable"}, manifest);
      Expectation x;
      x.vuln = required_string(*e, "vuln", manifest);
      x.exploitable = (*e)["exploitable"].value_or(false);
      x.reachable = (*e)["reachable"].value_or(x.exploitable);
      if (x.exploitable && !x.reachable) throw CorpusError(manifest.string() + ": exploitable implies reachable");
      p.expected.push_back(std::move(x));
    }
  }
  return p;
}

const VulnerabilityRecord& Corpus::vuln(const std::string& id) const {
  auto it = vulns.find(id);
  if (it == vulns.end()) throw CorpusError("unknown vulnerability '" + id + "'");
  return it->second;
}

const ProjectManifest& Corpus::project(const std::string& name) const {
  auto it = projects.find(name);
  if (it == projects.end()) throw CorpusError("unknown project '" + name + "'");
  return it->second;
}

const ProjectManifest* Corpus::find_project(const fs::path& name_or_dir) const {
  auto it = projects.find(name_or_dir.string());
  if (it != projects.end()) return &it->second;
  std::error_code ec;
  fs::path dir = fs::weakly_canonical(fs::absolute(name_or_dir), ec);
  for (const auto& [name, p] : projects) {
    if (fs::weakly_canonical(p.dir, ec) == dir) return &p;
  }
  return nullptr;
}

Corpus load_corpus(const fs::path& root, std::vector<Diagnostic>* diagnostics) {
  Corpus c;
  c.root = fs::absolute(root).lexically_normal();
  auto report = [&](const fs::path& where, const std::string& msg) {
    if (diagnostics) diagnostics->push_back({where.string(), {}, msg});
  };
  if (!fs::is_directory(c.root)) throw CorpusError("corpus root not found: " + c.root.string());
  auto sorted_dirs = [](const fs::path& dir) {
    std::vector<fs::path> out;
    if (fs::is_directory(dir)) {
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) out.push_back(e.path());
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  for (const auto& d : sorted_dirs(c.root / "libs")) c.libraries.push_back(d.filename().string());
  for (const auto& d : sorted_dirs(c.root / "vulns")) {
    try {
      auto v = load_vulnerability(d / "vuln.toml");
      if (v.id != d.filename().string()) throw CorpusError((d / "vuln.toml").string() + ": id must match directory name");
      c.vulns.emplace(v.id, std::move(v));
    } catch (const CorpusError& e) {
      report(d, e.what());
    }
  }
  for (const auto& d : sorted_dirs(c.root / "projects")) {
    try {
      auto p = load_project(d / "project.toml");
      if (p.name != d.filename().string()) {
        throw CorpusError((d / "project.toml").string() + ": name must match directory name");
      }
      c.projects.emplace(p.name, std::move(p));
    } catch (const CorpusError& e) {
      report(d, e.what());
    }
  }
  return c;
}

fs::path corpus_root(const fs::path& fallback) {
  if (const char* env = std::getenv("VEXPLOIT_CORPUS"); env && *env) return env;
  return fallback;
}

Program load_exploit_program(const Corpus& corpus, const VulnerabilityRecord& vuln) {
  std::vector<std::pair<SourceUnit, ModuleRole>> sources;
  sources.emplace_back(SourceUnit::from_file(vuln.exploit), ModuleRole::Script);
  for (auto& u : library_sources(corpus, vuln.library)) sources.emplace_back(std::move(u), ModuleRole::Library);
  return link_sources(sources);
}

Program load_project_program(const Corpus& corpus, const ProjectManifest& project) {
  std::vector<fs::path> libs;
  for (const auto& dep : project.dependencies) {
    if (!fs::is_directory(corpus.library_dir(dep))) {
      throw CorpusError(project.name + ": unknown library '" + dep + "'");
    }
    libs.push_back(corpus.library_dir(dep));
  }
  return resolve_project(project.dir, libs);
}

void stage_fixtures(const VulnerabilityRecord& vuln, const fs::path& sandbox) {
  fs::create_directories(sandbox);
  if (fs::is_directory(vuln.fixtures_dir())) {
    fs::copy(vuln.fixtures_dir(), sandbox / "fixtures",
             fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  }
}

Value rebase_files(const Value& v, const std::string& root) { return rebase(v, root); }

ExploitPayload extract_vuln_payload(const Corpus& corpus, const VulnerabilityRecord& vuln, const fs::path& sandbox,
                                    const Budgets& budgets) {
  stage_fixtures(vuln, sandbox);
  Program program = load_exploit_program(corpus, vuln);
  QualifiedName entry{program.modules().front().ast.name, vuln.exploit_entry};
  ExploitRun run = extract_payload(program, entry, vuln.vulnerable_function, budgets, sandbox, vuln.primary_index, vuln.id);
  std::string root = sandbox.lexically_normal().generic_string();
  for (auto& v : run.payload.values) v = rebase(v, root);
  return run.payload;
}

TriggerCheck replay_against_library(const Corpus& corpus, const VulnerabilityRecord& vuln,
                                    const ExploitPayload& payload, const fs::path& sandbox,
                                    std::string_view attacker_host, const Budgets& budgets) {
  Program program = load_exploit_program(corpus, vuln);
  ExploitPayload live = substitute_markers(payload, attacker_host);
  InstrumentOptions options;
  options.max_branch_records = 0;
  InstrumentedRun run = run_instrumented(program, TestCase{vuln.vulnerable_function, live.values},
                                         vuln.vulnerable_function, std::nullopt, budgets, sandbox, options);
  return detect_trigger(run, vuln.trigger, attacker_host);
}

std::vector<Diagnostic> validate_corpus(const fs::path& root, const fs::path& scratch) {
  std::vector<Diagnostic> diags;
  Corpus corpus;
  try {
    corpus = load_corpus(root, &diags);
  } catch (const CorpusError& e) {
    diags.push_back({root.string(), {}, e.what()});
    return diags;
  }
  fs::path work = scratch.empty() ? fs::temp_directory_path() / "vexploit-validate" : scratch;
  const std::string host = "attacker.local";

  for (const auto& [id, vuln] : corpus.vulns) {
    std::string where = (vuln.dir / "vuln.toml").string();
    fs::path sandbox = work / ("vuln__" + id);
    std::error_code ec;
    fs::remove_all(sandbox, ec);
    try {
      Program lib_check = load_exploit_program(corpus, vuln);
      if (!lib_check.find(vuln.vulnerable_function)) {
        diags.push_back({where, {}, "vulnerable function " + vuln.vulnerable_function.str() + " not found"});
        continue;
      }
      ExploitPayload payload = extract_vuln_payload(corpus, vuln, sandbox);
      TriggerCheck check = replay_against_library(corpus, vuln, payload, sandbox, host);
      if (!check.triggered) {
        diags.push_back({where, {}, "payload does not reproduce " + std::string(trigger_kind_name(vuln.trigger.kind)) +
                                        " against " + vuln.library});
      }
    } catch (const ExtractionError& e) {
      diags.push_back({where, {}, e.what()});
    } catch (const DiagnosticError& e) {
      for (const auto& d : e.diagnostics()) diags.push_back(d);
    } catch (const std::exception& e) {
      diags.push_back({where, {}, e.what()});
    }
    fs::remove_all(sandbox, ec);
  }

  for (const auto& [name, project] : corpus.projects) {
    std::string where = (project.dir / "project.toml").string();
    try {
      Program program = load_project_program(corpus, project);
      StaticCallGraph graph = build_call_graph(program);
      for (const auto& exp : project.expected) {
        auto it = corpus.vulns.find(exp.vuln);
        if (it == corpus.vulns.end()) {
          diags.push_back({where, {}, "expected entry names unknown vulnerability '" + exp.vuln + "'"});
          continue;
        }
        const auto& vuln = it->second;
        bool depends = std::find(project.dependencies.begin(), project.dependencies.end(), vuln.library) !=
                       project.dependencies.end();
        if (!depends) {
          diags.push_back({where, {}, "expects " + exp.vuln + " but does not depend on " + vuln.library});
          continue;
        }
        bool reachable = !discover_entries(program, graph, vuln.vulnerable_function).empty();
        if (reachable != exp.reachable) {
          diags.push_back({where, {}, std::string("declared ") + (exp.reachable ? "reachable" : "unreachable") +
                                          " but " + vuln.vulnerable_function.str() + " is " +
                                          (reachable ? "reachable" : "unreachable")});
        }
      }
    } catch (const DiagnosticError& e) {
      for (const auto& d : e.diagnostics()) diags.push_back(d);
    } catch (const std::exception& e) {
      diags.push_back({where, {}, e.what()});
    }
  }
  return diags;
}

}  // namespace vexploit
