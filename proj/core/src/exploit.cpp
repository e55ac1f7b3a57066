#include "vexploit/exploit.hpp"

#include <fstream>
#include <thread>

namespace vexploit {

namespace {

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

char hex_digit(unsigned v) { return "0123456789abcdef"[v & 0xF]; }

}  // namespace

ExploitRun extract_payload(const Program& exploit_program, const QualifiedName& entry, const QualifiedName& vulnerable,
                           const Budgets& budgets, const std::filesystem::path& sandbox_root, std::size_t primary_index,
                           std::string source) {
  const FunctionDecl* fn = exploit_program.find(entry);
  if (!fn) throw ExtractionError("exploit entry " + entry.str() + " not found");
  if (!fn->params.empty()) throw ExtractionError("exploit entry " + entry.str() + " must take no arguments");
  if (!exploit_program.find(vulnerable)) throw ExtractionError("vulnerable function " + vulnerable.str() + " not found");

  ExploitRun out;
  out.run = run_instrumented(exploit_program, TestCase{entry, {}}, vulnerable, std::nullopt, budgets, sandbox_root);
  if (!out.run.dyn_graph) {
    std::string why = out.run.outcome.kind == OutcomeKind::Returned
                          ? std::string("exploit returned")
                          : std::string(outcome_kind_name(out.run.outcome.kind)) +
                                (out.run.outcome.message.empty() ? "" : ": " + out.run.outcome.message);
    throw ExtractionError("payload not capturable: " + vulnerable.str() + " never reached (" + why + ")");
  }
  out.payload.values = out.run.dyn_graph->capture_args;
  if (primary_index >= out.payload.values.size()) {
    throw ExtractionError("primary_index " + std::to_string(primary_index) + " out of range for " + vulnerable.str());
  }
  out.payload.primary_index = primary_index;
  out.payload.source = std::move(source);
  return out;
}

FileRef materialize_content(const std::filesystem::path& root, std::string_view content) {
  std::uint64_t h = fnv1a(content);
  std::string name = "materialized/";
  for (int shift = 60; shift >= 0; shift -= 4) name += hex_digit(static_cast<unsigned>(h >> shift));
  name += ".dat";
  std::filesystem::path full = root / name;
  std::error_code ec;
  if (!std::filesystem::exists(full, ec) || std::filesystem::file_size(full, ec) != content.size()) {
    std::filesystem::create_directories(full.parent_path());
    // Write to a private temp name first so concurrent writers never expose a partial file.
    std::filesystem::path tmp = full;
    tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
      std::ofstream out(tmp, std::ios::binary);
      out.write(content.data(), static_cast<std::streamsize>(content.size()));
      if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, full);
  }
  return FileRef{root.lexically_normal().generic_string(), name};
}

Value substitute_markers(const Value& value, std::string_view host) {
  switch (value.kind()) {
    case ValueKind::Str:
      if (value.as_str().find(kAttackerMarker) == std::string::npos) return value;
      return Value::string(replace_all(value.as_str(), kAttackerMarker, host));
    case ValueKind::List: {
      List items;
      items.reserve(value.as_list().size());
      for (const auto& v : value.as_list()) items.push_back(substitute_markers(v, host));
      return Value::list(std::move(items));
    }
    case ValueKind::Record: {
      Record fields;
      fields.reserve(value.as_record().size());
      for (const auto& [k, v] : value.as_record()) fields.emplace_back(k, substitute_markers(v, host));
      return Value::record(std::move(fields));
    }
    case ValueKind::File: {
      std::string content = value.as_file().read();
      if (content.find(kAttackerMarker) == std::string::npos) return value;
      return Value::file(materialize_content(value.as_file().root, replace_all(content, kAttackerMarker, host)));
    }
    default:
      return value;
  }
}

ExploitPayload substitute_markers(const ExploitPayload& payload, std::string_view host) {
  ExploitPayload out = payload;
  for (auto& v : out.values) v = substitute_markers(v, host);
  return out;
}

}  // namespace vexploit
