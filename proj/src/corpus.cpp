#include "msrag/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "msrag/bm25.hpp"
#include "msrag/text.hpp"

namespace msrag {

using nlohmann::json;

namespace {

std::string record_label(std::size_t record) { return "record " + std::to_string(record); }

// RFC 4180 style reader: quoted fields may hold commas, quotes ("") and newlines.
struct CsvRow {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the row starts
};

std::vector<CsvRow> read_csv(std::string_view content) {
  std::vector<CsvRow> rows;
  CsvRow row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;
  row.line = 1;

  auto end_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    bool blank = row.fields.size() == 1 && text::trim(row.fields[0]).empty();
    if (!blank) rows.push_back(std::move(row));
    row = CsvRow{};
    row.line = line;
  };

  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started || text::trim(field).empty()) {
          field.clear();
          quoted = true;
          field_started = true;
        } else {
          field.push_back(c);
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        ++line;
        end_row();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (quoted) throw CorpusError(CorpusError::Kind::parse, "unterminated quoted field starting before line " + std::to_string(line));
  if (field_started || !field.empty() || !row.fields.empty()) end_row();
  return rows;
}

std::vector<Document> parse_csv(std::string_view content, std::string_view source_name) {
  auto rows = read_csv(content);
  if (rows.empty()) throw CorpusError(CorpusError::Kind::empty_corpus, "empty corpus");

  std::map<std::string, std::size_t> columns;
  for (std::size_t i = 0; i < rows[0].fields.size(); ++i) {
    columns.emplace(text::to_lower(text::trim(rows[0].fields[i])), i);
  }
  if (!columns.contains("text")) {
    throw CorpusError(CorpusError::Kind::missing_field, "missing required column 'text'", std::nullopt, "text");
  }
  auto column = [&](const char* name) -> std::optional<std::size_t> {
    auto it = columns.find(name);
    return it == columns.end() ? std::nullopt : std::optional(it->second);
  };
  const auto text_col = *column("text");
  const auto id_col = column("id");
  const auto title_col = column("title");

  std::vector<Document> docs;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t record = r - 1;
    if (row.fields.size() != rows[0].fields.size()) {
      throw CorpusError(CorpusError::Kind::parse,
                        record_label(record) + " (line " + std::to_string(row.line) + "): expected " +
                            std::to_string(rows[0].fields.size()) + " fields, found " +
                            std::to_string(row.fields.size()),
                        record);
    }
    Document doc;
    doc.source = std::string(source_name);
    doc.text = row.fields[text_col];
    if (id_col) doc.id = std::string(text::trim(row.fields[*id_col]));
    if (title_col && !text::trim(row.fields[*title_col]).empty()) doc.title = row.fields[*title_col];
    if (doc.id.empty()) doc.id = std::string(source_name) + "-" + std::to_string(record);
    if (text::trim(doc.text).empty()) {
      throw CorpusError(CorpusError::Kind::invalid_record,
                        record_label(record) + " (line " + std::to_string(row.line) + "): empty 'text'", record,
                        "text");
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<Document> parse_json(std::string_view content, std::string_view source_name) {
  json root;
  try {
    root = json::parse(content);
  } catch (const json::parse_error& e) {
    throw CorpusError(CorpusError::Kind::parse, std::string("invalid JSON at byte ") + std::to_string(e.byte));
  }
  if (!root.is_array()) throw CorpusError(CorpusError::Kind::parse, "expected a JSON array of records");

  std::vector<Document> docs;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const auto& rec = root[i];
    if (!rec.is_object()) {
      throw CorpusError(CorpusError::Kind::invalid_record, record_label(i) + ": not an object", i);
    }
    Document doc;
    doc.source = std::string(source_name);
    auto text_it = rec.find("text");
    if (text_it == rec.end() || text_it->is_null()) {
      throw CorpusError(CorpusError::Kind::missing_field, record_label(i) + ": missing required field 'text'", i,
                        "text");
    }
    if (!text_it->is_string()) {
      throw CorpusError(CorpusError::Kind::invalid_record, record_label(i) + ": field 'text' must be a string", i,
                        "text");
    }
    doc.text = text_it->get<std::string>();
    if (text::trim(doc.text).empty()) {
      throw CorpusError(CorpusError::Kind::invalid_record, record_label(i) + ": empty 'text'", i, "text");
    }
    if (auto id = rec.find("id"); id != rec.end() && !id->is_null()) {
      if (id->is_string()) {
        doc.id = std::string(text::trim(id->get<std::string>()));
      } else if (id->is_number_integer() || id->is_number_unsigned()) {
        doc.id = id->dump();
      } else {
        throw CorpusError(CorpusError::Kind::invalid_record, record_label(i) + ": field 'id' must be a string", i,
                          "id");
      }
    }
    if (doc.id.empty()) doc.id = std::string(source_name) + "-" + std::to_string(i);
    if (auto title = rec.find("title"); title != rec.end() && title->is_string() &&
                                        !text::trim(title->get<std::string>()).empty()) {
      doc.title = title->get<std::string>();
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError(CorpusError::Kind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SourceSpec spec_from_json(const json& j, const std::filesystem::path& base) {
  SourceSpec spec;
  spec.name = j.at("name").get<std::string>();
  spec.profile = j.value("profile", std::string{});
  spec.file = j.at("file").get<std::string>();
  if (spec.file.is_relative()) spec.file = base / spec.file;
  if (auto f = j.find("format"); f != j.end()) {
    auto parsed = parse_corpus_format(f->get<std::string>());
    if (!parsed) throw CorpusError(CorpusError::Kind::parse, "unknown corpus format for source " + spec.name);
    spec.format = *parsed;
  } else {
    spec.format = corpus_format_from_path(spec.file).value_or(CorpusFormat::json);
  }
  return spec;
}

}  // namespace

CorpusError::CorpusError(Kind kind, std::string message, std::optional<std::size_t> record, std::string field)
    : std::runtime_error(std::move(message)), kind_(kind), record_(record), field_(std::move(field)) {}

std::optional<CorpusFormat> parse_corpus_format(std::string_view s) {
  auto lower = text::to_lower(text::trim(s));
  if (lower == "json") return CorpusFormat::json;
  if (lower == "csv") return CorpusFormat::csv;
  return std::nullopt;
}

std::optional<CorpusFormat> corpus_format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  if (ext.empty()) return std::nullopt;
  return parse_corpus_format(ext.substr(1));
}

void SourceRegistry::add(SourceProfile profile, std::shared_ptr<const Retriever> retriever) {
  if (contains(profile.name)) {
    throw CorpusError(CorpusError::Kind::duplicate_source, "duplicate source '" + profile.name + "'");
  }
  entries_.push_back({std::move(profile), std::move(retriever)});
}

const SourceRegistry::Entry* SourceRegistry::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.profile.name == name) return &e;
  }
  return nullptr;
}

std::vector<SourceProfile> SourceRegistry::profiles() const {
  std::vector<SourceProfile> out;
  for (const auto& e : entries_) out.push_back(e.profile);
  return out;
}

std::vector<std::string> SourceRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.profile.name);
  return out;
}

SourceRegistry SourceRegistry::subset(const std::vector<std::string>& names) const {
  for (const auto& n : names) {
    if (!contains(n)) throw CorpusError(CorpusError::Kind::unknown_source, "unknown source '" + n + "'", std::nullopt, n);
  }
  SourceRegistry out;
  for (const auto& e : entries_) {
    if (std::find(names.begin(), names.end(), e.profile.name) != names.end()) out.entries_.push_back(e);
  }
  return out;
}

std::vector<Document> parse_corpus(std::string_view content, CorpusFormat format, std::string_view source_name) {
  auto docs = format == CorpusFormat::json ? parse_json(content, source_name) : parse_csv(content, source_name);
  if (docs.empty()) throw CorpusError(CorpusError::Kind::empty_corpus, "empty corpus");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!seen.insert(docs[i].id).second) {
      throw CorpusError(CorpusError::Kind::duplicate_id, record_label(i) + ": duplicate id '" + docs[i].id + "'", i,
                        "id");
    }
  }
  return docs;
}

std::vector<Document> load_corpus(const std::filesystem::path& path, CorpusFormat format, std::string_view source_name) {
  return parse_corpus(read_file(path), format, source_name);
}

std::shared_ptr<const Retriever> build_index(std::vector<Document> documents) {
  return std::make_shared<Bm25Index>(std::move(documents));
}

SourceProfile ingest_corpus_content(SourceRegistry& registry, std::string_view content, CorpusFormat format,
                                    const std::string& source_name, const std::string& profile_text) {
  if (text::trim(source_name).empty()) throw CorpusError(CorpusError::Kind::invalid_record, "source name is empty");
  if (registry.contains(source_name)) {
    throw CorpusError(CorpusError::Kind::duplicate_source, "duplicate source '" + source_name + "'");
  }
  auto docs = parse_corpus(content, format, source_name);
  SourceProfile profile{source_name, profile_text, docs.size()};
  registry.add(profile, build_index(std::move(docs)));
  return profile;
}

SourceProfile ingest_corpus(SourceRegistry& registry, const std::filesystem::path& path, CorpusFormat format,
                            const std::string& source_name, const std::string& profile_text) {
  if (registry.contains(source_name)) {
    throw CorpusError(CorpusError::Kind::duplicate_source, "duplicate source '" + source_name + "'");
  }
  return ingest_corpus_content(registry, read_file(path), format, source_name, profile_text);
}

std::vector<SourceSpec> load_source_manifest(const std::filesystem::path& manifest) {
  json root;
  try {
    root = json::parse(read_file(manifest));
  } catch (const json::exception& e) {
    throw CorpusError(CorpusError::Kind::parse, manifest.string() + ": " + e.what());
  }
  std::vector<SourceSpec> specs;
  for (const auto& s : root.value("sources", json::array())) specs.push_back(spec_from_json(s, manifest.parent_path()));
  return specs;
}

void save_source_manifest(const std::filesystem::path& manifest, const std::vector<SourceSpec>& specs) {
  json sources = json::array();
  for (const auto& s : specs) {
    sources.push_back({{"name", s.name},
                       {"profile", s.profile},
                       {"file", std::filesystem::absolute(s.file).string()},
                       {"format", s.format == CorpusFormat::json ? "json" : "csv"}});
  }
  if (manifest.has_parent_path()) std::filesystem::create_directories(manifest.parent_path());
  std::ofstream out(manifest, std::ios::binary | std::ios::trunc);
  if (!out) throw CorpusError(CorpusError::Kind::io, "cannot write " + manifest.string());
  out << json{{"sources", sources}}.dump(2) << '\n';
}

std::vector<Preset> load_presets(const std::filesystem::path& manifest) {
  json root;
  try {
    root = json::parse(read_file(manifest));
  } catch (const json::exception& e) {
    throw CorpusError(CorpusError::Kind::parse, manifest.string() + ": " + e.what());
  }
  std::vector<Preset> presets;
  const auto base = manifest.parent_path();
  const auto entries = root.value("presets", json::object());
  for (const auto& [name, p] : entries.items()) {
    Preset preset;
    preset.name = name;
    preset.description = p.value("description", std::string{});
    for (const auto& s : p.value("sources", json::array())) preset.sources.push_back(spec_from_json(s, base));
    if (auto d = p.find("dataset"); d != p.end() && d->is_string()) {
      std::filesystem::path dataset = d->get<std::string>();
      preset.dataset = dataset.is_relative() ? base / dataset : dataset;
    }
    presets.push_back(std::move(preset));
  }
  return presets;
}

SourceRegistry build_registry(const std::vector<SourceSpec>& specs) {
  using Built = std::pair<std::size_t, std::shared_ptr<const Retriever>>;
  std::vector<std::future<Built>> builds;
  builds.reserve(specs.size());
  for (const auto& spec : specs) {
    builds.push_back(std::async(std::launch::async, [&spec] {
      auto docs = load_corpus(spec.file, spec.format, spec.name);
      const auto count = docs.size();
      return Built{count, build_index(std::move(docs))};
    }));
  }
  SourceRegistry registry;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto [count, index] = builds[i].get();
    registry.add(SourceProfile{specs[i].name, specs[i].profile, count}, std::move(index));
  }
  return registry;
}

}  // namespace msrag
