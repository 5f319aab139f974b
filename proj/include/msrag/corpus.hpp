#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace msrag {

/// One retrievable text unit. `id` is unique within `source`.
struct Document {
  std::string id;
  std::string source;
  std::optional<std::string> title;
  std::string text;

  friend bool operator==(const Document&, const Document&) = default;
};

struct SourceProfile {
  std::string name;
  std::string description;
  std::size_t document_count = 0;
};

enum class CorpusFormat { json, csv };

std::optional<CorpusFormat> parse_corpus_format(std::string_view s);
/// Guesses the format from the file extension (.json / .csv).
std::optional<CorpusFormat> corpus_format_from_path(const std::filesystem::path& path);

/// Ingestion failure. `record()` is the 0-based data record the error refers to, when known.
class CorpusError : public std::runtime_error {
 public:
  enum class Kind { io, parse, missing_field, invalid_record, duplicate_id, duplicate_source, empty_corpus, unknown_source };

  CorpusError(Kind kind, std::string message, std::optional<std::size_t> record = std::nullopt,
              std::string field = {});

  Kind kind() const { return kind_; }
  const std::optional<std::size_t>& record() const { return record_; }
  const std::string& field() const { return field_; }

 private:
  Kind kind_;
  std::optional<std::size_t> record_;
  std::string field_;
};

struct Hit {
  Document document;
  double score = 0.0;
};

/// Top-k lookup over one source. Implementations are immutable after
/// construction and must be safe for concurrent `lookup` calls.
class Retriever {
 public:
  virtual ~Retriever() = default;
  /// At most `k` hits, descending score, ties by ascending document id.
  virtual std::vector<Hit> lookup(std::string_view query, std::size_t k) const = 0;
  virtual std::size_t size() const = 0;
};

/// Ordered (profile, retriever) pairs. The order is fixed at insertion and is
/// the order used by retrieval, capping tie-breaks and reports.
class SourceRegistry {
 public:
  struct Entry {
    SourceProfile profile;
    std::shared_ptr<const Retriever> retriever;
  };

  /// Throws CorpusError(duplicate_source) if the name is taken.
  void add(SourceProfile profile, std::shared_ptr<const Retriever> retriever);

  const std::vector<Entry>& entries() const { return entries_; }
  const Entry* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::vector<SourceProfile> profiles() const;
  std::vector<std::string> names() const;

  /// Registry restricted to `names`, keeping this registry's order.
  /// Throws CorpusError(unknown_source) naming the first unknown source.
  SourceRegistry subset(const std::vector<std::string>& names) const;

 private:
  std::vector<Entry> entries_;
};

/// Parses corpus content. Records without an id get `<source_name>-<record_index>`.
std::vector<Document> parse_corpus(std::string_view content, CorpusFormat format, std::string_view source_name);
std::vector<Document> load_corpus(const std::filesystem::path& path, CorpusFormat format, std::string_view source_name);

/// Builds the default lexical index over `documents` (non-empty).
std::shared_ptr<const Retriever> build_index(std::vector<Document> documents);

/// Loads, indexes and registers one corpus file.
SourceProfile ingest_corpus(SourceRegistry& registry, const std::filesystem::path& path, CorpusFormat format,
                            const std::string& source_name, const std::string& profile_text);

/// Same as ingest_corpus for content already in memory (uploads).
SourceProfile ingest_corpus_content(SourceRegistry& registry, std::string_view content, CorpusFormat format,
                                    const std::string& source_name, const std::string& profile_text);

/// One corpus entry of a preset or source manifest.
struct SourceSpec {
  std::string name;
  std::string profile;
  std::filesystem::path file;
  CorpusFormat format = CorpusFormat::json;
};

struct Preset {
  std::string name;
  std::string description;
  std::vector<SourceSpec> sources;
  std::optional<std::filesystem::path> dataset;
};

/// Reads `{"sources": [{"name","profile","file","format"?}, ...]}`. Relative
/// file paths resolve against the manifest's directory.
std::vector<SourceSpec> load_source_manifest(const std::filesystem::path& manifest);
void save_source_manifest(const std::filesystem::path& manifest, const std::vector<SourceSpec>& specs);

/// Reads `{"presets": {"<name>": {"description", "sources": [...], "dataset"?}}}`.
std::vector<Preset> load_presets(const std::filesystem::path& manifest);

/// Builds every source concurrently and registers them in `specs` order.
SourceRegistry build_registry(const std::vector<SourceSpec>& specs);

}  // namespace msrag
