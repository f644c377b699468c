#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gforge {

// The four NCBI Disease annotation categories. Enumerator order is the sort
// order used for gold lists.
enum class Category : std::uint8_t {
  SpecificDisease,
  DiseaseClass,
  Modifier,
  CompositeMention,
};

inline constexpr std::size_t kCategoryCount = 4;
inline constexpr Category kAllCategories[kCategoryCount] = {
    Category::SpecificDisease, Category::DiseaseClass, Category::Modifier, Category::CompositeMention};

// Wire label, e.g. "SpecificDisease".
std::string_view category_label(Category c) noexcept;
// Human-readable name, e.g. "Specific Disease".
std::string_view category_display_name(Category c) noexcept;
// Case-sensitive; nullopt for anything but the four wire labels.
std::optional<Category> parse_category(std::string_view label) noexcept;

// One abstract. text() is title + ' ' + abstract and is the frame every
// annotation offset refers to. Offsets count Unicode scalar values.
class Document {
 public:
  Document(std::string doc_id, std::string title, std::string abstract);

  const std::string& doc_id() const noexcept { return doc_id_; }
  const std::string& title() const noexcept { return title_; }
  const std::string& abstract() const noexcept { return abstract_; }
  const std::string& text() const noexcept { return text_; }

  std::size_t length() const noexcept { return length_; }
  // Byte offset of scalar index i (i may equal length()).
  std::size_t byte_offset(std::size_t scalar_index) const;
  // Inverse of byte_offset; byte must sit on a scalar boundary.
  std::size_t scalar_index(std::size_t byte) const;
  // Text between two scalar offsets; throws InvalidArgument when out of range.
  std::string_view slice(std::size_t start, std::size_t end) const;

  friend bool operator==(const Document& a, const Document& b) {
    return a.doc_id_ == b.doc_id_ && a.title_ == b.title_ && a.abstract_ == b.abstract_;
  }

 private:
  std::string doc_id_;
  std::string title_;
  std::string abstract_;
  std::string text_;
  std::size_t length_ = 0;
  // Empty when text_ is pure ASCII (scalar index == byte offset).
  std::vector<std::size_t> offsets_;
};

struct Annotation {
  std::string doc_id;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string mention;
  Category category = Category::SpecificDisease;
  std::optional<std::string> concept_id;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

// Orders by (start, end, category), then mention and concept id so that the
// order is total.
bool annotation_less(const Annotation& a, const Annotation& b) noexcept;

// Throws OffsetMismatch (or InvalidArgument for an out-of-range span) when
// the annotation's span does not read exactly its mention in doc.
void check_annotation(const Document& doc, const Annotation& ann);

class Corpus {
 public:
  // Throws DuplicateDocument.
  void add_document(Document doc);
  // Validates against the referenced document and keeps the gold list sorted.
  // Throws DocumentMismatch for an unknown doc_id, OffsetMismatch on a bad slice.
  void add_annotation(Annotation ann);

  const std::vector<Document>& documents() const noexcept { return documents_; }
  std::size_t size() const noexcept { return documents_.size(); }
  bool empty() const noexcept { return documents_.empty(); }
  const Document* find(std::string_view doc_id) const;
  std::span<const Annotation> gold(std::string_view doc_id) const;
  std::size_t mention_count() const noexcept;

  // Appends another corpus (e.g. a second split). Throws DuplicateDocument.
  void merge(const Corpus& other);

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.documents_ == b.documents_ && a.gold_ == b.gold_;
  }

 private:
  std::vector<Document> documents_;
  std::vector<std::vector<Annotation>> gold_;
  std::unordered_map<std::string, std::size_t> index_;
};

// PubTator: "PMID|t|title", "PMID|a|abstract", then tab-separated
// "PMID start end mention category [concept_id]" lines; blank line between
// documents. Throws MalformedLine, OffsetMismatch, UnknownCategory,
// DuplicateDocument; messages carry the 1-based line number.
Corpus parse_pubtator(std::string_view text);
Corpus load_pubtator(const std::filesystem::path& path);
// Loads and merges several files in order (e.g. train/dev/test splits).
Corpus load_pubtator(std::span<const std::filesystem::path> paths);

std::string serialize_pubtator(const Corpus& corpus);

// Seeded Fisher-Yates permutation of [0, n) over std::mt19937_64. Stable
// across platforms and standard library implementations.
std::vector<std::size_t> batch_permutation(std::size_t n, std::uint64_t seed);
std::size_t batch_count(std::size_t corpus_size, std::size_t k) noexcept;
// Indices (into corpus.documents()) of batch `offset`. Throws
// InvalidArgument for k == 0 and BatchOutOfRange when offset * k >= size.
std::vector<std::size_t> sample_batch_indices(std::size_t corpus_size, std::size_t k, std::uint64_t seed,
                                              std::size_t offset);
std::vector<Document> sample_batch(const Corpus& corpus, std::size_t k, std::uint64_t seed, std::size_t offset);

}  // namespace gforge
