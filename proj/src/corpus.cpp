#include "gforge/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <tuple>

#include "gforge/error.hpp"
#include "gforge/fsutil.hpp"
#include "gforge/utf8.hpp"

namespace gforge {

std::string_view category_label(Category c) noexcept {
  switch (c) {
    case Category::SpecificDisease: return "SpecificDisease";
    case Category::DiseaseClass: return "DiseaseClass";
    case Category::Modifier: return "Modifier";
    case Category::CompositeMention: return "CompositeMention";
  }
  return "SpecificDisease";
}

std::string_view category_display_name(Category c) noexcept {
  switch (c) {
    case Category::SpecificDisease: return "Specific Disease";
    case Category::DiseaseClass: return "Disease Class";
    case Category::Modifier: return "Modifier";
    case Category::CompositeMention: return "Composite Mention";
  }
  return "Specific Disease";
}

std::optional<Category> parse_category(std::string_view label) noexcept {
  for (const Category c : kAllCategories) {
    if (category_label(c) == label) return c;
  }
  return std::nullopt;
}

Document::Document(std::string doc_id, std::string title, std::string abstract)
    : doc_id_(std::move(doc_id)), title_(std::move(title)), abstract_(std::move(abstract)) {
  if (doc_id_.empty()) throw Error(Errc::InvalidArgument, "document id is empty");
  text_.reserve(title_.size() + 1 + abstract_.size());
  text_.append(title_).append(1, ' ').append(abstract_);
  if (!utf8::is_valid(text_)) throw Error(Errc::InvalidArgument, "document " + doc_id_ + " is not valid UTF-8");
  const bool ascii = std::all_of(text_.begin(), text_.end(), [](char c) { return (c & 0x80) == 0; });
  if (ascii) {
    length_ = text_.size();
  } else {
    offsets_ = utf8::scalar_offsets(text_);
    length_ = offsets_.size() - 1;
  }
}

std::size_t Document::byte_offset(std::size_t i) const {
  if (i > length_) throw Error(Errc::InvalidArgument, "offset " + std::to_string(i) + " beyond document " + doc_id_);
  return offsets_.empty() ? i : offsets_[i];
}

std::size_t Document::scalar_index(std::size_t byte) const {
  if (offsets_.empty()) return byte;
  const auto it = std::lower_bound(offsets_.begin(), offsets_.end(), byte);
  if (it == offsets_.end() || *it != byte) {
    throw Error(Errc::InvalidArgument, "byte offset " + std::to_string(byte) + " is not a character boundary");
  }
  return static_cast<std::size_t>(it - offsets_.begin());
}

std::string_view Document::slice(std::size_t start, std::size_t end) const {
  if (start > end || end > length_) {
    throw Error(Errc::InvalidArgument, "span [" + std::to_string(start) + "," + std::to_string(end) +
                                           ") outside document " + doc_id_ + " of length " +
                                           std::to_string(length_));
  }
  const std::size_t b0 = byte_offset(start);
  const std::size_t b1 = byte_offset(end);
  return std::string_view(text_).substr(b0, b1 - b0);
}

bool annotation_less(const Annotation& a, const Annotation& b) noexcept {
  return std::tie(a.start, a.end, a.category, a.mention, a.concept_id) <
         std::tie(b.start, b.end, b.category, b.mention, b.concept_id);
}

void check_annotation(const Document& doc, const Annotation& ann) {
  if (ann.start >= ann.end || ann.end > doc.length()) {
    throw Error(Errc::OffsetMismatch, "doc " + doc.doc_id() + ": span [" + std::to_string(ann.start) + "," +
                                          std::to_string(ann.end) + ") is empty or outside text of length " +
                                          std::to_string(doc.length()));
  }
  const std::string_view actual = doc.slice(ann.start, ann.end);
  if (actual != ann.mention) {
    throw Error(Errc::OffsetMismatch, "doc " + doc.doc_id() + ": span [" + std::to_string(ann.start) + "," +
                                          std::to_string(ann.end) + ") reads \"" + std::string(actual) +
                                          "\" but mention is \"" + ann.mention + "\"");
  }
}

void Corpus::add_document(Document doc) {
  if (index_.count(doc.doc_id()) != 0) throw Error(Errc::DuplicateDocument, "document " + doc.doc_id());
  index_.emplace(doc.doc_id(), documents_.size());
  documents_.push_back(std::move(doc));
  gold_.emplace_back();
}

void Corpus::add_annotation(Annotation ann) {
  const auto it = index_.find(ann.doc_id);
  if (it == index_.end()) throw Error(Errc::DocumentMismatch, "annotation references unknown document " + ann.doc_id);
  check_annotation(documents_[it->second], ann);
  auto& list = gold_[it->second];
  list.insert(std::upper_bound(list.begin(), list.end(), ann, annotation_less), std::move(ann));
}

const Document* Corpus::find(std::string_view doc_id) const {
  const auto it = index_.find(std::string(doc_id));
  return it == index_.end() ? nullptr : &documents_[it->second];
}

std::span<const Annotation> Corpus::gold(std::string_view doc_id) const {
  const auto it = index_.find(std::string(doc_id));
  if (it == index_.end()) return {};
  return gold_[it->second];
}

std::size_t Corpus::mention_count() const noexcept {
  std::size_t n = 0;
  for (const auto& list : gold_) n += list.size();
  return n;
}

void Corpus::merge(const Corpus& other) {
  for (std::size_t i = 0; i < other.documents_.size(); ++i) {
    add_document(other.documents_[i]);
    gold_.back() = other.gold_[i];
  }
}

namespace {

std::string line_error(std::size_t line_no, const std::string& what) {
  return "line " + std::to_string(line_no) + ": " + what;
}

std::size_t parse_offset(std::string_view field, std::size_t line_no) {
  std::size_t value = 0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last) {
    throw Error(Errc::MalformedLine, line_error(line_no, "bad offset \"" + std::string(field) + "\""));
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      return fields;
    }
    fields.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
}

// Recognizes "PMID|t|..." / "PMID|a|...". Returns the marker ('t' or 'a') or 0.
char text_line_kind(std::string_view line, std::string_view& pmid, std::string_view& content) {
  const std::size_t bar = line.find('|');
  if (bar == std::string_view::npos) return 0;
  if (line.substr(0, bar).find('\t') != std::string_view::npos) return 0;
  if (bar + 2 >= line.size() || line[bar + 2] != '|') return 0;
  const char kind = line[bar + 1];
  if (kind != 't' && kind != 'a') return 0;
  pmid = line.substr(0, bar);
  content = line.substr(bar + 3);
  return kind;
}

struct PendingDocument {
  std::string pmid;
  std::string title;
  std::optional<std::string> abstract;
  std::size_t title_line = 0;
};

}  // namespace

Corpus parse_pubtator(std::string_view text) {
  Corpus corpus;
  std::optional<PendingDocument> pending;
  bool committed = false;  // pending document already added to corpus

  auto commit = [&](std::size_t line_no) {
    if (!pending) return;
    if (!pending->abstract) {
      throw Error(Errc::MalformedLine, line_error(line_no, "document " + pending->pmid + " has no abstract line"));
    }
    if (!committed) {
      try {
        corpus.add_document(Document(pending->pmid, pending->title, *pending->abstract));
      } catch (const Error& e) {
        if (e.code() == Errc::DuplicateDocument) {
          throw Error(Errc::DuplicateDocument, line_error(pending->title_line, "document " + pending->pmid));
        }
        throw Error(Errc::MalformedLine, line_error(pending->title_line, e.detail()));
      }
      committed = true;
    }
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.empty()) {
      commit(line_no);
      pending.reset();
      committed = false;
      continue;
    }

    std::string_view pmid;
    std::string_view content;
    const char kind = text_line_kind(line, pmid, content);
    if (kind == 't') {
      commit(line_no);
      if (pmid.empty()) throw Error(Errc::MalformedLine, line_error(line_no, "empty document id"));
      pending = PendingDocument{std::string(pmid), std::string(content), std::nullopt, line_no};
      committed = false;
      continue;
    }
    if (kind == 'a') {
      if (!pending || pending->pmid != pmid || pending->abstract) {
        throw Error(Errc::MalformedLine, line_error(line_no, "abstract line without matching title line"));
      }
      pending->abstract = std::string(content);
      continue;
    }

    const auto fields = split(line, '\t');
    if (fields.size() != 5 && fields.size() != 6) {
      throw Error(Errc::MalformedLine,
                  line_error(line_no, "expected 5 or 6 tab-separated fields, got " + std::to_string(fields.size())));
    }
    if (!pending || fields[0] != pending->pmid) {
      throw Error(Errc::MalformedLine,
                  line_error(line_no, "annotation for " + std::string(fields[0]) + " outside its document block"));
    }
    commit(line_no);
    Annotation ann;
    ann.doc_id = std::string(fields[0]);
    ann.start = parse_offset(fields[1], line_no);
    ann.end = parse_offset(fields[2], line_no);
    ann.mention = std::string(fields[3]);
    const auto category = parse_category(fields[4]);
    if (!category) {
      throw Error(Errc::UnknownCategory, line_error(line_no, "unknown category \"" + std::string(fields[4]) + "\""));
    }
    ann.category = *category;
    if (fields.size() == 6 && !fields[5].empty()) ann.concept_id = std::string(fields[5]);
    try {
      corpus.add_annotation(std::move(ann));
    } catch (const Error& e) {
      throw Error(e.code() == Errc::InvalidArgument ? Errc::OffsetMismatch : e.code(), line_error(line_no, e.detail()));
    }
  }
  commit(line_no + 1);
  return corpus;
}

Corpus load_pubtator(const std::filesystem::path& path) {
  try {
    return parse_pubtator(fsutil::read_file(path));
  } catch (const Error& e) {
    if (e.code() == Errc::Io) throw;
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

Corpus load_pubtator(std::span<const std::filesystem::path> paths) {
  Corpus merged;
  for (const auto& path : paths) {
    const Corpus part = load_pubtator(path);
    try {
      merged.merge(part);
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ": " + e.detail());
    }
  }
  return merged;
}

std::string serialize_pubtator(const Corpus& corpus) {
  std::string out;
  for (const Document& doc : corpus.documents()) {
    out.append(doc.doc_id()).append("|t|").append(doc.title()).append(1, '\n');
    out.append(doc.doc_id()).append("|a|").append(doc.abstract()).append(1, '\n');
    for (const Annotation& a : corpus.gold(doc.doc_id())) {
      out.append(a.doc_id).append(1, '\t');
      out.append(std::to_string(a.start)).append(1, '\t');
      out.append(std::to_string(a.end)).append(1, '\t');
      out.append(a.mention).append(1, '\t');
      out.append(category_label(a.category));
      if (a.concept_id) out.append(1, '\t').append(*a.concept_id);
      out.append(1, '\n');
    }
    out.append(1, '\n');
  }
  return out;
}

namespace {

// Unbiased draw from [0, bound) by rejection; avoids the implementation-
// defined behaviour of std::uniform_int_distribution.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

}  // namespace

std::vector<std::size_t> batch_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

std::size_t batch_count(std::size_t corpus_size, std::size_t k) noexcept {
  if (k == 0) return 0;
  return (corpus_size + k - 1) / k;
}

std::vector<std::size_t> sample_batch_indices(std::size_t corpus_size, std::size_t k, std::uint64_t seed,
                                              std::size_t offset) {
  if (k == 0) throw Error(Errc::InvalidArgument, "batch size must be at least 1");
  if (offset >= batch_count(corpus_size, k)) {
    throw Error(Errc::BatchOutOfRange, "batch " + std::to_string(offset) + " with size " + std::to_string(k) +
                                           " exceeds corpus of " + std::to_string(corpus_size) + " documents");
  }
  const auto perm = batch_permutation(corpus_size, seed);
  const std::size_t first = offset * k;
  const std::size_t last = std::min(corpus_size, first + k);
  return {perm.begin() + static_cast<std::ptrdiff_t>(first), perm.begin() + static_cast<std::ptrdiff_t>(last)};
}

std::vector<Document> sample_batch(const Corpus& corpus, std::size_t k, std::uint64_t seed, std::size_t offset) {
  std::vector<Document> batch;
  for (const std::size_t i : sample_batch_indices(corpus.size(), k, seed, offset)) {
    batch.push_back(corpus.documents()[i]);
  }
  return batch;
}

}  // namespace gforge
