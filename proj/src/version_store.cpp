#include <algorithm>
#include <fstream>

#include "gforge/error.hpp"
#include "gforge/fsutil.hpp"
#include "gforge/guidelines.hpp"
#include "gforge/serialization.hpp"

namespace gforge {

using nlohmann::json;

namespace {

// Ids are hex digests; anything else cannot name a stored version (and must
// never reach the filesystem as a path component).
bool plausible_id(std::string_view id) {
  return id.size() == 64 && std::all_of(id.begin(), id.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

}  // namespace

VersionStore::VersionStore(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path VersionStore::version_path(std::string_view version_id) const {
  return root_ / "versions" / (std::string(version_id) + ".json");
}

void VersionStore::put(const GuidelineDoc& doc, const std::optional<Revision>& revision) {
  std::filesystem::create_directories(root_ / "versions");
  const auto path = version_path(doc.version_id());
  if (!std::filesystem::exists(path)) {
    json j = guideline_to_json(doc);
    j["revision"] = revision ? json(*revision) : json(nullptr);
    fsutil::write_file_atomic(path, j.dump(2) + "\n");
  }
  // The lineage line goes last; a crash in between is repaired by the next put.
  const auto known = lineage();
  const bool listed = std::any_of(known.begin(), known.end(),
                                  [&](const LineageEntry& e) { return e.version_id == doc.version_id(); });
  if (!listed) {
    json line{{"version_id", doc.version_id()},
              {"parent_version", doc.parent_version() ? json(*doc.parent_version()) : json(nullptr)}};
    fsutil::append_line(root_ / "lineage.jsonl", line.dump());
  }
}

bool VersionStore::contains(std::string_view version_id) const {
  return plausible_id(version_id) && std::filesystem::exists(version_path(version_id));
}

GuidelineDoc VersionStore::get(std::string_view version_id) const {
  if (!contains(version_id)) throw Error(Errc::UnknownVersion, "no guideline version " + std::string(version_id));
  try {
    const json j = json::parse(fsutil::read_file(version_path(version_id)));
    GuidelineDoc doc = guideline_from_json(j);
    if (doc.version_id() != version_id || j.at("version_id").get<std::string>() != version_id) {
      throw Error(Errc::CorruptVersion, "stored content of " + std::string(version_id) + " hashes to " +
                                            doc.version_id());
    }
    return doc;
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptVersion, "version " + std::string(version_id) + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::CorruptVersion) throw;
    throw Error(Errc::CorruptVersion, "version " + std::string(version_id) + ": " + e.detail());
  }
}

std::optional<Revision> VersionStore::revision_of(std::string_view version_id) const {
  get(version_id);
  try {
    const json j = json::parse(fsutil::read_file(version_path(version_id)));
    const auto it = j.find("revision");
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<Revision>();
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptVersion, "version " + std::string(version_id) + ": " + e.what());
  }
}

std::vector<LineageEntry> VersionStore::lineage() const {
  std::vector<LineageEntry> out;
  std::ifstream in(root_ / "lineage.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      continue;  // torn final line from an interrupted append
    }
    LineageEntry e;
    e.version_id = j.value("version_id", std::string());
    if (const auto p = j.find("parent_version"); p != j.end() && !p->is_null()) e.parent_version = p->get<std::string>();
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<std::string> VersionStore::ancestry(std::string_view version_id) const {
  std::vector<std::string> chain;
  std::optional<std::string> cur = std::string(version_id);
  while (cur) {
    if (std::find(chain.begin(), chain.end(), *cur) != chain.end()) {
      throw Error(Errc::CorruptVersion, "lineage cycle at " + *cur);
    }
    chain.push_back(*cur);
    cur = get(*cur).parent_version();
  }
  std::reverse(chain.begin(), chain.end());
  return chain;
}

}  // namespace gforge
