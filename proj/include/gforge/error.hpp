#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gforge {

// Every domain failure carries one of these codes so callers (CLI, HTTP
// service, Python bindings) can map it without parsing messages.
enum class Errc {
  MalformedLine,
  OffsetMismatch,
  UnknownCategory,
  DuplicateDocument,
  DocumentMismatch,
  BatchOutOfRange,
  MixedDocuments,
  EmptyBatch,
  DuplicateHeading,
  UnknownSection,
  EmptyRevision,
  NoOpRevision,
  UnknownVersion,
  CorruptVersion,
  EmptyDiscrepancies,
  Unparseable,
  CassetteMiss,
  AuthError,
  RateLimited,
  Timeout,
  BackendError,
  InvalidConfig,
  NotAwaitingReview,
  FailedRun,
  EmptyReport,
  UnknownRun,
  RunExists,
  RunLocked,
  InvalidArgument,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }
  // Message without the "<Code>: " prefix that what() carries.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace gforge
