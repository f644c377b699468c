#include "gforge/error.hpp"

namespace gforge {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedLine: return "MalformedLine";
    case Errc::OffsetMismatch: return "OffsetMismatch";
    case Errc::UnknownCategory: return "UnknownCategory";
    case Errc::DuplicateDocument: return "DuplicateDocument";
    case Errc::DocumentMismatch: return "DocumentMismatch";
    case Errc::BatchOutOfRange: return "BatchOutOfRange";
    case Errc::MixedDocuments: return "MixedDocuments";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::DuplicateHeading: return "DuplicateHeading";
    case Errc::UnknownSection: return "UnknownSection";
    case Errc::EmptyRevision: return "EmptyRevision";
    case Errc::NoOpRevision: return "NoOpRevision";
    case Errc::UnknownVersion: return "UnknownVersion";
    case Errc::CorruptVersion: return "CorruptVersion";
    case Errc::EmptyDiscrepancies: return "EmptyDiscrepancies";
    case Errc::Unparseable: return "Unparseable";
    case Errc::CassetteMiss: return "CassetteMiss";
    case Errc::AuthError: return "AuthError";
    case Errc::RateLimited: return "RateLimited";
    case Errc::Timeout: return "Timeout";
    case Errc::BackendError: return "BackendError";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::NotAwaitingReview: return "NotAwaitingReview";
    case Errc::FailedRun: return "FailedRun";
    case Errc::EmptyReport: return "EmptyReport";
    case Errc::UnknownRun: return "UnknownRun";
    case Errc::RunExists: return "RunExists";
    case Errc::RunLocked: return "RunLocked";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code), detail_(message) {}

}  // namespace gforge
