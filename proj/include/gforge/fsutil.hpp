#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace gforge::fsutil {

std::string read_file(const std::filesystem::path& path);

// Write to a sibling temporary, fsync, then rename over the target so readers
// only ever observe the old or the new content.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Append one line (a trailing newline is added) and fsync.
void append_line(const std::filesystem::path& path, std::string_view line);

// Advisory exclusive lock (flock) on a file, released on destruction.
class FileLock {
 public:
  // Blocks for at most timeout_ms milliseconds; throws Error(RunLocked) on
  // timeout. A negative timeout blocks indefinitely.
  explicit FileLock(const std::filesystem::path& path, int timeout_ms = -1);
  ~FileLock();
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace gforge::fsutil
