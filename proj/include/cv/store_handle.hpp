// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "cv/config_store.hpp"

namespace cv {

namespace notify {
class Transport;
}

/// Identity of a file's contents as seen by stat(2): modification time,
/// size and inode. Writers through StoreHandle keep mtime strictly
/// increasing, so two different writes never share a stamp.
struct FileStamp {
  bool exists = false;
  std::int64_t mtime_ns = 0;
  std::int64_t size = 0;
  std::uint64_t inode = 0;

  friend bool operator==(const FileStamp&, const FileStamp&) = default;
};

/// Stamp of a handle's target: one FileStamp per file (a single entry for
/// a plain file, one per `*.ecf` file for a directory).
using StoreStamp = std::vector<std::pair<std::string, FileStamp>>;

struct GetResult {
  StorePtr store;
  bool changed = false;
};

/// Access to one configuration file, or to a directory whose `*.ecf`
/// files are read as one concatenated text in name order.
///
/// Not thread-safe; each thread owns its handles. Handles on the same file
/// coordinate through the merge performed by set().
class StoreHandle {
 public:
  explicit StoreHandle(std::filesystem::path path);

  const std::filesystem::path& path() const noexcept { return path_; }
  bool is_directory() const;

  /// Re-parses only when the stamp differs from the last get/set.
  /// A missing file reads as an empty store.
  GetResult get();

  /// Writes `store` atomically. If the file changed since the last get/set
  /// the write is a three-way merge of (last loaded, `store`, on disk);
  /// ConflictError leaves the file untouched. Directory handles are read-only.
  void set(const ConfigStore& store);

  /// Store as of the most recent successful get() or set().
  const StorePtr& last_loaded() const noexcept { return last_loaded_; }

  /// Transport told about every successful set(). Publish failures never
  /// fail the write; the latest message is kept in last_notify_error().
  void set_transport(std::shared_ptr<notify::Transport> transport) { transport_ = std::move(transport); }
  const std::string& last_notify_error() const noexcept { return last_notify_error_; }

  /// Number of times get() or set() actually parsed file text.
  std::uint64_t parse_count() const noexcept { return parse_count_; }

 private:
  std::filesystem::path path_;
  StorePtr last_loaded_;
  StoreStamp last_stamp_;
  bool loaded_once_ = false;
  std::shared_ptr<notify::Transport> transport_;
  std::string last_notify_error_;
  std::uint64_t parse_count_ = 0;
};

/// Free-function spelling of StoreHandle::get / StoreHandle::set.
inline GetResult kdb_get(StoreHandle& handle) { return handle.get(); }
inline void kdb_set(StoreHandle& handle, const ConfigStore& store) { handle.set(store); }

/// Replaces `path` with `contents` via a temporary file and rename(2).
/// The new file's mtime is forced above the replaced file's mtime.
void write_file_atomically(const std::filesystem::path& path, std::string_view contents);

FileStamp stat_file(const std::filesystem::path& path);

}  // namespace cv
