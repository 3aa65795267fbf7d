// SPDX-License-Identifier: Apache-2.0

#include "cv/store_handle.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstring>

#include "cv/error.hpp"
#include "cv/notify.hpp"

namespace fs = std::filesystem;

namespace cv {
namespace {

std::string errno_text(const std::string& what, const fs::path& path) {
  return what + " '" + path.string() + "': " + std::strerror(errno);
}

std::int64_t to_ns(const struct timespec& ts) {
  return static_cast<std::int64_t>(ts.tv_sec) * 1'000'000'000 + ts.tv_nsec;
}

FileStamp stamp_of(const struct stat& st) {
  return FileStamp{true, to_ns(st.st_mtim), static_cast<std::int64_t>(st.st_size), static_cast<std::uint64_t>(st.st_ino)};
}

class Fd {
 public:
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  int get() const noexcept { return fd_; }
  int release() noexcept { return std::exchange(fd_, -1); }

 private:
  int fd_;
};

/// Reads one file through a single descriptor so the stamp and the bytes
/// always describe the same inode.
std::pair<FileStamp, std::string> read_file(const fs::path& path) {
  Fd fd(::open(path.c_str(), O_RDONLY | O_CLOEXEC));
  if (fd.get() < 0) {
    if (errno == ENOENT) return {FileStamp{}, {}};
    throw IoError(errno_text("cannot open", path));
  }
  struct stat st {};
  if (::fstat(fd.get(), &st) != 0) throw IoError(errno_text("cannot stat", path));
  std::string data;
  data.resize(static_cast<std::size_t>(st.st_size));
  std::size_t off = 0;
  while (true) {
    if (off == data.size()) data.resize(data.size() + 4096);
    const ssize_t n = ::read(fd.get(), data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError(errno_text("cannot read", path));
    }
    if (n == 0) break;
    off += static_cast<std::size_t>(n);
  }
  data.resize(off);
  return {stamp_of(st), std::move(data)};
}

std::vector<fs::path> directory_files(const fs::path& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ecf") files.push_back(entry.path());
  }
  if (ec) throw IoError("cannot list '" + dir.string() + "': " + ec.message());
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename().string() < b.filename().string();
  });
  return files;
}

StoreStamp current_stamp(const fs::path& path, bool directory) {
  StoreStamp stamp;
  if (!directory) {
    stamp.emplace_back(path.filename().string(), stat_file(path));
    return stamp;
  }
  for (const auto& file : directory_files(path)) stamp.emplace_back(file.filename().string(), stat_file(file));
  return stamp;
}

std::pair<StoreStamp, std::string> read_target(const fs::path& path, bool directory) {
  StoreStamp stamp;
  if (!directory) {
    auto [st, text] = read_file(path);
    stamp.emplace_back(path.filename().string(), st);
    return {std::move(stamp), std::move(text)};
  }
  std::string text;
  for (const auto& file : directory_files(path)) {
    auto [st, part] = read_file(file);
    stamp.emplace_back(file.filename().string(), st);
    text += part;
    if (!part.empty() && part.back() != '\n') text += '\n';
  }
  return {std::move(stamp), std::move(text)};
}

/// Exclusive advisory lock on `<dir>/.<name>.lock` for read-merge-write.
class WriteLock {
 public:
  explicit WriteLock(const fs::path& target)
      : fd_(::open((target.parent_path() / ("." + target.filename().string() + ".lock")).c_str(),
                   O_RDWR | O_CREAT | O_CLOEXEC, 0644)) {
    if (fd_.get() < 0) throw IoError(errno_text("cannot create lock for", target));
    while (::flock(fd_.get(), LOCK_EX) != 0) {
      if (errno != EINTR) throw IoError(errno_text("cannot lock", target));
    }
  }
  ~WriteLock() { ::flock(fd_.get(), LOCK_UN); }

 private:
  Fd fd_;
};

}  // namespace

FileStamp stat_file(const fs::path& path) {
  struct stat st {};
  if (::stat(path.c_str(), &st) != 0) {
    if (errno == ENOENT) return FileStamp{};
    throw IoError(errno_text("cannot stat", path));
  }
  return stamp_of(st);
}

void write_file_atomically(const fs::path& path, std::string_view contents) {
  static std::atomic<unsigned> counter{0};
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");

  struct stat old {};
  const bool had_old = ::stat(path.c_str(), &old) == 0;
  if (had_old && (old.st_mode & 0222) == 0) {
    errno = EACCES;
    throw IoError(errno_text("read-only file", path));
  }

  const fs::path tmp = dir / ("." + path.filename().string() + ".tmp." + std::to_string(::getpid()) + "." +
                              std::to_string(counter.fetch_add(1)));
  Fd fd(::open(tmp.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, had_old ? (old.st_mode & 07777) : 0644));
  if (fd.get() < 0) throw IoError(errno_text("cannot create", tmp));

  auto fail = [&](const std::string& what) {
    const std::string msg = errno_text(what, tmp);
    ::unlink(tmp.c_str());
    throw IoError(msg);
  };

  std::size_t off = 0;
  while (off < contents.size()) {
    const ssize_t n = ::write(fd.get(), contents.data() + off, contents.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail("cannot write");
    }
    off += static_cast<std::size_t>(n);
  }
  if (had_old && ::fchmod(fd.get(), old.st_mode & 07777) != 0) fail("cannot chmod");

  if (had_old) {
    struct stat st {};
    if (::fstat(fd.get(), &st) != 0) fail("cannot stat");
    // Coarse filesystem clocks can give two quick writes the same mtime.
    if (to_ns(st.st_mtim) <= to_ns(old.st_mtim)) {
      const std::int64_t bumped = to_ns(old.st_mtim) + 1;
      const struct timespec times[2] = {{0, UTIME_OMIT}, {bumped / 1'000'000'000, bumped % 1'000'000'000}};
      if (::futimens(fd.get(), times) != 0) fail("cannot set mtime");
    }
  }
  if (::close(fd.release()) != 0) fail("cannot close");
  if (::rename(tmp.c_str(), path.c_str()) != 0) fail("cannot rename over " + path.string() + " from");
}

StoreHandle::StoreHandle(fs::path path) : path_(std::move(path)), last_loaded_(std::make_shared<ConfigStore>()) {}

bool StoreHandle::is_directory() const {
  std::error_code ec;
  return fs::is_directory(path_, ec);
}

GetResult StoreHandle::get() {
  const bool directory = is_directory();
  if (loaded_once_ && current_stamp(path_, directory) == last_stamp_) {
    return {last_loaded_, false};
  }
  auto [stamp, text] = read_target(path_, directory);
  ++parse_count_;
  auto store = std::make_shared<const ConfigStore>(parse_config(text));
  last_loaded_ = std::move(store);
  last_stamp_ = std::move(stamp);
  loaded_once_ = true;
  return {last_loaded_, true};
}

void StoreHandle::set(const ConfigStore& store) {
  if (is_directory()) {
    throw IoError("cannot write through directory handle '" + path_.string() + "'");
  }
  {
    WriteLock lock(path_);
    auto [disk_stamp, disk_text] = read_target(path_, false);
    ConfigStore to_write = store;
    if (loaded_once_ && disk_stamp != last_stamp_) {
      ++parse_count_;
      to_write = three_way_merge(*last_loaded_, store, parse_config(disk_text));
    } else if (!loaded_once_ && disk_stamp.front().second.exists) {
      // Never read: everything on disk counts as a concurrent change.
      ++parse_count_;
      to_write = three_way_merge(ConfigStore{}, store, parse_config(disk_text));
    }
    const std::string text = serialize_config(to_write);
    write_file_atomically(path_, text);
    last_stamp_ = current_stamp(path_, false);
    last_loaded_ = std::make_shared<const ConfigStore>(std::move(to_write));
    loaded_once_ = true;
  }
  if (transport_) {
    try {
      transport_->publish(notify::ChangeEvent::next(path_.string()));
      last_notify_error_.clear();
    } catch (const std::exception& e) {
      last_notify_error_ = e.what();
    }
  }
}

}  // namespace cv
