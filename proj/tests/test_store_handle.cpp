// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include "cv/error.hpp"
#include "cv/store_handle.hpp"
#include "support.hpp"

using namespace cv;
using testing::read_text;
using testing::TempDir;
using testing::write_text;

TEST_CASE("missing file reads as an empty store") {
  TempDir dir;
  StoreHandle h(dir / "none.ecf");
  CHECK(h.get().store->empty());
  const auto again = h.get();
  CHECK(again.store->empty());
  CHECK_FALSE(again.changed);
}

TEST_CASE("get re-parses only when the stamp changes") {
  TempDir dir;
  const auto file = dir / "a.ecf";
  write_text(file, "a = 1\n");
  StoreHandle h(file);
  auto r = h.get();
  CHECK(r.changed);
  CHECK(*r.store->lookup("a") == "1");
  CHECK(h.parse_count() == 1);

  r = h.get();
  CHECK_FALSE(r.changed);
  CHECK(h.parse_count() == 1);

  write_file_atomically(file, "a = 2\n");
  r = h.get();
  CHECK(r.changed);
  CHECK(*r.store->lookup("a") == "2");
  CHECK(h.parse_count() == 2);
}

TEST_CASE("same-size rewrites within one timestamp tick are still detected") {
  TempDir dir;
  const auto file = dir / "a.ecf";
  write_file_atomically(file, "a = 1\n");
  StoreHandle h(file);
  h.get();
  for (int i = 2; i < 10; ++i) {
    write_file_atomically(file, "a = " + std::to_string(i) + "\n");
    const auto r = h.get();
    CHECK(r.changed);
    CHECK(*r.store->lookup("a") == std::to_string(i));
  }
}

TEST_CASE("atomic writes keep mtime strictly increasing and preserve the mode") {
  TempDir dir;
  const auto file = dir / "a.ecf";
  write_text(file, "a = 1\n");
  ::chmod(file.c_str(), 0640);
  auto before = stat_file(file);
  for (int i = 0; i < 20; ++i) {
    write_file_atomically(file, "a = 1\n");
    const auto after = stat_file(file);
    CHECK(after.mtime_ns > before.mtime_ns);
    before = after;
  }
  struct stat st {};
  ::stat(file.c_str(), &st);
  CHECK((st.st_mode & 07777) == 0640);
}

TEST_CASE("set writes canonical text and a later get does not re-parse") {
  TempDir dir;
  const auto file = dir / "a.ecf";
  StoreHandle h(file);
  ConfigStore s = *h.get().store;
  s.set("greeting/german", "Guten Tag!");
  h.set(s);
  CHECK(read_text(file) == "greeting/german = Guten Tag!\n");
  const auto parses = h.parse_count();
  CHECK_FALSE(h.get().changed);
  CHECK(h.parse_count() == parses);
}

TEST_CASE("set merges with a concurrent change of a different key") {
  TempDir dir;
  const auto file = dir / "a.ecf";
  write_text(file, "a = 1\nb = 1\n");
  StoreHandle mine(file);
  StoreHandle other(file);
  ConfigStore s = *mine.get().store;
  ConfigStore t = *other.get().store;
  t.set("b", "2");
  other.set(t);
  s.set("a", "2");
  mine.set(s);
  const auto merged = parse_config(read_text(file));
  CHECK(*merged.lookup("a") == "2");
  CHECK(*merged.lookup("b") == "2");
  CHECK(*mine.last_loaded()->lookup("b") == "2");
}

TEST_CASE("a conflicting concurrent change leaves the file untouched") {
  TempDir dir;
  const auto file = dir / "a.ecf";
  write_text(file, "a = 1\n");
  StoreHandle mine(file);
  StoreHandle other(file);
  ConfigStore s = *mine.get().store;
  ConfigStore t = *other.get().store;
  t.set("a", "theirs");
  other.set(t);
  const std::string on_disk = read_text(file);
  s.set("a", "mine");
  try {
    mine.set(s);
    FAIL("expected a conflict");
  } catch (const ConflictError& e) {
    CHECK(e.keys() == std::vector<std::string>{"a"});
  }
  CHECK(read_text(file) == on_disk);
}

TEST_CASE("a handle that never loaded merges against an empty base") {
  TempDir dir;
  const auto file = dir / "a.ecf";
  write_text(file, "a = 1\n");
  StoreHandle h(file);
  ConfigStore s;
  s.set("b", "2");
  h.set(s);
  const auto merged = parse_config(read_text(file));
  CHECK(*merged.lookup("a") == "1");
  CHECK(*merged.lookup("b") == "2");
}

TEST_CASE("read-only files are refused with IoError") {
  TempDir dir;
  const auto file = dir / "a.ecf";
  write_text(file, "a = 1\n");
  ::chmod(file.c_str(), 0444);
  StoreHandle h(file);
  ConfigStore s = *h.get().store;
  s.set("a", "2");
  CHECK_THROWS_AS(h.set(s), IoError);
  CHECK(read_text(file) == "a = 1\n");
}

TEST_CASE("directory handles concatenate ecf files in name order and refuse writes") {
  TempDir dir;
  write_text(dir / "20-b.ecf", "b = 2\n");
  write_text(dir / "10-a.ecf", "[a]\na = 1\n");
  write_text(dir / "ignored.txt", "c = 3\n");
  StoreHandle h(dir.path());
  CHECK(h.is_directory());
  auto r = h.get();
  CHECK(r.changed);
  CHECK(serialize_config(*r.store) == "[a]\na = 1\nb = 2\n");
  CHECK_FALSE(h.get().changed);
  write_file_atomically(dir / "20-b.ecf", "b = 3\n");
  r = h.get();
  CHECK(r.changed);
  CHECK(*r.store->lookup("b") == "3");
  CHECK_THROWS_AS(h.set(*r.store), IoError);
}

TEST_CASE("parse errors from the file propagate") {
  TempDir dir;
  const auto file = dir / "a.ecf";
  write_text(file, "not a valid line\n");
  StoreHandle h(file);
  CHECK_THROWS_AS(h.get(), ParseError);
}

TEST_CASE("concurrent writers in separate processes never lose updates") {
  TempDir dir;
  const auto file = dir / "a.ecf";
  write_text(file, "");
  constexpr int kWriters = 4;
  constexpr int kWrites = 15;
  std::vector<pid_t> pids;
  for (int w = 0; w < kWriters; ++w) {
    const pid_t pid = ::fork();
    if (pid == 0) {
      int code = 0;
      try {
        StoreHandle h(file);
        for (int i = 0; i < kWrites; ++i) {
          ConfigStore s = *h.get().store;
          s.set("writer" + std::to_string(w) + "/n" + std::to_string(i), "1");
          h.set(s);
        }
      } catch (...) {
        code = 1;
      }
      ::_exit(code);
    }
    pids.push_back(pid);
  }
  for (pid_t pid : pids) {
    int status = 0;
    ::waitpid(pid, &status, 0);
    CHECK(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
  }
  const auto s = parse_config(read_text(file));
  CHECK(s.entry_count() == kWriters * kWrites);
}
