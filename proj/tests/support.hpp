// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <csignal>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

extern char** environ;

namespace testing {

class TempDir {
 public:
  TempDir() {
    std::string templ = (std::filesystem::temp_directory_path() / "cv-test-XXXXXX").string();
    if (mkdtemp(templ.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = templ;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct ProcessResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

/// Current environment with `NAME=value` overrides applied.
inline std::vector<std::string> environment_with(const std::vector<std::string>& env_extra) {
  std::vector<std::string> env;
  for (char** e = environ; *e != nullptr; ++e) {
    const std::string entry = *e;
    bool overridden = false;
    for (const auto& extra : env_extra) {
      if (entry.substr(0, entry.find('=') + 1) == extra.substr(0, extra.find('=') + 1)) overridden = true;
    }
    if (!overridden) env.push_back(entry);
  }
  for (const auto& extra : env_extra) env.push_back(extra);
  return env;
}

/// Starts `argv` with stdout and stderr redirected to files. Returns the pid.
inline pid_t spawn_process(const std::vector<std::string>& argv, const std::filesystem::path& out_path,
                           const std::filesystem::path& err_path, const std::vector<std::string>& env_extra = {}) {
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, 1, out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_addopen(&actions, 2, err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);

  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);
  auto env_store = environment_with(env_extra);
  std::vector<char*> envp;
  for (auto& e : env_store) envp.push_back(e.data());
  envp.push_back(nullptr);

  pid_t pid = 0;
  const int rc = posix_spawn(&pid, args[0], &actions, nullptr, args.data(), envp.data());
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw std::runtime_error("cannot start " + argv[0]);
  return pid;
}

inline int wait_exit_code(pid_t pid) {
  int status = 0;
  while (waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) return -1;
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
}

/// Runs `argv` to completion with extra `NAME=value` environment entries.
inline ProcessResult run_process(const std::vector<std::string>& argv, const std::vector<std::string>& env_extra = {}) {
  TempDir io;
  const auto out_path = io / "out";
  const auto err_path = io / "err";
  const pid_t pid = spawn_process(argv, out_path, err_path, env_extra);
  ProcessResult result;
  result.exit_code = wait_exit_code(pid);
  result.out = read_text(out_path);
  result.err = read_text(err_path);
  return result;
}

/// Background process, terminated with SIGTERM when destroyed.
class Child {
 public:
  Child(const std::vector<std::string>& argv, const std::vector<std::string>& env_extra = {})
      : pid_(spawn_process(argv, io_ / "out", io_ / "err", env_extra)) {}
  ~Child() { stop(); }
  Child(const Child&) = delete;
  Child& operator=(const Child&) = delete;

  /// Returns the exit code.
  int stop() {
    if (pid_ > 0) {
      ::kill(pid_, SIGTERM);
      exit_code_ = wait_exit_code(pid_);
      pid_ = -1;
    }
    return exit_code_;
  }

  std::string out() const { return read_text(io_ / "out"); }
  std::string err() const { return read_text(io_ / "err"); }

 private:
  TempDir io_;
  pid_t pid_;
  int exit_code_ = -1;
};

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(CV_FIXTURE_DIR) / name; }

}  // namespace testing
