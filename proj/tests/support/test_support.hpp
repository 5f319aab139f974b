#pragma once

#include <sys/socket.h>
#include <netinet/in.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <signal.h>
#include <sys/wait.h>

#include "msrag/corpus.hpp"

namespace msrag::testing {

inline const std::filesystem::path kSourceDir = MSRAG_SOURCE_DIR;
inline const std::string kCliPath = MSRAG_CLI_PATH;

/// Retriever over fixed (document, score) pairs, ranked by score then id.
class FixedRetriever final : public Retriever {
 public:
  explicit FixedRetriever(std::vector<Hit> hits, bool fail = false) : hits_(std::move(hits)), fail_(fail) {
    std::sort(hits_.begin(), hits_.end(), [](const Hit& a, const Hit& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.document.id < b.document.id;
    });
  }
  std::vector<Hit> lookup(std::string_view, std::size_t k) const override {
    if (fail_) throw std::runtime_error("retriever offline");
    return {hits_.begin(), hits_.begin() + static_cast<std::ptrdiff_t>(std::min(k, hits_.size()))};
  }
  std::size_t size() const override { return hits_.size(); }

 private:
  std::vector<Hit> hits_;
  bool fail_;
};

inline Document doc(std::string id, std::string source, std::string text) {
  return Document{std::move(id), std::move(source), std::nullopt, std::move(text)};
}

class TempDir {
 public:
  TempDir() {
    std::string pattern = (std::filesystem::temp_directory_path() / "msrag-test-XXXXXX").string();
    if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
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

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  return out + "'";
}

struct CommandResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

/// Runs the CLI with `args` (already quoted as needed) in `cwd`.
inline CommandResult run_cli(const std::string& args, const std::filesystem::path& cwd) {
  const auto out_path = cwd / ".stdout";
  const auto err_path = cwd / ".stderr";
  const std::string cmd = "cd " + shell_quote(cwd.string()) + " && " + shell_quote(kCliPath) + " " + args + " >" +
                          shell_quote(out_path.string()) + " 2>" + shell_quote(err_path.string());
  CommandResult r;
  const int status = std::system(cmd.c_str());
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out_path);
  r.err = read_file(err_path);
  return r;
}

/// A port that was free a moment ago.
inline int free_port() {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);
  ::close(fd);
  return port;
}

/// Starts the CLI in the background with stdout/stderr sent to files in `cwd`.
inline pid_t spawn_cli(const std::vector<std::string>& args, const std::filesystem::path& cwd) {
  const pid_t pid = ::fork();
  if (pid == 0) {
    if (::chdir(cwd.c_str()) != 0) _exit(127);
    std::FILE* out = std::freopen((cwd / ".serve.stdout").c_str(), "w", stdout);
    std::FILE* err = std::freopen((cwd / ".serve.stderr").c_str(), "w", stderr);
    (void)out;
    (void)err;
    std::vector<char*> argv{const_cast<char*>(kCliPath.c_str())};
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    ::execv(kCliPath.c_str(), argv.data());
    _exit(127);
  }
  return pid;
}

/// Sends SIGTERM and reaps the child; returns its exit code (-1 if killed).
inline int stop_process(pid_t pid) {
  ::kill(pid, SIGTERM);
  int status = 0;
  ::waitpid(pid, &status, 0);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Waits for a child to exit on its own; -2 on timeout.
inline int wait_process(pid_t pid, int timeout_ms) {
  for (int waited = 0; waited < timeout_ms; waited += 20) {
    int status = 0;
    if (::waitpid(pid, &status, WNOHANG) == pid) return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    ::usleep(20000);
  }
  return -2;
}

inline std::string data_path(const std::string& rel) { return (kSourceDir / "data" / rel).string(); }

}  // namespace msrag::testing
