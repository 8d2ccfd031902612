#pragma once

// Line-oriented child process: writes requests to its stdin and reads
// newline-terminated replies from its stdout. POSIX only.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <string>

#include "roadwarp/error.hpp"

namespace roadwarp {

class LineProcess {
 public:
  explicit LineProcess(const std::string& command) {
    // a dead child must surface as an error, not kill the caller
    static const bool sigpipe_ignored = (signal(SIGPIPE, SIG_IGN), true);
    (void)sigpipe_ignored;
    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0) throw PredictorExited("pipe: " + std::string(std::strerror(errno)));
    if (pipe(from_child) != 0) {
      close(to_child[0]);
      close(to_child[1]);
      throw PredictorExited("pipe: " + std::string(std::strerror(errno)));
    }
    pid_ = fork();
    if (pid_ < 0) throw PredictorExited("fork: " + std::string(std::strerror(errno)));
    if (pid_ == 0) {
      setpgid(0, 0);  // own group: the shell and whatever it starts die together
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    setpgid(pid_, pid_);
    close(to_child[0]);
    close(from_child[1]);
    in_fd_ = to_child[1];
    out_fd_ = from_child[0];
    fcntl(in_fd_, F_SETFD, FD_CLOEXEC);
    fcntl(in_fd_, F_SETFL, fcntl(in_fd_, F_GETFL) | O_NONBLOCK);
    fcntl(out_fd_, F_SETFD, FD_CLOEXEC);
  }

  LineProcess(const LineProcess&) = delete;
  LineProcess& operator=(const LineProcess&) = delete;

  ~LineProcess() {
    if (in_fd_ >= 0) close(in_fd_);
    if (out_fd_ >= 0) close(out_fd_);
    if (pid_ > 0) {
      int status = 0;
      // give a well-behaved child a moment to exit on EOF
      bool reaped = false;
      for (int i = 0; i < 20 && !reaped; ++i) {
        reaped = waitpid(pid_, &status, WNOHANG) == pid_;
        if (!reaped) usleep(5000);
      }
      kill(-pid_, SIGKILL);
      if (!reaped) waitpid(pid_, &status, 0);
    }
  }

  /// Sends one line (a '\n' is appended) and waits for one line back.
  std::string round_trip(const std::string& line, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    write_all(line + "\n", deadline);
    return read_line(deadline);
  }

 private:
  using Deadline = std::chrono::steady_clock::time_point;

  static int millis_left(Deadline deadline) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    return static_cast<int>(std::max<long long>(left.count(), 0));
  }

  void write_all(const std::string& data, Deadline deadline) {
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = write(in_fd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        if (errno == EAGAIN || errno == EWOULDBLOCK) {
          pollfd pfd{in_fd_, POLLOUT, 0};
          const int ms = millis_left(deadline);
          if (ms == 0 || poll(&pfd, 1, ms) == 0) throw PredictorTimeout("external predictor timed out");
          continue;
        }
        throw PredictorExited("external predictor closed its input (" + std::string(std::strerror(errno)) + ")");
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(Deadline deadline) {
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      const int ms = millis_left(deadline);
      if (ms == 0) throw PredictorTimeout("external predictor timed out");
      pollfd pfd{out_fd_, POLLIN, 0};
      const int r = poll(&pfd, 1, ms);
      if (r < 0) {
        if (errno == EINTR) continue;
        throw PredictorExited("poll: " + std::string(std::strerror(errno)));
      }
      if (r == 0) throw PredictorTimeout("external predictor timed out");
      char chunk[65536];
      const ssize_t n = read(out_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw PredictorExited("read: " + std::string(std::strerror(errno)));
      }
      if (n == 0) throw PredictorExited("external predictor exited before replying");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  pid_t pid_{-1};
  int in_fd_{-1};
  int out_fd_{-1};
  std::string buffer_;
};

}  // namespace roadwarp
