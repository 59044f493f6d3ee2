#pragma once

// Line-delimited JSON protocol to a simulator running as a child process.
//
//   child -> {"protocol": 1, "mode": "trajectory"|"mu", "dim": D, "predicates": [...]}
//   parent -> {"id": k, "w": [...]}
//   child -> {"id": k, "trajectory": {"t": [...], "channels": {name: [...]}}}
//         or {"id": k, "mu": {name: value}}
//
// One request is in flight at a time. Any protocol violation, child exit or
// timeout raises ProtocolError carrying the request id and the payload.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adtest/envs.hpp"
#include "adtest/errors.hpp"
#include "json.hpp"

namespace adtest {

enum class ExternalMode { trajectory, mu };

struct Handshake {
  int protocol = 1;
  ExternalMode mode = ExternalMode::trajectory;
  int dim = 0;
  std::vector<std::string> predicates;
};

/// Parses a trajectory payload and checks its invariants.
inline Trajectory trajectory_from_json(const nlohmann::json& j) {
  Trajectory traj;
  traj.time = j.at("t").get<std::vector<double>>();
  for (const auto& [name, values] : j.at("channels").items())
    traj.channels.emplace(name, values.get<std::vector<double>>());
  traj.validate();
  return traj;
}

inline nlohmann::json to_json(const Trajectory& traj) {
  nlohmann::json channels = nlohmann::json::object();
  for (const auto& [name, values] : traj.channels) channels[name] = values;
  return {{"t", traj.time}, {"channels", std::move(channels)}};
}

class ExternalSimulator final : public Environment {
 public:
  ExternalSimulator(std::vector<std::string> command,
                    std::chrono::milliseconds timeout = std::chrono::seconds(60))
      : timeout_(timeout) {
    if (command.empty()) throw std::invalid_argument("external simulator command is empty");
    start(command);
    try {
      read_handshake();
    } catch (...) {
      stop();
      throw;
    }
  }

  ExternalSimulator(const ExternalSimulator&) = delete;
  ExternalSimulator& operator=(const ExternalSimulator&) = delete;

  ~ExternalSimulator() override { stop(); }

  const Handshake& handshake() const noexcept { return handshake_; }
  pid_t pid() const noexcept { return pid_; }

  Outcome simulate(const Eigen::VectorXd& w) override {
    const long id = ++next_id_;
    if (handshake_.dim > 0 && w.size() != handshake_.dim)
      throw ProtocolError("simulator declared dimension " + std::to_string(handshake_.dim) + ", got " +
                              std::to_string(w.size()),
                          id);
    const nlohmann::json request = {{"id", id}, {"w", std::vector<double>(w.data(), w.data() + w.size())}};
    write_line(request.dump(), id);
    const std::string line = read_line(id);

    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError("malformed reply: " + excerpt(line), id);
    }
    if (!reply.is_object() || !reply.contains("id") || !reply["id"].is_number_integer())
      throw ProtocolError("reply without an integer id: " + excerpt(line), id);
    if (reply["id"].get<long>() != id)
      throw ProtocolError("reply id " + std::to_string(reply["id"].get<long>()) + " does not match: " +
                              excerpt(line),
                          id);
    Outcome out;
    try {
      if (handshake_.mode == ExternalMode::trajectory) {
        out.trajectory = trajectory_from_json(reply.at("trajectory"));
      } else {
        for (const auto& [name, value] : reply.at("mu").items()) {
          const double v = value.get<double>();
          if (!std::isfinite(v)) throw std::invalid_argument("non-finite value for '" + name + "'");
          out.reported.emplace(name, v);
        }
      }
    } catch (const ProtocolError&) {
      throw;
    } catch (const std::exception& e) {
      throw ProtocolError(std::string("invalid reply (") + e.what() + "): " + excerpt(line), id);
    }
    return out;
  }

 private:
  static std::string excerpt(const std::string& s) { return s.size() > 400 ? s.substr(0, 400) + "..." : s; }

  void start(const std::vector<std::string>& command) {
    // Writes to a dead child must surface as EPIPE, not kill the process.
    ::signal(SIGPIPE, SIG_IGN);
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw ProtocolError(std::string("pipe: ") + std::strerror(errno));
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw ProtocolError(std::string("pipe: ") + std::strerror(errno));
    }
    std::vector<char*> argv;
    for (const auto& s : command) argv.push_back(const_cast<char*>(s.c_str()));
    argv.push_back(nullptr);

    pid_ = ::fork();
    if (pid_ < 0) throw ProtocolError(std::string("fork: ") + std::strerror(errno));
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::execvp(argv[0], argv.data());
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    in_fd_ = to_child[1];
    out_fd_ = from_child[0];
  }

  void stop() noexcept {
    if (in_fd_ >= 0) ::close(in_fd_);
    in_fd_ = -1;
    if (pid_ > 0) {
      int status = 0;
      // Closing stdin asks the child to exit; give it a moment before killing.
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, &status, WNOHANG) == pid_) {
          pid_ = -1;
          break;
        }
        ::usleep(2000);
      }
      if (pid_ > 0) {
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
        pid_ = -1;
      }
    }
    if (out_fd_ >= 0) ::close(out_fd_);
    out_fd_ = -1;
  }

  void write_line(const std::string& payload, long id) {
    std::string data = payload + "\n";
    std::size_t written = 0;
    while (written < data.size()) {
      const ssize_t r = ::write(in_fd_, data.data() + written, data.size() - written);
      if (r < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("simulator input closed (") + std::strerror(errno) +
                                "), request was: " + excerpt(payload),
                            id);
      }
      written += static_cast<std::size_t>(r);
    }
  }

  std::string read_line(long id) {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    for (;;) {
      if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
        std::string line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto remaining =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (remaining.count() <= 0) throw ProtocolError("timed out waiting for the simulator", id);
      pollfd pfd{out_fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("poll: ") + std::strerror(errno), id);
      }
      if (ready == 0) continue;
      char chunk[4096];
      const ssize_t r = ::read(out_fd_, chunk, sizeof chunk);
      if (r < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("read: ") + std::strerror(errno), id);
      }
      if (r == 0) {
        throw ProtocolError(
            "simulator exited" + (buffer_.empty() ? std::string() : ", partial output: " + excerpt(buffer_)), id);
      }
      buffer_.append(chunk, static_cast<std::size_t>(r));
    }
  }

  void read_handshake() {
    const std::string line = read_line(-1);
    try {
      const auto j = nlohmann::json::parse(line);
      handshake_.protocol = j.at("protocol").get<int>();
      if (handshake_.protocol != 1)
        throw ProtocolError("unsupported protocol version " + std::to_string(handshake_.protocol));
      const auto mode = j.at("mode").get<std::string>();
      if (mode == "trajectory") {
        handshake_.mode = ExternalMode::trajectory;
      } else if (mode == "mu") {
        handshake_.mode = ExternalMode::mu;
      } else {
        throw ProtocolError("unknown mode '" + mode + "'");
      }
      handshake_.dim = j.at("dim").get<int>();
      if (j.contains("predicates")) handshake_.predicates = j["predicates"].get<std::vector<std::string>>();
    } catch (const ProtocolError&) {
      throw;
    } catch (const std::exception& e) {
      throw ProtocolError(std::string("bad handshake (") + e.what() + "): " + excerpt(line));
    }
  }

  std::chrono::milliseconds timeout_;
  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  std::string buffer_;
  long next_id_ = 0;
  Handshake handshake_;
};

}  // namespace adtest
