#include "eblime/blackbox.hpp"
#include "eblime/errors.hpp"

#include "json.hpp"

#include <csignal>
#include <cerrno>
#include <cstring>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

namespace eblime::blackbox {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxLoggedPayload = 512;

std::string truncate(const std::string& s) {
  if (s.size() <= kMaxLoggedPayload) return s;
  return s.substr(0, kMaxLoggedPayload) + "...";
}

}  // namespace

ExternalModel::ExternalModel(std::string command, std::size_t input_size)
    : command_(std::move(command)), input_size_(input_size) {
  if (command_.empty()) throw InvalidInput("exec: model needs a command");
  // A dead adapter must surface as EPIPE, not kill the client.
  std::signal(SIGPIPE, SIG_IGN);

  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0) throw AdapterProtocolError("pipe() failed: " + std::string(std::strerror(errno)));
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw AdapterProtocolError("pipe() failed: " + std::string(std::strerror(errno)));
  }
  pid_ = fork();
  if (pid_ < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
    throw AdapterProtocolError("fork() failed: " + std::string(std::strerror(errno)));
  }
  if (pid_ == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  fcntl(from_child_, F_SETFD, FD_CLOEXEC);

  const std::string line = read_line();
  json hello;
  try {
    hello = json::parse(line);
  } catch (const json::exception&) {
    fail("malformed hello", line);
  }
  if (!hello.is_object() || hello.value("type", "") != "hello" || hello.value("protocol", -1) != 1) {
    fail("expected {\"type\":\"hello\",\"protocol\":1}", line);
  }
}

ExternalModel::~ExternalModel() {
  try {
    shutdown();
  } catch (...) {
  }
}

void ExternalModel::shutdown() {
  if (pid_ <= 0) return;
  if (to_child_ >= 0) {
    const std::string msg = json{{"type", "shutdown"}}.dump() + "\n";
    [[maybe_unused]] auto ignored = write(to_child_, msg.data(), msg.size());
    close(to_child_);
    to_child_ = -1;
  }
  if (from_child_ >= 0) {
    close(from_child_);
    from_child_ = -1;
  }
  int status = 0;
  waitpid(pid_, &status, 0);
  pid_ = -1;
}

void ExternalModel::fail(const std::string& why, const std::string& payload) {
  const std::string msg = "adapter '" + command_ + "': " + why +
                          (payload.empty() ? std::string() : "; payload: " + truncate(payload));
  shutdown();
  throw AdapterProtocolError(msg);
}

void ExternalModel::send_line(const std::string& line) {
  if (to_child_ < 0) fail("adapter already shut down", "");
  std::size_t off = 0;
  while (off < line.size()) {
    const ssize_t n = write(to_child_, line.data() + off, line.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail("write to adapter failed: " + std::string(std::strerror(errno)), "");
    }
    off += static_cast<std::size_t>(n);
  }
}

std::string ExternalModel::read_line() {
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    char chunk[65536];
    const ssize_t n = read(from_child_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      int status = 0;
      std::string detail = "adapter closed its output";
      if (pid_ > 0 && waitpid(pid_, &status, 0) == pid_) {
        pid_ = -1;
        if (WIFEXITED(status)) detail += " (exit status " + std::to_string(WEXITSTATUS(status)) + ")";
        if (WIFSIGNALED(status)) detail += " (signal " + std::to_string(WTERMSIG(status)) + ")";
      }
      fail(detail, buffer_);
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

Vector ExternalModel::predict_batch(std::span<const Instance> instances) {
  json req = {{"type", "predict"}, {"id", next_id_}, {"instances", json::array()}};
  for (const Instance& x : instances) {
    if (x.size() != input_size_) {
      throw InvalidInput("instance length " + std::to_string(x.size()) + " does not match adapter input " +
                         std::to_string(input_size_));
    }
    req["instances"].push_back(x);
  }
  const std::uint64_t id = next_id_++;
  send_line(req.dump() + "\n");

  const std::string line = read_line();
  json resp;
  try {
    resp = json::parse(line);
  } catch (const json::exception&) {
    fail("malformed response line", line);
  }
  if (!resp.is_object() || !resp.contains("type") || !resp["type"].is_string()) {
    fail("response without a type", line);
  }
  const std::string type = resp["type"].get<std::string>();
  if (type == "error") fail("adapter reported error: " + resp.value("message", std::string("?")), line);
  if (type != "prediction") fail("unexpected message type '" + type + "'", line);
  if (!resp.contains("id") || !resp["id"].is_number_unsigned() || resp["id"].get<std::uint64_t>() != id) {
    fail("response id does not echo request id " + std::to_string(id), line);
  }
  if (!resp.contains("values") || !resp["values"].is_array() || resp["values"].size() != instances.size()) {
    fail("response must carry one value per instance", line);
  }
  Vector out(static_cast<Eigen::Index>(instances.size()));
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const json& v = resp["values"][i];
    if (!v.is_number()) fail("non-numeric prediction", line);
    try {
      out[static_cast<Eigen::Index>(i)] = checked_probability(v.get<double>(), name());
    } catch (const AdapterProtocolError& e) {
      fail(e.what(), line);
    }
  }
  return out;
}

}  // namespace eblime::blackbox
