#include <cerrno>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstring>
#include <string>
#include <vector>

#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "cashbo/bench.hpp"
#include "cashbo/error.hpp"

namespace cashbo {

namespace {

// A dead child turns writes into EPIPE instead of killing the process.
void ignore_sigpipe_once() {
  static const bool done = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)done;
}

}  // namespace

ExternalEvaluator::ExternalEvaluator(std::vector<std::string> command,
                                     double timeout_seconds)
    : timeout_seconds_(timeout_seconds) {
  if (command.empty()) throw ConfigError("evaluator command is empty");
  if (timeout_seconds_ <= 0.0) throw ConfigError("evaluator timeout must be positive");
  ignore_sigpipe_once();

  int to_child[2], from_child[2];
  if (pipe(to_child) != 0) throw EvaluatorError("cannot create evaluator pipes");
  if (pipe(from_child) != 0) {
    close(to_child[0]);
    close(to_child[1]);
    throw EvaluatorError("cannot create evaluator pipes");
  }

  const pid_t pid = fork();
  if (pid < 0) {
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) close(fd);
    throw EvaluatorError("cannot start evaluator process");
  }
  if (pid == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) close(fd);
    std::vector<char*> argv;
    argv.reserve(command.size() + 1);
    for (auto& arg : command) argv.push_back(arg.data());
    argv.push_back(nullptr);
    execvp(argv[0], argv.data());
    _exit(127);
  }
  close(to_child[0]);
  close(from_child[1]);
  pid_ = pid;
  to_child_ = to_child[1];
  from_child_ = from_child[0];
}

ExternalEvaluator::~ExternalEvaluator() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (pid_ > 0) {
    // Give the child a moment to notice EOF, then stop waiting politely.
    const pid_t pid = static_cast<pid_t>(pid_);
    for (int i = 0; i < 20; ++i) {
      if (waitpid(pid, nullptr, WNOHANG) != 0) return;
      usleep(10 * 1000);
    }
    kill(pid, SIGKILL);
    waitpid(pid, nullptr, 0);
  }
}

std::string ExternalEvaluator::read_line() {
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration<double>(timeout_seconds_);
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0)
      throw EvaluatorError("evaluator timed out after " +
                           std::to_string(timeout_seconds_) + " s");
    struct pollfd pfd = {from_child_, POLLIN, 0};
    const int rc = poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw EvaluatorError(std::string("evaluator poll failed: ") + std::strerror(errno));
    }
    if (rc == 0) continue;  // loop re-checks the deadline
    char chunk[4096];
    const ssize_t got = read(from_child_, chunk, sizeof(chunk));
    if (got < 0) {
      if (errno == EINTR) continue;
      throw EvaluatorError(std::string("evaluator read failed: ") + std::strerror(errno));
    }
    if (got == 0) throw EvaluatorError("evaluator closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(got));
  }
}

double ExternalEvaluator::evaluate(const SearchSpace& space, const HpVector& x) {
  if (x.algo < 0 || x.algo >= space.num_algorithms())
    throw ConfigError("algorithm index out of range");
  const auto& algo = space.algorithms[x.algo];

  nlohmann::ordered_json req;
  const long long id = next_id_++;
  req["id"] = id;
  req["algorithm"] = algo.name;
  nlohmann::ordered_json values = nlohmann::ordered_json::object();
  const auto raw = unscale_from_unit(x.values, algo);
  for (std::size_t j = 0; j < raw.size(); ++j) values[algo.variables[j].name] = raw[j];
  req["values"] = values;
  const std::string line = req.dump() + "\n";

  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n = write(to_child_, line.data() + sent, line.size() - sent);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw EvaluatorError("evaluator closed its input");
    }
    sent += static_cast<std::size_t>(n);
  }

  const std::string reply = read_line();
  const auto j = nlohmann::json::parse(reply, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw EvaluatorError("evaluator protocol error: unparseable response: " + reply);
  if (!j.contains("id") || !j["id"].is_number_integer() ||
      j["id"].get<long long>() != id)
    throw EvaluatorError("evaluator protocol error: response id mismatch");
  if (j.contains("error")) {
    if (!j["error"].is_string())
      throw EvaluatorError("evaluator protocol error: non-text error field");
    throw EvaluatorError("evaluator reported: " + j["error"].get<std::string>());
  }
  if (!j.contains("accuracy") || !j["accuracy"].is_number())
    throw EvaluatorError("evaluator protocol error: missing accuracy");
  const double acc = j["accuracy"].get<double>();
  if (!std::isfinite(acc) || acc < 0.0 || acc > 1.0)
    throw EvaluatorError("evaluator accuracy out of [0,1]");
  return acc;
}

}  // namespace cashbo
