#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <string>

#include "aspo/error.hpp"
#include "aspo/eval_harness.hpp"
#include "aspo/log.hpp"

namespace aspo {

using nlohmann::json;

namespace {

struct Pipe {
  int fd[2] = {-1, -1};
  Pipe() {
    if (::pipe(fd) != 0) throw Error(ErrorKind::Tool, std::string("pipe failed: ") + std::strerror(errno));
  }
  ~Pipe() {
    closeEnd(0);
    closeEnd(1);
  }
  void closeEnd(int i) {
    if (fd[i] >= 0) ::close(fd[i]);
    fd[i] = -1;
  }
};

bool writeAll(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  return true;
}

double requiredNumber(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number())
    throw Error(ErrorKind::Protocol, std::string("evaluator response lacks numeric '") + key + "'");
  return j[key].get<double>();
}

EvaluationResult mapResponse(const std::string& line, const std::string& requestId) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Protocol, std::string("evaluator response is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::Protocol, "evaluator response must be a JSON object");
  if (j.contains("id") && j["id"] != json(requestId))
    throw Error(ErrorKind::Protocol, "evaluator answered request " + j["id"].dump() + ", expected " + requestId);
  if (!j.contains("status") || !j["status"].is_string()) throw Error(ErrorKind::Protocol, "evaluator response lacks 'status'");
  auto status = j["status"].get<std::string>();
  if (status == "invalid") {
    if (!j.contains("stage") || !j["stage"].is_string()) throw Error(ErrorKind::Protocol, "invalid response lacks 'stage'");
    FailureStage stage;
    try {
      stage = failureStageFromString(j["stage"].get<std::string>());
    } catch (const Error& e) {
      throw Error(ErrorKind::Protocol, e.what());
    }
    double minutes = j.contains("synthesis_minutes") ? requiredNumber(j, "synthesis_minutes") : 1.0;
    return EvaluationResult::failure(stage, minutes > 0.0 ? minutes : 1.0);
  }
  if (status != "ok") throw Error(ErrorKind::Protocol, "unknown evaluator status '" + status + "'");
  EvaluationResult r;
  double cycles = requiredNumber(j, "cycles");
  r.fmaxMHz = requiredNumber(j, "fmax_mhz");
  double luts = requiredNumber(j, "luts");
  r.powerW = requiredNumber(j, "power_w");
  r.synthesisMinutes = requiredNumber(j, "synthesis_minutes");
  if (cycles < 0 || luts < 0 || !(r.fmaxMHz > 0.0) || r.powerW < 0.0 || !(r.synthesisMinutes > 0.0))
    throw Error(ErrorKind::Protocol, "evaluator response has out-of-range metrics");
  r.cycles = static_cast<std::int64_t>(cycles);
  r.luts = static_cast<std::int64_t>(luts);
  double sim = j.contains("simulation_minutes") ? requiredNumber(j, "simulation_minutes") : 0.0;
  r.evalMinutes = r.synthesisMinutes + std::max(sim, 0.0);
  return r;
}

}  // namespace

EvaluationResult externalEvaluate(const ExternalEvaluatorConfig& ext, const ParameterSpace& space,
                                  const Configuration& cfg, const std::optional<std::string>& checkpointHint,
                                  const std::string& benchmark, const std::string& requestId) {
  if (ext.command.empty()) throw Error(ErrorKind::InvalidConfiguration, "no external evaluator command configured");
  space.check(cfg);
  json request = {{"id", requestId},
                  {"config", space.configToJson(cfg)},
                  {"checkpoint_hint", checkpointHint ? json(*checkpointHint) : json(nullptr)},
                  {"benchmark", benchmark}};
  std::string payload = request.dump() + "\n";

  Pipe toChild, fromChild;
  pid_t pid = ::fork();
  if (pid < 0) throw Error(ErrorKind::Tool, std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(toChild.fd[0], STDIN_FILENO);
    ::dup2(fromChild.fd[1], STDOUT_FILENO);
    ::close(toChild.fd[0]);
    ::close(toChild.fd[1]);
    ::close(fromChild.fd[0]);
    ::close(fromChild.fd[1]);
    ::signal(SIGPIPE, SIG_DFL);
    ::execl("/bin/sh", "sh", "-c", ext.command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  toChild.closeEnd(0);
  fromChild.closeEnd(1);

  // A child that exits without reading must not kill us through SIGPIPE.
  struct sigaction ignore {}, previous {};
  ignore.sa_handler = SIG_IGN;
  ::sigaction(SIGPIPE, &ignore, &previous);
  writeAll(toChild.fd[1], payload);
  ::sigaction(SIGPIPE, &previous, nullptr);
  toChild.closeEnd(1);

  auto deadline = std::chrono::steady_clock::now() + ext.timeout;
  std::string output;
  bool timedOut = false;
  char buf[4096];
  for (;;) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      timedOut = true;
      break;
    }
    pollfd pfd{fromChild.fd[0], POLLIN, 0};
    int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1000)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (rc == 0) continue;
    ssize_t n = ::read(fromChild.fd[0], buf, sizeof buf);
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (n == 0) break;
    output.append(buf, static_cast<std::size_t>(n));
  }

  int status = 0;
  if (timedOut) {
    ::kill(pid, SIGKILL);
    ::waitpid(pid, &status, 0);
    double minutes = std::chrono::duration<double, std::ratio<60>>(ext.timeout).count();
    logWarning("external evaluator timed out after " + std::to_string(minutes) + " min");
    return EvaluationResult::failure(FailureStage::Synthesis, minutes > 0.0 ? minutes : 1.0);
  }
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    throw Error(ErrorKind::Tool, "external evaluator exited with status " + std::to_string(code));
  }
  auto nl = output.find('\n');
  std::string line = output.substr(0, nl);
  if (line.empty()) throw Error(ErrorKind::Protocol, "external evaluator produced no response line");
  return mapResponse(line, requestId);
}

}  // namespace aspo
