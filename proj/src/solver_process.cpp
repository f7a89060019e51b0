#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "onnx2smt/error.hpp"
#include "onnx2smt/solver.hpp"

extern char** environ;

namespace onnx2smt {

std::string_view to_string(RawStatus status) {
  switch (status) {
    case RawStatus::Sat: return "sat";
    case RawStatus::Unsat: return "unsat";
    case RawStatus::Unknown: return "unknown";
    case RawStatus::Timeout: return "timeout";
    case RawStatus::Error: return "error";
  }
  return "?";
}

std::optional<std::string> find_executable(const std::string& name) {
  auto runnable = [](const std::string& p) {
    struct stat st {};
    return ::stat(p.c_str(), &st) == 0 && S_ISREG(st.st_mode) && ::access(p.c_str(), X_OK) == 0;
  };
  if (name.empty()) return std::nullopt;
  if (name.find('/') != std::string::npos) return runnable(name) ? std::optional(name) : std::nullopt;
  const char* path = std::getenv("PATH");
  std::stringstream dirs(path ? path : "/usr/local/bin:/usr/bin:/bin");
  std::string dir;
  while (std::getline(dirs, dir, ':')) {
    if (dir.empty()) dir = ".";
    const std::string candidate = dir + "/" + name;
    if (runnable(candidate)) return candidate;
  }
  return std::nullopt;
}

SolverConfig solver_config(const std::string& name_or_path) {
  if (name_or_path == "z3") return {"z3", "z3", {"-smt2", "{file}"}};
  if (name_or_path == "cvc5") return {"cvc5", "cvc5", {"--lang=smt2", "{file}"}};
  if (name_or_path == "cvc4") return {"cvc4", "cvc4", {"--lang=smt2", "{file}"}};
  if (name_or_path == "yices") return {"yices", "yices-smt2", {"--smt2-model-format", "{file}"}};
  return {name_or_path, name_or_path, {"{file}"}};
}

std::vector<SolverConfig> installed_solvers() {
  std::vector<SolverConfig> out;
  for (const char* name : {"z3", "cvc5", "cvc4", "yices"}) {
    SolverConfig cfg = solver_config(name);
    if (find_executable(cfg.executable)) out.push_back(std::move(cfg));
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Running {
  SolverConfig config;
  pid_t pid = -1;
  int out_fd = -1;
  int err_fd = -1;
  std::string out;
  std::string err;
  bool timed_out = false;
  bool finished = false;
  int exit_code = 0;
  Clock::time_point start;
  Clock::time_point deadline;
  double seconds = 0.0;
  std::string temp_file;  // model-requesting copy of the task, if any
};

// A copy of the task with (get-model) appended, when the config asks for a
// model and the file has none.
std::string prepare_file(const std::string& file, const SolverConfig& config) {
  if (!config.model_request) return file;
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::Io, "cannot read '" + file + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (text.find("(get-model)") != std::string::npos || text.find("(check-sat)") == std::string::npos) return file;
  static std::atomic<unsigned> counter{0};
  const std::string copy = file + "." + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".model.smt2";
  std::ofstream out(copy);
  out << text << "(get-model)\n";
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + copy + "'");
  return copy;
}

Running launch(const std::string& file, const SolverConfig& config) {
  if (config.timeout.count() <= 0) throw Error(ErrorKind::InvalidSpec, "solver timeout must be positive");
  const auto exe = find_executable(config.executable);
  if (!exe) throw Error(ErrorKind::SolverNotFound, "'" + config.executable + "' is not an executable on PATH");

  const std::string target = prepare_file(file, config);
  std::vector<std::string> args{*exe};
  for (const auto& a : config.arguments) {
    std::string arg = a;
    if (auto pos = arg.find("{file}"); pos != std::string::npos) arg.replace(pos, 6, target);
    args.push_back(std::move(arg));
  }
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);

  int out_pipe[2];
  int err_pipe[2];
  if (::pipe2(out_pipe, O_CLOEXEC) != 0 || ::pipe2(err_pipe, O_CLOEXEC) != 0) {
    if (target != file) std::remove(target.c_str());
    throw Error(ErrorKind::Io, std::string("pipe: ") + std::strerror(errno));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  posix_spawn_file_actions_adddup2(&actions, err_pipe[1], STDERR_FILENO);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);

  Running r;
  r.config = config;
  if (target != file) r.temp_file = target;
  r.start = Clock::now();
  r.deadline = r.start + config.timeout;
  const int rc = ::posix_spawn(&r.pid, exe->c_str(), &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);
  if (rc != 0) {
    ::close(out_pipe[0]);
    ::close(err_pipe[0]);
    if (!r.temp_file.empty()) std::remove(r.temp_file.c_str());
    throw Error(ErrorKind::SolverNotFound, "cannot launch '" + *exe + "': " + std::strerror(rc));
  }
  r.out_fd = out_pipe[0];
  r.err_fd = err_pipe[0];
  return r;
}

void kill_and_reap(Running& r) {
  if (r.finished) return;
  ::kill(r.pid, SIGKILL);
  int status = 0;
  ::waitpid(r.pid, &status, 0);
  r.finished = true;
  r.seconds = std::chrono::duration<double>(Clock::now() - r.start).count();
  if (r.out_fd >= 0) ::close(r.out_fd);
  if (r.err_fd >= 0) ::close(r.err_fd);
  r.out_fd = r.err_fd = -1;
}

bool drain(int& fd, std::string& sink) {
  char buf[65536];
  const ssize_t n = ::read(fd, buf, sizeof buf);
  if (n > 0) {
    sink.append(buf, static_cast<std::size_t>(n));
    return true;
  }
  if (n < 0 && (errno == EINTR || errno == EAGAIN)) return true;
  ::close(fd);
  fd = -1;
  return false;
}

RawOutcome classify(const Running& r) {
  RawOutcome o;
  o.solver = r.config.name;
  o.stdout_text = r.out;
  o.stderr_text = r.err;
  o.exit_code = r.exit_code;
  o.seconds = r.seconds;
  if (r.timed_out) {
    o.status = RawStatus::Timeout;
    return o;
  }
  std::istringstream lines(r.out);
  std::string line;
  std::size_t consumed = 0;
  while (std::getline(lines, line)) {
    consumed += line.size() + 1;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    const std::string word = line.substr(b, e - b + 1);
    if (word == "sat" || word == "unsat" || word == "unknown") {
      o.status = word == "sat" ? RawStatus::Sat : word == "unsat" ? RawStatus::Unsat : RawStatus::Unknown;
      o.model_text = consumed < r.out.size() ? r.out.substr(consumed) : "";
      return o;
    }
    if (word.rfind("success", 0) == 0) continue;
    break;  // anything else ahead of the verdict is a diagnostic
  }
  o.status = RawStatus::Error;
  return o;
}

std::vector<Running> run_all(const std::string& file, std::span<const SolverConfig> configs, bool first_wins) {
  std::vector<Running> procs;
  auto cleanup = [&] {
    for (auto& p : procs) {
      if (!p.temp_file.empty()) std::remove(p.temp_file.c_str());
    }
  };
  try {
    for (const auto& c : configs) procs.push_back(launch(file, c));
  } catch (...) {
    for (auto& p : procs) kill_and_reap(p);
    cleanup();
    throw;
  }

  auto all_done = [&] { return std::all_of(procs.begin(), procs.end(), [](const Running& r) { return r.finished; }); };
  while (!all_done()) {
    std::vector<pollfd> fds;
    std::vector<std::pair<std::size_t, bool>> owners;  // process, is_stdout
    auto now = Clock::now();
    auto wait = std::chrono::milliseconds(100);
    for (std::size_t i = 0; i < procs.size(); ++i) {
      auto& r = procs[i];
      if (r.finished) continue;
      if (now >= r.deadline) {
        r.timed_out = true;
        kill_and_reap(r);
        continue;
      }
      wait = std::min(wait, std::chrono::duration_cast<std::chrono::milliseconds>(r.deadline - now) +
                                std::chrono::milliseconds(1));
      if (r.out_fd >= 0) {
        fds.push_back({r.out_fd, POLLIN, 0});
        owners.emplace_back(i, true);
      }
      if (r.err_fd >= 0) {
        fds.push_back({r.err_fd, POLLIN, 0});
        owners.emplace_back(i, false);
      }
    }
    if (!fds.empty()) {
      ::poll(fds.data(), fds.size(), static_cast<int>(wait.count()));
      for (std::size_t k = 0; k < fds.size(); ++k) {
        if ((fds[k].revents & (POLLIN | POLLHUP | POLLERR)) == 0) continue;
        auto& r = procs[owners[k].first];
        if (owners[k].second) {
          drain(r.out_fd, r.out);
        } else {
          drain(r.err_fd, r.err);
        }
      }
    }
    for (auto& r : procs) {
      if (r.finished || r.out_fd >= 0 || r.err_fd >= 0) continue;
      int status = 0;
      const pid_t done = ::waitpid(r.pid, &status, fds.empty() ? 0 : WNOHANG);
      if (done == r.pid) {
        r.finished = true;
        r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
        r.seconds = std::chrono::duration<double>(Clock::now() - r.start).count();
      }
    }
    if (first_wins) {
      const bool decided = std::any_of(procs.begin(), procs.end(), [](const Running& r) {
        if (!r.finished || r.timed_out) return false;
        const auto s = classify(r).status;
        return s == RawStatus::Sat || s == RawStatus::Unsat;
      });
      if (decided) {
        for (auto& r : procs) kill_and_reap(r);
      }
    }
  }
  cleanup();
  return procs;
}

}  // namespace

RawOutcome run_solver(const std::string& file, const SolverConfig& config) {
  auto procs = run_all(file, std::span(&config, 1), false);
  return classify(procs.front());
}

RawOutcome run_portfolio(const std::string& file, std::span<const SolverConfig> configs) {
  if (configs.empty()) throw Error(ErrorKind::SolverNotFound, "empty solver portfolio");
  auto procs = run_all(file, configs, true);
  std::vector<RawOutcome> outcomes;
  for (const auto& r : procs) outcomes.push_back(classify(r));

  // Fastest definitive answer first; otherwise rank the fallbacks.
  auto rank = [](RawStatus s) {
    switch (s) {
      case RawStatus::Sat:
      case RawStatus::Unsat: return 0;
      case RawStatus::Unknown: return 1;
      case RawStatus::Timeout: return 2;
      case RawStatus::Error: return 3;
    }
    return 4;
  };
  return *std::min_element(outcomes.begin(), outcomes.end(), [&](const RawOutcome& a, const RawOutcome& b) {
    if (rank(a.status) != rank(b.status)) return rank(a.status) < rank(b.status);
    return a.seconds < b.seconds;
  });
}

}  // namespace onnx2smt
