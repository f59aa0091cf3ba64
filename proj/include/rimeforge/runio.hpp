#pragma once

// Run-directory plumbing: reproducibility manifests, line-delimited logs,
// and the one-command-at-a-time lock. Manifests carry no timestamps; a rerun
// with the same configuration produces byte-identical files.

#include <sys/file.h>
#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "rimeforge/config.hpp"

namespace rimeforge {

inline constexpr const char* kCodeVersion = "rimeforge 0.1.0";
inline constexpr int kManifestSchema = 1;

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline nlohmann::json make_manifest(const std::string& command, const RunConfig& cfg) {
  nlohmann::json m;
  m["schema"] = kManifestSchema;
  m["code_version"] = kCodeVersion;
  m["command"] = command;
  m["config_hash"] = hex64(config_hash(cfg));
  m["config"] = canonical_config_text(cfg);
  m["seed"] = cfg.seed;
  m["task_seed"] = cfg.task.seed;
  return m;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), Err::IoError, "cannot write " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  require(f.good(), Err::IoError, "write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), Err::IoError, "cannot open " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

// Writes manifest.json. A directory already claimed by a different
// configuration is refused; identical reruns are permitted (and, being
// deterministic, rewrite identical bytes).
inline void write_manifest(const std::string& dir, const std::string& command,
                           const RunConfig& cfg) {
  const std::string path = dir + "/manifest.json";
  const std::string fresh = make_manifest(command, cfg).dump(2) + "\n";
  if (std::filesystem::exists(path)) {
    const auto old = nlohmann::json::parse(read_text_file(path));
    require(old.value("config_hash", "") == hex64(config_hash(cfg)) &&
                old.value("command", "") == command,
            Err::IoError, "run directory already holds a different run: " + dir);
  }
  write_text_file(path, fresh);
}

class JsonlLogger {
 public:
  explicit JsonlLogger(const std::string& path, bool append = false)
      : f_(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc)) {
    require(f_.good(), Err::IoError, "cannot open log: " + path);
  }

  void write(const nlohmann::json& row) {
    f_ << row.dump() << "\n";
    require(f_.good(), Err::IoError, "log write failed");
  }

  void flush() { f_.flush(); }

 private:
  std::ofstream f_;
};

// Advisory exclusive lock on <dir>/.lock, held for the process lifetime of
// the command; flock releases it even on abnormal exit.
class RunLock {
 public:
  explicit RunLock(const std::string& dir) {
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/.lock";
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
    require(fd_ >= 0, Err::IoError, "cannot open lock file: " + path);
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      fd_ = -1;
      fail(Err::IoError, "run directory is in use by another command: " + dir);
    }
  }

  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

  ~RunLock() {
    if (fd_ >= 0) {
      ::flock(fd_, LOCK_UN);
      ::close(fd_);
    }
  }

 private:
  int fd_ = -1;
};

}  // namespace rimeforge
