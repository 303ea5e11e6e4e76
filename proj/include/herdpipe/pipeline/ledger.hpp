#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "herdpipe/core/error.hpp"
#include "herdpipe/io/digest.hpp"
#include "herdpipe/io/jsonl.hpp"

namespace herdpipe {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "herdpipe 0.1.0";

using DigestMap = std::map<std::string, std::string>;  // path -> sha256 ("" = missing)

struct LedgerRecord {
  std::string stage;
  std::string status;  // ok | skipped | failed
  std::string config_digest;
  DigestMap inputs;
  DigestMap outputs;
  std::string started;
  std::string finished;
  std::string tool_version = kToolVersion;
  std::string error;
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline DigestMap digest_all(const std::vector<fs::path>& paths) {
  DigestMap out;
  for (const auto& p : paths) out[p.string()] = io::digest_path(p);
  return out;
}

/// Append-only JSONL log of stage executions under the layout root.
class RunLedger {
 public:
  explicit RunLedger(fs::path path) : path_(std::move(path)) {
    if (!fs::exists(path_)) return;
    for (const auto& r : io::read_jsonl(path_)) {
      LedgerRecord rec;
      rec.stage = io::field<std::string>(r, "stage");
      rec.status = io::field<std::string>(r, "status");
      rec.config_digest = io::field_or<std::string>(r, "config_digest", "");
      rec.inputs = io::field_or<DigestMap>(r, "inputs", {});
      rec.outputs = io::field_or<DigestMap>(r, "outputs", {});
      rec.started = io::field_or<std::string>(r, "started", "");
      rec.finished = io::field_or<std::string>(r, "finished", "");
      rec.tool_version = io::field_or<std::string>(r, "tool_version", "");
      rec.error = io::field_or<std::string>(r, "error", "");
      records_.push_back(std::move(rec));
    }
  }

  const std::vector<LedgerRecord>& records() const { return records_; }
  const fs::path& path() const { return path_; }

  void append(const LedgerRecord& rec) {
    io::json j{{"stage", rec.stage},       {"status", rec.status},     {"config_digest", rec.config_digest},
               {"inputs", rec.inputs},     {"outputs", rec.outputs},   {"started", rec.started},
               {"finished", rec.finished}, {"tool_version", rec.tool_version}};
    if (!rec.error.empty()) j["error"] = rec.error;
    fs::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    out << j.dump() << "\n";
    if (!out) throw Error(Errc::io, "cannot append to ledger " + path_.string());
    records_.push_back(rec);
  }

  /// Latest successful execution of `stage`, if any.
  std::optional<LedgerRecord> last_success(const std::string& stage) const {
    for (auto it = records_.rbegin(); it != records_.rend(); ++it)
      if (it->stage == stage && it->status == "ok") return *it;
    return std::nullopt;
  }

  /// True when the last successful run saw the same inputs and config, and
  /// its outputs are still on disk unchanged.
  bool up_to_date(const std::string& stage, const DigestMap& inputs, const std::string& config_digest) const {
    const auto last = last_success(stage);
    if (!last || last->inputs != inputs || last->config_digest != config_digest || last->outputs.empty()) return false;
    for (const auto& [p, d] : last->outputs)
      if (d.empty() || io::digest_path(p) != d) return false;
    return true;
  }

 private:
  fs::path path_;
  std::vector<LedgerRecord> records_;
};

/// Exclusive lock on a layout root, held for the object's lifetime.
class LayoutLock {
 public:
  explicit LayoutLock(const fs::path& root) : path_(root / ".herdpipe.lock") {
    fs::create_directories(root);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
      throw Error(Errc::stage_failure, "layout " + root.string() + " is locked by another run (" + path_.string() +
                                           "); remove the file if no run is active");
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
  }
  ~LayoutLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  LayoutLock(const LayoutLock&) = delete;
  LayoutLock& operator=(const LayoutLock&) = delete;

 private:
  fs::path path_;
};

}  // namespace herdpipe
