#pragma once

#include "blockdetail/service/config.h"
#include "blockdetail/service/generate.h"
#include "blockdetail/service/models.h"

#include <nlohmann/json.hpp>

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace blockdetail {

enum class JobState { queued, running, done, failed };

std::string_view to_string(JobState state);

/// Interval of plain progress events, in denoising steps.
inline constexpr int kProgressInterval = 50;

/// One entry of a job's event log. Types: "state", "progress", "refinement".
struct JobEvent {
  std::size_t index = 0;
  std::string type;
  nlohmann::json data;
};

struct JobSnapshot {
  std::string id;
  JobState state = JobState::queued;
  int t = 0;  // last denoising step reported, counting down from T
  int steps = 0;
  int refinement_events = 0;
  std::string error;
  std::uint64_t seed = 0;
  std::string strategy;
  std::string result_key;  // content address of the stored result, once done

  double fraction() const;
  nlohmann::json to_json() const;
};

struct EventBatch {
  std::vector<JobEvent> events;
  bool finished = false;  // no events will follow the ones returned
};

/// Asynchronous generation jobs on a bounded worker pool.
///
/// Each job runs generate() single-threaded with either the request seed or
/// derive_seed(service seed, fnv1a64(id)). Results are written under
/// <data_dir>/results/<key>/ where key hashes the resolved request and seed;
/// job records go to <data_dir>/jobs/<id>.json.
class JobService {
 public:
  JobService(std::shared_ptr<ModelRegistry> models, std::filesystem::path data_dir);
  ~JobService();

  JobService(const JobService&) = delete;
  JobService& operator=(const JobService&) = delete;

  /// Validates the payload (RequestError on failure) and queues a job.
  std::string submit(const nlohmann::json& request);

  std::optional<JobSnapshot> get(const std::string& id) const;

  /// Queued jobs fail at once with "cancelled"; running jobs stop at their
  /// next denoising step. Finished jobs are left alone.
  std::optional<JobSnapshot> cancel(const std::string& id);

  /// Motion payload of a finished job; nullopt while it is not done.
  std::optional<std::string> result(const std::string& id) const;
  std::optional<std::string> trace(const std::string& id) const;

  /// Events with index >= `from`, waiting up to `timeout` for at least one.
  /// Returns nullopt for an unknown id.
  std::optional<EventBatch> events(const std::string& id, std::size_t from,
                                   std::chrono::milliseconds timeout) const;

  /// Blocks until the job is done or failed, or the timeout expires.
  std::optional<JobSnapshot> wait(const std::string& id, std::chrono::milliseconds timeout) const;

  const std::filesystem::path& data_dir() const { return data_dir_; }
  ModelRegistry& models() { return *models_; }

  /// Cancels queued jobs and joins the workers. Idempotent.
  void shutdown();

 private:
  struct Job;

  void worker_loop();
  void run(Job& job);
  void emit(Job& job, std::string type, nlohmann::json data);
  void finish(Job& job, JobState state, std::string error);
  void persist(const Job& job) const;
  void persist(const Job& job, const JobSnapshot& snapshot) const;
  std::shared_ptr<Job> find(const std::string& id) const;

  std::shared_ptr<ModelRegistry> models_;
  std::filesystem::path data_dir_;
  std::uint64_t nonce_;

  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::deque<std::shared_ptr<Job>> queue_;
  std::uint64_t counter_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace blockdetail
