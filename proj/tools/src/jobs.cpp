#include "blockdetail/service/jobs.h"

#include "blockdetail/common/rng.h"
#include "blockdetail/detailing/trace_io.h"
#include "blockdetail/eval/runner.h"
#include "blockdetail/motion/motion_io.h"

#include <atomic>
#include <cstdio>
#include <random>

namespace blockdetail {

using nlohmann::json;

namespace {

struct Cancelled {};

std::string hex16(std::uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(value));
  return buffer;
}

bool needs_r(StrategyKind kind) {
  return kind == StrategyKind::detailing || kind == StrategyKind::r_notolerance ||
         kind == StrategyKind::diffusion_blending || kind == StrategyKind::soft_mask;
}

}  // namespace

std::string_view to_string(JobState state) {
  switch (state) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
  }
  return "unknown";
}

double JobSnapshot::fraction() const {
  if (state == JobState::done) return 1.0;
  if (steps <= 0 || t <= 0) return 0.0;
  return double(steps - t + 1) / steps;
}

json JobSnapshot::to_json() const {
  json doc = {{"id", id},
              {"state", to_string(state)},
              {"progress",
               {{"t", t},
                {"steps", steps},
                {"fraction", fraction()},
                {"refinement_events", refinement_events}}},
              {"seed", seed},
              {"strategy", strategy}};
  doc["error"] = error.empty() ? json(nullptr) : json(error);
  doc["result"] = result_key.empty() ? json(nullptr) : json("/api/jobs/" + id + "/result");
  return doc;
}

struct JobService::Job {
  JobSnapshot snapshot;
  GenerationRequest request;
  ModelSet models;
  std::vector<JobEvent> events;
  std::atomic<bool> cancel_requested{false};
  std::string motion;
  std::string trace;
};

JobService::JobService(std::shared_ptr<ModelRegistry> models, std::filesystem::path data_dir)
    : models_(std::move(models)), data_dir_(std::move(data_dir)) {
  std::filesystem::create_directories(data_dir_ / "jobs");
  std::filesystem::create_directories(data_dir_ / "results");
  nonce_ = mix_seed(std::random_device{}() ^
                    static_cast<std::uint64_t>(
                        std::chrono::system_clock::now().time_since_epoch().count()));
  const int workers = models_->config().service.workers;
  for (int i = 0; i < workers; ++i) workers_.emplace_back([this] { worker_loop(); });
}

JobService::~JobService() { shutdown(); }

void JobService::shutdown() {
  std::vector<std::shared_ptr<Job>> dropped;
  {
    std::lock_guard lock(mutex_);
    if (stopping_ && workers_.empty()) return;
    stopping_ = true;
    dropped.assign(queue_.begin(), queue_.end());
    queue_.clear();
    for (auto& [id, job] : jobs_) job->cancel_requested = true;
  }
  for (auto& job : dropped) finish(*job, JobState::failed, "cancelled");
  changed_.notify_all();
  for (std::thread& worker : workers_) worker.join();
  workers_.clear();
}

std::string JobService::submit(const json& payload) {
  GenerationRequest request =
      GenerationRequest::from_json(payload, models_->config().refinement);
  ModelSet models;
  try {
    models = models_->resolve(request.models);
  } catch (const ValidationError& e) {
    throw RequestError(std::vector<FieldIssue>{{"models", e.what()}});
  }
  std::vector<FieldIssue> issues;
  if (needs_r(request.strategy.kind) && !models.r) {
    issues.push_back({"models", "strategy " + request.strategy.label() + " needs an R model"});
  }
  if (request.strategy.kind != StrategyKind::r_notolerance && !models.u) {
    issues.push_back({"models", "strategy " + request.strategy.label() + " needs a U model"});
  }
  const ArrayShape shape = models.u ? models.u->shape() : models.r->shape();
  if (!(request.blocking.shape() == shape)) {
    issues.push_back({"blocking.timeline_length",
                      "blocking shape " + to_string(request.blocking.shape()) +
                          " does not match the model shape " + to_string(shape)});
  }
  if (!issues.empty()) throw RequestError(std::move(issues));

  auto job = std::make_shared<Job>();
  std::string id;
  {
    std::lock_guard lock(mutex_);
    if (stopping_) throw Error("service is shutting down");
    id = hex16(derive_seed(nonce_, ++counter_));
    job->snapshot.id = id;
    job->snapshot.steps = (models.u ? models.u->schedule() : models.r->schedule()).steps();
    job->snapshot.t = job->snapshot.steps;
    job->snapshot.seed = request.seed ? *request.seed
                                      : derive_seed(models_->config().service.seed, fnv1a64(id));
    job->snapshot.strategy = request.strategy.label();
    job->request = std::move(request);
    job->models = std::move(models);
    jobs_[id] = job;
  }
  emit(*job, "state", {{"state", "queued"}});
  persist(*job);
  {
    std::lock_guard lock(mutex_);
    queue_.push_back(job);
  }
  changed_.notify_all();
  return id;
}

std::shared_ptr<JobService::Job> JobService::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  return it == jobs_.end() ? nullptr : it->second;
}

std::optional<JobSnapshot> JobService::get(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second->snapshot;
}

std::optional<JobSnapshot> JobService::cancel(const std::string& id) {
  std::shared_ptr<Job> job;
  bool was_queued = false;
  {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) return std::nullopt;
    job = it->second;
    job->cancel_requested = true;
    const auto queued = std::find(queue_.begin(), queue_.end(), job);
    if (queued != queue_.end()) {
      queue_.erase(queued);
      was_queued = true;
    }
  }
  if (was_queued) finish(*job, JobState::failed, "cancelled");
  return get(id);
}

std::optional<std::string> JobService::result(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end() || it->second->snapshot.state != JobState::done) return std::nullopt;
  return it->second->motion;
}

std::optional<std::string> JobService::trace(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end() || it->second->snapshot.state != JobState::done ||
      it->second->trace.empty()) {
    return std::nullopt;
  }
  return it->second->trace;
}

std::optional<EventBatch> JobService::events(const std::string& id, std::size_t from,
                                             std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  const Job& job = *it->second;
  auto terminal = [&] {
    return job.snapshot.state == JobState::done || job.snapshot.state == JobState::failed;
  };
  changed_.wait_for(lock, timeout, [&] { return job.events.size() > from || terminal(); });
  EventBatch batch;
  for (std::size_t i = from; i < job.events.size(); ++i) batch.events.push_back(job.events[i]);
  batch.finished = terminal();
  return batch;
}

std::optional<JobSnapshot> JobService::wait(const std::string& id,
                                            std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  const Job& job = *it->second;
  changed_.wait_for(lock, timeout, [&] {
    return job.snapshot.state == JobState::done || job.snapshot.state == JobState::failed;
  });
  return job.snapshot;
}

void JobService::emit(Job& job, std::string type, json data) {
  {
    std::lock_guard lock(mutex_);
    job.events.push_back({job.events.size(), std::move(type), std::move(data)});
  }
  changed_.notify_all();
}

void JobService::finish(Job& job, JobState state, std::string error) {
  JobSnapshot final_snapshot;
  {
    std::lock_guard lock(mutex_);
    final_snapshot = job.snapshot;
  }
  final_snapshot.state = state;
  final_snapshot.error = error;
  // The record is on disk before any reader can observe the final state.
  persist(job, final_snapshot);
  {
    std::lock_guard lock(mutex_);
    job.snapshot.state = state;
    job.snapshot.error = std::move(error);
    json data = {{"state", to_string(state)}};
    if (state == JobState::failed) data["error"] = job.snapshot.error;
    job.events.push_back({job.events.size(), "state", std::move(data)});
  }
  changed_.notify_all();
}

void JobService::persist(const Job& job) const {
  JobSnapshot snapshot;
  {
    std::lock_guard lock(mutex_);
    snapshot = job.snapshot;
  }
  persist(job, snapshot);
}

void JobService::persist(const Job& job, const JobSnapshot& snapshot) const {
  json record = snapshot.to_json();
  record["request"] = job.request.to_json();
  record["models_resolved"] = job.models.description();
  write_text_file(data_dir_ / "jobs" / (snapshot.id + ".json"), record.dump() + "\n");
}

void JobService::worker_loop() {
  for (;;) {
    std::shared_ptr<Job> job;
    {
      std::unique_lock lock(mutex_);
      changed_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      job = queue_.front();
      queue_.pop_front();
      job->snapshot.state = JobState::running;
      job->events.push_back({job->events.size(), "state", {{"state", "running"}}});
    }
    changed_.notify_all();
    persist(*job);
    run(*job);
  }
}

void JobService::run(Job& job) {
  const int steps = job.snapshot.steps;
  auto progress = [&](std::size_t, int t, const RefinementEvent* event) {
    if (job.cancel_requested) throw Cancelled{};
    {
      std::lock_guard lock(mutex_);
      job.snapshot.t = t;
      if (event) ++job.snapshot.refinement_events;
    }
    const double fraction = double(steps - t + 1) / steps;
    if (event) {
      json data = refinement_event_to_json(*event, false);
      data["fraction"] = fraction;
      emit(job, "refinement", std::move(data));
    } else if (t % kProgressInterval == 0) {
      emit(job, "progress", {{"t", t}, {"fraction", fraction}});
    }
  };
  try {
    const GenerationResult result = generate(job.request, job.models, job.snapshot.seed, progress);
    json address = job.request.to_json();
    address["seed"] = result.seed;
    address["models"] = job.models.ids;
    const std::string key = hex_hash(address);
    const std::filesystem::path dir = data_dir_ / "results" / key;
    std::filesystem::create_directories(dir);
    std::string motion = motion_payload(result.motion);
    std::string trace = result.trace ? trace_payload(*result.trace) : std::string();
    write_text_file(dir / "request.json", address.dump() + "\n");
    write_text_file(dir / "motion.json", motion);
    if (!trace.empty()) write_text_file(dir / "trace.json", trace);
    {
      std::lock_guard lock(mutex_);
      job.motion = std::move(motion);
      job.trace = std::move(trace);
      job.snapshot.result_key = key;
    }
    finish(job, JobState::done, {});
  } catch (const Cancelled&) {
    finish(job, JobState::failed, "cancelled");
  } catch (const std::exception& e) {
    finish(job, JobState::failed, e.what());
  }
}

}  // namespace blockdetail
