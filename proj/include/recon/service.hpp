#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "recon/pipeline.hpp"

namespace recon {

/// Edit attempted while a solve is running, or a second solve requested.
class ConflictError : public Error {
 public:
  using Error::Error;
};

/// A constraint, cell or wall id that does not exist.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kApiVersion = 1;

enum class JobState { idle, solving, done, failed };
const char* job_state_name(JobState s);

struct JobStatus {
  JobState state = JobState::idle;
  int job = 0;                  // id of the latest started solve
  int model_job = 0;            // job that produced the current model, 0 before any
  std::string solver_status;    // optimal / gap-limit / infeasible
  double objective = 0;
  double gap = 0;
  std::string message;
  std::vector<int> conflict_hint;
};

struct VirtualWallRequest {
  Vec2 a = Vec2::Zero(), b = Vec2::Zero();
  std::optional<double> z_lo, z_hi;  // default: the complex's interior z-range
  std::optional<double> thickness;   // default: the configured virtual thickness
};

struct VirtualWallResult {
  int wall = -1;
  bool merged = false;  // an existing candidate already had both planes
  std::vector<int> dropped_constraints;
};

/// One loaded reconstruction plus its constraint list and latest solve. All
/// public members are safe to call from concurrent threads; edits are
/// serialized and rejected with ConflictError while a solve runs.
class Session {
 public:
  Session(Reconstruction rec, Config cfg);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  /// Reconstruction from the stage dumps of a run directory.
  static std::unique_ptr<Session> open(const std::filesystem::path& dir, const Config& cfg);

  JobStatus status() const;
  Config config() const;
  std::vector<UserConstraint> constraints() const;

  /// Validates against the complex and returns the new id.
  int add_constraint(UserConstraint c);
  void remove_constraint(int id);
  void set_alpha(double alpha);

  /// Two opposing virtual surfaces centred on the segment, then a full rebuild
  /// of complex and priors. Constraints are carried over by their cell's
  /// centre point; those that no longer apply are dropped and reported.
  VirtualWallResult add_virtual_wall(const VirtualWallRequest& req);

  /// Starts a background solve over a snapshot of the constraints; returns the job id.
  int start_solve();
  /// Blocks until no solve is running.
  void wait() const;

  /// Latest completed solve; empty before the first one.
  std::optional<SolveOutcome> outcome() const;
  std::string model_json() const;
  /// Cells whose bounding box meets [lo, hi], with their labels.
  std::string cells_json(const Vec3& lo, const Vec3& hi) const;
  /// "rooms", "walls", "all", "room_N", "wall_N"; throws NotFoundError.
  BuildingModel mesh_entities(const std::string& entity) const;

  std::size_t cell_count() const;
  std::size_t wall_count() const;

 private:
  void run_job(int job, Reconstruction const* rec, Config cfg, std::vector<UserConstraint> forced);
  void check_idle() const;
  void check_constraint(const UserConstraint& c) const;

  mutable std::mutex mu_;
  mutable std::condition_variable idle_cv_;
  Reconstruction rec_;
  Config cfg_;
  std::vector<UserConstraint> constraints_;
  std::vector<Vec3> anchors_;  // per constraint, centre of its cell
  int next_constraint_ = 0;
  JobStatus status_;
  std::optional<SolveOutcome> outcome_;
  std::vector<UserConstraint> outcome_constraints_;
  int complex_generation_ = 0;  // bumped on every rebuild
  int outcome_generation_ = -1;
  std::thread worker_;
};

/// Binary triangle buffer: little-endian u32 count, then count * 9 float32.
std::string binary_mesh(const BuildingModel& entities);

/// HTTP front end of a session (cpp-httplib).
class Service {
 public:
  explicit Service(Session& session);
  ~Service();

  /// Binds and serves on a background thread; returns the bound port (0 picks one).
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace recon
