#pragma once

#include "kinetunnel/analytics.hpp"
#include "kinetunnel/arm_model.hpp"
#include "kinetunnel/csv.hpp"
#include "kinetunnel/session_log.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kinetunnel {

/// Constant offset plus Ornstein-Uhlenbeck wander, per axis.
struct NoiseModel {
  Vec3 bias = Vec3::Zero();
  /// Stationary standard deviation of the wander, meters.
  double wander_sd = 0.0;
  /// Mean-reversion rate, 1/s.
  double theta = 1.0;
  std::uint64_t seed = 0;
};

struct SimConfig {
  Exercise exercise = Exercise::T1;
  Condition condition = Condition::NoFeedback;
  /// Seconds per repetition; 0 picks default_cycle_time(condition).
  double cycle_time = 0.0;
  NoiseModel noise;
  std::size_t repetitions = 5;
  double sample_rate = 60.0;
  std::string subject = "sim";
  /// In-plane move applied after selecting; default_placement(exercise) when unset.
  std::optional<Vec3> placement;
  FeedbackConfig feedback;
};

/// 4.5 s without feedback, 4.69 / 4.99 / 6.07 s for C1 / C2 / C3.
double default_cycle_time(Condition condition) noexcept;
/// Start-point offset that keeps each built-in exercise inside the simulated arm's workspace.
Vec3 default_placement(Exercise exercise) noexcept;
/// Arm used by the simulator: default segment lengths, shoulder at (0, -0.25, 0.30).
ArmGeometry simulation_arm();
/// Initial IK seed: arm slightly flexed forward with the elbow bent.
JointVector rest_pose();

struct SimulationRun {
  std::string session;
  std::vector<LogRecord> log;
  /// Hand samples as sent, local frame.
  std::vector<HandSample> samples;
  /// Trajectory after placement.
  Trajectory trajectory;
  std::size_t samples_per_cycle = 0;
};

/// Scripted session: calibrate, select, place, set CI, start, stream, stop.
/// The hand follows the reference motion plus noise.
SimulationRun run_open_loop(const SimConfig& cfg, const Trajectory& trajectory);

/// As run_open_loop, but a follower reads every feedback message and pulls
/// the hand towards the closest centerline point next to the reported
/// via-point at `gain` per second while the reported error exceeds the
/// deadband. The pull per sample is capped at the full distance. Gain 0
/// reproduces the open-loop samples exactly.
SimulationRun run_closed_loop(const SimConfig& cfg, const Trajectory& trajectory, double gain);

/// Joint angles of a hand path and of its desired path.
///
/// IK runs per sample, seeded with the previous solution of the same stream.
/// Failures raise SampleError carrying the sample index.
JointLog to_joint_log(std::span<const HandSample> path, std::span<const Vec3> desired, const ArmGeometry& g,
                      const JointVector& seed = rest_pose(), const IkOptions& ik = {});

/// What a logged session amounts to once replayed.
struct RecordedSession {
  std::string session;
  std::string subject;
  std::string exercise;
  Condition condition = Condition::NoFeedback;
  Trajectory trajectory;
  std::vector<HandSample> path;
};

RecordedSession recorded_session(std::span<const LogRecord> records, const std::string& session,
                                 const HandlerSettings& settings);

/// Error of a recorded session in either space. Joint space maps both the
/// measured and the desired hand paths through the arm model.
ErrorSummary analyze_recording(const RecordedSession& rec, ErrorSpace space, const AnalysisOptions& options,
                               const ArmGeometry& arm);

struct SweepConfig {
  std::vector<Exercise> exercises{Exercise::T1, Exercise::T2, Exercise::T3, Exercise::T4};
  std::vector<Condition> feedback_conditions{Condition::C1, Condition::C2, Condition::C3};
  std::size_t subjects = 15;
  std::uint64_t base_seed = 1;
  /// Per-subject bias is drawn from N(0, bias_sd) on each axis.
  double bias_sd = 0.008;
  double wander_sd = 0.01;
  double gain = 2.0;
  std::size_t repetitions = 5;
  ExerciseParams params;
  AnalysisOptions analysis{5, 200, {0.06, 500.0, true}};
  bool joint_space = true;
  ArmGeometry arm = simulation_arm();
  /// 0 uses the hardware concurrency.
  unsigned threads = 0;
};

/// Runs every subject on every exercise without feedback and under each
/// feedback condition. Rows come out in a fixed order independent of threading.
std::vector<ErrRow> run_sweep(const SweepConfig& cfg);

}  // namespace kinetunnel
