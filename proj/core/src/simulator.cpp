#include "kinetunnel/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

namespace kinetunnel {

namespace {

double time_ms(std::size_t j, double rate) { return static_cast<double>(j) * 1000.0 / rate; }

std::string session_name(const SimConfig& cfg) {
  return cfg.subject + "-" + std::string(to_string(cfg.exercise)) + "-" + std::string(to_string(cfg.condition));
}

// Closest centerline point on the two polyline segments around via-point `k`.
Vec3 centerline_point(const std::vector<Vec3>& via, std::size_t k, const Vec3& p) {
  Vec3 best = via[k];
  double best_d = (p - best).squaredNorm();
  for (std::size_t a : {k > 0 ? k - 1 : k, k}) {
    const std::size_t b = a + 1;
    if (b >= via.size()) continue;
    const Vec3 ab = via[b] - via[a];
    const double len2 = ab.squaredNorm();
    if (len2 == 0.0) continue;
    const double w = std::clamp((p - via[a]).dot(ab) / len2, 0.0, 1.0);
    const Vec3 q = via[a] + w * ab;
    const double d = (p - q).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = q;
    }
  }
  return best;
}

Json point_args(double x, double y, double z) { return Json{{"point_m", Json::array({x, y, z})}}; }

SimulationRun simulate(const SimConfig& cfg, const Trajectory& trajectory, double gain, bool closed_loop) {
  const double cycle_time = cfg.cycle_time > 0.0 ? cfg.cycle_time : default_cycle_time(cfg.condition);
  if (!(cfg.sample_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample rate must be positive");
  if (cfg.repetitions == 0) throw Error(ErrorCode::InvalidArgument, "at least one repetition is needed");
  if (!(gain >= 0.0)) throw Error(ErrorCode::InvalidArgument, "gain must be non-negative");

  SimulationRun run;
  run.session = session_name(cfg);
  HandlerSettings settings;
  settings.feedback = cfg.feedback;
  SessionRecorder rec(run.session, settings);

  const auto expect_ok = [](const std::vector<Json>& replies) {
    for (const Json& m : replies) {
      if (m.at("type") == "error") throw Error(ErrorCode::InvalidArgument, m.at("message").get<std::string>());
    }
    return replies;
  };

  // The calibration triangle spans the world axes, so local and world coordinates coincide.
  expect_ok(rec.send(command_message("calibrate", point_args(0.0, 0.0, 0.0)), 0.0));
  expect_ok(rec.send(command_message("calibrate", point_args(1.0, 0.0, 0.0)), 0.0));
  expect_ok(rec.send(command_message("calibrate", point_args(0.0, 1.0, 0.0)), 0.0));
  expect_ok(rec.send(command_message("select", Json{{"trajectory", trajectory_to_json(trajectory)}}), 0.0));
  const Vec3 offset = cfg.placement.value_or(default_placement(cfg.exercise));
  expect_ok(rec.send(command_message("place_move", Json{{"dx_m", offset.x()}, {"dy_m", offset.y()}}), 0.0));
  if (cfg.condition != Condition::NoFeedback) {
    const ConfidenceInterval ci = cfg.condition == Condition::C1   ? ConfidenceInterval::C1
                                  : cfg.condition == Condition::C2 ? ConfidenceInterval::C2
                                                                   : ConfidenceInterval::C3;
    expect_ok(rec.send(command_message("set_ci", Json{{"ci", std::string(to_string(ci))}}), 0.0));
  }
  expect_ok(rec.send(command_message("start", Json{{"subject", cfg.subject},
                                                   {"condition", std::string(to_string(cfg.condition))}}),
                     0.0));

  run.trajectory = rec.handler().session().placed_trajectory();
  const ReferenceMotion reference(run.trajectory);
  const double tunnel_radius = allowed_radius(rec.handler().session().ci());
  const double deadband = cfg.feedback.deadband_fraction * tunnel_radius;

  const auto spc = static_cast<std::size_t>(std::max<long long>(2, std::llround(cycle_time * cfg.sample_rate)));
  run.samples_per_cycle = spc;
  const std::size_t total = cfg.repetitions * spc + 1;
  const double dt = 1.0 / cfg.sample_rate;
  const double decay = std::exp(-cfg.noise.theta * dt);
  const double kick = cfg.noise.wander_sd * std::sqrt(1.0 - decay * decay);
  const double pull = std::min(gain * dt, 1.0);

  std::mt19937_64 rng(cfg.noise.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec3 wander = Vec3::Zero();
  Vec3 correction = Vec3::Zero();
  run.samples.reserve(total);

  for (std::size_t j = 0; j < total; ++j) {
    if (j > 0) {
      const double nx = normal(rng);
      const double ny = normal(rng);
      const double nz = normal(rng);
      wander = decay * wander + kick * Vec3(nx, ny, nz);
    }
    const std::size_t k = std::min(j / spc, cfg.repetitions - 1);
    const double t = time_ms(j, cfg.sample_rate);
    const double phase = cycle_phase(t, time_ms(k * spc, cfg.sample_rate), time_ms((k + 1) * spc, cfg.sample_rate));
    HandSample sample{t, reference.at(phase) + cfg.noise.bias + wander + correction};
    run.samples.push_back(sample);

    const std::vector<Json> replies = expect_ok(rec.send(hand_sample_message(sample), t));
    if (closed_loop) {
      const FeedbackUpdate fb = parse_feedback(replies.front());
      if (fb.current_error > deadband) {
        const Vec3 target = centerline_point(run.trajectory.via_points, fb.nearest_index, sample.pos);
        correction += pull * (target - sample.pos);
      }
    }
  }
  expect_ok(rec.send(command_message("stop"), run.samples.back().t_ms));
  run.log = rec.records();
  return run;
}

}  // namespace

double default_cycle_time(Condition condition) noexcept {
  switch (condition) {
    case Condition::NoFeedback: return 4.5;
    case Condition::C1: return 4.69;
    case Condition::C2: return 4.99;
    case Condition::C3: return 6.07;
  }
  return 4.5;
}

Vec3 default_placement(Exercise exercise) noexcept {
  switch (exercise) {
    case Exercise::T1: return {0.15, -0.10, 0.0};
    case Exercise::T2: return {0.15, 0.10, 0.0};
    case Exercise::T3: return {-0.20, -0.20, 0.0};
    case Exercise::T4: return {0.0, -0.20, 0.0};
  }
  return Vec3::Zero();
}

ArmGeometry simulation_arm() {
  ArmGeometry g;
  g.shoulder_origin = Vec3(0.0, -0.25, 0.30);
  return g;
}

JointVector rest_pose() { return {0.0, 0.8, 0.0, 1.0}; }

SimulationRun run_open_loop(const SimConfig& cfg, const Trajectory& trajectory) {
  if (cfg.condition != Condition::NoFeedback) {
    throw Error(ErrorCode::InvalidArgument, "open-loop runs use the no-feedback condition");
  }
  return simulate(cfg, trajectory, 0.0, false);
}

SimulationRun run_closed_loop(const SimConfig& cfg, const Trajectory& trajectory, double gain) {
  if (cfg.condition == Condition::NoFeedback) {
    throw Error(ErrorCode::InvalidArgument, "closed-loop runs need a feedback condition");
  }
  return simulate(cfg, trajectory, gain, true);
}

JointLog to_joint_log(std::span<const HandSample> path, std::span<const Vec3> desired, const ArmGeometry& g,
                      const JointVector& seed, const IkOptions& ik) {
  if (path.size() != desired.size()) throw Error(ErrorCode::BadLength, "path and desired path differ in length");
  JointLog log;
  log.t_ms.reserve(path.size());
  log.actual.reserve(path.size());
  log.desired.reserve(path.size());
  JointVector qa = seed;
  JointVector qd = seed;
  for (std::size_t i = 0; i < path.size(); ++i) {
    try {
      qa = solve_ik(g, path[i].pos, qa, ik).q;
      qd = solve_ik(g, desired[i], qd, ik).q;
    } catch (const Error& e) {
      throw SampleError(e.code(), i, "sample " + std::to_string(i) + ": " + e.what());
    }
    log.t_ms.push_back(path[i].t_ms);
    log.actual.push_back(qa);
    log.desired.push_back(qd);
  }
  return log;
}

RecordedSession recorded_session(std::span<const LogRecord> records, const std::string& session,
                                 const HandlerSettings& settings) {
  const auto handler = replay_session(records, session, settings);
  const Session& s = handler->session();
  if (!s.selected()) throw Error(ErrorCode::InvalidArgument, "session " + session + " never selected a trajectory");
  RecordedSession rec;
  rec.session = session;
  rec.subject = handler->subject();
  rec.exercise = handler->exercise_label();
  rec.condition = handler->condition().value_or(condition_for(s.ci()));
  rec.trajectory = s.placed_trajectory();
  rec.path = s.tracked_path();
  return rec;
}

ErrorSummary analyze_recording(const RecordedSession& rec, ErrorSpace space, const AnalysisOptions& options,
                               const ArmGeometry& arm) {
  ErrorSummary out;
  if (space == ErrorSpace::EndEffector) {
    out = analyze_end_effector(rec.path, rec.trajectory, options);
  } else {
    const std::vector<Segment> segments = segment_repetitions(
        rec.path, rec.trajectory.start_point(), options.repetitions, options.segmentation);
    if (segments.empty()) throw SegmentationError(0, options.repetitions);
    // Only the analysed span needs joint angles.
    const std::size_t first = segments.front().first;
    const std::size_t last = segments.back().last;
    const std::vector<Vec3> desired = desired_positions(rec.path, rec.trajectory, segments);
    const std::span<const HandSample> span_path(rec.path.data() + first, last - first + 1);
    const std::span<const Vec3> span_desired(desired.data() + first, last - first + 1);
    const JointLog log = to_joint_log(span_path, span_desired, arm);
    std::vector<Segment> shifted = segments;
    for (Segment& s : shifted) {
      s.first -= first;
      s.last -= first;
    }
    out = analyze_joint(log, shifted, options.samples);
  }
  out.subject_id = rec.subject;
  out.exercise_id = rec.exercise;
  out.condition = rec.condition;
  return out;
}

std::vector<ErrRow> run_sweep(const SweepConfig& cfg) {
  struct Job {
    std::size_t subject;
    Exercise exercise;
    Condition condition;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < cfg.subjects; ++s) {
    for (Exercise ex : cfg.exercises) {
      jobs.push_back({s, ex, Condition::NoFeedback});
      for (Condition c : cfg.feedback_conditions) jobs.push_back({s, ex, c});
    }
  }

  std::vector<Trajectory> library;
  for (Exercise ex : cfg.exercises) library.push_back(generate_exercise(ex, cfg.params));
  const auto trajectory_of = [&](Exercise ex) -> const Trajectory& {
    const auto it = std::find(cfg.exercises.begin(), cfg.exercises.end(), ex);
    return library[static_cast<std::size_t>(it - cfg.exercises.begin())];
  };

  const std::size_t per_job = cfg.joint_space ? 2 : 1;
  std::vector<ErrRow> rows(jobs.size() * per_job);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  const auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const Job& job = jobs[i];
        // Subject traits come from their own stream so every condition shares them.
        std::mt19937_64 subject_rng(cfg.base_seed * 1000003ULL + job.subject);
        std::normal_distribution<double> bias(0.0, cfg.bias_sd);
        SimConfig sim;
        sim.exercise = job.exercise;
        sim.condition = job.condition;
        sim.repetitions = cfg.repetitions;
        char name[16];
        std::snprintf(name, sizeof name, "s%02zu", job.subject + 1);
        sim.subject = name;
        const double bx = bias(subject_rng);
        const double by = bias(subject_rng);
        const double bz = bias(subject_rng);
        sim.noise.bias = Vec3(bx, by, bz);
        sim.noise.wander_sd = cfg.wander_sd;
        sim.noise.seed = subject_rng();
        const Trajectory& traj = trajectory_of(job.exercise);
        const SimulationRun run = job.condition == Condition::NoFeedback
                                      ? run_open_loop(sim, traj)
                                      : run_closed_loop(sim, traj, cfg.gain);
        RecordedSession rec;
        rec.session = run.session;
        rec.subject = sim.subject;
        rec.exercise = std::string(to_string(job.exercise));
        rec.condition = job.condition;
        rec.trajectory = run.trajectory;
        rec.path = run.samples;
        rows[i * per_job] = to_err_row(analyze_recording(rec, ErrorSpace::EndEffector, cfg.analysis, cfg.arm));
        if (cfg.joint_space) {
          rows[i * per_job + 1] = to_err_row(analyze_recording(rec, ErrorSpace::Joint, cfg.analysis, cfg.arm));
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, jobs.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

}  // namespace kinetunnel
