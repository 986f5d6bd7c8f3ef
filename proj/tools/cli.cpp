#include "cli.hpp"

#include "kinetunnel/config.hpp"
#include "kinetunnel/csv.hpp"
#include "kinetunnel/server.hpp"
#include "kinetunnel/session_log.hpp"
#include "kinetunnel/simulator.hpp"
#include "kinetunnel/stats.hpp"
#include "kinetunnel/trajectory_io.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace kinetunnel::cli {

namespace {

struct Options {
  // shared
  std::string config_path;
  std::string in_path;
  std::string out_path;

  // serve
  int tcp_port = -1;
  int ws_port = -1;
  std::string log_path;
  std::string library_dir;

  // simulate
  std::string exercise = "T1";
  std::string condition = "no";
  std::uint64_t seed = 1;
  std::vector<double> bias{0.0, 0.0, 0.0};
  // Command default when unset: 0.005 m for simulate, the sweep's own for sweep.
  std::optional<double> wander;
  double gain = 2.0;
  double cycle_time = 0.0;
  std::size_t repetitions = 5;
  double rate = 60.0;
  std::string subject = "sim";

  // analyze
  std::string log_file;
  std::string space = "ee";
  std::string session;
  std::string format = "csv";
  double radius = 0.0;
  int expected_reps = -1;

  // record
  double spacing = kDefaultSpacing;
  std::size_t window = 5;
  std::string id = "demonstration";
  std::string author = "clinician";

  // stats
  std::string compare_condition = "any";
  std::string aggregate = "none";

  // sweep
  std::size_t subjects = 15;
  bool no_joint = false;
};

ServiceConfig load_service_config(const Options& o) {
  return o.config_path.empty() ? ServiceConfig{} : load_config(o.config_path);
}

// Writes to --out when given, otherwise to the command's output stream.
void emit(const Options& o, std::ostream& out, const std::string& text) {
  if (o.out_path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(o.out_path, std::ios::binary);
  if (!f) throw Error(ErrorCode::InvalidArgument, "cannot write " + o.out_path);
  f << text;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read " + path);
  return in;
}

std::string dump_pretty(const Json& j) { return j.dump(2) + "\n"; }

Json wilcoxon_json(const stats::WilcoxonResult& w) {
  return Json{{"n", w.n},           {"w_plus", w.w_plus}, {"w_minus", w.w_minus},
              {"signed_rank_sum", w.signed_rank_sum}, {"p_value", w.p_value}, {"exact", w.exact},
              {"z", w.z}};
}

Json ols_json(const stats::OlsResult& r, const std::vector<std::string>& names) {
  Json coef = Json::object();
  const Eigen::Index offset = r.intercept ? 1 : 0;
  if (r.intercept) {
    coef["intercept"] = {{"estimate", r.coefficients[0]}, {"std_error", r.std_errors[0]}, {"p_value", r.p_values[0]}};
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    const Eigen::Index k = static_cast<Eigen::Index>(i) + offset;
    coef[names[i]] = {{"estimate", r.coefficients[k]}, {"std_error", r.std_errors[k]}, {"p_value", r.p_values[k]}};
  }
  return Json{{"coefficients", std::move(coef)}, {"r_squared", r.r_squared}, {"dof", r.dof}};
}

// ---------------------------------------------------------------------------

int cmd_serve(const Options& o, std::ostream& out) {
  ServiceConfig cfg = load_service_config(o);
  if (o.tcp_port >= 0) cfg.server.tcp_port = static_cast<std::uint16_t>(o.tcp_port);
  if (o.ws_port >= 0) cfg.server.ws_port = static_cast<std::uint16_t>(o.ws_port);
  if (!o.log_path.empty()) cfg.server.log_path = o.log_path;
  if (!o.library_dir.empty()) cfg.server.trajectory_library = o.library_dir;

  TrajectoryLibrary library = TrajectoryLibrary::with_exercises(cfg.exercises);
  if (!cfg.server.trajectory_library.empty()) library.load_directory(cfg.server.trajectory_library);

  // Block termination signals before any thread starts so only sigwait sees them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Server server(cfg, std::move(library));
  server.start();
  out << "listening tcp=" << server.tcp_port();
  if (server.ws_port()) out << " ws=" << server.ws_port();
  out << std::endl;
  int received = 0;
  sigwait(&signals, &received);
  server.stop();
  out << "stopped after " << server.connections_accepted() << " connection(s)" << std::endl;
  return kOk;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const ServiceConfig cfg = load_service_config(o);
  SimConfig sim;
  sim.exercise = parse_exercise(o.exercise);
  sim.condition = parse_condition(o.condition);
  sim.cycle_time = o.cycle_time;
  sim.noise.bias = Vec3(o.bias[0], o.bias[1], o.bias[2]);
  sim.noise.wander_sd = o.wander.value_or(0.005);
  sim.noise.seed = o.seed;
  sim.repetitions = o.repetitions;
  sim.sample_rate = o.rate;
  sim.subject = o.subject;
  sim.feedback = cfg.feedback;
  const Trajectory traj = generate_exercise(sim.exercise, cfg.exercises);
  const SimulationRun run = sim.condition == Condition::NoFeedback ? run_open_loop(sim, traj)
                                                                   : run_closed_loop(sim, traj, o.gain);
  std::ostringstream text;
  write_session_log(text, run.log);
  emit(o, out, text.str());
  return kOk;
}

int cmd_analyze(const Options& o, std::ostream& out) {
  const ServiceConfig cfg = load_service_config(o);
  const TrajectoryLibrary library = TrajectoryLibrary::with_exercises(cfg.exercises);
  const HandlerSettings settings{&library, cfg.feedback, cfg.analysis};
  AnalysisOptions analysis = cfg.analysis;
  if (o.radius > 0.0) analysis.segmentation.radius = o.radius;
  if (o.expected_reps >= 0) analysis.repetitions = static_cast<std::size_t>(o.expected_reps);
  const ArmGeometry arm = o.config_path.empty() ? simulation_arm() : cfg.arm;
  const ErrorSpace space = parse_error_space(o.space);

  const std::vector<LogRecord> records = load_session_log(o.log_file);
  std::vector<std::string> ids = o.session.empty() ? session_ids(records) : std::vector<std::string>{o.session};
  if (ids.empty()) throw Error(ErrorCode::InvalidArgument, "log holds no sessions");

  std::vector<ErrRow> rows;
  Json reports = Json::array();
  for (const std::string& id : ids) {
    const RecordedSession rec = recorded_session(records, id, settings);
    const ErrorSummary summary = analyze_recording(rec, space, analysis, arm);
    rows.push_back(to_err_row(summary));
    Json report = error_summary_to_json(summary);
    report["session"] = id;
    reports.push_back(std::move(report));
  }

  if (o.format == "json") {
    emit(o, out, dump_pretty(reports.size() == 1 ? reports[0] : reports));
  } else {
    std::ostringstream text;
    write_err_csv(text, rows);
    emit(o, out, text.str());
  }
  return kOk;
}

std::vector<HandSample> read_samples(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<HandSample> samples;
  std::string line;
  std::size_t line_no = 0;
  const bool jsonl = path.size() >= 6 && path.compare(path.size() - 6, 6, ".jsonl") == 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      if (jsonl) {
        const Json msg = Json::parse(line);
        // Session logs wrap messages; bare hand_sample lines are accepted too.
        const Json& m = msg.contains("msg") ? msg.at("msg") : msg;
        if (m.is_object() && m.value("type", "") == "hand_sample") samples.push_back(parse_hand_sample(m));
        continue;
      }
      const auto cells = split_csv_line(line);
      if (cells.size() != 4) throw Error(ErrorCode::SchemaViolation, "expected t_ms,x,y,z");
      if (line_no == 1 && cells[0] == "t_ms") continue;
      HandSample s;
      s.t_ms = std::stod(cells[0]);
      s.pos = Vec3(std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]));
      samples.push_back(s);
    } catch (const Error& e) {
      throw Error(ErrorCode::SchemaViolation, path + " line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception&) {
      throw Error(ErrorCode::SchemaViolation, path + " line " + std::to_string(line_no) + ": unreadable sample");
    }
  }
  return samples;
}

int cmd_record(const Options& o, std::ostream& out) {
  const std::vector<HandSample> samples = read_samples(o.in_path);
  const Trajectory traj = record_demonstration(samples, o.spacing, o.window, o.author, o.id);
  if (o.out_path.empty()) {
    out << serialize_trajectory(traj);
  } else {
    save_trajectory(o.out_path, traj);
  }
  return kOk;
}

int cmd_stats_sus(const Options& o, std::ostream& out) {
  std::ifstream in = open_input(o.in_path);
  const stats::QuestionnaireMatrix m = read_questionnaire_csv(in);
  std::vector<double> scores;
  for (const auto& row : m.responses) scores.push_back(stats::sus_score(row));
  Json report{{"n", scores.size()}, {"scores", scores}, {"mean", stats::mean(scores)}};
  report["sd"] = scores.size() > 1 ? Json(stats::sample_sd(scores)) : Json(nullptr);
  emit(o, out, dump_pretty(report));
  return kOk;
}

int cmd_stats_tam(const Options& o, std::ostream& out) {
  std::ifstream in = open_input(o.in_path);
  const stats::QuestionnaireMatrix m = read_questionnaire_csv(in);
  const stats::CategoryScores cats = stats::category_scores(m);

  Json report{{"subjects", m.subjects()}, {"items", m.items()}, {"cronbach_alpha", stats::cronbach_alpha(m)}};
  Json categories = Json::object();
  std::map<std::string, std::vector<double>> columns;
  for (std::size_t c = 0; c < cats.names.size(); ++c) {
    const Eigen::VectorXd col = cats.scores.col(static_cast<Eigen::Index>(c));
    std::vector<double> v(col.data(), col.data() + col.size());
    Json entry{{"items", cats.items.at(cats.names[c]).size()}, {"mean", stats::mean(v)}};
    entry["sd"] = v.size() > 1 ? Json(stats::sample_sd(v)) : Json(nullptr);
    categories[cats.names[c]] = std::move(entry);
    columns[cats.names[c]] = std::move(v);
  }
  report["categories"] = std::move(categories);

  Json correlations = Json::array();
  for (std::size_t a = 0; a < cats.names.size(); ++a) {
    for (std::size_t b = a + 1; b < cats.names.size(); ++b) {
      try {
        const auto r = stats::pearson(columns[cats.names[a]], columns[cats.names[b]]);
        correlations.push_back({{"a", cats.names[a]}, {"b", cats.names[b]}, {"r", r.r}, {"p_value", r.p_value}});
      } catch (const Error&) {
        // Constant category columns have no correlation.
      }
    }
  }
  report["correlations"] = std::move(correlations);

  // The two acceptance models, fitted when their categories are present.
  const std::vector<std::pair<std::string, std::vector<std::string>>> models{
      {"WTU", {"PU", "PEOU"}}, {"PU", {"TRI", "IND"}}};
  Json regressions = Json::object();
  for (const auto& [target, predictors] : models) {
    if (!columns.count(target)) continue;
    bool present = true;
    for (const auto& p : predictors) present = present && columns.count(p);
    if (!present) continue;
    const auto n = static_cast<Eigen::Index>(m.subjects());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(predictors.size()));
    for (std::size_t k = 0; k < predictors.size(); ++k) {
      x.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::VectorXd>(columns[predictors[k]].data(), n);
    }
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(columns[target].data(), n);
    try {
      regressions[target] = ols_json(stats::ols_regression(x, y, true), predictors);
    } catch (const Error& e) {
      regressions[target] = {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
    }
  }
  report["regressions"] = std::move(regressions);
  emit(o, out, dump_pretty(report));
  return kOk;
}

int cmd_stats_compare(const Options& o, std::ostream& out) {
  std::ifstream in = open_input(o.in_path);
  std::vector<ErrRow> rows = read_err_csv(in);
  const ErrorSpace space = parse_error_space(o.space);
  std::erase_if(rows, [&](const ErrRow& r) { return r.space != space; });
  const PairedErr pairs = o.compare_condition == "any"
                              ? pair_any_feedback(rows)
                              : pair_conditions(rows, parse_condition(o.compare_condition));

  std::vector<double> x = pairs.with_feedback;
  std::vector<double> y = pairs.baseline;
  if (o.aggregate == "subject") {
    // One pair per subject: mean over that subject's matched rows.
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_subject;
    std::vector<std::string> order;
    for (std::size_t i = 0; i < pairs.keys.size(); ++i) {
      const std::string subject = pairs.keys[i].substr(0, pairs.keys[i].find('/'));
      auto [it, inserted] = by_subject.try_emplace(subject);
      if (inserted) order.push_back(subject);
      it->second.first.push_back(pairs.with_feedback[i]);
      it->second.second.push_back(pairs.baseline[i]);
    }
    x.clear();
    y.clear();
    for (const std::string& s : order) {
      x.push_back(stats::mean(by_subject[s].first));
      y.push_back(stats::mean(by_subject[s].second));
    }
  }

  const stats::WilcoxonResult w = stats::wilcoxon_signed_rank(x, y);
  std::size_t lower = 0;
  for (std::size_t i = 0; i < x.size(); ++i) lower += x[i] < y[i] ? 1 : 0;
  Json report{{"space", std::string(to_string(space))},
              {"condition", o.compare_condition},
              {"aggregate", o.aggregate},
              {"pairs", x.size()},
              {"feedback_lower", lower},
              {"mean_feedback", stats::mean(x)},
              {"mean_baseline", stats::mean(y)},
              {"wilcoxon", wilcoxon_json(w)}};
  emit(o, out, dump_pretty(report));
  return kOk;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const ServiceConfig cfg = load_service_config(o);
  SweepConfig sweep;
  sweep.subjects = o.subjects;
  sweep.base_seed = o.seed;
  sweep.gain = o.gain;
  if (o.wander) sweep.wander_sd = *o.wander;
  sweep.params = cfg.exercises;
  sweep.joint_space = !o.no_joint;
  if (!o.config_path.empty()) sweep.arm = cfg.arm;
  std::ostringstream text;
  write_err_csv(text, run_sweep(sweep));
  emit(o, out, text.str());
  return kOk;
}

int cmd_replay(const Options& o, std::ostream& out) {
  const ServiceConfig cfg = load_service_config(o);
  const TrajectoryLibrary library = TrajectoryLibrary::with_exercises(cfg.exercises);
  const std::vector<LogRecord> records = load_session_log(o.log_file);
  const ReplayReport r = verify_replay(records, HandlerSettings{&library, cfg.feedback, cfg.analysis});
  Json report{{"sessions", r.sessions}, {"inbound", r.inbound}, {"outbound", r.outbound}, {"identical", r.identical}};
  if (!r.identical) report["mismatch"] = r.mismatch;
  emit(o, out, dump_pretty(report));
  return r.identical ? kOk : kDataError;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trajectory tunnel session engine, simulator and analysis tools", "kinetunnel"};
  app.require_subcommand(1);
  Options o;

  auto* serve = app.add_subcommand("serve", "Run the session server until SIGINT/SIGTERM");
  serve->add_option("--port", o.tcp_port, "TCP port for line-delimited JSON (0 picks a free one)")
      ->check(CLI::Range(0, 65535));
  serve->add_option("--ws-port", o.ws_port, "WebSocket port")->check(CLI::Range(0, 65535));
  serve->add_option("--config", o.config_path, "Service config file")->check(CLI::ExistingFile);
  serve->add_option("--log", o.log_path, "Append the session log here");
  serve->add_option("--library", o.library_dir, "Directory of trajectory documents")->check(CLI::ExistingDirectory);

  auto* simulate = app.add_subcommand("simulate", "Write a simulated session log");
  simulate->add_option("--exercise", o.exercise, "T1..T4")->check(CLI::IsMember({"T1", "T2", "T3", "T4"}));
  simulate->add_option("--condition", o.condition, "no|c1|c2|c3")
      ->check(CLI::IsMember({"no", "c1", "c2", "c3"}, CLI::ignore_case));
  simulate->add_option("--seed", o.seed, "Noise seed");
  simulate->add_option("--bias", o.bias, "Constant hand offset x,y,z in meters")->expected(3)->delimiter(',');
  simulate->add_option("--wander", o.wander, "Wander standard deviation in meters")->check(CLI::NonNegativeNumber);
  simulate->add_option("--gain", o.gain, "Follower gain per second (feedback conditions)")
      ->check(CLI::NonNegativeNumber);
  simulate->add_option("--cycle-time", o.cycle_time, "Seconds per repetition (0 = condition default)")
      ->check(CLI::NonNegativeNumber);
  simulate->add_option("--reps", o.repetitions, "Repetitions")->check(CLI::PositiveNumber);
  simulate->add_option("--rate", o.rate, "Sample rate in Hz")->check(CLI::PositiveNumber);
  simulate->add_option("--subject", o.subject, "Subject id written to the log");
  simulate->add_option("--config", o.config_path, "Service config file")->check(CLI::ExistingFile);
  simulate->add_option("--out", o.out_path, "Output log (default stdout)");

  auto* analyze = app.add_subcommand("analyze", "Compute ERR for the sessions of a log");
  analyze->add_option("log", o.log_file, "Session log (JSONL)")->required()->check(CLI::ExistingFile);
  analyze->add_option("--space", o.space, "ee|joint")->check(CLI::IsMember({"ee", "joint"}));
  analyze->add_option("--session", o.session, "Only this session id");
  analyze->add_option("--format", o.format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
  analyze->add_option("--radius", o.radius, "Start-sphere radius for segmentation in meters")
      ->check(CLI::PositiveNumber);
  analyze->add_option("--reps", o.expected_reps, "Expected repetitions (0 = any)")->check(CLI::NonNegativeNumber);
  analyze->add_option("--config", o.config_path, "Service config file (arm and analysis settings)")
      ->check(CLI::ExistingFile);
  analyze->add_option("--out", o.out_path, "Output file (default stdout)");

  auto* record = app.add_subcommand("record", "Turn a demonstration into a trajectory document");
  record->add_option("--in", o.in_path, "Samples: CSV t_ms,x,y,z or JSONL hand_sample messages")
      ->required()
      ->check(CLI::ExistingFile);
  record->add_option("--spacing", o.spacing, "Via-point spacing in meters")->check(CLI::PositiveNumber);
  record->add_option("--window", o.window, "Smoothing window in samples")->check(CLI::PositiveNumber);
  record->add_option("--id", o.id, "Trajectory id");
  record->add_option("--author", o.author, "Author recorded in the metadata");
  record->add_option("--out", o.out_path, "Trajectory document (default stdout)");

  auto* stats_cmd = app.add_subcommand("stats", "Questionnaire and error statistics");
  stats_cmd->require_subcommand(1);
  auto* sus = stats_cmd->add_subcommand("sus", "SUS scores of a questionnaire CSV");
  auto* tam = stats_cmd->add_subcommand("tam", "Reliability, category scores, correlations and regressions");
  auto* compare = stats_cmd->add_subcommand("compare", "Wilcoxon test of feedback vs no-feedback ERR");
  for (auto* sub : {sus, tam, compare}) {
    sub->add_option("--in", o.in_path, "Input CSV")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out_path, "Report JSON (default stdout)");
  }
  compare->add_option("--space", o.space, "ee|joint")->check(CLI::IsMember({"ee", "joint"}));
  compare->add_option("--condition", o.compare_condition, "c1|c2|c3|any")
      ->check(CLI::IsMember({"c1", "c2", "c3", "any"}));
  compare->add_option("--aggregate", o.aggregate, "none|subject")->check(CLI::IsMember({"none", "subject"}));

  auto* sweep = app.add_subcommand("sweep", "Simulate every subject, exercise and condition; write the ERR CSV");
  sweep->add_option("--subjects", o.subjects, "Number of simulated subjects")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", o.seed, "Base seed");
  sweep->add_option("--gain", o.gain, "Follower gain per second")->check(CLI::NonNegativeNumber);
  sweep->add_option("--wander", o.wander, "Wander standard deviation in meters")->check(CLI::NonNegativeNumber);
  sweep->add_flag("--no-joint", o.no_joint, "Skip joint-space analysis");
  sweep->add_option("--config", o.config_path, "Service config file")->check(CLI::ExistingFile);
  sweep->add_option("--out", o.out_path, "Output CSV (default stdout)");

  auto* replay = app.add_subcommand("replay", "Check that a log replays to identical responses");
  replay->add_option("log", o.log_file, "Session log (JSONL)")->required()->check(CLI::ExistingFile);
  replay->add_option("--config", o.config_path, "Service config file")->check(CLI::ExistingFile);
  replay->add_option("--out", o.out_path, "Report JSON (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*serve) return cmd_serve(o, out);
    if (*simulate) return cmd_simulate(o, out);
    if (*analyze) return cmd_analyze(o, out);
    if (*record) return cmd_record(o, out);
    if (*sus) return cmd_stats_sus(o, out);
    if (*tam) return cmd_stats_tam(o, out);
    if (*compare) return cmd_stats_compare(o, out);
    if (*sweep) return cmd_sweep(o, out);
    if (*replay) return cmd_replay(o, out);
  } catch (const SegmentationError& e) {
    err << "error: SegmentationFailed: " << e.what() << "\n";
    return kDataError;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsageError;
}

}  // namespace kinetunnel::cli
