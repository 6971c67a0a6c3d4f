// Command-line pipeline: preprocess -> scan -> traverse -> report.
// Exit codes: 0 success, 2 usage error, 1 runtime failure.

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rawlskm/rawlskm.hpp"

namespace {

using nlohmann::ordered_json;

std::string env_name(const std::string& subcommand, std::string flag) {
  for (char& ch : flag) {
    if (ch == '-') ch = '_';
    ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  }
  std::string sub = subcommand;
  for (char& ch : sub) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return "RAWLSKM_" + sub + "_" + flag;
}

// Every option gets an environment-variable override named
// RAWLSKM_<SUBCOMMAND>_<FLAG> (dashes become underscores).
CLI::Option* opt_env(CLI::App* sub, CLI::Option* opt, const std::string& flag) {
  return opt->envname(env_name(sub->get_name(), flag));
}

const CLI::Validator kPercentRange(
    [](std::string& value) -> std::string {
      char* end = nullptr;
      const double v = std::strtod(value.c_str(), &end);
      if (end == value.c_str() || *end != '\0') return "not a number: " + value;
      if (!(v > 0.0 && v <= 100.0)) return "must be in (0, 100]: " + value;
      return {};
    },
    "PERCENT");

rawlskm::LagSemantics parse_lag_mode(const std::string& mode) {
  if (mode == "maximin") return rawlskm::LagSemantics::maximin();
  if (mode == "pinned:0") return rawlskm::LagSemantics::pinned(0);
  if (mode == "pinned:1") return rawlskm::LagSemantics::pinned(1);
  throw std::runtime_error("unknown lag mode '" + mode +
                           "' (expected maximin, pinned:0, or pinned:1)");
}

ordered_json point_to_json(const rawlskm::UtilityPoint& p) {
  ordered_json j;
  j["U0"] = p.group_utility[0];
  j["U1"] = p.group_utility[1];
  j["lag"] = p.lag_utility;
  j["mag"] = p.mag_utility;
  j["overall"] = p.overall;
  j["lag_group"] = rawlskm::to_string(p.lag_group);
  return j;
}

// ---------------------------------------------------------------------------
// preprocess
// ---------------------------------------------------------------------------

struct PreprocessArgs {
  std::string input;
  std::string out;
  std::string stats_out;
  std::string group0 = "Female";
  std::string group1 = "Male";
  std::uint64_t seed = 7;
  std::size_t per_class = 500;
};

int run_preprocess(const PreprocessArgs& args) {
  const std::string csv = rawlskm::read_file_text(args.input);
  const rawlskm::IngestResult ingest = rawlskm::ingest_adult(csv);
  std::vector<std::string> warnings;
  const rawlskm::EncodedAdult encoded =
      rawlskm::encode(ingest.records, {args.group0, args.group1}, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  const rawlskm::Dataset sample =
      rawlskm::sample_for_parity(encoded, args.per_class, args.seed);
  rawlskm::write_dataset_file(args.out, sample);

  ordered_json stats;
  stats["input"] = args.input;
  stats["rows_ingested"] = ingest.records.size();
  stats["rows_dropped_missing"] = ingest.dropped_missing;
  stats["rows_dropped_unparseable"] = ingest.dropped_unparseable;
  stats["feature_count"] = sample.feature_count;
  stats["delta"] = sample.delta;
  stats["examples"] = sample.size();
  const auto counts = sample.group_counts();
  stats["group_counts"] = {{sample.group_labels[0], counts[0]},
                           {sample.group_labels[1], counts[1]}};
  stats["minority_group"] = sample.group_labels[static_cast<std::size_t>(sample.minority_group())];
  ordered_json scaling = ordered_json::array();
  for (const rawlskm::AttributeBlock& block : sample.layout) {
    ordered_json b;
    b["name"] = block.name;
    if (block.kind == rawlskm::AttributeKind::continuous) {
      b["min"] = block.min;
      b["max"] = block.max;
    } else {
      b["levels"] = block.levels.size();
    }
    scaling.push_back(std::move(b));
  }
  stats["attributes"] = std::move(scaling);
  stats["config"] = {{"per_class", args.per_class},
                     {"seed", args.seed},
                     {"group0", args.group0},
                     {"group1", args.group1}};
  const std::string text = stats.dump(2) + "\n";
  std::cout << text;
  if (!args.stats_out.empty()) rawlskm::write_file_text(args.stats_out, text);
  return 0;
}

// ---------------------------------------------------------------------------
// scan
// ---------------------------------------------------------------------------

struct ScanArgs {
  std::string dataset_path;
  std::string out_dir;
  int k = 5;
  std::size_t runs = 500;
  std::uint64_t seed = 1;
  std::string filter = "minority-lag";
  std::string init = "random-examples";
  int max_iters = 300;
  int threads = 1;
  bool svg = false;
};

int run_scan(const ScanArgs& args) {
  const rawlskm::Dataset dataset = rawlskm::read_dataset_file(args.dataset_path);
  const std::string dataset_hash = rawlskm::file_hash(args.dataset_path);
  rawlskm::KMeansConfig kconfig;
  kconfig.max_iters = args.max_iters;
  if (args.init == "random-examples") {
    kconfig.init = rawlskm::InitMethod::random_examples;
  } else if (args.init == "kmeans++") {
    kconfig.init = rawlskm::InitMethod::kmeans_plus_plus;
  } else {
    throw std::runtime_error("unknown init '" + args.init +
                             "' (expected random-examples or kmeans++)");
  }
  const rawlskm::ScanResult result =
      rawlskm::scan(dataset, args.k, args.runs, args.seed,
                    rawlskm::parse_scan_filter(args.filter), args.threads, kconfig);

  std::filesystem::create_directories(args.out_dir);
  const auto path = [&](const char* name) {
    return (std::filesystem::path(args.out_dir) / name).string();
  };

  std::vector<rawlskm::PointsRow> rows;
  rows.reserve(result.retained.size());
  for (const rawlskm::ScanRecord& rec : result.retained) {
    rows.push_back(rawlskm::PointsRow{rec.seed, rec.point});
  }
  rawlskm::write_points_csv(path("points.csv"), rows);

  const rawlskm::ScanRecord& utilitarian = result.retained[result.utilitarian_index];
  const rawlskm::ScanRecord& rawlsian = result.retained[result.approx_rawlsian_index];
  rawlskm::write_assignment_file(path("utilitarian.json"), utilitarian.assignment,
                                 utilitarian.seed);
  rawlskm::write_assignment_file(path("approx_rawlsian.json"), rawlsian.assignment,
                                 rawlsian.seed);

  ordered_json summary;
  summary["dataset_hash"] = dataset_hash;
  summary["total_runs"] = result.total_runs;
  summary["retained_runs"] = result.retained.size();
  summary["filter"] = rawlskm::to_string(result.filter);
  summary["minority_group"] = result.minority_group;
  summary["lag_group_runs"] = {{"group0", result.lag_group_runs[0]},
                               {"group1", result.lag_group_runs[1]},
                               {"tie", result.lag_tie_runs}};
  summary["utilitarian"] = {{"index", result.utilitarian_index},
                            {"seed", utilitarian.seed},
                            {"point", point_to_json(utilitarian.point)}};
  summary["approx_rawlsian"] = {{"index", result.approx_rawlsian_index},
                                {"seed", rawlsian.seed},
                                {"point", point_to_json(rawlsian.point)}};
  summary["config"] = {{"subcommand", "scan"},
                       {"dataset", args.dataset_path},
                       {"k", args.k},
                       {"runs", args.runs},
                       {"seed", args.seed},
                       {"filter", args.filter},
                       {"init", args.init},
                       {"max_iters", args.max_iters},
                       {"threads", args.threads}};
  rawlskm::write_file_text(path("summary.json"), summary.dump(2) + "\n");

  if (args.svg) {
    rawlskm::PlotSeries scatter;
    scatter.name = "scan";
    for (const rawlskm::PointsRow& row : rows) {
      scatter.points.push_back(
          {row.point.mag_utility, row.point.lag_utility, row.point.overall});
    }
    std::vector<rawlskm::PlotMarker> marks;
    marks.push_back({utilitarian.point.mag_utility, utilitarian.point.lag_utility,
                     "utilitarian"});
    marks.push_back({rawlsian.point.mag_utility, rawlsian.point.lag_utility,
                     "approx Rawlsian"});
    rawlskm::write_file_text(path("scan.svg"), rawlskm::render_utility_svg({scatter}, marks));
  }

  std::cout << "scan: " << result.retained.size() << "/" << result.total_runs
            << " runs retained; utilitarian seed " << utilitarian.seed << " (overall "
            << rawlskm::format_double(utilitarian.point.overall) << "), approx-Rawlsian seed "
            << rawlsian.seed << " (lag " << rawlskm::format_double(rawlsian.point.lag_utility)
            << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------
// traverse
// ---------------------------------------------------------------------------

struct TraverseArgs {
  std::string dataset_path;
  std::string start_path;
  std::string out;
  std::string final_out;
  std::string metadata_out;
  std::string svg_out;
  std::string points_path;  // optional scan scatter behind the svg
  std::string dump_candidates;
  std::string op_name = "r1";
  std::string lag_mode = "maximin";
  double p_pct = 5.0;
  double q_pct = 5.0;
  std::size_t cap = 2000;
  int threads = 1;
  std::size_t wasted_pairs_sample = 0;
  std::uint64_t wasted_pairs_seed = 1;
};

int run_traverse(const TraverseArgs& args) {
  const rawlskm::Dataset dataset = rawlskm::read_dataset_file(args.dataset_path);
  const std::string dataset_hash = rawlskm::file_hash(args.dataset_path);
  const rawlskm::LoadedAssignment start =
      rawlskm::read_assignment_file(args.start_path, dataset);

  rawlskm::TraverseConfig config;
  config.op_kind = rawlskm::parse_operator_kind(args.op_name);
  config.prune.p_pct = args.p_pct;
  config.prune.q_pct = args.q_pct;
  config.prune.validate();
  config.iteration_cap = args.cap;
  config.semantics = parse_lag_mode(args.lag_mode);
  config.threads = args.threads;

  const rawlskm::UtilityState start_state = rawlskm::evaluate(dataset, start.assignment);

  if (!args.dump_candidates.empty()) {
    const std::vector<rawlskm::CandidateEvaluation> candidates =
        config.op_kind == rawlskm::OperatorKind::r1
            ? rawlskm::generate_r1(dataset, start_state, start.assignment, config.semantics,
                                   config.threads)
            : rawlskm::generate_r2(dataset, start_state, start.assignment, config.prune,
                                   config.semantics, config.threads);
    rawlskm::write_candidates_csv(args.dump_candidates, candidates);
  }

  std::optional<rawlskm::PairSampleEstimate> wasted;
  if (args.wasted_pairs_sample > 0) {
    wasted = rawlskm::estimate_lag_lowering_pairs(dataset, start_state, start.assignment,
                                                  args.wasted_pairs_sample,
                                                  args.wasted_pairs_seed, config.semantics);
  }

  const rawlskm::TraverseResult result = rawlskm::traverse(dataset, start.assignment, config);
  rawlskm::write_trajectory_csv(args.out, result.trajectory);

  const std::string final_path =
      args.final_out.empty() ? args.out + ".final.json" : args.final_out;
  rawlskm::write_assignment_file(final_path, result.final_assignment, start.seed);

  const rawlskm::UtilityPoint& end = result.trajectory.steps.empty()
                                         ? result.trajectory.start
                                         : result.trajectory.steps.back().point;
  ordered_json meta;
  meta["dataset_hash"] = dataset_hash;
  meta["start_seed"] = start.seed;
  meta["k"] = start.assignment.k;
  meta["iterations"] = result.trajectory.steps.size();
  meta["termination"] = rawlskm::to_string(result.trajectory.reason);
  meta["start_point"] = point_to_json(result.trajectory.start);
  meta["final_point"] = point_to_json(end);
  meta["lag_mag_gap_at_termination"] = end.mag_utility - end.lag_utility;
  if (wasted) {
    meta["wasted_pairs"] = {{"sample_size", wasted->sample_size},
                            {"lag_lowering", wasted->lag_lowering},
                            {"invalid", wasted->invalid},
                            {"fraction", wasted->fraction}};
  }
  meta["config"] = {{"subcommand", "traverse"},
                    {"dataset", args.dataset_path},
                    {"start", args.start_path},
                    {"operator", args.op_name},
                    {"p", args.p_pct},
                    {"q", args.q_pct},
                    {"cap", args.cap},
                    {"lag_mode", args.lag_mode},
                    {"threads", args.threads}};
  const std::string meta_path =
      args.metadata_out.empty() ? args.out + ".meta.json" : args.metadata_out;
  rawlskm::write_file_text(meta_path, meta.dump(2) + "\n");

  if (!args.svg_out.empty()) {
    std::vector<rawlskm::PlotSeries> series;
    if (!args.points_path.empty()) {
      rawlskm::PlotSeries scatter;
      scatter.name = "scan";
      for (const rawlskm::PointsRow& row : rawlskm::read_points_csv(args.points_path)) {
        scatter.points.push_back(
            {row.point.mag_utility, row.point.lag_utility, row.point.overall});
      }
      series.push_back(std::move(scatter));
    }
    rawlskm::PlotSeries traj;
    traj.name = args.op_name;
    traj.stroke = config.op_kind == rawlskm::OperatorKind::r1 ? "#e08020" : "#2e8b40";
    traj.connect = true;
    traj.points.push_back({result.trajectory.start.mag_utility,
                           result.trajectory.start.lag_utility,
                           result.trajectory.start.overall});
    for (const rawlskm::TrajectoryStep& step : result.trajectory.steps) {
      traj.points.push_back(
          {step.point.mag_utility, step.point.lag_utility, step.point.overall});
    }
    series.push_back(std::move(traj));
    rawlskm::write_file_text(args.svg_out, rawlskm::render_utility_svg(series, {}));
  }

  std::cout << "traverse: " << result.trajectory.steps.size() << " iterations ("
            << rawlskm::to_string(result.trajectory.reason) << "); lag "
            << rawlskm::format_double(result.trajectory.start.lag_utility) << " -> "
            << rawlskm::format_double(end.lag_utility) << "; |lag-mag| at termination "
            << rawlskm::format_double(end.mag_utility - end.lag_utility) << "\n";
  if (wasted) {
    std::cout << "wasted pairs: " << wasted->lag_lowering << "/" << wasted->sample_size
              << " lag-lowering (fraction " << rawlskm::format_double(wasted->fraction)
              << ", invalid " << wasted->invalid << ")\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string points_path;
  std::vector<std::string> trajectories;
  std::string out;
};

int run_report(const ReportArgs& args) {
  std::vector<rawlskm::PlotSeries> series;
  std::vector<rawlskm::PlotMarker> marks;

  if (!args.points_path.empty()) {
    const std::vector<rawlskm::PointsRow> rows = rawlskm::read_points_csv(args.points_path);
    rawlskm::PlotSeries scatter;
    scatter.name = "scan";
    std::optional<std::size_t> best_overall;
    std::optional<std::size_t> best_lag;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const rawlskm::UtilityPoint& p = rows[i].point;
      scatter.points.push_back({p.mag_utility, p.lag_utility, p.overall});
      if (!best_overall || p.overall > rows[*best_overall].point.overall) best_overall = i;
      if (!best_lag || p.lag_utility > rows[*best_lag].point.lag_utility) best_lag = i;
    }
    if (best_overall) {
      marks.push_back({rows[*best_overall].point.mag_utility,
                       rows[*best_overall].point.lag_utility, "utilitarian"});
    }
    if (best_lag && best_lag != best_overall) {
      marks.push_back({rows[*best_lag].point.mag_utility, rows[*best_lag].point.lag_utility,
                       "approx Rawlsian"});
    }
    series.push_back(std::move(scatter));
  }

  static const char* kStrokes[] = {"#e08020", "#2e8b40", "#3060c0", "#a040a0"};
  for (std::size_t t = 0; t < args.trajectories.size(); ++t) {
    const std::vector<rawlskm::TrajectoryRow> rows =
        rawlskm::read_trajectory_csv(args.trajectories[t]);
    rawlskm::PlotSeries traj;
    traj.name = std::filesystem::path(args.trajectories[t]).stem().string();
    traj.stroke = kStrokes[t % 4];
    traj.connect = true;
    for (const rawlskm::TrajectoryRow& row : rows) {
      traj.points.push_back({row.point.mag_utility, row.point.lag_utility, row.point.overall});
    }
    series.push_back(std::move(traj));
  }

  rawlskm::write_file_text(args.out, rawlskm::render_utility_svg(series, marks));
  std::cout << "report: wrote " << args.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rawlsian postprocessing for k-means cluster assignments"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  CLI::App* sub_pre = app.add_subcommand(
      "preprocess", "Ingest an Adult-format CSV, encode, and draw the class-balanced sample");
  opt_env(sub_pre, sub_pre->add_option("--input", pre.input, "Adult-format CSV")->required(),
          "input");
  opt_env(sub_pre, sub_pre->add_option("--out", pre.out, "dataset file to write")->required(),
          "out");
  opt_env(sub_pre,
          sub_pre->add_option("--per-class", pre.per_class, "examples drawn per predictor class")
              ->check(CLI::PositiveNumber)
              ->capture_default_str(),
          "per-class");
  opt_env(sub_pre,
          sub_pre->add_option("--seed", pre.seed, "sampling seed")->capture_default_str(),
          "seed");
  opt_env(sub_pre,
          sub_pre->add_option("--group0", pre.group0, "sensitive value mapped to group 0")
              ->capture_default_str(),
          "group0");
  opt_env(sub_pre,
          sub_pre->add_option("--group1", pre.group1, "sensitive value mapped to group 1")
              ->capture_default_str(),
          "group1");
  opt_env(sub_pre, sub_pre->add_option("--stats", pre.stats_out, "also write the stats JSON here"),
          "stats");

  ScanArgs scn;
  CLI::App* sub_scan = app.add_subcommand(
      "scan", "Run seeded k-means many times and map each run into the utility space");
  opt_env(sub_scan, sub_scan->add_option("--dataset", scn.dataset_path, "dataset file")->required(),
          "dataset");
  opt_env(sub_scan, sub_scan->add_option("--out", scn.out_dir, "output directory")->required(),
          "out");
  opt_env(sub_scan,
          sub_scan->add_option("--k", scn.k, "cluster count")->check(CLI::Range(1, 1000000))
              ->capture_default_str(),
          "k");
  opt_env(sub_scan,
          sub_scan->add_option("--runs", scn.runs, "number of seeded runs")
              ->check(CLI::PositiveNumber)
              ->capture_default_str(),
          "runs");
  opt_env(sub_scan,
          sub_scan->add_option("--seed", scn.seed, "base seed (runs use seed..seed+runs-1)")
              ->capture_default_str(),
          "seed");
  opt_env(sub_scan,
          sub_scan->add_option("--filter", scn.filter, "minority-lag or none")
              ->check(CLI::IsMember({"minority-lag", "none"}))
              ->capture_default_str(),
          "filter");
  opt_env(sub_scan,
          sub_scan->add_option("--init", scn.init, "centroid initialization")
              ->check(CLI::IsMember({"random-examples", "kmeans++"}))
              ->capture_default_str(),
          "init");
  opt_env(sub_scan,
          sub_scan->add_option("--max-iters", scn.max_iters, "Lloyd iteration cap")
              ->check(CLI::PositiveNumber)
              ->capture_default_str(),
          "max-iters");
  opt_env(sub_scan,
          sub_scan->add_option("--threads", scn.threads, "worker threads")
              ->check(CLI::PositiveNumber)
              ->capture_default_str(),
          "threads");
  opt_env(sub_scan, sub_scan->add_flag("--svg", scn.svg, "also render the scatter SVG"), "svg");

  TraverseArgs trv;
  CLI::App* sub_trv = app.add_subcommand(
      "traverse", "Hill-climb the lag utility from a start assignment with R1 or R2");
  opt_env(sub_trv, sub_trv->add_option("--dataset", trv.dataset_path, "dataset file")->required(),
          "dataset");
  opt_env(sub_trv, sub_trv->add_option("--start", trv.start_path, "start assignment file")->required(),
          "start");
  opt_env(sub_trv, sub_trv->add_option("--out", trv.out, "trajectory CSV to write")->required(),
          "out");
  opt_env(sub_trv,
          sub_trv->add_option("--operator", trv.op_name, "r1 or r2")
              ->check(CLI::IsMember({"r1", "r2"}))
              ->capture_default_str(),
          "operator");
  opt_env(sub_trv,
          sub_trv->add_option("--p", trv.p_pct, "top percent of single moves by lag (r2)")
              ->check(kPercentRange)
              ->capture_default_str(),
          "p");
  opt_env(sub_trv,
          sub_trv->add_option("--q", trv.q_pct, "top percent of single moves by overall (r2)")
              ->check(kPercentRange)
              ->capture_default_str(),
          "q");
  opt_env(sub_trv,
          sub_trv->add_option("--cap", trv.cap, "iteration cap")->capture_default_str(),
          "cap");
  opt_env(sub_trv,
          sub_trv->add_option("--lag-mode", trv.lag_mode, "maximin, pinned:0, or pinned:1")
              ->check(CLI::IsMember({"maximin", "pinned:0", "pinned:1"}))
              ->capture_default_str(),
          "lag-mode");
  opt_env(sub_trv,
          sub_trv->add_option("--threads", trv.threads, "worker threads")
              ->check(CLI::PositiveNumber)
              ->capture_default_str(),
          "threads");
  opt_env(sub_trv, sub_trv->add_option("--final", trv.final_out, "final assignment file (default <out>.final.json)"),
          "final");
  opt_env(sub_trv, sub_trv->add_option("--metadata", trv.metadata_out, "metadata file (default <out>.meta.json)"),
          "metadata");
  opt_env(sub_trv, sub_trv->add_option("--svg", trv.svg_out, "render the trajectory SVG here"),
          "svg");
  opt_env(sub_trv,
          sub_trv->add_option("--points", trv.points_path, "scan points CSV drawn behind the SVG"),
          "points");
  opt_env(sub_trv,
          sub_trv->add_option("--dump-candidates", trv.dump_candidates,
                              "write the first iteration's candidate CSV here"),
          "dump-candidates");
  opt_env(sub_trv,
          sub_trv->add_option("--wasted-pairs-sample", trv.wasted_pairs_sample,
                              "sample this many random pairs at the start point (0 = off)")
              ->capture_default_str(),
          "wasted-pairs-sample");
  opt_env(sub_trv,
          sub_trv->add_option("--wasted-pairs-seed", trv.wasted_pairs_seed, "pair sampling seed")
              ->capture_default_str(),
          "wasted-pairs-seed");

  ReportArgs rep;
  CLI::App* sub_rep =
      app.add_subcommand("report", "Render scan points and trajectories into one SVG");
  opt_env(sub_rep, sub_rep->add_option("--points", rep.points_path, "scan points CSV"), "points");
  opt_env(sub_rep,
          sub_rep->add_option("--trajectory", rep.trajectories,
                              "trajectory CSV (repeatable)"),
          "trajectory");
  opt_env(sub_rep, sub_rep->add_option("--out", rep.out, "SVG to write")->required(), "out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sub_pre->parsed()) return run_preprocess(pre);
    if (sub_scan->parsed()) return run_scan(scn);
    if (sub_trv->parsed()) return run_traverse(trv);
    if (sub_rep->parsed()) return run_report(rep);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
