#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "rawlskm/clustering.hpp"
#include "rawlskm/dataset.hpp"
#include "rawlskm/operators.hpp"
#include "rawlskm/traverse.hpp"
#include "rawlskm/utility.hpp"

namespace rawlskm {

/// Shortest decimal form that parses back to exactly the same double.
/// Used for every real number in CSV artifacts, so identical values always
/// print identically regardless of locale or stream state.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

inline double parse_double_strict(std::string_view text, const std::string& context) {
  double value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw std::runtime_error(context + ": bad number '" + std::string(text) + "'");
  }
  return value;
}

inline std::uint64_t parse_uint64_strict(std::string_view text, const std::string& context) {
  std::uint64_t value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw std::runtime_error(context + ": bad integer '" + std::string(text) + "'");
  }
  return value;
}

/// 64-bit FNV-1a, rendered as 16 hex digits. Identifies dataset content in
/// run metadata so artifacts can be matched to their inputs.
inline std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : bytes) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  static const char* digits = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = digits[h & 0xF];
    h >>= 4;
  }
  return std::string(buf, 16);
}

inline std::string read_file_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file_text(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

inline std::string file_hash(const std::string& path) { return fnv1a_hex(read_file_text(path)); }

// ---------------------------------------------------------------------------
// Dataset file
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json dataset_to_json(const Dataset& dataset) {
  nlohmann::ordered_json j;
  j["feature_count"] = dataset.feature_count;
  j["delta"] = dataset.delta;
  j["group_labels"] = dataset.group_labels;
  nlohmann::ordered_json layout = nlohmann::ordered_json::array();
  for (const AttributeBlock& block : dataset.layout) {
    nlohmann::ordered_json b;
    b["name"] = block.name;
    b["kind"] = block.kind == AttributeKind::continuous ? "continuous" : "categorical";
    b["offset"] = block.offset;
    b["width"] = block.width;
    if (block.kind == AttributeKind::continuous) {
      b["min"] = block.min;
      b["max"] = block.max;
    } else {
      b["levels"] = block.levels;
    }
    layout.push_back(std::move(b));
  }
  j["layout"] = std::move(layout);
  nlohmann::ordered_json features = nlohmann::ordered_json::array();
  for (const Example& ex : dataset.examples) features.push_back(ex.features);
  j["features"] = std::move(features);
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (const Example& ex : dataset.examples) groups.push_back(ex.group);
  j["groups"] = std::move(groups);
  return j;
}

inline void write_dataset_file(const std::string& path, const Dataset& dataset) {
  write_file_text(path, dataset_to_json(dataset).dump(2) + "\n");
}

inline Dataset dataset_from_json(const nlohmann::json& j) {
  Dataset dataset;
  dataset.feature_count = j.at("feature_count").get<int>();
  dataset.delta = j.at("delta").get<double>();
  const auto labels = j.at("group_labels").get<std::vector<std::string>>();
  if (labels.size() != 2) throw std::runtime_error("dataset file: need exactly 2 group labels");
  dataset.group_labels = {labels[0], labels[1]};
  dataset.original_attribute_count = static_cast<int>(dataset.delta);
  for (const auto& b : j.at("layout")) {
    AttributeBlock block;
    block.name = b.at("name").get<std::string>();
    const auto kind = b.at("kind").get<std::string>();
    if (kind == "continuous") {
      block.kind = AttributeKind::continuous;
      block.min = b.at("min").get<double>();
      block.max = b.at("max").get<double>();
    } else if (kind == "categorical") {
      block.kind = AttributeKind::categorical;
      block.levels = b.at("levels").get<std::vector<std::string>>();
    } else {
      throw std::runtime_error("dataset file: unknown attribute kind '" + kind + "'");
    }
    block.offset = b.at("offset").get<int>();
    block.width = b.at("width").get<int>();
    dataset.layout.push_back(std::move(block));
  }
  const auto& features = j.at("features");
  const auto& groups = j.at("groups");
  if (features.size() != groups.size()) {
    throw std::runtime_error("dataset file: features/groups length mismatch");
  }
  if (features.empty()) throw std::runtime_error("dataset file: no examples");
  int id = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    Example ex;
    ex.id = id++;
    ex.features = features[i].get<std::vector<double>>();
    if (static_cast<int>(ex.features.size()) != dataset.feature_count) {
      throw std::runtime_error("dataset file: example " + std::to_string(i) +
                               " has wrong feature count");
    }
    ex.group = groups[i].get<int>();
    if (ex.group != 0 && ex.group != 1) {
      throw std::runtime_error("dataset file: example " + std::to_string(i) + " has bad group");
    }
    dataset.examples.push_back(std::move(ex));
  }
  return dataset;
}

inline Dataset read_dataset_file(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("dataset file " + path + ": " + e.what());
  }
  return dataset_from_json(j);
}

// ---------------------------------------------------------------------------
// Assignment file
// ---------------------------------------------------------------------------

/// Assignment files store labels and the producing seed only; centroids are
/// derived on load so a file can never carry stale geometry.
inline void write_assignment_file(const std::string& path, const ClusterAssignment& assignment,
                                  std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["k"] = assignment.k;
  j["labels"] = assignment.labels;
  j["seed"] = seed;
  write_file_text(path, j.dump(2) + "\n");
}

struct LoadedAssignment {
  ClusterAssignment assignment;
  std::uint64_t seed = 0;
};

inline LoadedAssignment read_assignment_file(const std::string& path, const Dataset& dataset) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("assignment file " + path + ": " + e.what());
  }
  LoadedAssignment loaded;
  loaded.assignment.k = j.at("k").get<int>();
  loaded.assignment.labels = j.at("labels").get<std::vector<int>>();
  loaded.seed = j.at("seed").get<std::uint64_t>();
  if (loaded.assignment.k < 1) throw std::runtime_error("assignment file " + path + ": k < 1");
  if (loaded.assignment.labels.size() != dataset.size()) {
    throw std::runtime_error("assignment file " + path + ": label count " +
                             std::to_string(loaded.assignment.labels.size()) +
                             " does not match dataset size " + std::to_string(dataset.size()));
  }
  auto [centroids, sizes] =
      recompute_centroids(dataset, loaded.assignment.labels, loaded.assignment.k);
  loaded.assignment.centroids = std::move(centroids);
  loaded.assignment.cluster_sizes = std::move(sizes);
  return loaded;
}

// ---------------------------------------------------------------------------
// Points CSV (scan output; one row per assignment)
// ---------------------------------------------------------------------------

inline constexpr const char* kPointsCsvHeader = "seed,U0,U1,lag,mag,overall,lag_group";

struct PointsRow {
  std::uint64_t seed = 0;
  UtilityPoint point;
};

inline std::string points_csv_line(std::uint64_t seed, const UtilityPoint& p) {
  std::string line = std::to_string(seed);
  line += ',';
  line += format_double(p.group_utility[0]);
  line += ',';
  line += format_double(p.group_utility[1]);
  line += ',';
  line += format_double(p.lag_utility);
  line += ',';
  line += format_double(p.mag_utility);
  line += ',';
  line += format_double(p.overall);
  line += ',';
  line += to_string(p.lag_group);
  return line;
}

inline void write_points_csv(const std::string& path, const std::vector<PointsRow>& rows) {
  std::string text = kPointsCsvHeader;
  text += '\n';
  for (const PointsRow& row : rows) {
    text += points_csv_line(row.seed, row.point);
    text += '\n';
  }
  write_file_text(path, text);
}

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string field;
  for (const char ch : line) {
    if (ch == sep) {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

}  // namespace detail

inline std::vector<PointsRow> read_points_csv(const std::string& path) {
  std::istringstream in(read_file_text(path));
  std::string line;
  if (!std::getline(in, line) || line != kPointsCsvHeader) {
    throw std::runtime_error(path + ": line 1: expected header '" +
                             std::string(kPointsCsvHeader) + "'");
  }
  std::vector<PointsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_line(line, ',');
    const std::string context = path + ": line " + std::to_string(line_no);
    if (fields.size() != 7) throw std::runtime_error(context + ": expected 7 fields");
    PointsRow row;
    row.seed = parse_uint64_strict(fields[0], context);
    row.point.group_utility[0] = parse_double_strict(fields[1], context);
    row.point.group_utility[1] = parse_double_strict(fields[2], context);
    row.point.lag_utility = parse_double_strict(fields[3], context);
    row.point.mag_utility = parse_double_strict(fields[4], context);
    row.point.overall = parse_double_strict(fields[5], context);
    if (fields[6] == "0") {
      row.point.lag_group = LagGroup::group0;
    } else if (fields[6] == "1") {
      row.point.lag_group = LagGroup::group1;
    } else if (fields[6] == "tie") {
      row.point.lag_group = LagGroup::tie;
    } else {
      throw std::runtime_error(context + ": bad lag_group '" + fields[6] + "'");
    }
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Trajectory CSV
// ---------------------------------------------------------------------------

inline constexpr const char* kTrajectoryCsvHeader = "iteration,op,branch,U0,U1,lag,mag,overall";

/// Row 0 is the start point (empty op and branch); applied steps follow.
inline void write_trajectory_csv(const std::string& path, const Trajectory& trajectory) {
  std::string text = kTrajectoryCsvHeader;
  text += '\n';
  auto append_point = [&text](const UtilityPoint& p) {
    text += format_double(p.group_utility[0]);
    text += ',';
    text += format_double(p.group_utility[1]);
    text += ',';
    text += format_double(p.lag_utility);
    text += ',';
    text += format_double(p.mag_utility);
    text += ',';
    text += format_double(p.overall);
    text += '\n';
  };
  text += "0,,,";
  append_point(trajectory.start);
  for (const TrajectoryStep& step : trajectory.steps) {
    text += std::to_string(step.iteration);
    text += ',';
    text += to_string(step.op);
    text += ',';
    text += to_string(step.branch);
    text += ',';
    append_point(step.point);
  }
  write_file_text(path, text);
}

struct TrajectoryRow {
  int iteration = 0;
  std::string op;      // empty for the start row
  std::string branch;  // NE | NW | null, empty for the start row
  UtilityPoint point;
};

inline std::vector<TrajectoryRow> read_trajectory_csv(const std::string& path) {
  std::istringstream in(read_file_text(path));
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryCsvHeader) {
    throw std::runtime_error(path + ": line 1: expected header '" +
                             std::string(kTrajectoryCsvHeader) + "'");
  }
  std::vector<TrajectoryRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split_line(line, ',');
    const std::string context = path + ": line " + std::to_string(line_no);
    if (fields.size() != 8) throw std::runtime_error(context + ": expected 8 fields");
    TrajectoryRow row;
    row.iteration = static_cast<int>(parse_uint64_strict(fields[0], context));
    row.op = fields[1];
    row.branch = fields[2];
    row.point.group_utility[0] = parse_double_strict(fields[3], context);
    row.point.group_utility[1] = parse_double_strict(fields[4], context);
    row.point.lag_utility = parse_double_strict(fields[5], context);
    row.point.mag_utility = parse_double_strict(fields[6], context);
    row.point.overall = parse_double_strict(fields[7], context);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error(path + ": no rows");
  return rows;
}

// ---------------------------------------------------------------------------
// Candidate dump CSV (debugging aid)
// ---------------------------------------------------------------------------

inline constexpr const char* kCandidatesCsvHeader = "op,U0,U1,lag,mag,overall";

inline void write_candidates_csv(const std::string& path,
                                 const std::vector<CandidateEvaluation>& candidates) {
  std::string text = kCandidatesCsvHeader;
  text += '\n';
  for (const CandidateEvaluation& c : candidates) {
    text += to_string(c.op);
    text += ',';
    text += format_double(c.point.group_utility[0]);
    text += ',';
    text += format_double(c.point.group_utility[1]);
    text += ',';
    text += format_double(c.point.lag_utility);
    text += ',';
    text += format_double(c.point.mag_utility);
    text += ',';
    text += format_double(c.point.overall);
    text += '\n';
  }
  write_file_text(path, text);
}

}  // namespace rawlskm
