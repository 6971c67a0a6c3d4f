#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rawlskm/clustering.hpp"
#include "rawlskm/dataset.hpp"
#include "rawlskm/parallel.hpp"
#include "rawlskm/utility.hpp"

namespace rawlskm {

enum class ScanFilter { minority_lag, none };

inline const char* to_string(ScanFilter f) {
  return f == ScanFilter::minority_lag ? "minority-lag" : "none";
}

inline ScanFilter parse_scan_filter(const std::string& name) {
  if (name == "minority-lag") return ScanFilter::minority_lag;
  if (name == "none") return ScanFilter::none;
  throw std::invalid_argument("unknown filter '" + name + "' (expected minority-lag or none)");
}

struct ScanRecord {
  std::uint64_t seed = 0;
  UtilityPoint point;
  ClusterAssignment assignment;
  int kmeans_iterations = 0;
  bool converged = false;
};

struct ScanResult {
  std::vector<ScanRecord> retained;       // ascending seed
  std::size_t utilitarian_index = 0;      // argmax overall over retained
  std::size_t approx_rawlsian_index = 0;  // argmax lag over retained
  ScanFilter filter = ScanFilter::minority_lag;
  std::size_t total_runs = 0;
  std::array<std::size_t, 2> lag_group_runs{0, 0};  // over all runs
  std::size_t lag_tie_runs = 0;
  int minority_group = 0;
};

/// Clusters the dataset num_runs times with consecutive seeds, maps every
/// run into the utility space, and keeps (under minority-lag filtering)
/// the runs where the minority group came out less advantaged. Among the
/// retained runs, the max-overall run approximates the utilitarian point
/// and the max-lag run the Rawlsian one. Ties go to the lowest seed.
inline ScanResult scan(const Dataset& dataset, int k, std::size_t num_runs,
                       std::uint64_t base_seed, ScanFilter filter = ScanFilter::minority_lag,
                       int threads = 1, const KMeansConfig& kconfig = {}) {
  if (num_runs < 1) throw std::invalid_argument("scan: num_runs must be >= 1");
  std::vector<ScanRecord> runs(num_runs);
  parallel_for(num_runs, threads, [&](std::size_t i) {
    const std::uint64_t seed = base_seed + i;
    KMeansResult km = kmeans(dataset, k, seed, kconfig);
    ScanRecord rec;
    rec.seed = seed;
    rec.point = evaluate(dataset, km.assignment).point;
    rec.assignment = std::move(km.assignment);
    rec.kmeans_iterations = km.iterations;
    rec.converged = km.converged;
    runs[i] = std::move(rec);
  });

  ScanResult result;
  result.filter = filter;
  result.total_runs = num_runs;
  result.minority_group = dataset.minority_group();
  const auto minority = static_cast<LagGroup>(result.minority_group);
  for (auto& run : runs) {
    if (run.point.lag_group == LagGroup::tie) {
      ++result.lag_tie_runs;
    } else {
      ++result.lag_group_runs[static_cast<std::size_t>(run.point.lag_group)];
    }
    if (filter == ScanFilter::none || run.point.lag_group == minority) {
      result.retained.push_back(std::move(run));
    }
  }
  if (result.retained.empty()) {
    throw std::runtime_error(
        "scan: no runs retained under filter " + std::string(to_string(filter)) +
        " (group 0 lagged in " + std::to_string(result.lag_group_runs[0]) + " runs, group 1 in " +
        std::to_string(result.lag_group_runs[1]) + ", ties " +
        std::to_string(result.lag_tie_runs) + " of " + std::to_string(num_runs) + ")");
  }
  for (std::size_t i = 1; i < result.retained.size(); ++i) {
    const UtilityPoint& p = result.retained[i].point;
    if (p.overall > result.retained[result.utilitarian_index].point.overall) {
      result.utilitarian_index = i;
    }
    if (p.lag_utility > result.retained[result.approx_rawlsian_index].point.lag_utility) {
      result.approx_rawlsian_index = i;
    }
  }
  return result;
}

}  // namespace rawlskm
