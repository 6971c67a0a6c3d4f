#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rawlskm/random.hpp"

namespace rawlskm {

/// One row of an Adult-format file, restricted to the attributes the
/// pipeline uses. Rows with a missing value in any of these fields are
/// dropped at ingestion and never reach this type.
struct RawRecord {
  double age = 0;
  double education_num = 0;
  double capital_gain = 0;
  double capital_loss = 0;
  double hours_per_week = 0;
  std::string workclass;
  std::string education;
  std::string occupation;
  std::string sex;
  std::string income;  // predictor, used only when sampling
};

struct IngestResult {
  std::vector<RawRecord> records;          // complete rows, in file order
  std::size_t dropped_missing = 0;         // rows containing "?"
  std::size_t dropped_unparseable = 0;     // rows with a bad numeric field
};

/// One encoded example. Features are the clustering inputs; the sensitive
/// group tag is kept alongside but never among the features.
struct Example {
  int id = 0;
  std::vector<double> features;
  int group = 0;  // 0 or 1
};

enum class AttributeKind { continuous, categorical };

/// Which feature columns belong to which original attribute, plus the
/// constants needed to re-apply the encoding.
struct AttributeBlock {
  std::string name;
  AttributeKind kind = AttributeKind::continuous;
  int offset = 0;
  int width = 1;
  double min = 0;                   // continuous only
  double max = 0;                   // continuous only
  std::vector<std::string> levels;  // categorical only, one per column
};

struct Dataset {
  std::vector<Example> examples;
  int feature_count = 0;
  double delta = 0;  // max possible squared distance between two examples
  int original_attribute_count = 0;
  std::array<std::string, 2> group_labels{"group0", "group1"};
  std::vector<AttributeBlock> layout;

  std::size_t size() const { return examples.size(); }

  /// Count of examples tagged with each group.
  std::array<std::size_t, 2> group_counts() const {
    std::array<std::size_t, 2> counts{0, 0};
    for (const auto& e : examples) counts[static_cast<std::size_t>(e.group)]++;
    return counts;
  }

  /// The smaller sensitive group (ties resolved to group 0).
  int minority_group() const {
    const auto counts = group_counts();
    return counts[1] < counts[0] ? 1 : 0;
  }
};

/// Encoded dataset that still remembers the predictor class of each example,
/// so the parity sampling step can run. The predictor never appears in the
/// features.
struct EncodedAdult {
  Dataset dataset;
  std::vector<int> predictor_class;  // per example, 0 or 1
  std::array<std::string, 2> predictor_labels;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(std::string_view(line).substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline constexpr std::array<const char*, 5> kContinuousAttributes = {
    "age", "education-num", "capital-gain", "capital-loss", "hours-per-week"};
inline constexpr std::array<const char*, 3> kCategoricalAttributes = {
    "workclass", "education", "occupation"};
inline constexpr const char* kSensitiveAttribute = "sex";
inline constexpr const char* kPredictorAttribute = "annual-income";

}  // namespace detail

/// Reads an Adult-format CSV (comma separated, header row, "?" marks a
/// missing value). Keeps only complete records restricted to the attributes
/// the pipeline uses, preserving file order. A missing required column is a
/// fatal configuration error; a row with an unparseable numeric field is
/// rejected and counted.
inline IngestResult ingest_adult(std::istream& in) {
  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw std::runtime_error("ingest_adult: input is empty (no header row)");
  }
  const auto header = detail::split_csv_line(header_line);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column[header[i]] = i;

  std::vector<std::string> required;
  for (const char* a : detail::kContinuousAttributes) required.push_back(a);
  for (const char* a : detail::kCategoricalAttributes) required.push_back(a);
  required.push_back(detail::kSensitiveAttribute);
  required.push_back(detail::kPredictorAttribute);
  for (const auto& name : required) {
    if (!column.count(name)) {
      throw std::runtime_error("ingest_adult: required column '" + name +
                               "' not found in header");
    }
  }

  IngestResult result;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      ++result.dropped_unparseable;
      continue;
    }
    bool missing = false;
    for (const auto& name : required) {
      const auto& v = fields[column[name]];
      if (v == "?" || v.empty()) {
        missing = true;
        break;
      }
    }
    if (missing) {
      ++result.dropped_missing;
      continue;
    }
    RawRecord rec;
    std::array<double*, 5> cont = {&rec.age, &rec.education_num, &rec.capital_gain,
                                   &rec.capital_loss, &rec.hours_per_week};
    bool bad_numeric = false;
    for (std::size_t i = 0; i < cont.size(); ++i) {
      const auto parsed =
          detail::parse_double(fields[column[detail::kContinuousAttributes[i]]]);
      if (!parsed) {
        bad_numeric = true;
        break;
      }
      *cont[i] = *parsed;
    }
    if (bad_numeric) {
      ++result.dropped_unparseable;
      continue;
    }
    rec.workclass = fields[column["workclass"]];
    rec.education = fields[column["education"]];
    rec.occupation = fields[column["occupation"]];
    rec.sex = fields[column[detail::kSensitiveAttribute]];
    rec.income = fields[column[detail::kPredictorAttribute]];
    result.records.push_back(std::move(rec));
  }
  return result;
}

inline IngestResult ingest_adult(const std::string& csv_text) {
  std::istringstream in(csv_text);
  return ingest_adult(in);
}

/// Encodes ingested records into clustering features:
///   - continuous attributes: affine map to [0, 1] using the min/max observed
///     in `records` (a constant attribute encodes as all zeros);
///   - categorical attributes: one-hot blocks with the hot component set to
///     1/sqrt(2), so one attribute contributes at most 1 to the squared
///     distance between two examples.
/// With 8 original attributes the squared distance between any two encoded
/// examples is therefore at most delta = 8.
/// `group_order` maps sensitive values to groups: group_order[0] -> group 0.
inline EncodedAdult encode(const std::vector<RawRecord>& records,
                           std::array<std::string, 2> group_order = {"Female", "Male"},
                           std::vector<std::string>* warnings = nullptr) {
  if (records.empty()) throw std::invalid_argument("encode: no records");

  EncodedAdult out;
  Dataset& ds = out.dataset;
  ds.group_labels = group_order;
  ds.original_attribute_count = static_cast<int>(detail::kContinuousAttributes.size() +
                                                 detail::kCategoricalAttributes.size());
  ds.delta = static_cast<double>(ds.original_attribute_count);

  const auto continuous_value = [](const RawRecord& r, std::size_t i) {
    switch (i) {
      case 0: return r.age;
      case 1: return r.education_num;
      case 2: return r.capital_gain;
      case 3: return r.capital_loss;
      default: return r.hours_per_week;
    }
  };
  const auto categorical_value = [](const RawRecord& r, std::size_t i) -> const std::string& {
    switch (i) {
      case 0: return r.workclass;
      case 1: return r.education;
      default: return r.occupation;
    }
  };

  int offset = 0;
  for (std::size_t i = 0; i < detail::kContinuousAttributes.size(); ++i) {
    AttributeBlock block;
    block.name = detail::kContinuousAttributes[i];
    block.kind = AttributeKind::continuous;
    block.offset = offset;
    block.width = 1;
    block.min = continuous_value(records.front(), i);
    block.max = block.min;
    for (const auto& r : records) {
      block.min = std::min(block.min, continuous_value(r, i));
      block.max = std::max(block.max, continuous_value(r, i));
    }
    if (block.min == block.max && warnings) {
      warnings->push_back("attribute '" + block.name +
                          "' is constant; encoded as all zeros");
    }
    offset += 1;
    ds.layout.push_back(std::move(block));
  }
  for (std::size_t i = 0; i < detail::kCategoricalAttributes.size(); ++i) {
    AttributeBlock block;
    block.name = detail::kCategoricalAttributes[i];
    block.kind = AttributeKind::categorical;
    block.offset = offset;
    std::vector<std::string> levels;
    for (const auto& r : records) levels.push_back(categorical_value(r, i));
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    block.levels = std::move(levels);
    block.width = static_cast<int>(block.levels.size());
    offset += block.width;
    ds.layout.push_back(std::move(block));
  }
  ds.feature_count = offset;

  // Predictor classes: the Adult predictor is binary by contract.
  {
    std::vector<std::string> classes;
    for (const auto& r : records) classes.push_back(r.income);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    if (classes.size() != 2) {
      throw std::runtime_error("encode: expected exactly 2 predictor classes, found " +
                               std::to_string(classes.size()));
    }
    out.predictor_labels = {classes[0], classes[1]};
  }

  const double hot = 1.0 / std::sqrt(2.0);
  ds.examples.reserve(records.size());
  out.predictor_class.reserve(records.size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    const RawRecord& rec = records[r];
    Example ex;
    ex.id = static_cast<int>(r);
    ex.features.assign(static_cast<std::size_t>(ds.feature_count), 0.0);
    for (std::size_t i = 0; i < detail::kContinuousAttributes.size(); ++i) {
      const AttributeBlock& block = ds.layout[i];
      const double span = block.max - block.min;
      ex.features[static_cast<std::size_t>(block.offset)] =
          span > 0 ? (continuous_value(rec, i) - block.min) / span : 0.0;
    }
    for (std::size_t i = 0; i < detail::kCategoricalAttributes.size(); ++i) {
      const AttributeBlock& block = ds.layout[detail::kContinuousAttributes.size() + i];
      const auto& value = categorical_value(rec, i);
      const auto it = std::lower_bound(block.levels.begin(), block.levels.end(), value);
      const auto level = static_cast<std::size_t>(it - block.levels.begin());
      ex.features[static_cast<std::size_t>(block.offset) + level] = hot;
    }
    if (rec.sex == group_order[0]) {
      ex.group = 0;
    } else if (rec.sex == group_order[1]) {
      ex.group = 1;
    } else {
      throw std::runtime_error("encode: sensitive value '" + rec.sex +
                               "' matches neither group label");
    }
    out.predictor_class.push_back(rec.income == out.predictor_labels[0] ? 0 : 1);
    ds.examples.push_back(std::move(ex));
  }
  return out;
}

/// Two seeded steps: undersample the majority predictor class down to the
/// minority class size, then draw `per_class` examples uniformly without
/// replacement from each class. Output keeps original record order, drops
/// the predictor, and re-indexes ids 0..n-1.
inline Dataset sample_for_parity(const EncodedAdult& encoded, std::size_t per_class,
                                 std::uint64_t seed) {
  const std::size_t n = encoded.dataset.size();
  if (encoded.predictor_class.size() != n) {
    throw std::invalid_argument("sample_for_parity: predictor tags do not match dataset");
  }
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < n; ++i) {
    by_class[static_cast<std::size_t>(encoded.predictor_class[i])].push_back(i);
  }

  Rng rng(seed);
  // Step 1: parity across the predictor attribute.
  const std::size_t parity = std::min(by_class[0].size(), by_class[1].size());
  for (auto& cls : by_class) {
    if (cls.size() > parity) {
      auto keep = sample_without_replacement(rng, cls.size(), parity);
      std::sort(keep.begin(), keep.end());
      std::vector<std::size_t> reduced;
      reduced.reserve(parity);
      for (const std::size_t j : keep) reduced.push_back(cls[j]);
      cls = std::move(reduced);
    }
  }
  // Step 2: per-class draw.
  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < 2; ++c) {
    if (by_class[c].size() < per_class) {
      throw std::runtime_error("sample_for_parity: predictor class '" +
                               encoded.predictor_labels[c] + "' has only " +
                               std::to_string(by_class[c].size()) + " examples, need " +
                               std::to_string(per_class));
    }
    auto keep = sample_without_replacement(rng, by_class[c].size(), per_class);
    for (const std::size_t j : keep) chosen.push_back(by_class[c][j]);
  }
  std::sort(chosen.begin(), chosen.end());

  Dataset out;
  out.feature_count = encoded.dataset.feature_count;
  out.delta = encoded.dataset.delta;
  out.original_attribute_count = encoded.dataset.original_attribute_count;
  out.group_labels = encoded.dataset.group_labels;
  out.layout = encoded.dataset.layout;
  out.examples.reserve(chosen.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    Example ex = encoded.dataset.examples[chosen[i]];
    ex.id = static_cast<int>(i);
    out.examples.push_back(std::move(ex));
  }
  return out;
}

/// Builds a small synthetic dataset for tests and experiments. Every feature
/// must lie in [0, 1]; delta is the declared attribute count. The pairwise
/// distance bound distance <= delta is checked exhaustively at construction.
inline Dataset make_tiny_instance(const std::vector<std::vector<double>>& features,
                                  const std::vector<int>& groups,
                                  std::optional<int> attribute_count = std::nullopt) {
  if (features.empty()) throw std::invalid_argument("make_tiny_instance: empty spec");
  if (features.size() != groups.size()) {
    throw std::invalid_argument("make_tiny_instance: features/groups size mismatch");
  }
  const std::size_t f = features.front().size();
  if (f == 0) throw std::invalid_argument("make_tiny_instance: zero-length features");

  Dataset ds;
  ds.feature_count = static_cast<int>(f);
  ds.original_attribute_count = attribute_count.value_or(static_cast<int>(f));
  ds.delta = static_cast<double>(ds.original_attribute_count);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != f) {
      throw std::invalid_argument("make_tiny_instance: ragged feature rows");
    }
    for (const double v : features[i]) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw std::invalid_argument("make_tiny_instance: feature out of [0, 1]");
      }
    }
    if (groups[i] != 0 && groups[i] != 1) {
      throw std::invalid_argument("make_tiny_instance: group must be 0 or 1");
    }
    Example ex;
    ex.id = static_cast<int>(i);
    ex.features = features[i];
    ex.group = groups[i];
    ds.examples.push_back(std::move(ex));
  }
  for (int j = 0; j < ds.feature_count; ++j) {
    AttributeBlock block;
    block.name = "f" + std::to_string(j);
    block.kind = AttributeKind::continuous;
    block.offset = j;
    block.width = 1;
    block.min = 0.0;
    block.max = 1.0;
    ds.layout.push_back(std::move(block));
  }
  // Exhaustive delta check; tiny instances are small by definition.
  for (std::size_t a = 0; a < ds.examples.size(); ++a) {
    for (std::size_t b = a + 1; b < ds.examples.size(); ++b) {
      double d = 0;
      for (std::size_t j = 0; j < f; ++j) {
        const double diff = ds.examples[a].features[j] - ds.examples[b].features[j];
        d += diff * diff;
      }
      if (d > ds.delta) {
        throw std::invalid_argument(
            "make_tiny_instance: pairwise squared distance exceeds delta");
      }
    }
  }
  return ds;
}

}  // namespace rawlskm
