#pragma once

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ppos/errors.hpp"

namespace ppos {

// One right-censored competing-event observation. `covariates` is aligned
// positionally with the owning dataset's schema.
struct SubjectRecord {
  std::string subject_id;
  double time = 0.0;
  int event = 0;  // 0 censored, 1 primary event, 2 competing event
  int arm = 0;
  std::vector<double> covariates;
  std::optional<double> origin_offset;  // calendar offset of study time 0
};

struct DatasetSchema {
  std::vector<std::string> covariate_names;
  bool has_origin_offset = false;

  int covariate_index(const std::string& name) const {
    for (std::size_t j = 0; j < covariate_names.size(); ++j) {
      if (covariate_names[j] == name) return static_cast<int>(j);
    }
    return -1;
  }
};

struct CompetingRiskDataset {
  DatasetSchema schema;
  std::string time_unit = "days";
  std::vector<SubjectRecord> records;

  std::size_t size() const { return records.size(); }

  std::size_t arm_count(int arm) const {
    std::size_t n = 0;
    for (const auto& r : records) n += (r.arm == arm);
    return n;
  }

  std::size_t event_count(int event) const {
    std::size_t n = 0;
    for (const auto& r : records) n += (r.event == event);
    return n;
  }

  // Invariant checks shared by the loader and the synthetic generator.
  // Row numbers in messages are 1-based over `records`.
  void validate() const {
    if (records.empty()) throw DataError("dataset is empty");
    std::unordered_set<std::string> seen;
    seen.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      const std::string where = "row " + std::to_string(i + 1);
      if (r.subject_id.empty()) throw DataError(where + ": empty subject_id");
      if (!seen.insert(r.subject_id).second) {
        throw DataError(where + ": duplicate subject_id '" + r.subject_id + "'");
      }
      if (!(r.time >= 0.0)) {
        throw DataError(where + ": negative or non-finite time");
      }
      if (r.event < 0 || r.event > 2) {
        throw DataError(where + ": event must be in {0,1,2}");
      }
      if (r.arm != 0 && r.arm != 1) {
        throw DataError(where + ": arm must be 0 or 1");
      }
      if (r.covariates.size() != schema.covariate_names.size()) {
        throw DataError(where + ": expected " +
                        std::to_string(schema.covariate_names.size()) +
                        " covariates, found " +
                        std::to_string(r.covariates.size()));
      }
      if (schema.has_origin_offset) {
        if (!r.origin_offset || !(*r.origin_offset >= 0.0)) {
          throw DataError(where + ": missing or negative origin_offset");
        }
      }
    }
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = b + s.size();
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e) {
    throw DataError(where + ": unparsable numeric cell '" + s + "'");
  }
  return v;
}

inline int parse_int(const std::string& s, const std::string& where) {
  int v = 0;
  const char* b = s.data();
  const char* e = b + s.size();
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e) {
    throw DataError(where + ": unparsable integer cell '" + s + "'");
  }
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

// CSV layout: subject_id,time,event,arm,<covariate...>[,origin_offset].
// The expected covariate names come from `schema`; the header must match.
inline CompetingRiskDataset load_dataset(const std::string& path,
                                         const DatasetSchema& schema,
                                         const std::string& time_unit = "days") {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const auto header = detail::split_csv_line(line);

  std::vector<std::string> expected = {"subject_id", "time", "event", "arm"};
  for (const auto& name : schema.covariate_names) expected.push_back(name);
  if (schema.has_origin_offset) expected.push_back("origin_offset");

  if (header.size() != expected.size()) {
    std::ostringstream msg;
    msg << path << ": header has " << header.size() << " columns, expected "
        << expected.size() << " (";
    for (std::size_t j = 0; j < expected.size(); ++j) {
      msg << (j ? "," : "") << expected[j];
    }
    msg << ")";
    throw DataError(msg.str());
  }
  for (std::size_t j = 0; j < expected.size(); ++j) {
    if (header[j] != expected[j]) {
      throw DataError(path + ": missing column '" + expected[j] +
                      "' (found '" + header[j] + "')");
    }
  }

  CompetingRiskDataset ds;
  ds.schema = schema;
  ds.time_unit = time_unit;

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const std::string where = "row " + std::to_string(row);
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != expected.size()) {
      throw DataError(where + ": expected " + std::to_string(expected.size()) +
                      " cells, found " + std::to_string(cells.size()));
    }
    SubjectRecord r;
    r.subject_id = cells[0];
    r.time = detail::parse_double(cells[1], where);
    if (r.time < 0.0) throw DataError(where + ": negative time");
    r.event = detail::parse_int(cells[2], where);
    if (r.event < 0 || r.event > 2) {
      throw DataError(where + ": event must be in {0,1,2}");
    }
    r.arm = detail::parse_int(cells[3], where);
    r.covariates.reserve(schema.covariate_names.size());
    for (std::size_t j = 0; j < schema.covariate_names.size(); ++j) {
      r.covariates.push_back(detail::parse_double(cells[4 + j], where));
    }
    if (schema.has_origin_offset) {
      r.origin_offset = detail::parse_double(cells.back(), where);
    }
    ds.records.push_back(std::move(r));
  }

  ds.validate();
  return ds;
}

// Writer emits the identical column layout the loader expects.
inline void save_dataset(const CompetingRiskDataset& ds,
                         const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open output file: " + path);
  out << "subject_id,time,event,arm";
  for (const auto& name : ds.schema.covariate_names) out << "," << name;
  if (ds.schema.has_origin_offset) out << ",origin_offset";
  out << "\n";
  for (const auto& r : ds.records) {
    out << r.subject_id << "," << detail::format_double(r.time) << ","
        << r.event << "," << r.arm;
    for (double v : r.covariates) out << "," << detail::format_double(v);
    if (ds.schema.has_origin_offset) {
      out << "," << detail::format_double(r.origin_offset.value());
    }
    out << "\n";
  }
}

// Splits interim data into fully observed records (event in {1,2}) and
// right-censored records (event = 0). Order is preserved within each part.
inline std::pair<CompetingRiskDataset, CompetingRiskDataset> partition_interim(
    const CompetingRiskDataset& ds) {
  ds.validate();
  CompetingRiskDataset observed{ds.schema, ds.time_unit, {}};
  CompetingRiskDataset censored{ds.schema, ds.time_unit, {}};
  for (const auto& r : ds.records) {
    (r.event == 0 ? censored : observed).records.push_back(r);
  }
  return {std::move(observed), std::move(censored)};
}

// Records with time strictly beyond the horizon become (horizon, censored);
// a record whose event time equals the horizon keeps its event.
inline CompetingRiskDataset administrative_censor(const CompetingRiskDataset& ds,
                                                  double horizon) {
  if (!(horizon > 0.0)) throw ConfigError("censoring horizon must be positive");
  CompetingRiskDataset out = ds;
  for (auto& r : out.records) {
    if (r.time > horizon) {
      r.time = horizon;
      r.event = 0;
    }
  }
  return out;
}

inline CompetingRiskDataset administrative_censor(
    const CompetingRiskDataset& ds,
    const std::unordered_map<std::string, double>& horizons) {
  CompetingRiskDataset out = ds;
  for (auto& r : out.records) {
    const auto it = horizons.find(r.subject_id);
    if (it == horizons.end()) {
      throw ConfigError("missing censoring horizon for subject '" +
                        r.subject_id + "'");
    }
    if (!(it->second > 0.0)) {
      throw ConfigError("censoring horizon must be positive for subject '" +
                        r.subject_id + "'");
    }
    if (r.time > it->second) {
      r.time = it->second;
      r.event = 0;
    }
  }
  return out;
}

}  // namespace ppos
