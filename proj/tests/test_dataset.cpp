#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "ppos/dataset.hpp"

using namespace ppos;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path.string();
}

DatasetSchema who_schema() {
  DatasetSchema s;
  s.covariate_names = {"who_level"};
  return s;
}

}  // namespace

TEST_CASE("load_dataset parses a small file") {
  const auto path = write_temp("ds_ok.csv",
                               "subject_id,time,event,arm,who_level\n"
                               "a,1.5,1,0,1\n"
                               "b,2,2,1,0\n"
                               "c,3,0,0,1\n"
                               "d,4.25,1,1,0\n");
  const auto ds = load_dataset(path, who_schema());
  REQUIRE(ds.size() == 4);
  CHECK(ds.event_count(0) == 1);
  CHECK(ds.records[0].subject_id == "a");
  CHECK(ds.records[3].time == 4.25);
  CHECK(ds.records[1].event == 2);
  CHECK(ds.records[1].arm == 1);
  CHECK(ds.records[2].covariates[0] == 1.0);
}

TEST_CASE("load_dataset reports the offending row") {
  const auto path = write_temp("ds_negtime.csv",
                               "subject_id,time,event,arm,who_level\n"
                               "a,1,1,0,1\n"
                               "b,2,2,1,0\n"
                               "c,-1,0,0,1\n");
  REQUIRE_THROWS_WITH(load_dataset(path, who_schema()),
                      Catch::Matchers::ContainsSubstring("row 3"));

  const auto bad_event = write_temp("ds_badevent.csv",
                                    "subject_id,time,event,arm,who_level\n"
                                    "a,1,3,0,1\n");
  REQUIRE_THROWS_WITH(load_dataset(bad_event, who_schema()),
                      Catch::Matchers::ContainsSubstring("row 1"));

  const auto bad_cell = write_temp("ds_badcell.csv",
                                   "subject_id,time,event,arm,who_level\n"
                                   "a,oops,1,0,1\n");
  REQUIRE_THROWS_WITH(load_dataset(bad_cell, who_schema()),
                      Catch::Matchers::ContainsSubstring("unparsable"));

  const auto missing_col = write_temp("ds_missingcol.csv",
                                      "subject_id,time,event,arm\n"
                                      "a,1,1,0\n");
  REQUIRE_THROWS_AS(load_dataset(missing_col, who_schema()), DataError);

  const auto dup = write_temp("ds_dup.csv",
                              "subject_id,time,event,arm,who_level\n"
                              "a,1,1,0,1\n"
                              "a,2,0,1,0\n");
  REQUIRE_THROWS_WITH(load_dataset(dup, who_schema()),
                      Catch::Matchers::ContainsSubstring("duplicate"));
}

TEST_CASE("save then load round-trips a dataset") {
  CompetingRiskDataset ds;
  ds.schema = who_schema();
  ds.schema.has_origin_offset = true;
  ds.time_unit = "years";
  for (int i = 0; i < 20; ++i) {
    SubjectRecord r;
    r.subject_id = "s" + std::to_string(i);
    r.time = 0.1 + 0.37 * i;
    r.event = i % 3;
    r.arm = i % 2;
    r.covariates = {static_cast<double>(i % 2)};
    r.origin_offset = 0.25 * i;
    ds.records.push_back(r);
  }
  const auto path =
      (std::filesystem::temp_directory_path() / "ds_roundtrip.csv").string();
  save_dataset(ds, path);
  const auto back = load_dataset(path, ds.schema, ds.time_unit);
  REQUIRE(back.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.records[i].subject_id == ds.records[i].subject_id);
    CHECK(back.records[i].time == ds.records[i].time);
    CHECK(back.records[i].event == ds.records[i].event);
    CHECK(back.records[i].arm == ds.records[i].arm);
    CHECK(back.records[i].covariates == ds.records[i].covariates);
    CHECK(back.records[i].origin_offset == ds.records[i].origin_offset);
  }
}

TEST_CASE("partition_interim splits censored from observed") {
  CompetingRiskDataset ds;
  ds.schema = who_schema();
  const int events[6] = {1, 2, 0, 1, 0, 2};
  for (int i = 0; i < 6; ++i) {
    ds.records.push_back(
        {"s" + std::to_string(i), 1.0 + i, events[i], i % 2, {0.0}, {}});
  }
  const auto [obs, cens] = partition_interim(ds);
  CHECK(obs.size() == 4);
  CHECK(cens.size() == 2);
  for (const auto& r : obs.records) CHECK(r.event != 0);
  for (const auto& r : cens.records) CHECK(r.event == 0);
  CHECK(obs.size() + cens.size() == ds.size());
  // order preserved within each part
  CHECK(cens.records[0].subject_id == "s2");
  CHECK(cens.records[1].subject_id == "s4");

  CompetingRiskDataset all_observed = ds;
  for (auto& r : all_observed.records) {
    if (r.event == 0) r.event = 1;
  }
  const auto [obs2, cens2] = partition_interim(all_observed);
  CHECK(cens2.size() == 0);
  CHECK(obs2.size() == 6);

  CompetingRiskDataset empty;
  empty.schema = who_schema();
  REQUIRE_THROWS_AS(partition_interim(empty), DataError);
}

TEST_CASE("administrative censoring truncates strictly later times") {
  CompetingRiskDataset ds;
  ds.schema = who_schema();
  ds.records.push_back({"a", 75.0, 1, 0, {0.0}, {}});
  ds.records.push_back({"b", 10.0, 2, 0, {0.0}, {}});
  ds.records.push_back({"c", 60.0, 1, 1, {0.0}, {}});

  const auto censored = administrative_censor(ds, 60.0);
  CHECK(censored.records[0].time == 60.0);
  CHECK(censored.records[0].event == 0);
  CHECK(censored.records[1].time == 10.0);
  CHECK(censored.records[1].event == 2);
  // equality keeps the event
  CHECK(censored.records[2].event == 1);

  // idempotence
  const auto twice = administrative_censor(censored, 60.0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(twice.records[i].time == censored.records[i].time);
    CHECK(twice.records[i].event == censored.records[i].event);
  }
}

TEST_CASE("per-subject censoring horizons") {
  CompetingRiskDataset ds;
  ds.schema = who_schema();
  ds.records.push_back({"a", 10.5, 1, 0, {0.0}, {}});
  ds.records.push_back({"b", 10.5, 1, 1, {0.0}, {}});

  std::unordered_map<std::string, double> horizons{{"a", 10.7}, {"b", 10.2}};
  const auto out = administrative_censor(ds, horizons);
  CHECK(out.records[0].time == 10.5);
  CHECK(out.records[0].event == 1);
  CHECK(out.records[1].time == 10.2);
  CHECK(out.records[1].event == 0);

  horizons.erase("b");
  REQUIRE_THROWS_WITH(administrative_censor(ds, horizons),
                      Catch::Matchers::ContainsSubstring("b"));
}
