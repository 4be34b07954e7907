#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppos/config.hpp"
#include "ppos/model_fit.hpp"
#include "ppos/orchestrator.hpp"

namespace ppos {

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write output file: " + path.string());
  return out;
}

inline ordered_json replicate_json(const ReplicateRecord& r) {
  ordered_json j;
  j["replicate"] = r.index;
  j["stream"] = r.stream;
  if (std::isfinite(r.statistic)) {
    j["statistic"] = r.statistic;
  } else {
    j["statistic"] = nullptr;
  }
  j["success"] = r.success ? 1 : 0;
  j["valid"] = r.valid;
  return j;
}

}  // namespace detail

inline ordered_json ppos_report_json(const PposResult& res,
                                     const ordered_json& config_echo) {
  ordered_json j;
  j["ppos"] = res.ppos;
  j["mc_se"] = res.mc_se;
  j["k"] = res.k;
  j["k_effective"] = res.k_effective;
  j["seed"] = res.master_seed;
  j["pool_with_replacement"] = res.pool_with_replacement;
  ordered_json diag = ordered_json::array();
  for (const auto& d : res.posterior_diagnostics) {
    ordered_json s;
    s["stratum"] = d.label;
    s["min_ess"] = d.min_ess;
    s["max_rhat"] = d.max_rhat;
    diag.push_back(std::move(s));
  }
  j["posterior_diagnostics"] = std::move(diag);
  ordered_json reps = ordered_json::array();
  for (const auto& r : res.replicates) reps.push_back(detail::replicate_json(r));
  j["per_replicate"] = std::move(reps);
  j["config_echo"] = config_echo;
  return j;
}

inline void write_ppos_report(const PposResult& res,
                              const ordered_json& config_echo,
                              const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    auto out = detail::open_out(out_dir / "report.json");
    out << ppos_report_json(res, config_echo).dump(2) << "\n";
  }
  {
    auto out = detail::open_out(out_dir / "replicates.csv");
    out << "replicate,stream,statistic,success,valid\n";
    for (const auto& r : res.replicates) {
      out << r.index << "," << r.stream << "," << detail::format_double(r.statistic)
          << "," << (r.success ? 1 : 0) << "," << (r.valid ? 1 : 0) << "\n";
    }
  }
  if (!res.curve_times.empty()) {
    auto out = detail::open_out(out_dir / "curves.csv");
    out << "replicate,arm,time,cif1\n";
    for (const auto& c : res.curves) {
      for (std::size_t i = 0; i < res.curve_times.size(); ++i) {
        out << c.replicate << "," << c.arm << ","
            << detail::format_double(res.curve_times[i]) << ","
            << detail::format_double(c.cif1[i]) << "\n";
      }
    }
  }
}

// Parameter summaries + convergence table for the modelling phase.
inline void write_fit_summary(const std::vector<FittedStratum>& fits,
                              const std::filesystem::path& out_dir,
                              bool draws_csv = false) {
  std::filesystem::create_directories(out_dir);
  auto out = detail::open_out(out_dir / "fit_summary.csv");
  out << "stratum,parameter,mean,sd,q025,q500,q975,ess,rhat\n";
  for (const auto& fit : fits) {
    const std::string label = detail::stratum_label(fit.spec);
    for (std::size_t pcol = 0; pcol < fit.draws.n_params(); ++pcol) {
      std::vector<double> col;
      col.reserve(fit.draws.n_total());
      for (std::size_t r = 0; r < fit.draws.n_total(); ++r) {
        col.push_back(fit.draws.at(r, pcol));
      }
      out << label << "," << fit.draws.names[pcol] << ","
          << detail::format_double(mean_of(col)) << ","
          << detail::format_double(std::sqrt(sample_variance(col))) << ","
          << detail::format_double(quantile(col, 0.025)) << ","
          << detail::format_double(quantile(col, 0.5)) << ","
          << detail::format_double(quantile(col, 0.975)) << ","
          << detail::format_double(fit.draws.diagnostics[pcol].ess) << ","
          << detail::format_double(fit.draws.diagnostics[pcol].rhat) << "\n";
    }
  }
  if (draws_csv) {
    for (const auto& fit : fits) {
      auto dout = detail::open_out(out_dir / ("draws_" +
                                              detail::stratum_label(fit.spec) +
                                              ".csv"));
      for (std::size_t pcol = 0; pcol < fit.draws.n_params(); ++pcol) {
        dout << (pcol ? "," : "") << fit.draws.names[pcol];
      }
      dout << "\n";
      for (std::size_t r = 0; r < fit.draws.n_total(); ++r) {
        for (std::size_t pcol = 0; pcol < fit.draws.n_params(); ++pcol) {
          dout << (pcol ? "," : "")
               << detail::format_double(fit.draws.at(r, pcol));
        }
        dout << "\n";
      }
    }
  }
}

inline void write_scenario_table(const std::vector<ScenarioResult>& scenarios,
                                 const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto out = detail::open_out(out_dir / "scenarios.csv");
  out << "scenario,mu,sigma,horizon,ppos,mc_se,k_effective,status\n";
  for (const auto& s : scenarios) {
    out << s.label << "," << detail::format_double(s.mu) << ","
        << detail::format_double(s.sigma) << ","
        << detail::format_double(s.horizon) << ",";
    if (s.failed) {
      out << "nan,nan,0,failed\n";
    } else {
      out << detail::format_double(s.result.ppos) << ","
          << detail::format_double(s.result.mc_se) << ","
          << s.result.k_effective << ",ok\n";
    }
  }
}

// Histogram bins over [0,1] of the per-replicate statistic (figure-1 style).
inline void write_statistic_histogram(const ordered_json& report,
                                      const std::filesystem::path& out_path,
                                      int bins) {
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  if (!report.contains("per_replicate")) {
    throw ConfigError("report has no per_replicate table");
  }
  const auto& reps = report.at("per_replicate");
  if (reps.empty()) throw ConfigError("report has an empty per_replicate table");
  std::vector<long> counts(static_cast<std::size_t>(bins), 0);
  long total = 0;
  for (const auto& r : reps) {
    if (r.at("statistic").is_null()) continue;
    const double v = r.at("statistic").get<double>();
    const int b = std::min(bins - 1,
                           std::max(0, static_cast<int>(v * bins)));
    ++counts[static_cast<std::size_t>(b)];
    ++total;
  }
  auto out = detail::open_out(out_path);
  out << "bin_lo,bin_hi,count\n";
  for (int b = 0; b < bins; ++b) {
    out << detail::format_double(static_cast<double>(b) / bins) << ","
        << detail::format_double(static_cast<double>(b + 1) / bins) << ","
        << counts[static_cast<std::size_t>(b)] << "\n";
  }
  (void)total;
}

// Deterministic sample of replicate CIF curves (figure-2 style).
inline void write_curve_sample(const std::filesystem::path& curves_csv,
                               const std::filesystem::path& out_path,
                               int n_sample, std::uint64_t seed) {
  std::ifstream in(curves_csv);
  if (!in) throw ConfigError("cannot open curves file: " + curves_csv.string());
  std::string header;
  std::getline(in, header);
  std::vector<std::string> lines;
  std::vector<int> replicate_of;
  std::string line;
  std::vector<int> ids;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const int rep = std::stoi(line.substr(0, line.find(',')));
    lines.push_back(line);
    replicate_of.push_back(rep);
    if (ids.empty() || ids.back() != rep) {
      if (std::find(ids.begin(), ids.end(), rep) == ids.end()) ids.push_back(rep);
    }
  }
  if (ids.empty()) throw ConfigError("curves file has no curves");

  Philox rng(seed, stream::id(stream::kFigure, 0));
  std::vector<int> chosen = ids;
  if (static_cast<int>(ids.size()) > n_sample) {
    for (int j = 0; j < n_sample; ++j) {
      const std::size_t pick =
          j + static_cast<std::size_t>(rng.uniform01() * (ids.size() - j));
      std::swap(chosen[static_cast<std::size_t>(j)],
                chosen[std::min(pick, ids.size() - 1)]);
    }
    chosen.resize(static_cast<std::size_t>(n_sample));
  }
  std::sort(chosen.begin(), chosen.end());

  auto out = detail::open_out(out_path);
  out << header << "\n";
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (std::binary_search(chosen.begin(), chosen.end(), replicate_of[i])) {
      out << lines[i] << "\n";
    }
  }
}

}  // namespace ppos
