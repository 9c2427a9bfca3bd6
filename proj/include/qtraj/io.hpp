#pragma once
// Text formats: trajectory records (JSON header line + CSV), ensemble time
// series and herald histograms (CSV + JSON sidecar). Floating-point values
// are written in shortest round-trip form, so reading a file back yields
// bit-identical doubles.

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "qtraj/engine.hpp"
#include "qtraj/ensemble.hpp"
#include "qtraj/errors.hpp"
#include "qtraj/kraus.hpp"
#include "qtraj/qstate.hpp"
#include "qtraj/version.hpp"

namespace qtraj::io {

using json = nlohmann::json;

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw IoError("malformed number '" + std::string(s) + "'");
  }
  return v;
}

template <class Int>
Int parse_int(std::string_view s) {
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw IoError("malformed integer '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

// ---------------------------------------------------------------------------
// JSON fragments

inline json to_json(const MeasurementConfig& c) {
  return {{"scheme", std::string(to_string(c.scheme))},
          {"theta", c.theta},
          {"vartheta", c.vartheta},
          {"gamma", c.gamma},
          {"dt", c.dt},
          {"epsilon", c.epsilon()}};
}

inline MeasurementConfig config_from_json(const json& j) {
  MeasurementConfig c;
  c.scheme = parse_scheme(j.at("scheme").get<std::string>());
  c.theta = j.at("theta").get<double>();
  c.vartheta = j.at("vartheta").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.dt = j.at("dt").get<double>();
  return c;
}

inline json to_json(const PureTwoQubitState& s) {
  json a = json::array();
  for (int i = 0; i < 4; ++i) a.push_back({s[i].real(), s[i].imag()});
  return a;
}

inline PureTwoQubitState state_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw IoError("state must be an array of 4 [re, im] pairs");
  Vector4c v;
  for (int i = 0; i < 4; ++i) v(i) = cplx(j[i].at(0).get<double>(), j[i].at(1).get<double>());
  return PureTwoQubitState(v);
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  return f;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for reading");
  return f;
}

inline void finish(std::ostream& os, const std::string& path) {
  os.flush();
  if (!os) throw IoError("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Trajectory records
//
//   # {"format":"qtraj-trajectory", "config":{...}, "seed":..., ...}
//   step,t,<outcome columns>,concurrence
//   0,0,,,0
//   1,0.001,0.31,-1.2,0.002
//
// Outcome columns: n3,m4 | x3,x4 | alpha3_re,alpha3_im,alpha4_re,alpha4_im.

inline std::vector<std::string> outcome_columns(Scheme s) {
  switch (s) {
    case Scheme::photodetection: return {"n3", "m4"};
    case Scheme::homodyne: return {"x3", "x4"};
    case Scheme::heterodyne: return {"alpha3_re", "alpha3_im", "alpha4_re", "alpha4_im"};
  }
  return {};
}

inline void write_outcome(std::ostream& os, const Outcome& o) {
  if (const auto* pc = std::get_if<PhotoCounts>(&o)) {
    os << pc->n3 << ',' << pc->m4;
  } else if (const auto* q = std::get_if<QuadraturePair>(&o)) {
    os << format_double(q->x3) << ',' << format_double(q->x4);
  } else {
    const auto& h = std::get<HeterodynePair>(o);
    os << format_double(h.alpha3.real()) << ',' << format_double(h.alpha3.imag()) << ','
       << format_double(h.alpha4.real()) << ',' << format_double(h.alpha4.imag());
  }
}

inline json record_header(const TrajectoryRecord& r) {
  return {{"format", "qtraj-trajectory"},
          {"version", kVersion},
          {"config", to_json(r.cfg)},
          {"initial", to_json(r.initial)},
          {"t_max", r.t_max},
          {"seed", r.seed},
          {"sampler", std::string(to_string(r.sampler))},
          {"norm_warnings", r.norm_warnings}};
}

inline void write_record(std::ostream& os, const TrajectoryRecord& r) {
  if (r.readouts.size() + 1 != r.concurrence.size()) {
    throw PreconditionError("write_record needs a record with its readout stream");
  }
  os << "# " << record_header(r).dump() << '\n';
  os << "step,t";
  for (const auto& c : outcome_columns(r.cfg.scheme)) os << ',' << c;
  os << ",concurrence\n";
  const std::size_t blanks = outcome_columns(r.cfg.scheme).size();
  for (std::size_t k = 0; k < r.concurrence.size(); ++k) {
    os << k << ',' << format_double(r.times[k]) << ',';
    if (k == 0) {
      for (std::size_t b = 0; b < blanks; ++b) os << ',';
    } else {
      write_outcome(os, r.readouts[k - 1]);
      os << ',';
    }
    os << format_double(r.concurrence[k]) << '\n';
  }
}

inline void write_record(const std::string& path, const TrajectoryRecord& r) {
  auto f = open_out(path);
  write_record(f, r);
  finish(f, path);
}

inline TrajectoryRecord read_record(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) {
    throw IoError("trajectory file must start with a '# {json}' header line");
  }
  const json h = json::parse(line.substr(2));
  if (h.value("format", "") != "qtraj-trajectory") throw IoError("not a qtraj trajectory file");
  TrajectoryRecord r;
  r.cfg = config_from_json(h.at("config"));
  r.initial = state_from_json(h.at("initial"));
  r.t_max = h.at("t_max").get<double>();
  r.seed = h.at("seed").get<std::uint64_t>();
  r.sampler = parse_sampler(h.at("sampler").get<std::string>());
  r.norm_warnings = h.value("norm_warnings", std::size_t{0});

  const auto cols = outcome_columns(r.cfg.scheme);
  if (!std::getline(is, line)) throw IoError("trajectory file has no column header");
  const std::size_t width = cols.size() + 3;
  std::size_t expect = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != width) throw IoError("trajectory row has " + std::to_string(f.size()) + " fields");
    if (parse_int<std::size_t>(f[0]) != expect) throw IoError("trajectory rows out of order");
    r.times.push_back(parse_double(f[1]));
    r.concurrence.push_back(parse_double(f.back()));
    if (expect > 0) {
      switch (r.cfg.scheme) {
        case Scheme::photodetection:
          r.readouts.emplace_back(PhotoCounts{parse_int<int>(f[2]), parse_int<int>(f[3])});
          break;
        case Scheme::homodyne:
          r.readouts.emplace_back(QuadraturePair{parse_double(f[2]), parse_double(f[3])});
          break;
        case Scheme::heterodyne:
          r.readouts.emplace_back(HeterodynePair{{parse_double(f[2]), parse_double(f[3])},
                                                 {parse_double(f[4]), parse_double(f[5])}});
          break;
      }
    }
    ++expect;
  }
  return r;
}

inline TrajectoryRecord read_record(const std::string& path) {
  auto f = open_in(path);
  return read_record(f);
}

// ---------------------------------------------------------------------------
// Ensemble time series: t,mean_concurrence,std_concurrence,analytic_reference

inline std::string sidecar_path(const std::string& csv) { return csv + ".json"; }

inline json stats_sidecar(const EnsembleStats& s) {
  return {{"format", "qtraj-timeseries"},
          {"version", kVersion},
          {"config", to_json(s.cfg)},
          {"initial", to_json(s.initial)},
          {"t_max", s.t_max},
          {"n_trajectories", s.n_trajectories},
          {"master_seed", s.master_seed},
          {"sampler", std::string(to_string(s.sampler))},
          {"fingerprint", s.fingerprint}};
}

inline void write_timeseries(std::ostream& os, const EnsembleStats& s) {
  const bool analytic = is_excited_pair(s.initial);
  os << "t,mean_concurrence,std_concurrence,analytic_reference\n";
  for (std::size_t k = 0; k < s.t.size(); ++k) {
    os << format_double(s.t[k]) << ',' << format_double(s.mean_concurrence[k]) << ','
       << format_double(s.std_concurrence[k]) << ',';
    if (analytic) os << format_double(analytic_mean_concurrence(s.t[k], s.cfg.gamma));
    os << '\n';
  }
}

/// Writes `path` and `path.json`. `extra` is merged into the sidecar (the
/// resolved run spec, wall time, ...).
inline void emit_timeseries(const EnsembleStats& s, const std::string& path,
                            const json& extra = json::object()) {
  {
    auto f = open_out(path);
    write_timeseries(f, s);
    finish(f, path);
  }
  json side = stats_sidecar(s);
  side.update(extra);
  auto f = open_out(sidecar_path(path));
  f << side.dump(2) << '\n';
  finish(f, sidecar_path(path));
}

struct TimeseriesRow {
  double t = 0.0;
  double mean = 0.0;
  double std = 0.0;
  std::optional<double> analytic;
};

inline std::vector<TimeseriesRow> read_timeseries(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "t,mean_concurrence,std_concurrence,analytic_reference") {
    throw IoError("unexpected time-series header");
  }
  std::vector<TimeseriesRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 4) throw IoError("time-series row must have 4 fields");
    TimeseriesRow r{parse_double(f[0]), parse_double(f[1]), parse_double(f[2]), std::nullopt};
    if (!f[3].empty()) r.analytic = parse_double(f[3]);
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<TimeseriesRow> read_timeseries(const std::string& path) {
  auto f = open_in(path);
  return read_timeseries(f);
}

// ---------------------------------------------------------------------------
// Herald histograms: first_crossing_time,b,c,e,residual_abs,seed,step

struct SampleSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double stderr_of_mean() const { return count > 1 ? std::sqrt(variance / count) : 0.0; }
};

inline SampleSummary summarize(const std::vector<double>& x) {
  SampleSummary s;
  s.count = x.size();
  if (x.empty()) return s;
  double m = 0.0, m2 = 0.0;
  std::size_t k = 0;
  for (double v : x) {
    ++k;
    const double d = v - m;
    m += d / static_cast<double>(k);
    m2 += d * (v - m);
  }
  s.mean = m;
  s.variance = x.size() > 1 ? m2 / static_cast<double>(x.size() - 1) : 0.0;
  return s;
}

inline json summary_json(const std::vector<HeraldedSample>& samples) {
  std::vector<double> b, c, e;
  for (const auto& h : samples) {
    b.push_back(h.amplitudes.b);
    c.push_back(h.amplitudes.c);
    e.push_back(h.amplitudes.e);
  }
  auto one = [](const SampleSummary& s) {
    return json{{"mean", s.mean}, {"variance", s.variance}, {"stderr", s.stderr_of_mean()}};
  };
  return {{"count", samples.size()},
          {"b", one(summarize(b))},
          {"c", one(summarize(c))},
          {"e", one(summarize(e))}};
}

inline void write_histogram(std::ostream& os, const std::vector<HeraldedSample>& samples) {
  os << "first_crossing_time,b,c,e,residual_abs,seed,step\n";
  for (const auto& h : samples) {
    os << format_double(h.first_crossing_time) << ',' << format_double(h.amplitudes.b) << ','
       << format_double(h.amplitudes.c) << ',' << format_double(h.amplitudes.e) << ','
       << format_double(std::abs(h.amplitudes.residual)) << ',' << h.seed << ',' << h.step
       << '\n';
  }
}

inline std::string summary_path(const std::string& csv) { return csv + ".summary.json"; }

/// Writes the CSV and `path.summary.json`; an empty list produces a
/// header-only CSV and a warning on `warn`.
inline void emit_histogram(const std::vector<HeraldedSample>& samples, const std::string& path,
                           const json& extra = json::object(), std::ostream& warn = std::cerr) {
  if (samples.empty()) warn << "warning: no heralded samples; writing header-only " << path << '\n';
  {
    auto f = open_out(path);
    write_histogram(f, samples);
    finish(f, path);
  }
  json side = {{"format", "qtraj-histogram"}, {"version", kVersion}, {"summary", summary_json(samples)}};
  side.update(extra);
  auto f = open_out(summary_path(path));
  f << side.dump(2) << '\n';
  finish(f, summary_path(path));
}

struct HistogramRow {
  double first_crossing_time = 0.0;
  double b = 0.0, c = 0.0, e = 0.0, residual_abs = 0.0;
  std::uint64_t seed = 0;
  std::size_t step = 0;
};

inline std::vector<HistogramRow> read_histogram(const std::string& path) {
  auto is = open_in(path);
  std::string line;
  if (!std::getline(is, line) || line != "first_crossing_time,b,c,e,residual_abs,seed,step") {
    throw IoError("unexpected histogram header in '" + path + "'");
  }
  std::vector<HistogramRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 7) throw IoError("histogram row must have 7 fields");
    rows.push_back({parse_double(f[0]), parse_double(f[1]), parse_double(f[2]), parse_double(f[3]),
                    parse_double(f[4]), parse_int<std::uint64_t>(f[5]), parse_int<std::size_t>(f[6])});
  }
  return rows;
}

}  // namespace qtraj::io
