#include <ctime>
#include <fstream>
#include <sstream>
#include <vector>

#include "aspo/driver.hpp"

namespace aspo {

using nlohmann::json;

namespace {

json optionalNumber(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string number(double v) { return json(v).dump(); }

std::string csvField(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string optionalCsv(const std::optional<double>& v) { return v ? number(*v) : std::string(); }

json summaryJson(const RunReport& r, const ParameterSpace& space) {
  json s = {{"generator", r.generator},
            {"processor", r.processor},
            {"benchmark", r.benchmark},
            {"seed", r.seed},
            {"strategy", r.strategy},
            {"evaluations", r.history.size()},
            {"invalid", r.invalidCount()},
            {"idr", optionalNumber(r.idr())},
            {"tdt_minutes", r.tdtMinutes},
            {"tdt_compressed_minutes", r.tdtMinutes * r.timeCompression},
            {"best_eet_ms", optionalNumber(r.bestEetMs)},
            {"best_config", r.bestConfig ? space.configToJson(*r.bestConfig) : json(nullptr)},
            {"stop_reason", r.stopReason},
            {"weights", r.weights}};
  return s;
}

}  // namespace

std::string virtualTimestamp(double minutes) {
  std::time_t t = 946684800 + static_cast<std::time_t>(std::llround(minutes * 60.0));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string reportJsonl(const RunReport& report, const ParameterSpace& space) {
  std::ostringstream out;
  for (const auto& e : report.history) {
    json j = {{"index", e.index},
              {"phase", e.phase},
              {"iteration", e.iteration},
              {"config", space.configToJson(e.config)},
              {"result", e.result.toJson()},
              {"eet_ms", optionalNumber(e.eetMs)},
              {"best_eet_ms", optionalNumber(e.bestEetMs)},
              {"alpha", optionalNumber(e.alpha)},
              {"cost_estimate", optionalNumber(e.costEstimate)},
              {"cache_hit", e.cacheHit},
              {"reference", e.reference ? json(configurationDigest(space, *e.reference)) : json(nullptr)},
              {"tdt_minutes", e.tdtMinutes}};
    out << j.dump() << '\n';
  }
  out << json{{"summary", summaryJson(report, space)}}.dump() << '\n';
  return out.str();
}

std::string reportCsv(const RunReport& report, const ParameterSpace& space) {
  std::ostringstream out;
  out << "row,index,phase,iteration";
  for (const auto& p : space.params()) out << ',' << csvField(p.name);
  out << ",valid,failure_stage,cycles,fmax_mhz,luts,power_w,eval_minutes,synthesis_minutes,eet_ms,best_eet_ms,"
         "alpha,cost_estimate,cache_hit,reference,tdt_minutes,idr\n";
  for (const auto& e : report.history) {
    out << "data," << e.index << ',' << csvField(e.phase) << ',' << e.iteration;
    for (std::size_t i = 0; i < space.paramCount(); ++i)
      out << ',' << csvField(toString(space.param(i).values[e.config.level(i)]));
    const auto& r = e.result;
    out << ',' << (r.valid() ? "true" : "false") << ',' << (r.failureStage ? toString(*r.failureStage) : "") << ','
        << r.cycles << ',' << number(r.fmaxMHz) << ',' << r.luts << ',' << number(r.powerW) << ','
        << number(r.evalMinutes) << ',' << number(r.synthesisMinutes) << ',' << optionalCsv(e.eetMs) << ','
        << optionalCsv(e.bestEetMs) << ',' << optionalCsv(e.alpha) << ',' << optionalCsv(e.costEstimate) << ','
        << (e.cacheHit ? "true" : "false") << ',' << (e.reference ? configurationDigest(space, *e.reference) : "")
        << ',' << number(e.tdtMinutes) << ",\n";
  }
  // Summary row: index holds the evaluation count, phase the generator, the
  // parameter columns the best configuration.
  out << "summary," << report.history.size() << ',' << csvField(report.generator) << ',';
  for (std::size_t i = 0; i < space.paramCount(); ++i) {
    out << ',';
    if (report.bestConfig) out << csvField(toString(space.param(i).values[report.bestConfig->level(i)]));
  }
  auto idr = report.idr();
  std::vector<std::string> tail(16);
  tail[6] = number(report.tdtMinutes);
  tail[9] = optionalCsv(report.bestEetMs);
  tail[14] = number(report.tdtMinutes);
  tail[15] = idr ? number(*idr) : "null";
  for (const auto& f : tail) out << ',' << f;
  out << '\n';
  return out.str();
}

void emitReport(const RunReport& report, const ParameterSpace& space, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create report directory " + dir.string() + ": " + ec.message());
  auto write = [](const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
  };
  write(dir / "report.jsonl", reportJsonl(report, space));
  write(dir / "report.csv", reportCsv(report, space));
}

}  // namespace aspo
