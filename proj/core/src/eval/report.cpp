#include "blockdetail/eval/report.h"

#include "blockdetail/common/error.h"
#include "blockdetail/motion/motion_io.h"

#include <algorithm>
#include <cstdio>

namespace blockdetail {

using nlohmann::json;

json EvalReport::to_json() const {
  json rows_json = json::array();
  for (const StrategyRow& r : rows) {
    rows_json.push_back({{"strategy", r.strategy.to_json()},
                         {"label", r.label},
                         {"footskate", r.footskate},
                         {"jitter", r.jitter},
                         {"fid", r.fid},
                         {"ke", r.ke},
                         {"clips", r.clips},
                         {"failures", r.failures}});
  }
  return {{"format_version", kFormatVersion},
          {"metric_version", metric_version},
          {"benchmark", spec.to_json()},
          {"seed", seed},
          {"clip_count", clip_count},
          {"models", models},
          {"config_hash", config_hash},
          {"units",
           {{"footskate", "m/frame"}, {"jitter", "m/frame^3"}, {"fid", "feature units"},
            {"ke", "m"}}},
          {"rows", std::move(rows_json)}};
}

EvalReport EvalReport::from_json(const json& doc) {
  try {
    EvalReport r;
    if (doc.at("format_version").get<int>() != kFormatVersion) {
      throw ValidationError("unsupported format_version", "format_version");
    }
    r.metric_version = doc.at("metric_version").get<std::string>();
    r.spec = BenchmarkSpec::from_json(doc.at("benchmark"));
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.clip_count = doc.at("clip_count").get<int>();
    r.models = doc.value("models", "");
    r.config_hash = doc.at("config_hash").get<std::string>();
    for (const json& row : doc.at("rows")) {
      StrategyRow s;
      s.strategy = StrategyDescriptor::from_json(row.at("strategy"));
      s.label = row.at("label").get<std::string>();
      s.footskate = row.at("footskate").get<double>();
      s.jitter = row.at("jitter").get<double>();
      s.fid = row.at("fid").get<double>();
      s.ke = row.at("ke").get<double>();
      s.clips = row.at("clips").get<int>();
      s.failures = row.value("failures", std::vector<std::string>{});
      r.rows.push_back(std::move(s));
    }
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed report: ") + e.what());
  }
}

std::string EvalReport::to_text() const {
  std::size_t width = 8;
  for (const StrategyRow& r : rows) width = std::max(width, r.label.size());
  std::string out;
  char line[512];
  std::snprintf(line, sizeof line, "%-*s  %15s  %13s  %10s  %9s\n", static_cast<int>(width),
                "Strategy", "FootSkate(1e-3)", "Jitter(1e-2)", "FID", "KE(1e-2)");
  out += line;
  out += std::string(width + 2 + 15 + 2 + 13 + 2 + 10 + 2 + 9, '-') + "\n";
  for (const StrategyRow& r : rows) {
    std::snprintf(line, sizeof line, "%-*s  %15.3f  %13.3f  %10.3f  %9.3f\n",
                  static_cast<int>(width), r.label.c_str(), r.footskate * 1e3, r.jitter * 1e2,
                  r.fid, r.ke * 1e2);
    out += line;
  }
  std::snprintf(line, sizeof line, "%s, %d clips, seed %llu, config %s\n", metric_version.c_str(),
                clip_count, static_cast<unsigned long long>(seed), config_hash.c_str());
  out += line;
  return out;
}

}  // namespace blockdetail
