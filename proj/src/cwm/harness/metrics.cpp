#include "cwm/harness/metrics.hpp"

#include <cmath>

#include "cwm/core/error.hpp"
#include "json.hpp"

namespace cwm::harness {

MetricsLog::MetricsLog(const std::filesystem::path& path) {
  if (path.empty()) return;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::app);
  if (!out_) throw_runtime("cannot open metrics file " + path.string());
}

std::string format_record(const MetricRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["name"] = r.name;
  if (std::isfinite(r.value))
    j["value"] = r.value;
  else
    j["value"] = nullptr;
  return j.dump();
}

void MetricsLog::log(std::int64_t step, const std::string& name, double value) {
  records_.push_back({step, name, value});
  if (out_.is_open()) {
    out_ << format_record(records_.back()) << '\n';
    out_.flush();
    if (!out_) throw_runtime("writing metrics failed");
  }
}

double MetricsLog::last(const std::string& name) const {
  for (auto it = records_.rbegin(); it != records_.rend(); ++it)
    if (it->name == name) return it->value;
  throw_runtime("no metric named " + name);
}

}  // namespace cwm::harness
