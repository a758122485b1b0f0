#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace cwm::harness {

struct MetricRecord {
  std::int64_t step = 0;
  std::string name;
  double value = 0;
};

/// Append-only JSON-lines stream, one {"step", "name", "value"} object per
/// line. Records are also kept in memory.
class MetricsLog {
 public:
  MetricsLog() = default;
  /// Opens `path` for appending. An empty path keeps records in memory only.
  explicit MetricsLog(const std::filesystem::path& path);

  void log(std::int64_t step, const std::string& name, double value);
  const std::vector<MetricRecord>& records() const { return records_; }
  /// Last value logged under `name`; throws when there is none.
  double last(const std::string& name) const;

 private:
  std::ofstream out_;
  std::vector<MetricRecord> records_;
};

/// One JSON object per line as written by MetricsLog.
std::string format_record(const MetricRecord& r);

}  // namespace cwm::harness
