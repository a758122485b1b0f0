#include <algorithm>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "cwm/core/error.hpp"
#include "cwm/cwm.h"
#include "cwm/harness/commands.hpp"
#include "cwm/harness/config.hpp"

struct cwm_config {
  cwm::harness::RunConfig cfg;
};

struct cwm_report {
  std::string text;
};

namespace {

thread_local std::string last_error;

template <class F>
cwm_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return CWM_OK;
  } catch (const cwm::Error& e) {
    last_error = e.what();
    return static_cast<cwm_status>(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return CWM_ERROR_RUNTIME;
}

cwm_status null_arg(const char* what) {
  last_error = std::string(what) + " must not be null";
  return CWM_ERROR_CONFIG;
}

}  // namespace

extern "C" {

const char* cwm_version(void) { return CWM_VERSION_STRING; }

const char* cwm_last_error(void) { return last_error.c_str(); }

cwm_status cwm_config_create(cwm_config** out) {
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new cwm_config(); });
}

void cwm_config_destroy(cwm_config* cfg) { delete cfg; }

cwm_status cwm_config_load(cwm_config* cfg, const char* path) {
  if (!cfg) return null_arg("cfg");
  if (!path) return null_arg("path");
  return guarded([&] {
    cwm::harness::RunConfig next = cfg->cfg;
    cwm::harness::apply_entries(next, cwm::harness::parse_config_file(path));
    cfg->cfg = std::move(next);
  });
}

cwm_status cwm_config_set(cwm_config* cfg, const char* key, const char* value) {
  if (!cfg) return null_arg("cfg");
  if (!key || !value) return null_arg("key/value");
  return guarded([&] { cfg->cfg.set(key, value); });
}

cwm_status cwm_config_get(const cwm_config* cfg, const char* key, char* buf, unsigned long size,
                          unsigned long* needed) {
  if (!cfg) return null_arg("cfg");
  if (!key) return null_arg("key");
  return guarded([&] {
    const std::string v = cfg->cfg.get(key);
    if (needed) *needed = static_cast<unsigned long>(v.size() + 1);
    if (buf && size > 0) {
      const size_t n = std::min<size_t>(v.size(), size - 1);
      std::memcpy(buf, v.data(), n);
      buf[n] = '\0';
    }
  });
}

cwm_status cwm_config_manifest(const cwm_config* cfg, cwm_report** out) {
  if (!cfg) return null_arg("cfg");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] { *out = new cwm_report{cfg->cfg.manifest()}; });
}

cwm_status cwm_run(const cwm_config* cfg, const char* command, cwm_report** out) {
  if (!cfg) return null_arg("cfg");
  if (!command) return null_arg("command");
  if (out) *out = nullptr;
  return guarded([&] {
    std::string text = cwm::harness::run_command(command, cfg->cfg);
    if (out) *out = new cwm_report{std::move(text)};
  });
}

const char* cwm_report_text(const cwm_report* report) { return report ? report->text.c_str() : ""; }

void cwm_report_destroy(cwm_report* report) { delete report; }

}  // extern "C"
