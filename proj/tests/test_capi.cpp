#include <filesystem>
#include <string>

#include "cwm/cwm.h"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

std::string get(cwm_config* cfg, const char* key) {
  unsigned long needed = 0;
  REQUIRE(cwm_config_get(cfg, key, nullptr, 0, &needed) == CWM_OK);
  std::string out(needed, '\0');
  REQUIRE(cwm_config_get(cfg, key, out.data(), needed, nullptr) == CWM_OK);
  out.pop_back();
  return out;
}

}  // namespace

TEST_CASE("configuration handles") {
  CHECK(std::string(cwm_version()) == "1.0.0");
  CHECK(cwm_config_create(nullptr) == CWM_ERROR_CONFIG);

  cwm_config* cfg = nullptr;
  REQUIRE(cwm_config_create(&cfg) == CWM_OK);
  CHECK(get(cfg, "model.preset") == "desk");
  CHECK(cwm_config_set(cfg, "pretrain.batch", "7") == CWM_OK);
  CHECK(get(cfg, "pretrain.batch") == "7");
  CHECK(std::string(cwm_last_error()).empty());

  CHECK(cwm_config_set(cfg, "no.such.key", "1") == CWM_ERROR_CONFIG);
  CHECK(std::string(cwm_last_error()).find("no.such.key") != std::string::npos);
  CHECK(cwm_config_set(cfg, "pretrain.batch", "seven") == CWM_ERROR_CONFIG);
  CHECK(cwm_config_load(cfg, "/nonexistent/run.cfg") == CWM_ERROR_CONFIG);
  CHECK(get(cfg, "pretrain.batch") == "7");

  char small[3];
  unsigned long needed = 0;
  CHECK(cwm_config_get(cfg, "model.conditioning", small, sizeof small, &needed) == CWM_OK);
  CHECK(std::string(small) == "cr");
  CHECK(needed == std::string("cross_attention").size() + 1);

  cwm_report* manifest = nullptr;
  REQUIRE(cwm_config_manifest(cfg, &manifest) == CWM_OK);
  CHECK(std::string(cwm_report_text(manifest)).find("pretrain.batch = 7\n") != std::string::npos);
  cwm_report_destroy(manifest);
  cwm_config_destroy(cfg);
  cwm_config_destroy(nullptr);
  cwm_report_destroy(nullptr);
}

TEST_CASE("running commands through the library") {
  cwm_config* cfg = nullptr;
  REQUIRE(cwm_config_create(&cfg) == CWM_OK);
  cwm_report* report = nullptr;
  CHECK(cwm_run(cfg, "inspect", &report) == CWM_OK);
  auto j = nlohmann::json::parse(cwm_report_text(report));
  CHECK(j["embed_dim"] == 768);
  cwm_report_destroy(report);

  CHECK(cwm_run(cfg, "eval", &report) == CWM_ERROR_CONFIG);
  CHECK(report == nullptr);
  CHECK(cwm_run(cfg, "dance", &report) == CWM_ERROR_CONFIG);

  const fs::path dir = fs::temp_directory_path() / "cwm_capi_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  REQUIRE(cwm_config_set(cfg, "out", (dir / "run").c_str()) == CWM_OK);
  REQUIRE(cwm_config_set(cfg, "data.source", (dir / "missing").c_str()) == CWM_OK);
  CHECK(cwm_run(cfg, "pretrain", &report) == CWM_ERROR_DATA);
  fs::remove_all(dir);
  cwm_config_destroy(cfg);
}
