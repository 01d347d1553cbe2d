#include "hcr/hcr.h"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const char* kSmall = R"({
    "system": {"kind": "lorenz96", "d": 5, "F": 10.0, "steps": 500, "transient": 100},
    "master_seed": 4
})";

}  // namespace

TEST_CASE("version and error state") {
    CHECK(std::string(hcr_version()).size() > 0);
    hcr_config* cfg = nullptr;
    CHECK(hcr_config_parse("{not json", &cfg) == HCR_ERR_CONFIG);
    CHECK(cfg == nullptr);
    CHECK(std::string(hcr_last_error()).size() > 0);
    CHECK(hcr_config_parse(R"({"unknown_key": 1})", &cfg) == HCR_ERR_CONFIG);
    CHECK(std::string(hcr_last_error()).find("unknown_key") != std::string::npos);
    REQUIRE(hcr_config_parse(kSmall, &cfg) == HCR_OK);
    CHECK(std::string(hcr_last_error()).empty());
    hcr_config_free(cfg);
    CHECK(hcr_config_parse(nullptr, &cfg) == HCR_ERR_ARGUMENT);
    CHECK(hcr_config_load("/nonexistent/config.json", &cfg) != HCR_OK);
}

TEST_CASE("echo reports the needed length and truncates") {
    hcr_config* cfg = nullptr;
    REQUIRE(hcr_config_parse(kSmall, &cfg) == HCR_OK);
    const long need = hcr_config_echo(cfg, nullptr, 0);
    REQUIRE(need > 0);
    std::vector<char> full(static_cast<std::size_t>(need) + 1);
    CHECK(hcr_config_echo(cfg, full.data(), full.size()) == need);
    CHECK(std::string(full.data()).size() == static_cast<std::size_t>(need));
    char small[8];
    CHECK(hcr_config_echo(cfg, small, sizeof small) == need);
    CHECK(std::string(small) == std::string(full.data(), 7));
    CHECK(hcr_config_echo(nullptr, small, sizeof small) == -1);
    hcr_config_free(cfg);
}

TEST_CASE("overrides validate and simulate writes output") {
    hcr_config* cfg = nullptr;
    REQUIRE(hcr_config_parse(kSmall, &cfg) == HCR_OK);
    CHECK(hcr_config_set_threads(cfg, 0) == HCR_ERR_CONFIG);
    CHECK(hcr_config_set_grid(cfg, "enormous") == HCR_ERR_CONFIG);
    CHECK(hcr_config_set_seed(cfg, 9) == HCR_OK);
    const fs::path out = fs::temp_directory_path() / "hcr_c_api_sim";
    fs::remove_all(out);
    REQUIRE(hcr_config_set_output_dir(cfg, out.c_str()) == HCR_OK);
    CHECK(std::string(hcr_config_output_dir(cfg)) == out.string());
    CHECK(hcr_run_simulate(cfg) == HCR_OK);
    CHECK(fs::exists(out / "trajectory.csv"));
    hcr_config_free(cfg);
}

TEST_CASE("report on a missing directory is a missing artifact") {
    const fs::path out = fs::temp_directory_path() / "hcr_c_api_missing";
    fs::remove_all(out);
    CHECK(hcr_run_report(out.c_str()) == HCR_ERR_MISSING);
    CHECK(std::string(hcr_last_error()).size() > 0);
    CHECK(hcr_run_report(nullptr) == HCR_ERR_ARGUMENT);
    CHECK(hcr_run_pipeline(nullptr) == HCR_ERR_ARGUMENT);
}
