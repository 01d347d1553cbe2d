#include "hcr/hcr.h"

#include "hcr/harness.hpp"

#include <cstring>
#include <string>

struct hcr_config {
    hcr::ExperimentConfig cfg;
    std::string out_text;
};

namespace {

thread_local std::string g_last_error;

hcr_status status_for(hcr::ErrorCode code) {
    switch (code) {
        case hcr::ErrorCode::Config: return HCR_ERR_CONFIG;
        case hcr::ErrorCode::MissingArtifact: return HCR_ERR_MISSING;
        default: return HCR_ERR_STAGE;
    }
}

template <class F>
hcr_status guarded(F&& body) {
    g_last_error.clear();
    try {
        body();
        return HCR_OK;
    } catch (const hcr::StageError& e) {
        g_last_error = e.what();
        // A missing input inside a stage is still a missing artifact.
        return e.cause() == hcr::ErrorCode::MissingArtifact ? HCR_ERR_MISSING : HCR_ERR_STAGE;
    } catch (const hcr::Error& e) {
        g_last_error = e.what();
        return status_for(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return HCR_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return HCR_ERR_INTERNAL;
    }
}

hcr_status bad_argument(const char* what) {
    g_last_error = what;
    return HCR_ERR_ARGUMENT;
}

}  // namespace

extern "C" {

hcr_status hcr_config_load(const char* path, hcr_config** out) {
    if (!out) return bad_argument("out is null");
    *out = nullptr;
    if (!path) return bad_argument("path is null");
    return guarded([&] { *out = new hcr_config{hcr::load_config(path), {}}; });
}

hcr_status hcr_config_parse(const char* json_text, hcr_config** out) {
    if (!out) return bad_argument("out is null");
    *out = nullptr;
    if (!json_text) return bad_argument("json_text is null");
    return guarded([&] {
        hcr::Json j;
        try {
            j = hcr::Json::parse(json_text);
        } catch (const nlohmann::json::exception& e) {
            hcr::fail(hcr::ErrorCode::Config, std::string("config is not valid JSON: ") + e.what());
        }
        *out = new hcr_config{hcr::parse_config(j), {}};
    });
}

void hcr_config_free(hcr_config* cfg) { delete cfg; }

hcr_status hcr_config_set_seed(hcr_config* cfg, uint64_t seed) {
    if (!cfg) return bad_argument("config is null");
    return guarded([&] { hcr::apply_overrides(cfg->cfg, hcr::Overrides{seed, {}, {}, {}}); });
}

hcr_status hcr_config_set_output_dir(hcr_config* cfg, const char* dir) {
    if (!cfg || !dir) return bad_argument("null argument");
    return guarded([&] { hcr::apply_overrides(cfg->cfg, hcr::Overrides{{}, std::filesystem::path(dir), {}, {}}); });
}

hcr_status hcr_config_set_grid(hcr_config* cfg, const char* preset) {
    if (!cfg || !preset) return bad_argument("null argument");
    return guarded([&] { hcr::apply_overrides(cfg->cfg, hcr::Overrides{{}, {}, std::string(preset), {}}); });
}

hcr_status hcr_config_set_threads(hcr_config* cfg, int threads) {
    if (!cfg) return bad_argument("config is null");
    return guarded([&] { hcr::apply_overrides(cfg->cfg, hcr::Overrides{{}, {}, {}, threads}); });
}

long hcr_config_echo(const hcr_config* cfg, char* buf, unsigned long size) {
    if (!cfg) return -1;
    try {
        const std::string text = cfg->cfg.echo().dump(2);
        if (buf && size > 0) {
            const std::size_t n = std::min<std::size_t>(text.size(), size - 1);
            std::memcpy(buf, text.data(), n);
            buf[n] = '\0';
        }
        return static_cast<long>(text.size());
    } catch (...) {
        return -1;
    }
}

const char* hcr_config_output_dir(const hcr_config* cfg) {
    if (!cfg) return "";
    auto* self = const_cast<hcr_config*>(cfg);
    self->out_text = cfg->cfg.output_dir.string();
    return self->out_text.c_str();
}

hcr_status hcr_run_simulate(const hcr_config* cfg) {
    if (!cfg) return bad_argument("config is null");
    return guarded([&] { hcr::cmd_simulate(cfg->cfg); });
}

hcr_status hcr_run_pipeline(const hcr_config* cfg) {
    if (!cfg) return bad_argument("config is null");
    return guarded([&] { hcr::cmd_pipeline(cfg->cfg); });
}

hcr_status hcr_run_lyapunov(const hcr_config* cfg) {
    if (!cfg) return bad_argument("config is null");
    return guarded([&] { hcr::cmd_lyapunov(cfg->cfg); });
}

hcr_status hcr_run_select(const hcr_config* cfg) {
    if (!cfg) return bad_argument("config is null");
    return guarded([&] { hcr::cmd_select(cfg->cfg); });
}

hcr_status hcr_run_report(const char* output_dir) {
    if (!output_dir) return bad_argument("output_dir is null");
    return guarded([&] { hcr::cmd_report(output_dir); });
}

const char* hcr_last_error(void) { return g_last_error.c_str(); }

const char* hcr_version(void) { return "0.1.0"; }

}  // extern "C"
