// plnoise: noise-trace analysis and synthesis front end.
//
// Exit codes: 0 ok, 2 config error, 3 ingest error, 4 stage failure.

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plnoise/config.hpp"
#include "plnoise/pipeline.hpp"

namespace {

// Every RunConfig key becomes a --key flag; flags override the config file,
// the config file overrides built-in defaults.
const std::vector<std::string> kConfigKeys = {
    "input", "format", "output_dir", "freq_count", "freq_start_hz", "freq_end_hz",
    "channels", "channel_edges_hz", "level_bin_width", "level_min", "level_max",
    "nominal_period", "gap_policy", "region_boundaries_hz", "moving_window",
    "moving_freq_index", "chunk_lengths", "alpha", "kpss_bandwidth", "acf_max_lag",
    "ljung_box_lags", "burst_thresholds", "synth_length", "synth_freq_count",
    "synth_mu", "synth_sigma", "synth_nu", "synth_anchor", "synth_kappa",
    "synth_half_band", "seed"};

struct Cli {
    std::string config_path;
    std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* cmd, Cli& cli) {
    cmd->add_option("-c,--config", cli.config_path, "flat key = value config file");
    for (const auto& key : kConfigKeys)
        cmd->add_option_function<std::string>(
            "--" + key, [&cli, key](const std::string& v) { cli.overrides[key] = v; },
            "override config key " + key);
}

plnoise::RunConfig resolve(const Cli& cli) {
    plnoise::RunConfig c;
    if (!cli.config_path.empty()) c = plnoise::load_config(cli.config_path, c);
    for (const auto& [k, v] : cli.overrides) plnoise::apply_config_key(c, k, v);
    c.validate();
    return c;
}

int run_stages(const Cli& cli, std::vector<std::string> stages) {
    const auto c = resolve(cli);
    const auto res = plnoise::run_pipeline(c, std::move(stages));
    for (const auto& st : res.stages) {
        if (!st.ran) continue;
        if (st.ok)
            std::printf("%-12s ok     %.2fs\n", st.name.c_str(), st.seconds);
        else
            std::printf("%-12s FAILED %s\n", st.name.c_str(), st.error.c_str());
    }
    std::printf("manifest: %s\n", res.manifest_path.c_str());
    return res.exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"large-scale noise analysis for narrowband power-line traces"};
    app.require_subcommand(1);

    Cli cli;
    std::string synth_out;

    auto* qa = app.add_subcommand("qa", "sampling-gap quality report");
    auto* spectrum = app.add_subcommand("spectrum", "per-frequency quantile summary and regions");
    auto* stationarity = app.add_subcommand("stationarity", "chunked KPSS stationarity curves");
    auto* dependence = app.add_subcommand("dependence", "autocorrelation with significance bounds");
    auto* fit = app.add_subcommand("fit", "level-change distribution fit and model selection");
    auto* bursts = app.add_subcommand("bursts", "steady-state burst run lengths and geometric fit");
    auto* synth = app.add_subcommand("synth", "generate a synthetic trace from the configured model");
    auto* all = app.add_subcommand("all", "run every analysis stage");
    for (auto* cmd : {qa, spectrum, stationarity, dependence, fit, bursts, synth, all})
        add_common(cmd, cli);
    synth->add_option("-o,--out", synth_out, "output trace path (default: the input key)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) {
            const auto c = resolve(cli);
            const std::string out = synth_out.empty() ? c.input : synth_out;
            if (out.empty()) throw plnoise::ConfigError("synth: no output path (set --out or input)");
            plnoise::write_synthetic_trace(c, out);
            std::printf("wrote %s: %llu samples\n", out.c_str(),
                        static_cast<unsigned long long>(c.synth_length) * c.synth_freq_count);
            return 0;
        }
        if (qa->parsed()) return run_stages(cli, {"qa"});
        if (spectrum->parsed()) return run_stages(cli, {"spectrum"});
        if (stationarity->parsed()) return run_stages(cli, {"stationarity"});
        if (dependence->parsed()) return run_stages(cli, {"dependence"});
        if (fit->parsed()) return run_stages(cli, {"fit"});
        if (bursts->parsed()) return run_stages(cli, {"bursts"});
        return run_stages(cli, {});
    } catch (const plnoise::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const plnoise::IngestError& e) {
        std::fprintf(stderr, "ingest error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
}
