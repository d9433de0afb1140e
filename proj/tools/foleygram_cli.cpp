// Command-line front end over the foleygram C API.
#include <foleygram/foleygram.h>

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitModuleError = 1;
constexpr int kExitConfigError = 2;

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> modalities;
    std::optional<double> guidance;
    std::optional<int> steps;
    std::optional<int> window;
    std::optional<int> hop;
    std::vector<std::string> sets;
};

int report(fg_status status) {
    std::fprintf(stderr, "error: %s: %s\n", fg_status_name(status), fg_last_error());
    return status == FG_CONFIG_PARSE ? kExitConfigError : kExitModuleError;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int run(const std::string & command, const Flags & flags) {
    fg_config * cfg = nullptr;
    fg_status st = flags.config.empty() ? fg_config_create(&cfg) : fg_config_load(flags.config.c_str(), &cfg);
    if (st != FG_OK) return report(st);

    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto & kv : flags.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
            fg_config_destroy(cfg);
            std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
            return kExitConfigError;
        }
        overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (flags.seed) overrides.emplace_back("seed", std::to_string(*flags.seed));
    if (flags.out) overrides.emplace_back("out", *flags.out);
    if (flags.modalities) overrides.emplace_back("modalities", *flags.modalities);
    if (flags.guidance) overrides.emplace_back("guidance", format_double(*flags.guidance));
    if (flags.steps) overrides.emplace_back("steps", std::to_string(*flags.steps));
    if (flags.window) overrides.emplace_back("window", std::to_string(*flags.window));
    if (flags.hop) overrides.emplace_back("hop", std::to_string(*flags.hop));
    for (const auto & [key, value] : overrides) {
        if ((st = fg_config_set(cfg, key.c_str(), value.c_str())) != FG_OK) {
            fg_config_destroy(cfg);
            return report(st);
        }
    }

    fg_result * result = nullptr;
    st = fg_run_command(command.c_str(), cfg, &result);
    fg_config_destroy(cfg);
    if (st != FG_OK) return report(st);
    for (size_t i = 0; i < fg_result_output_count(result); ++i) std::printf("%s\n", fg_result_output(result, i));
    fg_result_destroy(result);
    return 0;
}

} // namespace

int main(int argc, char ** argv) {
    CLI::App app{"foleygram: multimodal alignment and envelope-controlled generation toolkit"};
    app.require_subcommand(1);
    Flags flags;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"gen-data", "Generate a synthetic dataset (data.kind = alignment | foley)"},
        {"train-align", "Train the three toy encoders (align.loss = gram | pairwise)"},
        {"eval-align", "Held-out retrieval and alignment statistics for trained encoders"},
        {"extract-env", "RMS envelope of a WAV file as CSV"},
        {"train-gen", "Train the generator: main branch, then control branch"},
        {"generate", "Sample one clip conditioned on a dataset clip"},
        {"evaluate", "FAD, cosine score, envelope correlation and class probe on held-out clips"},
        {"ablate", "Evaluate all seven conditioning subsets and rank them"},
    };
    for (const auto & [name, help] : commands) {
        CLI::App * sub = app.add_subcommand(name, help);
        sub->add_option("--config", flags.config, "key=value config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", flags.seed, "Random seed");
        sub->add_option("--out", flags.out, "Output directory");
        sub->add_option("--modalities", flags.modalities, "Conditioning subset: avt, av, at, vt, a, v or t");
        sub->add_option("--guidance", flags.guidance, "Classifier-free guidance scale (default 2.0)");
        sub->add_option("--steps", flags.steps, "Sampling steps (default 150)");
        sub->add_option("--window", flags.window, "Envelope window in samples (default 512)");
        sub->add_option("--hop", flags.hop, "Envelope hop in samples (default 128)");
        sub->add_option("--set", flags.sets, "Config override key=value (repeatable)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success & e) {
        return app.exit(e);
    } catch (const CLI::ParseError & e) {
        app.exit(e);
        return kExitConfigError;
    }
    for (const CLI::App * sub : app.get_subcommands()) return run(sub->get_name(), flags);
    return kExitConfigError;
}
