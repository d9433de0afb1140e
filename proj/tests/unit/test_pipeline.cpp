#include "pipeline.hpp"

#include "error.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace foleygram;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string & name) {
    const fs::path p = fs::temp_directory_path() / ("foleygram_unit_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path & p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

fs::path with_prefix(const CommandResult & r, const std::string & prefix) {
    for (const auto & p : r.outputs)
        if (p.filename().string().rfind(prefix, 0) == 0) return p;
    FAIL("no output named " << prefix);
    return {};
}

} // namespace

TEST_CASE("config parsing") {
    const Config c = Config::parse("seed = 4  # comment\n\n[align]\nlr=0.5\n; full comment\n[gen]\n batch = 8\n");
    CHECK(c.get_u64("seed", 0) == 4);
    CHECK(c.get_double("align.lr", 0.0) == 0.5);
    CHECK(c.get_int("gen.batch", 0) == 8);
    CHECK(c.get_int("gen.missing", 7) == 7);
    CHECK(c.canonical() == "seed = 4\n\n[align]\nlr = 0.5\n\n[gen]\nbatch = 8\n");
    CHECK(Config::parse(c.canonical()).canonical() == c.canonical());
    CHECK_THROWS_AS(Config::parse("[open\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("novalue\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("bad key = 1\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("seed = x\n").get_u64("seed", 0), ConfigError);
    CHECK_THROWS_AS(Config::parse("lr = 1e-3x\n").get_double("lr", 0), ConfigError);
}

TEST_CASE("config hash ignores the output directory") {
    Config a = Config::parse("seed = 1\n");
    Config b = a;
    a.set("out", "/tmp/a");
    b.set("out", "/tmp/b");
    CHECK(a.hash() == b.hash());
    b.set("seed", "2");
    CHECK(a.hash() != b.hash());
    CHECK(a.hash().size() == 12);
}

TEST_CASE("resolved config carries defaults and the command") {
    const Config r = resolve_config("generate", Config{});
    CHECK(r.get_string("command") == "generate");
    CHECK(r.get_double("guidance", 0.0) == 2.0);
    CHECK(r.get_int("steps", 0) == 150);
    CHECK(r.get_int("window", 0) == 512);
    CHECK(r.get_int("hop", 0) == 128);
    CHECK(r.get_string("modalities") == "avt");
    CHECK_THROWS_AS(resolve_config("nope", Config{}), ConfigError);
    CHECK(command_names().size() == 8);
}

TEST_CASE("extract-env on silence gives zeros") {
    const fs::path dir = scratch("env");
    Waveform silence;
    silence.sample_rate = 44100;
    silence.samples.assign(44100, 0.0f);
    write_wav(dir / "silence.wav", silence);
    Config c;
    c.set("input", (dir / "silence.wav").string());
    c.set("out", (dir / "out").string());
    const CommandResult r = run_command("extract-env", c);
    const std::string csv = slurp(with_prefix(r, "envelope-"));
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "frame,rms");
    int rows = 0;
    while (std::getline(lines, line)) {
        CHECK(line.substr(line.find(',') + 1) == "0");
        ++rows;
    }
    CHECK(rows == static_cast<int>(envelope_frame_count(44100, 512, 128)));
    CHECK(fs::exists(with_prefix(r, "config-")));
    CHECK(with_prefix(r, "envelope-").filename().string().find(r.config_hash) != std::string::npos);
}

TEST_CASE("missing inputs and bad keys") {
    Config c;
    c.set("out", scratch("missing").string());
    CHECK_THROWS_AS(run_command("extract-env", c), ConfigError);
    c.set("input", "/nonexistent.wav");
    CHECK_THROWS_AS(run_command("extract-env", c), Error);
    Config bad;
    bad.set("out", scratch("badkind").string());
    bad.set("data.kind", "other");
    CHECK_THROWS_AS(run_command("gen-data", bad), ConfigError);
}

TEST_CASE("small end-to-end pipeline with seven-row ablation") {
    const fs::path dir = scratch("e2e");
    Config c;
    c.set("out", dir.string());
    c.set("data.samples", "48");
    c.set("data.classes", "4");
    const fs::path data = with_prefix(run_command("gen-data", c), "dataset-");

    Config a;
    a.set("out", dir.string());
    a.set("data", data.string());
    a.set("align.steps", "20");
    a.set("align.batch", "16");
    const fs::path enc = with_prefix(run_command("train-align", a), "encoders-");
    a.set("encoders", enc.string());
    const CommandResult ev = run_command("eval-align", a);
    CHECK(slurp(with_prefix(ev, "align_metrics-")).rfind("metric,value,seed,config_hash\n", 0) == 0);

    Config g;
    g.set("out", dir.string());
    g.set("data", data.string());
    g.set("encoders", enc.string());
    g.set("gen.main_steps", "3");
    g.set("gen.control_steps", "2");
    g.set("gen.batch", "2");
    g.set("gen.width", "8");
    g.set("gen.blocks", "1");
    const CommandResult tg = run_command("train-gen", g);
    const std::string curve = slurp(with_prefix(tg, "gen_loss-"));
    CHECK(std::count(curve.begin(), curve.end(), '\n') == 6);

    Config s;
    s.set("out", dir.string());
    s.set("data", data.string());
    s.set("encoders", enc.string());
    s.set("model", with_prefix(tg, "generator-").string());
    s.set("steps", "3");
    s.set("eval.clips", "4");
    const fs::path wav = with_prefix(run_command("generate", s), "generated-");
    CHECK(read_wav(wav).samples.size() == 4096);
    CHECK(slurp(wav) == slurp(with_prefix(run_command("generate", s), "generated-")));

    const std::string ablation = slurp(with_prefix(run_command("ablate", s), "ablation-"));
    CHECK(std::count(ablation.begin(), ablation.end(), '\n') == 8);
    const std::string metrics = slurp(with_prefix(run_command("evaluate", s), "metrics-"));
    CHECK(metrics.find("envelope_correlation") != std::string::npos);
}
