#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout (plus stderr if the command redirects)
};

std::string cli_path() {
#ifdef FRACID_CLI_PATH
    return FRACID_CLI_PATH;
#else
    const char* p = std::getenv("FRACID_CLI_PATH");
    REQUIRE(p != nullptr);
    return p;
#endif
}

RunResult run(const std::string& args) {
    const std::string cmd = cli_path() + " " + args;
    std::FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    std::array<char, 4096> buf;
    std::size_t got;
    while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0)
        r.output.append(buf.data(), got);
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "fracid_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << content;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Extracts "<key> = <number>" from identify stdout.
double parse_value(const std::string& text, const std::string& key) {
    const std::string needle = key + " = ";
    const auto pos = text.find(needle);
    REQUIRE(pos != std::string::npos);
    return std::stod(text.substr(pos + needle.size()));
}

const char* kSimVoigt =
    "model = voigt\n"
    "signal = sine\n"
    "T = 5\n"
    "dt = 0.00125\n"
    "alpha = 0.5\n"
    "E0 = 2\n"
    "E1 = 1\n";

}  // namespace

TEST_CASE("usage errors exit with code 1") {
    CHECK(run("frobnicate 2>/dev/null").exit_code == 1);
    CHECK(run("identify 2>/dev/null").exit_code == 1);  // --config required
    CHECK(run("simulate --config /nonexistent.cfg 2>/dev/null").exit_code ==
          1);
    CHECK(run("--help >/dev/null 2>&1").exit_code == 0);
}

TEST_CASE("config files are strict about their keys") {
    const fs::path dir = fresh_dir("strict");
    SUBCASE("unknown keys are rejected") {
        write_file(dir / "bad.cfg",
                   std::string(kSimVoigt) + "volume = 11\n");
        const RunResult r = run("simulate --config " +
                                (dir / "bad.cfg").string() + " --out " +
                                dir.string() + " 2>&1");
        CHECK(r.exit_code == 1);
        CHECK(r.output.find("unknown config key") != std::string::npos);
        CHECK(r.output.find("volume") != std::string::npos);
    }
    SUBCASE("duplicate keys are rejected") {
        write_file(dir / "dup.cfg", "model = voigt\nmodel = voigt\n");
        const RunResult r = run("simulate --config " +
                                (dir / "dup.cfg").string() + " 2>&1");
        CHECK(r.exit_code == 1);
        CHECK(r.output.find("duplicate key") != std::string::npos);
    }
    SUBCASE("comments and blank lines are fine") {
        write_file(dir / "ok.cfg",
                   std::string("# generated for the strictness test\n\n") +
                       kSimVoigt);
        const RunResult r = run("simulate --config " +
                                (dir / "ok.cfg").string() + " --out " +
                                (dir / "out").string() + " 2>/dev/null");
        CHECK(r.exit_code == 0);
    }
}

TEST_CASE("simulation is byte-deterministic for a fixed config and seed") {
    const fs::path dir = fresh_dir("determinism");
    write_file(dir / "sim.cfg", std::string(kSimVoigt) + "snr_db = 40\n");
    const std::string cfg = (dir / "sim.cfg").string();

    const RunResult r1 = run("simulate --config " + cfg + " --seed 7 --out " +
                             (dir / "a").string() + " 2>/dev/null");
    const RunResult r2 = run("simulate --config " + cfg + " --seed 7 --out " +
                             (dir / "b").string() + " 2>/dev/null");
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r2.exit_code == 0);
    CHECK(read_file(dir / "a" / "u.csv") == read_file(dir / "b" / "u.csv"));
    CHECK(read_file(dir / "a" / "y.csv") == read_file(dir / "b" / "y.csv"));
    CHECK(read_file(dir / "a" / "manifest.txt") ==
          read_file(dir / "b" / "manifest.txt"));

    SUBCASE("a different seed changes the noisy data") {
        const RunResult r3 = run("simulate --config " + cfg +
                                 " --seed 8 --out " + (dir / "c").string() +
                                 " 2>/dev/null");
        REQUIRE(r3.exit_code == 0);
        CHECK(read_file(dir / "a" / "u.csv") !=
              read_file(dir / "c" / "u.csv"));
    }
    SUBCASE("the manifest records the generating truth and the seed") {
        const std::string man = read_file(dir / "a" / "manifest.txt");
        CHECK(man.find("alpha = 0.5") != std::string::npos);
        CHECK(man.find("E0 = 2") != std::string::npos);
        CHECK(man.find("E1 = 1") != std::string::npos);
        CHECK(man.find("seed = 7") != std::string::npos);
        CHECK(man.find("snr_db = 40") != std::string::npos);
    }
}

TEST_CASE("simulate then identify round-trips the parameters") {
    const fs::path dir = fresh_dir("roundtrip");
    write_file(dir / "sim.cfg", kSimVoigt);
    REQUIRE(run("simulate --config " + (dir / "sim.cfg").string() +
                " --out " + dir.string() + " 2>/dev/null")
                .exit_code == 0);

    write_file(dir / "ident.cfg",
               "method = voigt-hom\n"
               "input = " + (dir / "u.csv").string() + "\n" +
               "output = " + (dir / "y.csv").string() + "\n");
    const RunResult r = run("identify --config " +
                            (dir / "ident.cfg").string() + " --out " +
                            dir.string() + " 2>/dev/null");
    REQUIRE(r.exit_code == 0);
    CHECK(std::abs(parse_value(r.output, "alpha") - 0.5) < 0.005);
    CHECK(std::abs(parse_value(r.output, "E0") - 2.0) < 0.02);
    CHECK(std::abs(parse_value(r.output, "E1") - 1.0) < 0.01);
    CHECK(fs::exists(dir / "ident.csv"));

    SUBCASE("identification output is deterministic") {
        const RunResult again = run("identify --config " +
                                    (dir / "ident.cfg").string() + " --out " +
                                    (dir / "again").string() + " 2>/dev/null");
        REQUIRE(again.exit_code == 0);
        CHECK(again.output == r.output);
        CHECK(read_file(dir / "ident.csv") ==
              read_file(dir / "again" / "ident.csv"));
    }
}

TEST_CASE("unidentifiable data exits with the singularity code") {
    const fs::path dir = fresh_dir("singular");
    // E1 = 0 removes the memory term: stress is exactly proportional to
    // strain and the first-stage system is rank-deficient.
    write_file(dir / "sim.cfg",
               "model = voigt\n"
               "signal = sine\n"
               "T = 5\n"
               "dt = 0.0025\n"
               "alpha = 0.5\n"
               "E0 = 2\n"
               "E1 = 0\n");
    REQUIRE(run("simulate --config " + (dir / "sim.cfg").string() +
                " --out " + dir.string() + " 2>/dev/null")
                .exit_code == 0);
    write_file(dir / "ident.cfg",
               "method = voigt-hom\n"
               "input = " + (dir / "u.csv").string() + "\n" +
               "output = " + (dir / "y.csv").string() + "\n");
    const RunResult r = run("identify --config " +
                            (dir / "ident.cfg").string() + " --out " +
                            dir.string() + " 2>&1");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("singular") != std::string::npos);
}

TEST_CASE("symbolic equation dump is stable and complete") {
    const fs::path dir = fresh_dir("lower");
    write_file(dir / "lower.cfg", "model = voigt-hom\n");
    const RunResult r1 =
        run("lower --config " + (dir / "lower.cfg").string() + " 2>/dev/null");
    REQUIRE(r1.exit_code == 0);
    CHECK(r1.output ==
          "-1*eps'*sig\n"
          "+ 1*eps*sig'\n"
          "- alpha*s^-1*eps*sig\n"
          "+ E0*alpha*s^-1*eps*eps\n");

    const RunResult r2 =
        run("lower --config " + (dir / "lower.cfg").string() + " 2>/dev/null");
    CHECK(r2.output == r1.output);

    SUBCASE("the distributed pair has its own equation") {
        write_file(dir / "diff.cfg", "model = diffusion\n");
        const RunResult rd = run("lower --config " +
                                 (dir / "diff.cfg").string() + " 2>/dev/null");
        REQUIRE(rd.exit_code == 0);
        CHECK(rd.output.find("g") != std::string::npos);
        CHECK(rd.output.find("h") != std::string::npos);
        CHECK(rd.output.find("s^-1") != std::string::npos);
        CHECK(rd.output.find("alpha") != std::string::npos);
        const RunResult rd2 = run("lower --config " +
                                  (dir / "diff.cfg").string() +
                                  " 2>/dev/null");
        CHECK(rd2.output == rd.output);
    }
    SUBCASE("initial-value regimes produce larger determinants") {
        write_file(dir / "rl.cfg", "model = voigt-rl-eliminate\n");
        const RunResult rr = run("lower --config " +
                                 (dir / "rl.cfg").string() + " 2>/dev/null");
        REQUIRE(rr.exit_code == 0);
        CHECK(rr.output.size() > r1.output.size());
    }
}

TEST_CASE("benchmark subcommand reports and gates") {
    const fs::path dir = fresh_dir("bench");

    SUBCASE("a passing subset exits cleanly with a deterministic report") {
        write_file(dir / "b.cfg", "cases = 3\n");
        const RunResult r1 = run("benchmark --config " +
                                 (dir / "b.cfg").string() + " --out " +
                                 dir.string() + " 2>/dev/null");
        REQUIRE(r1.exit_code == 0);
        CHECK(r1.output.find("criterion 3") != std::string::npos);
        CHECK(r1.output.find("PASS") != std::string::npos);
        CHECK(r1.output.find("passed 1/1") != std::string::npos);
        CHECK(read_file(dir / "report.txt") == r1.output);

        const RunResult r2 = run("benchmark --config " +
                                 (dir / "b.cfg").string() + " --out " +
                                 (dir / "again").string() + " 2>/dev/null");
        CHECK(r2.output == r1.output);
    }
    SUBCASE("a tightened tolerance forces the failure path") {
        write_file(dir / "tight.cfg",
                   "cases = 3\ntolerance_scale = 1e-9\n");
        const RunResult r = run("benchmark --config " +
                                (dir / "tight.cfg").string() + " --out " +
                                (dir / "tight").string() + " 2>/dev/null");
        CHECK(r.exit_code == 2);
        CHECK(r.output.find("FAIL") != std::string::npos);
    }
    SUBCASE("an empty case selection is a usage error") {
        write_file(dir / "empty.cfg", "cases = ,\n");
        const RunResult r = run("benchmark --config " +
                                (dir / "empty.cfg").string() + " 2>&1");
        CHECK(r.exit_code == 1);
        CHECK(r.output.find("empty benchmark case selection") !=
              std::string::npos);
    }
}
