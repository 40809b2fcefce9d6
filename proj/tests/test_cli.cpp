// End-to-end checks of the orcamem binary: artifact layout, exit codes,
// sweep resumption and worker-count determinism. The binary path comes in
// through ORCAMEM_BIN.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

namespace fs = std::filesystem;

namespace {

std::string bin() {
    const char* b = std::getenv("ORCAMEM_BIN");
    return b ? std::string(b) : std::string();
}

int run(const std::string& cmd, std::string* output = nullptr) {
    FILE* p = popen((cmd + " 2>&1").c_str(), "r");
    REQUIRE(p != nullptr);
    std::string out;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
    const int status = pclose(p);
    if (output) *output = out;
    INFO("command: " << cmd << "\noutput:\n" << out);
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

fs::path fresh_dir() {
    char tpl[] = "/tmp/orcamem-cli-XXXXXX";
    const char* d = mkdtemp(tpl);
    REQUIRE(d != nullptr);
    return fs::path(d);
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream os(p);
    os << text;
    REQUIRE(os.good());
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::vector<fs::path> glob_suffix(const fs::path& dir,
                                  const std::string& suffix) {
    std::vector<fs::path> hits;
    if (!fs::exists(dir)) return hits;
    for (const auto& e : fs::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name.size() >= suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(),
                         suffix) == 0)
            hits.push_back(e.path());
    }
    return hits;
}

// small, fast standard-protocol run
const char* kSmallRun = R"(schema_version = 1
solver.tier = four_level
solver.temperature_K = 393.15
solver.classes = 9
solver.n_z = 8
solver.dtau_ps = 2
solver.optical_depth = 30
solver.gamma_s_rad_ns = 0
solver.gamma_d_rad_ns = 0
solver.signal_on_ge = true
protocol.name = standard
protocol.storage_ns = 0.9
protocol.control_area_pi = 2
run.label = clitest
)";

} // namespace

TEST_CASE("protocols list names every builder and preset") {
    REQUIRE_FALSE(bin().empty());
    std::string out;
    CHECK(run(bin() + " protocols list", &out) == 0);
    for (const char* want : {"standard", "rephased", "multimode", "reorder",
                             "interference", "paper-main", "paper-appB"})
        CHECK(out.find(want) != std::string::npos);
}

TEST_CASE("simulate writes the manifest triplet and is reproducible") {
    const fs::path dir = fresh_dir();
    write_file(dir / "run.cfg", kSmallRun);
    const std::string cmd = bin() + " simulate " + (dir / "run.cfg").string() +
                            " --output " + (dir / "out").string();

    std::string out;
    REQUIRE(run(cmd, &out) == 0);
    CHECK(out.find("efficiency") != std::string::npos);

    const auto manifests = glob_suffix(dir / "out", ".manifest.json");
    REQUIRE(manifests.size() == 1);
    CHECK(glob_suffix(dir / "out", ".fields.csv").size() == 1);
    CHECK(glob_suffix(dir / "out", ".sidecar.json").size() == 1);

    const nlohmann::json j = nlohmann::json::parse(slurp(manifests[0]));
    CHECK(j["label"] == "clitest");
    REQUIRE(j["windows"].size() == 1);
    const double eta = j["windows"][0]["efficiency"].get<double>();
    CHECK(eta > 0.05);
    CHECK(eta < 1.0);

    // second run regenerates identical physics artifacts in place
    const std::string before = slurp(manifests[0]);
    REQUIRE(run(cmd) == 0);
    CHECK(slurp(manifests[0]) == before);
}

TEST_CASE("worker count changes nothing but the wall clock") {
    const fs::path dir = fresh_dir();
    write_file(dir / "run.cfg", kSmallRun);
    const std::string base = bin() + " simulate " +
                             (dir / "run.cfg").string() + " --output ";
    REQUIRE(run("ORCAMEM_WORKERS=1 " + base + (dir / "w1").string()) == 0);
    REQUIRE(run("ORCAMEM_WORKERS=4 " + base + (dir / "w4").string()) == 0);

    const auto m1 = glob_suffix(dir / "w1", ".manifest.json");
    const auto m4 = glob_suffix(dir / "w4", ".manifest.json");
    REQUIRE(m1.size() == 1);
    REQUIRE(m4.size() == 1);
    CHECK(slurp(m1[0]) == slurp(m4[0]));

    const auto f1 = glob_suffix(dir / "w1", ".fields.csv");
    const auto f4 = glob_suffix(dir / "w4", ".fields.csv");
    REQUIRE(f1.size() == 1);
    CHECK(slurp(f1[0]) == slurp(f4[0]));
}

TEST_CASE("exit codes separate config, validation and fit failures") {
    const fs::path dir = fresh_dir();

    SUBCASE("unreadable config file") {
        CHECK(run(bin() + " simulate " + (dir / "missing.cfg").string()) == 2);
    }
    SUBCASE("unknown key") {
        write_file(dir / "bad.cfg",
                   std::string(kSmallRun) + "solver.nz = 8\n");
        CHECK(run(bin() + " simulate " + (dir / "bad.cfg").string()) == 2);
    }
    SUBCASE("missing species file") {
        write_file(dir / "bad.cfg",
                   std::string(kSmallRun) + "species = /nonexistent.species\n");
        CHECK(run(bin() + " simulate " + (dir / "bad.cfg").string()) == 2);
    }
    SUBCASE("parseable config describing an unstable setup") {
        std::string cfg = kSmallRun;
        cfg.replace(cfg.find("solver.dtau_ps = 2"), 18,
                    "solver.dtau_ps = 80");
        write_file(dir / "bad.cfg", cfg + "solver.delta_two_mhz = 3000\n");
        std::string out;
        CHECK(run(bin() + " simulate " + (dir / "bad.cfg").string(), &out) == 3);
        CHECK(out.find("time step too coarse") != std::string::npos);
    }
    SUBCASE("sweep without axes") {
        write_file(dir / "bad.cfg", kSmallRun);
        CHECK(run(bin() + " sweep " + (dir / "bad.cfg").string()) == 2);
    }
    SUBCASE("unknown subcommand") {
        CHECK(run(bin() + " frobnicate") == 2);
    }
    SUBCASE("malformed csv") {
        write_file(dir / "bad.csv", "energy, eff\n0.5, not_a_number\n1, 0.2\n");
        std::string out;
        CHECK(run(bin() + " fit rabi " + (dir / "bad.csv").string(), &out) == 2);
        CHECK(out.find("non-numeric") != std::string::npos);
    }
    SUBCASE("too little data to fit") {
        write_file(dir / "short.csv", "t_storage_ns, efficiency\n5, 0.4\n10, 0.3\n");
        CHECK(run(bin() + " fit lifetime --model exponential " +
                  (dir / "short.csv").string()) == 5);
    }
}

TEST_CASE("sweep writes aggregates and resumes by fingerprint") {
    const fs::path dir = fresh_dir();
    write_file(dir / "sweep.cfg",
               std::string(kSmallRun) +
                   "sweep.axis.1.path = protocol.storage_ns\n"
                   "sweep.axis.1.values = 0.6, 0.8, 1.0, 1.2\n");
    const std::string cmd = bin() + " sweep " + (dir / "sweep.cfg").string() +
                            " --output " + (dir / "out").string();

    std::string out;
    REQUIRE(run(cmd, &out) == 0);
    CHECK(out.find("4 points, 4 ok (0 reused)") != std::string::npos);

    const fs::path agg = dir / "out" / "clitest-sweep.csv";
    REQUIRE(fs::exists(agg));
    const std::string first = slurp(agg);
    // header plus one line per point
    CHECK(std::count(first.begin(), first.end(), '\n') == 5);
    CHECK(fs::exists(dir / "out" / "clitest-sweep.dat"));
    CHECK(glob_suffix(dir / "out" / "points", ".manifest.json").size() == 4);

    // the efficiencies decay with storage time (doppler dephasing)
    {
        std::istringstream is(first);
        std::string line;
        std::getline(is, line);
        double prev = 1e9;
        while (std::getline(is, line)) {
            double t, eta, sg;
            REQUIRE(std::sscanf(line.c_str(), "%lf, %lf, %lf", &t, &eta,
                                &sg) == 3);
            CHECK(eta < prev);
            prev = eta;
        }
    }

    // rerun: everything is found by fingerprint, nothing is recomputed
    REQUIRE(run(cmd, &out) == 0);
    CHECK(out.find("(4 reused)") != std::string::npos);
    CHECK(slurp(agg) == first);
}

TEST_CASE("lifetime fit round-trips synthetic decay data") {
    const fs::path dir = fresh_dir();
    std::ostringstream csv;
    csv << "t_storage_ns, efficiency\n";
    for (int i = 0; i < 8; ++i) {
        const double t = 20.0 + 25.0 * i;
        csv << t << ", " << 0.6 * std::exp(-t / 140.0) << "\n";
    }
    write_file(dir / "life.csv", csv.str());

    std::string out;
    REQUIRE(run(bin() + " fit lifetime --model exponential --boot 50 " +
                (dir / "life.csv").string(), &out) == 0);

    const fs::path j_path = dir / "life-lifetimefit.json";
    REQUIRE(fs::exists(j_path));
    const nlohmann::json j = nlohmann::json::parse(slurp(j_path));
    REQUIRE(j["names"].size() == 2);
    const auto names = j["names"].get<std::vector<std::string>>();
    const auto params = j["params"].get<std::vector<double>>();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == "t_c")
            CHECK(params[i] == doctest::Approx(140.0).epsilon(1e-6));
}

TEST_CASE("rabi fit recovers the oscillation from a noisy csv") {
    const fs::path dir = fresh_dir();
    // deterministic pseudo-noise, 3% relative
    std::ostringstream csv;
    csv << "energy_nj, efficiency, sigma\n";
    unsigned state = 12345;
    auto noise = [&state]() {
        state = state * 1664525u + 1013904223u;
        return (static_cast<double>(state >> 8) / 8388608.0 - 1.0);
    };
    for (int i = 0; i < 16; ++i) {
        const double E = 0.05 + 0.4 * i;
        const double c = std::cos(1.1 * std::sqrt(E) + 0.35);
        const double eta = 0.8 * (1 - 0.9 * c * c);
        csv << E << ", " << eta * (1 + 0.03 * noise()) << ", " << 0.03 * eta
            << "\n";
    }
    write_file(dir / "rabi.csv", csv.str());

    std::string out;
    REQUIRE(run(bin() + " fit rabi --boot 100 --seed 9 " +
                (dir / "rabi.csv").string(), &out) == 0);
    const nlohmann::json j =
        nlohmann::json::parse(slurp(dir / "rabi-rabifit.json"));
    const auto names = j["names"].get<std::vector<std::string>>();
    const auto params = j["params"].get<std::vector<double>>();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == "V") CHECK(params[i] == doctest::Approx(0.9).epsilon(0.05));
        if (names[i] == "a") CHECK(params[i] == doctest::Approx(1.1).epsilon(0.05));
    }
    CHECK(j["pi_fidelity"].get<double>() == doctest::Approx(0.9).epsilon(0.05));
}

TEST_CASE("preset overlays accept user overrides") {
    const fs::path dir = fresh_dir();
    // shrink the shipped configuration to something test-sized
    write_file(dir / "over.cfg", "schema_version = 1\n"
                                 "preset = paper-main\n"
                                 "solver.classes = 9\n"
                                 "solver.n_z = 6\n"
                                 "protocol.storage_ns = 4\n"
                                 "run.label = overlay\n");
    std::string out;
    REQUIRE(run(bin() + " simulate " + (dir / "over.cfg").string() +
                " --output " + (dir / "out").string(), &out) == 0);
    const auto manifests = glob_suffix(dir / "out", ".manifest.json");
    REQUIRE(manifests.size() == 1);
    const nlohmann::json j = nlohmann::json::parse(slurp(manifests[0]));
    CHECK(j["label"] == "overlay");
    CHECK(j["protocol"] == "rephased");
}
