#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "pspin/json_io.hpp"

namespace fs = std::filesystem;
using pspin::json;

namespace {

std::string bin() {
    const char* p = std::getenv("PSPIN_BIN");
    REQUIRE(p != nullptr);
    return p;
}

int run(const std::string& args) {
    const std::string cmd = bin() + " " + args + " >/dev/null 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("pspin_cli_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name, const json& content) const {
        const auto p = path / name;
        std::ofstream out(p);
        out << content.dump();
        return p.string();
    }
    std::string str() const { return path.string(); }
};

json manifest(const TempDir& dir, const std::string& command) {
    return pspin::load_json_file((dir.path / (command + "_manifest.json")).string());
}

} // namespace

TEST_CASE("xi subcommand and exit codes") {
    TempDir dir;
    const auto mix = dir.file("sk.json", json{{"2", 1.0}});

    CHECK(run("xi --mixture " + mix + " --s -1 --out " + dir.str()) == 0);
    auto m = manifest(dir, "xi");
    CHECK(m["outputs"]["xi_dual"].get<double>() == 0.0);
    CHECK(m["outputs"]["xi"].get<double>() == 1.0);

    CHECK(run("xi --mixture " + mix + " --s 2 --out " + dir.str()) == 0);
    m = manifest(dir, "xi");
    CHECK(m["outputs"]["xi_dual"].get<double>() == Catch::Approx(1.0).margin(1e-12));

    // unknown flag -> usage error
    CHECK(run("xi --mixture " + mix + " --nope 1") == 2);
    // missing subcommand
    CHECK(run("") == 2);
    // unreadable input
    CHECK(run("xi --mixture /nonexistent.json --s 1") == 2);
    // invalid mixture content -> usage error
    const auto bad = dir.file("bad.json", json{{"1", 1.0}});
    CHECK(run("xi --mixture " + bad + " --s 1") == 2);
}

TEST_CASE("psi subcommand: measure, cdf and product routes") {
    TempDir dir;
    const auto mu = dir.file("mu.json", json{{"atoms", {0.5}}, {"weights", {1.0}}});

    CHECK(run("psi --kind ising --measure " + mu + " --out " + dir.str()) == 0);
    const double cascade = manifest(dir, "psi")["outputs"]["psi"].get<double>();
    CHECK(cascade == Catch::Approx(0.125432792509).margin(1e-8));

    const auto cdf = dir.file("cdf.json", json{{"breakpoints", {0.5}}, {"values", {1.0}}});
    CHECK(run("psi --kind ising --cdf " + cdf + " --out " + dir.str()) == 0);
    const double pde = manifest(dir, "psi")["outputs"]["psi"].get<double>();
    CHECK(pde == Catch::Approx(cascade).margin(1e-3));

    CHECK(run("psi --kind spherical --measure " + mu + " --out " + dir.str()) == 0);
    CHECK(manifest(dir, "psi")["outputs"]["psi"].get<double>() ==
          Catch::Approx(0.1225719).margin(1e-6));

    const auto p1 = dir.file("p1.json", json{{"atoms", {-1.0, 1.0}}, {"probs", {0.5, 0.5}}});
    CHECK(run("psi --kind product --measure " + mu + " --p1 " + p1 + " --out " + dir.str()) == 0);
    CHECK(manifest(dir, "psi")["outputs"]["psi"].get<double>() ==
          Catch::Approx(cascade).margin(1e-12));

    // product without --p1 is a usage error
    CHECK(run("psi --kind product --measure " + mu) == 2);
}

TEST_CASE("parisi subcommand in the replica-symmetric region") {
    TempDir dir;
    const auto mix = dir.file("sk.json", json{{"2", 1.0}});
    CHECK(run("parisi --mixture " + mix +
              " --t 0.1 --k 2 --kind ising --grid-points 81 --restarts 2 --out " + dir.str()) == 0);
    const auto m = manifest(dir, "parisi");
    CHECK(std::abs(m["outputs"]["results"][0]["value"].get<double>()) <= 2e-3);
    CHECK(fs::exists(dir.path / "parisi.csv"));
}

TEST_CASE("classical and hopflax subcommands") {
    TempDir dir;
    const auto mix = dir.file("sk.json", json{{"2", 1.0}});
    const auto nu0 = dir.file("nu0.json", json{{"atoms", {0.0}}, {"weights", {1.0}}});
    CHECK(run("classical --mixture " + mix + " --t 0.7 --nu " + nu0 + " --kind ising --out " +
              dir.str()) == 0);
    CHECK(std::abs(manifest(dir, "classical")["outputs"]["value"].get<double>()) <= 1e-12);

    const auto base = dir.file("base.json", json::array({0.0}));
    CHECK(run("hopflax --mixture " + mix + " --t 0.5 --base " + base +
              " --kind ising --grid-points 81 --restarts 2 --out " + dir.str()) == 0);
    const auto m = manifest(dir, "hopflax");
    CHECK(m["outputs"]["value"].get<double>() > 1e-3);
    CHECK(fs::exists(dir.path / "hopflax.csv"));
}

TEST_CASE("finite-n and cascade subcommands replay bit-exactly") {
    TempDir dir;
    const auto mix = dir.file("sk.json", json{{"2", 1.0}});

    CHECK(run("finite-n --mixture " + mix + " --N 4 --N 6 --t 0.5 --samples 20 --seed 11 --out " +
              dir.str()) == 0);
    const auto first = manifest(dir, "finite-n")["outputs"];
    CHECK(run("finite-n --mixture " + mix + " --N 4 --N 6 --t 0.5 --samples 20 --seed 11 --out " +
              dir.str()) == 0);
    const auto second = manifest(dir, "finite-n")["outputs"];
    CHECK(first == second);
    CHECK(first["runs"][0]["mean"].get<double>() ==
          Catch::Approx(first["runs"][0]["mean"].get<double>()));
    CHECK(fs::exists(dir.path / "finite_n.csv"));

    CHECK(run("cascade --zeta 0.5 --M 512 --replicas 300 --seed 7 --out " + dir.str()) == 0);
    const auto ca = manifest(dir, "cascade")["outputs"];
    const double est = ca["levels"][1]["estimate"].get<double>();
    const double se = ca["levels"][1]["std_error"].get<double>();
    CHECK(std::abs(est - 0.5) <= 3.0 * se);
    CHECK(run("cascade --zeta 0.5 --M 512 --replicas 300 --seed 7 --out " + dir.str()) == 0);
    CHECK(manifest(dir, "cascade")["outputs"] == ca);
}

TEST_CASE("residual subcommand") {
    TempDir dir;
    const auto mix = dir.file("sk.json", json{{"2", 1.0}});
    const auto base = dir.file("base.json", json::array({0.3}));
    CHECK(run("residual --mixture " + mix + " --t 0.6 --base " + base +
              " --kind ising --h 1e-3 --grid-points 81 --restarts 2 --out " + dir.str()) == 0);
    CHECK(std::abs(manifest(dir, "residual")["outputs"]["residual"].get<double>()) <= 5e-2);
}
