// Integration tests driving the real scdiff binary (path injected by CMake).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef SCDIFF_BIN
#error "SCDIFF_BIN must point at the CLI binary"
#endif

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = 0;
    std::string output;
};

RunResult run(const std::string& args) {
    const std::string out_file =
        (fs::temp_directory_path() / ("scdiff_cli_out_" + std::to_string(rand()) + ".txt")).string();
    const std::string cmd = std::string(SCDIFF_BIN) + " " + args + " >" + out_file + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out_file);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    fs::remove(out_file);
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("scdiff_cli_" + std::to_string(rand()))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const char* sub) const { return (path / sub).string(); }
};

const char* kTinyModel =
    " --set model.dim=16 --set model.depth=2 --set model.patch=2 --set model.subspace=4"
    " --set model.heads=2 --set schedule.steps=50 --set train.preprocess=minmax";

}  // namespace

TEST_CASE("gen-data: identical seeds give byte-identical files with provenance") {
    TempDir dir;
    const auto r1 = run("gen-data --seed 7 --cells 12 --genes 3 --out " + (dir / "a"));
    const auto r2 = run("gen-data --seed 7 --cells 12 --genes 3 --out " + (dir / "b"));
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r2.exit_code == 0);
    CHECK(slurp(dir.path / "a/data.csv") == slurp(dir.path / "b/data.csv"));

    const std::string contents = slurp(dir.path / "a/data.csv");
    CHECK(contents.find("# synthetic gaussian_mixture") == 0);
    CHECK(contents.find("# seed=7") != std::string::npos);
    CHECK(fs::exists(dir.path / "a/labels.csv"));
    CHECK(fs::exists(dir.path / "a/config.resolved"));

    const auto bad = run("gen-data --cells 0 --out " + (dir / "c"));
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("error: config:") != std::string::npos);
}

TEST_CASE("train: epochs=0 emits only the initial checkpoint; resume continues steps") {
    TempDir dir;
    REQUIRE(run("gen-data --seed 3 --cells 16 --genes 4 --out " + (dir / "data")).exit_code == 0);
    const std::string data = dir / "data/data.csv";

    const auto zero =
        run("train --data " + data + " --epochs 0 --out " + (dir / "t0") + kTinyModel);
    REQUIRE(zero.exit_code == 0);
    CHECK(fs::exists(dir.path / "t0/checkpoint_final.ckpt"));
    CHECK(zero.output.find("step 0") != std::string::npos);

    const auto first = run("train --data " + data + " --epochs 2 --set train.batch=8 --out " +
                           (dir / "t1") + kTinyModel);
    REQUIRE(first.exit_code == 0);
    CHECK(first.output.find("step 4") != std::string::npos);  // 2 epochs x 2 batches

    const auto resumed = run("train --data " + data + " --epochs 1 --set train.batch=8 --resume " +
                             (dir / "t1") + "/checkpoint_final.ckpt --out " + (dir / "t2") +
                             kTinyModel);
    REQUIRE(resumed.exit_code == 0);
    CHECK(resumed.output.find("step 6") != std::string::npos);  // counter continued

    // per-epoch wall time appears in the log for every epoch
    const std::string log = slurp(dir.path / "t1/train_log.csv");
    CHECK(log.find("epoch,wall_seconds,loss") == 0);
    int rows = 0;
    for (const char c : log)
        if (c == '\n') ++rows;
    CHECK(rows == 3);  // header + 2 epochs
}

TEST_CASE("sample: ddim eta=0 with a fixed seed is byte-identical across runs") {
    TempDir dir;
    REQUIRE(run("gen-data --seed 5 --cells 16 --genes 4 --out " + (dir / "data")).exit_code == 0);
    REQUIRE(run("train --data " + (dir / "data") + "/data.csv --epochs 1 --set train.batch=8 " +
                "--out " + (dir / "train") + kTinyModel)
                .exit_code == 0);
    const std::string ckpt = dir / "train/checkpoint_final.ckpt";

    const auto s1 = run("sample --checkpoint " + ckpt +
                        " --count 6 --sampler ddim --steps 10 --eta 0 --seed 11 --out " +
                        (dir / "s1"));
    const auto s2 = run("sample --checkpoint " + ckpt +
                        " --count 6 --sampler ddim --steps 10 --eta 0 --seed 11 --out " +
                        (dir / "s2"));
    REQUIRE(s1.exit_code == 0);
    REQUIRE(s2.exit_code == 0);
    CHECK(slurp(dir.path / "s1/generated.csv") == slurp(dir.path / "s2/generated.csv"));
    CHECK(slurp(dir.path / "s1/generated.csv").find("# sampler=ddim") != std::string::npos);

    const auto missing = run("sample --checkpoint /nonexistent.ckpt --out " + (dir / "s3"));
    CHECK(missing.exit_code == 3);
    CHECK(missing.output.find("error: io:") != std::string::npos);
}

TEST_CASE("eval: real vs real sits at the metric noise floor and echoes settings") {
    TempDir dir;
    REQUIRE(run("gen-data --seed 9 --cells 60 --genes 3 --out " + (dir / "data")).exit_code == 0);
    const std::string csv = dir / "data/data.csv";
    const auto r = run("eval --real " + csv + " --gen " + csv + " --bins 20 --out " + (dir / "e"));
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("kl=0\n") != std::string::npos);
    CHECK(r.output.find("wasserstein=0\n") != std::string::npos);
    CHECK(r.output.find("bins=20") != std::string::npos);
    CHECK(r.output.find("bandwidth=") != std::string::npos);
    CHECK(r.output.find("seed=") != std::string::npos);
    CHECK(fs::exists(dir.path / "e/report.txt"));
    CHECK(fs::exists(dir.path / "e/scatter.csv"));
    const std::string scatter = slurp(dir.path / "e/scatter.csv");
    CHECK(scatter.find("x,y,label") == 0);
    CHECK(scatter.find("real") != std::string::npos);
    CHECK(scatter.find("generated") != std::string::npos);

    const auto missing = run("eval --real /nope.csv --gen " + csv + " --out " + (dir / "e2"));
    CHECK(missing.exit_code == 3);
    CHECK(missing.output.find("error: io:") != std::string::npos);
}

TEST_CASE("config file + --set overrides + unknown key rejection") {
    TempDir dir;
    const std::string cfg_path = dir / "run.conf";
    {
        std::ofstream out(cfg_path);
        out << "gen.cells=10\ngen.genes=2\n";
    }
    const auto r = run("gen-data --config " + cfg_path + " --set gen.cells=14 --out " + (dir / "g"));
    REQUIRE(r.exit_code == 0);
    CHECK(r.output.find("14 cells x 2 genes") != std::string::npos);
    const std::string resolved = slurp(dir.path / "g/config.resolved");
    CHECK(resolved.find("gen.cells=14") != std::string::npos);
    CHECK(resolved.find("gen.genes=2") != std::string::npos);

    const auto bad = run("gen-data --set not.a.key=1 --out " + (dir / "g2"));
    CHECK(bad.exit_code == 2);
    CHECK(bad.output.find("error: config:") != std::string::npos);

    const auto usage = run("frobnicate");
    CHECK(usage.exit_code == 1);
    CHECK(usage.output.find("error: usage:") != std::string::npos);
}

TEST_CASE("bench: matched comparison report with closed-form parameter ratio") {
    TempDir dir;
    const auto r = run(
        "bench --out " + (dir / "b") +
        " --set bench.cells=8 --set bench.genes=32 --set bench.batch=4 --set bench.epochs=2"
        " --set bench.sample_count=2 --set bench.ddim_steps=10"
        " --set model.dim=16 --set model.depth=1 --set model.heads=2 --set model.subspace=8"
        " --set model.patch=8 --set schedule.steps=50");
    REQUIRE(r.exit_code == 0);
    // block params: whitebox K d p_sub + d^2 = 2*16*8 + 256 = 512; baseline 12 d^2 = 3072
    CHECK(r.output.find("whitebox.block_params=512") != std::string::npos);
    CHECK(r.output.find("baseline.block_params=3072") != std::string::npos);
    CHECK(r.output.find("param_ratio=0.166667") != std::string::npos);
    CHECK(r.output.find("threads=1") != std::string::npos);
    CHECK(r.output.find("epoch_time_ratio=") != std::string::npos);
    CHECK(fs::exists(dir.path / "b/bench_report.txt"));
    CHECK(fs::exists(dir.path / "b/whitebox.ckpt"));
    CHECK(fs::exists(dir.path / "b/baseline.ckpt"));
    CHECK(fs::file_size(dir.path / "b/whitebox.ckpt") < fs::file_size(dir.path / "b/baseline.ckpt"));
}

TEST_CASE("SCDIFF_THREADS env var is honored in the resolved config") {
    TempDir dir;
    const std::string out_file = (fs::temp_directory_path() / "scdiff_env_out.txt").string();
    const std::string cmd = std::string("SCDIFF_THREADS=3 ") + SCDIFF_BIN +
                            " gen-data --cells 5 --genes 2 --out " + (dir / "g") + " >" + out_file +
                            " 2>&1";
    REQUIRE(std::system(cmd.c_str()) == 0);
    fs::remove(out_file);
    CHECK(slurp(dir.path / "g/config.resolved").find("threads=3") != std::string::npos);
}
