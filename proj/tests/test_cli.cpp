#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nlsel/cli.hpp"

using namespace nlsel;
using namespace nlsel::cli;
namespace fs = std::filesystem;

namespace {

RunRequest parse(std::vector<const char *> args) {
    args.insert(args.begin(), "nlsel");
    Parsed p = parseArgs(static_cast<int>(args.size()), args.data());
    if (!p.request) throw std::runtime_error("no request: " + p.message);
    return *p.request;
}

fs::path tempDir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("nlsel_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

struct CleanTempDir : ::testing::Environment {
    void TearDown() override { fs::remove_all(tempDir()); }
};
const auto *const cleanup = ::testing::AddGlobalTestEnvironment(new CleanTempDir);

fs::path writeFile(const std::string &name, const std::string &text) {
    const fs::path p = tempDir() / name;
    std::ofstream(p) << text;
    return p;
}

CsvData parseText(const std::string &text, const std::string &response = "y") {
    std::istringstream in(text);
    return parseCsv(in, response);
}

// y = 2 x1 exactly, four more covariates of fixed pseudo-random noise.
fs::path noiselessCsv() {
    Rng rng(123);
    std::normal_distribution<double> z;
    std::ostringstream os;
    os << "y,x1,x2,x3,x4,x5\n";
    char buf[64];
    for (int i = 0; i < 50; ++i) {
        double x[5];
        for (double &v : x) v = z(rng);
        std::snprintf(buf, sizeof buf, "%.17g", 2 * x[0]);
        os << buf;
        for (double v : x) {
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            os << buf;
        }
        os << "\n";
    }
    return writeFile("noiseless.csv", os.str());
}

struct Proc {
    int code;
    std::string out;
};

Proc runBinary(const std::string &args) {
    const fs::path out = tempDir() / "stdout.txt";
    const std::string cmd = std::string(NLSEL_CLI_PATH) + " " + args + " > " + out.string() + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

} // namespace

TEST(ParseArgs, SelectDefaults) {
    const RunRequest r = parse({"select", "--input", "d.csv", "--response", "y", "--prior", "pimom"});
    EXPECT_EQ(r.command, Command::Select);
    EXPECT_EQ(*r.input, "d.csv");
    EXPECT_EQ(r.scorer.coefPrior.family, PriorFamily::PiMoM);
    EXPECT_FALSE(r.scorer.coefPrior.tau.has_value());
    EXPECT_EQ(r.scorer.coefPrior.r, 1);
    const auto &ig = std::get<InverseGammaVariance>(r.scorer.sigma);
    EXPECT_EQ(ig.a0, 0.1);
    EXPECT_EQ(ig.b0, 0.1);
    const auto &s5 = std::get<S5Params>(r.search.algorithm);
    EXPECT_EQ(s5.J, 20);
    EXPECT_EQ(s5.L, 20);
    EXPECT_EQ(s5.Mn, 20);
    EXPECT_FALSE(r.qn.has_value());
}

TEST(ParseArgs, PrcRequest) {
    const RunRequest r = parse({"prc", "--case", "3", "--n", "400", "--p", "1000", "--prior", "pemom", "--tau-grid", "1,2,3"});
    EXPECT_EQ(r.command, Command::Prc);
    EXPECT_EQ(r.design.kase, CovarianceCase::Isotropic);
    EXPECT_EQ(r.design.n, 400);
    EXPECT_EQ(r.design.p, 1000);
    EXPECT_EQ(r.tauGrid, (std::vector<double>{1, 2, 3}));
    EXPECT_TRUE(r.customGrid);
}

TEST(ParseArgs, KnownVarianceAndSss) {
    const RunRequest r = parse({"simulate", "--n", "50", "--p", "20", "--sigma2", "2", "--algo", "sss", "--N", "30", "--qn", "7"});
    EXPECT_EQ(std::get<KnownVariance>(r.scorer.sigma).sigma2, 2.0);
    EXPECT_EQ(std::get<SssParams>(r.search.algorithm).N, 30);
    EXPECT_EQ(*r.qn, 7);
}

TEST(ParseArgs, UsageErrors) {
    EXPECT_THROW(parse({"select", "--response", "y"}), UsageError);
    EXPECT_THROW(parse({"select", "--input", "d.csv", "--bogus"}), UsageError);
    EXPECT_THROW(parse({"prc", "--case", "4"}), UsageError);
    EXPECT_THROW(parse({"prc", "--tau-grid", "1,x"}), UsageError);
    EXPECT_THROW(parse({}), UsageError);
}

TEST(LoadCsv, Examples) {
    const CsvData d = parseText("y,x1\n1,2\n2,3.5\n4,1\n");
    EXPECT_EQ(d.data.n(), 3);
    EXPECT_EQ(d.data.p(), 1);
    EXPECT_EQ(d.columns, (std::vector<std::string>{"x1"}));

    try {
        parseText("y,x1\n1,2\n2,abc\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError &e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
    EXPECT_THROW(parseText("y,x1,x1\n1,2,3\n2,3,1\n"), ParseError);
    EXPECT_THROW(parseText("z,x1\n1,2\n2,3\n"), ParseError);
    EXPECT_THROW(parseText("y,x1\n1,2,3\n2,3\n"), ParseError);
}

TEST(LoadCsv, ConstantColumnDroppedWithWarning) {
    const CsvData d = parseText("y,a,b,c\n1,5,2,0\n2,5,3,1\n4,5,1,3\n");
    EXPECT_EQ(d.columns, (std::vector<std::string>{"b", "c"}));
    EXPECT_EQ(d.dropped, (std::vector<std::string>{"a"}));
    EXPECT_EQ(d.warnings.size(), 1u);
    EXPECT_EQ(d.data.p(), 2);
}

TEST(LoadCsv, MissingFile) {
    try {
        loadCsv((tempDir() / "nope.csv").string(), "y");
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), "IOError");
    }
}

TEST(Run, NoiselessSelectFindsTheSignal) {
    const std::string path = noiselessCsv().string();
    const json r = run(parse({"select", "--input", path.c_str(), "--response", "y", "--prior", "pemom", "--threads", "1"}));
    EXPECT_EQ(r["map_model"], json::array({0}));
    EXPECT_GT(r["posterior"][0]["prob"].get<double>(), 0.99);
    EXPECT_EQ(r["metrics"]["map_columns"], json::array({"x1"}));
    EXPECT_TRUE(validateReport(r).empty());
}

TEST(Run, SimulateChecksumIsStable) {
    const auto req = parse({"simulate", "--case", "2", "--n", "60", "--p", "40", "--seed", "9", "--J", "5", "--L", "3"});
    const json a = run(req), b = run(req);
    EXPECT_EQ(a["metrics"]["checksum"], b["metrics"]["checksum"]);
    EXPECT_EQ(a["metrics"]["checksum"].get<std::string>().size(), 16u);
    const json c = run(parse({"simulate", "--case", "2", "--n", "60", "--p", "40", "--seed", "10", "--J", "5", "--L", "3"}));
    EXPECT_NE(a["metrics"]["checksum"], c["metrics"]["checksum"]);
}

TEST(Run, TauGrowthWarning) {
    const json r = run(parse({"simulate", "--n", "60", "--p", "1000", "--tau", "1", "--J", "3", "--L", "2", "--Mn", "5"}));
    ASSERT_FALSE(r["warnings"].empty());
    bool found = false;
    for (const auto &w : r["warnings"]) found |= w.get<std::string>().find("log(p)") != std::string::npos;
    EXPECT_TRUE(found) << r["warnings"].dump();
}

TEST(CliProperty, ReportsMatchSchemaForEveryCommand) {
    const std::string path = noiselessCsv().string();
    for (const char *seed : {"1", "2", "3"}) {
        std::vector<std::vector<const char *>> cmds{
            {"select", "--input", path.c_str(), "--seed", seed, "--J", "5", "--L", "4"},
            {"select", "--input", path.c_str(), "--seed", seed, "--prior", "gprior", "--algo", "sss", "--N", "20",
             "--test-fraction", "0.2", "--replicates", "2"},
            {"select", "--input", path.c_str(), "--seed", seed, "--prior", "rlasso", "--model-prior", "betabinomial"},
            {"simulate", "--n", "60", "--p", "30", "--seed", seed, "--prior", "pimom", "--J", "5", "--L", "4"},
            {"prc", "--n", "60", "--p", "30", "--seed", seed, "--tau-grid", "1,3", "--J", "5", "--L", "4"},
            {"prc", "--n", "60", "--p", "30", "--seed", seed, "--prior", "gprior", "--g-grid", "100", "--J", "5", "--L", "4"},
            {"compare-search", "--n", "60", "--p", "15,25", "--seed", seed, "--J", "5", "--L", "4", "--N", "10"},
        };
        for (const auto &args : cmds) {
            const json r = run(parse(args));
            const json back = json::parse(toJsonString(r));
            const auto errs = validateReport(back);
            EXPECT_TRUE(errs.empty()) << args[0] << " seed " << seed << ": " << (errs.empty() ? "" : errs.front());
            EXPECT_EQ(back["seed"].get<std::uint64_t>(), std::stoull(seed));
        }
    }
}

TEST(Json, SeventeenDigitsAndNulls) {
    json j;
    j["x"] = 0.1;
    j["nan"] = std::numeric_limits<double>::quiet_NaN();
    const std::string s = toJsonString(j);
    EXPECT_NE(s.find("0.10000000000000001"), std::string::npos);
    EXPECT_EQ(json::parse(s)["nan"], nullptr);
    json bad = json::parse(R"({"command":"select"})");
    EXPECT_FALSE(validateReport(bad).empty());
}

TEST(CliProperty, ExitCodes) {
    const std::string path = noiselessCsv().string();
    const Proc ok = runBinary("select --input " + path + " --J 4 --L 3");
    EXPECT_EQ(ok.code, 0);
    EXPECT_TRUE(validateReport(json::parse(ok.out)).empty());

    const Proc missing = runBinary("select --input " + (tempDir() / "absent.csv").string());
    EXPECT_EQ(missing.code, 1);
    EXPECT_EQ(json::parse(missing.out)["error"]["kind"], "IOError");

    const Proc bad = runBinary("select --input " + writeFile("bad.csv", "y,x\n1,q\n2,3\n").string());
    EXPECT_EQ(bad.code, 1);
    EXPECT_EQ(json::parse(bad.out)["error"]["kind"], "ParseError");

    EXPECT_EQ(runBinary("select --unknown-flag").code, 2);
    EXPECT_EQ(runBinary("select").code, 2);
    EXPECT_EQ(runBinary("frobnicate").code, 2);
    EXPECT_EQ(runBinary("--help").code, 0);
}
