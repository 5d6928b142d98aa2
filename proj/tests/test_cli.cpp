#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "test_support.hpp"
#include "thinnet/graph_limit.hpp"

namespace fs = std::filesystem;
using namespace thinnet;
using namespace thinnet::testing;

namespace {

const fs::path networks = fs::path(THINNET_SOURCE_DIR) / "networks";

struct Sandbox {
    fs::path dir;
    explicit Sandbox(const std::string& name) : dir(fs::temp_directory_path() / ("thinnet_cli_" + name)) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Sandbox() { fs::remove_all(dir); }

    fs::path write(const std::string& file, const json& j) const {
        std::ofstream(dir / file) << j.dump(2);
        return dir / file;
    }

    // Runs the tool and returns its exit status; stdout goes to dir/stdout.txt.
    int run(const std::string& args) const {
        const std::string cmd = std::string(THINNET_CLI) + " " + args + " > " + (dir / "stdout.txt").string() + " 2>&1";
        const int rc = std::system(cmd.c_str());
        return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    }

    std::string output() const { return slurp(dir / "stdout.txt"); }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream s;
        s << in.rdbuf();
        return s.str();
    }
};

const std::string small_graph = " --graph-nt 40 --cells-per-unit 40";

}  // namespace

TEST(Cli, ValidateExitCodes) {
    Sandbox sb("validate");
    EXPECT_EQ(sb.run("validate " + (networks / "channel.json").string()), 0);
    EXPECT_EQ(sb.run("validate " + (networks / "unbalanced.json").string()), 1);
    EXPECT_NE(sb.output().find("vertex 0"), std::string::npos);
    EXPECT_EQ(sb.run("validate " + (sb.dir / "missing.json").string()), 2);
    std::ofstream(sb.dir / "broken.json") << "{ \"options\": ";
    EXPECT_EQ(sb.run("validate " + (sb.dir / "broken.json").string()), 2);
    EXPECT_EQ(sb.run("no-such-command"), 2);
}

TEST(Cli, ZeroDataGivesZeroCsv) {
    Sandbox sb("zero");
    auto j = channel_json(1.0);
    j["inlet_data"][0]["q"] = 0.0;
    const auto cfg = sb.write("zero.json", j);
    ASSERT_EQ(sb.run("solve-limit " + cfg.string() + " -o " + (sb.dir / "out").string() + small_graph), 0);
    for (auto& f : fs::directory_iterator(sb.dir / "out" / "limit" / "w0")) {
        std::ifstream in(f.path());
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) EXPECT_EQ(line.substr(line.rfind(',') + 1), "0") << f.path();
    }
}

TEST(Cli, SymmetricStarOutletAveragesInlets) {
    Sandbox sb("star");
    auto j = star_json({0.25, 0.25, 0.25}, {-1.0, -1.0, 2.0}, {"-x", "-y", "+x"});
    j["inlet_data"][1]["q"] = json{{"poly", {{"var", "t"}, {"coeffs", {0, 1}}}}};
    const auto cfg = sb.write("star.json", j);
    ASSERT_EQ(sb.run("solve-limit " + cfg.string() + " -o " + (sb.dir / "out").string() + small_graph), 0);
    std::ifstream in(sb.dir / "out" / "limit" / "w0" / "vertex_0_traces.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,edge_id,trace");
    double tr[3];
    int rows = 0;
    while (std::getline(in, line)) {
        std::stringstream s(line);
        std::string t, e, v;
        std::getline(s, t, ',');
        std::getline(s, e, ',');
        std::getline(s, v, ',');
        tr[std::stoi(e)] = std::stod(v);
        if (std::stoi(e) == 2) {
            EXPECT_NEAR(tr[2], 0.5 * (tr[0] + tr[1]), 1e-12);
            ++rows;
        }
    }
    EXPECT_EQ(rows, 41);
}

TEST(Cli, OutputsAreDeterministicAndMatchLibrary) {
    Sandbox sb("determinism");
    const auto cfg = networks / "channel.json";
    ASSERT_EQ(sb.run("solve-limit " + cfg.string() + " -o " + (sb.dir / "a").string() + small_graph), 0);
    ASSERT_EQ(sb.run("solve-limit " + cfg.string() + " -o " + (sb.dir / "b").string() + small_graph), 0);
    GraphGrid gg;
    gg.nt = 40;
    gg.cells_per_unit = 40;
    const auto net = load_network(cfg.string());
    solve_limit_alpha1(net, gg).write_csv(net, sb.dir / "lib");
    for (const char* f : {"edge_0.csv", "edge_1.csv", "vertex_0_traces.csv"}) {
        const auto a = Sandbox::slurp(sb.dir / "a" / "limit" / "w0" / f);
        EXPECT_FALSE(a.empty());
        EXPECT_EQ(a, Sandbox::slurp(sb.dir / "b" / "limit" / "w0" / f));
        EXPECT_EQ(a, Sandbox::slurp(sb.dir / "lib" / f));
    }
    EXPECT_EQ(Sandbox::slurp(sb.dir / "a" / "limit" / "run.json"), Sandbox::slurp(sb.dir / "b" / "limit" / "run.json"));
}

TEST(Cli, NumbersCarrySeventeenDigits) {
    Sandbox sb("digits");
    ASSERT_EQ(sb.run("solve-full " + (networks / "channel.json").string() + " -o " + (sb.dir / "out").string() +
                     " --eps 0.1 --rho 8 --nt 20"),
              0);
    const auto manifest = Sandbox::slurp(sb.dir / "out" / "full" / "run.json");
    EXPECT_NE(manifest.find("0.10000000000000001"), std::string::npos);
    std::ifstream in(sb.dir / "out" / "full" / "mass.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "t,mass,outflow");
    std::getline(in, line);
    std::getline(in, line);
    const auto t = line.substr(0, line.find(','));
    EXPECT_EQ(t, "0.050000000000000003");
}

TEST(Cli, EveryCommandRuns) {
    Sandbox sb("commands");
    const std::string out = " -o " + (sb.dir / "out").string();
    const auto ch = (networks / "channel.json").string(), tee = (networks / "tee.json").string();
    EXPECT_EQ(sb.run("solve-cell " + ch + out + small_graph + " --edge 0 --y 0.4 --t 0.9"), 0);
    EXPECT_TRUE(fs::exists(sb.dir / "out" / "cell" / "u1.csv"));
    EXPECT_EQ(sb.run("solve-node " + tee + out + small_graph + " --t 0.9"), 0);
    EXPECT_TRUE(fs::exists(sb.dir / "out" / "node" / "decay.json"));
    EXPECT_EQ(sb.run("assemble " + ch + out + small_graph + " --ny 5 --nxi 3"), 0);
    EXPECT_TRUE(fs::exists(sb.dir / "out" / "assemble" / "lattice.csv"));
    EXPECT_EQ(sb.run("layers " + ch + out + small_graph), 0);
    EXPECT_TRUE(fs::exists(sb.dir / "out" / "layers" / "layer_1.csv"));
    EXPECT_EQ(sb.run("solve-limit " + ch + out + small_graph + " --alpha 1.5"), 0);
    EXPECT_TRUE(fs::exists(sb.dir / "out" / "limit" / "w_am1" / "edge_0.csv"));
    // the direct solver is planar only: configuration error
    EXPECT_EQ(sb.run("solve-full " + (networks / "tee3d.json").string() + out), 2);
    EXPECT_EQ(sb.run("solve-cell " + ch + out + " --edge 7"), 2);
}

TEST(Cli, ConvergeExitCodes) {
    Sandbox sb("converge");
    const std::string out = " -o " + (sb.dir / "out").string();
    const auto ch = (networks / "channel.json").string();
    EXPECT_EQ(sb.run("converge " + ch + out + " --epsilons 0.1"), 2);
    EXPECT_EQ(sb.run("converge " + ch + out + small_graph + " --rho 8 --nt 40"), 0);
    const auto report = json::parse(Sandbox::slurp(sb.dir / "out" / "converge" / "report.json"));
    EXPECT_TRUE(report["pass"].get<bool>());
    EXPECT_EQ(report["errors_max"].size(), 3u);
    EXPECT_TRUE(fs::exists(sb.dir / "out" / "converge" / "report.csv"));
    EXPECT_TRUE(fs::exists(sb.dir / "out" / "converge" / "report.dat"));
    // a bar too high for the data is an acceptance failure
    auto j = json::parse(Sandbox::slurp(networks / "channel.json"));
    j["run"].erase("out");
    const auto cfg = sb.write("strict.json", j);
    EXPECT_EQ(sb.run("converge " + cfg.string() + out + small_graph + " --rho 8 --nt 40 --epsilons 0.2 0.1 0.05 --min-order 5"), 1);
}
