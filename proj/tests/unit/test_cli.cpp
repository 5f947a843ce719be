#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>

#include "spinguard/cli/commands.hpp"

using namespace spinguard;
using namespace spinguard::cli;
namespace fs = std::filesystem;

namespace {

const char* bin() {
    const char* b = std::getenv("SPINGUARD_BIN");
    return b ? b : "spinguard";
}

struct Invocation {
    int code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
protected:
    fs::path dir;

    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir = fs::temp_directory_path() / (std::string("spinguard_cli_") + info->name());
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }

    fs::path write(const std::string& name, const json& j) {
        const auto p = dir / name;
        std::ofstream(p) << j.dump(2);
        return p;
    }

    Invocation run(const std::string& args) {
        const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
        const std::string cmd = std::string(bin()) + " " + args + " >" + out.string() + " 2>" + err.string();
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
    }

    json spin_half(double duration = 0.5) const {
        json j = json::parse(R"({
          "material": {"label": "s", "electron_spin": 0.5, "g": 2.0023},
          "b0_mt": 344.2, "f0_mhz": 9645,
          "environment": {"model": "lindblad", "t1_us": 15},
          "drive": {"delta_mhz": 10, "h_d_mhz": 17.3205080757, "h_i_ratio": 0.12, "phi_deg": 30}
        })");
        j["run"] = {{"duration_us", duration}};
        j["output"] = {{"dir", dir.string()}, {"prefix", "r"}};
        return j;
    }
};

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string l;
    while (std::getline(ss, l)) out.push_back(l);
    return out;
}

} // namespace

TEST_F(CliTest, MaterialsListsPresets) {
    const auto r = run("materials");
    EXPECT_EQ(r.code, 0);
    for (const auto& n : preset_names()) EXPECT_NE(r.out.find(n + ","), std::string::npos);
}

TEST_F(CliTest, SimulateMnShapeContract) {
    auto j = json::parse(slurp(fs::path(SPINGUARD_SOURCE_DIR) / "scenarios/mn_protected.json"));
    j["output"] = {{"dir", dir.string()}, {"prefix", "mn"}};
    const auto cfg = write("mn.json", j);
    const auto r = run("simulate " + cfg.string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = slurp(dir / "mn.csv");
    EXPECT_EQ(csv.find('\r'), std::string::npos);
    const auto ls = lines(csv);
    EXPECT_EQ(ls.front(), "t_us,sx,sy,sz");
    const Scenario sc = load_scenario(j);
    EXPECT_EQ(ls.size() - 1, default_grid(sc.effective_drive(), 15.0).size());
    EXPECT_EQ(std::count(ls[1].begin(), ls[1].end(), ','), 3);
    const auto manifest = json::parse(slurp(dir / "mn.manifest.json"));
    EXPECT_EQ(manifest["command"], "simulate");
    EXPECT_EQ(manifest["inputs"], j);
    EXPECT_EQ(manifest.dump().find("timestamp"), std::string::npos);
}

TEST_F(CliTest, SimulateIsByteIdentical) {
    const auto cfg = write("a.json", spin_half());
    ASSERT_EQ(run("simulate " + cfg.string()).code, 0);
    const auto csv1 = slurp(dir / "r.csv"), man1 = slurp(dir / "r.manifest.json");
    ASSERT_EQ(run("simulate " + cfg.string()).code, 0);
    EXPECT_EQ(slurp(dir / "r.csv"), csv1);
    EXPECT_EQ(slurp(dir / "r.manifest.json"), man1);
}

TEST_F(CliTest, ValidationErrorsNameTheKey) {
    auto j = spin_half();
    j["environment"] = {{"model", "bloch"}, {"t1_us", 1.0}, {"t2_us", 3.0}};
    auto r = run("simulate " + write("t2.json", j).string());
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("T2"), std::string::npos) << r.err;

    j = spin_half();
    j["drive"]["h_d_mhzz"] = 3;
    r = run("simulate " + write("typo.json", j).string());
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("drive.h_d_mhzz"), std::string::npos) << r.err;

    j = spin_half();
    j.erase("run");
    j["sequence"] = json::array({{{"kind", "acquire_echo"}}, {{"kind", "wait"}, {"duration_us", 1}}});
    r = run("simulate " + write("seq.json", j).string());
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("sequence[0]"), std::string::npos) << r.err;

    j = spin_half();
    j["material"] = "MnMgO";
    r = run("simulate " + write("mn.json", j).string());
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("cubic_a_mhz"), std::string::npos) << r.err;

    std::ofstream(dir / "broken.json") << "{ \"material\": ";
    EXPECT_EQ(run("simulate " + (dir / "broken.json").string()).code, 3);
}

TEST_F(CliTest, UsageErrors) {
    const auto cfg = write("a.json", spin_half());
    EXPECT_EQ(run("sweep " + cfg.string() + " --param bogus --from 0 --to 1 --steps 2").code, 2);
    EXPECT_EQ(run("sweep " + cfg.string() + " --param phi_deg --from 0 --steps 3").code, 2);
    EXPECT_EQ(run("").code, 2);
    EXPECT_EQ(run("simulate").code, 2);
}

TEST_F(CliTest, SingleStepSweepEqualsSimulateRow) {
    auto j = spin_half(0.4);
    j["run"]["sample_step_us"] = 0.002;
    const auto cfg = write("a.json", j);
    ASSERT_EQ(run("simulate " + cfg.string()).code, 0);
    ASSERT_EQ(run("sweep " + cfg.string() + " --param delta_mhz --from 10 --steps 1").code, 0);
    const auto sim = lines(slurp(dir / "r.csv"));
    const auto grid = lines(slurp(dir / "r_grid.csv"));
    ASSERT_EQ(grid.size(), sim.size());
    EXPECT_EQ(grid[0], "t_us,10");
    for (std::size_t i = 1; i < sim.size(); ++i) {
        const auto s = sim[i], g = grid[i];
        EXPECT_EQ(g.substr(0, g.find(',')), s.substr(0, s.find(',')));
        EXPECT_EQ(g.substr(g.rfind(',') + 1), s.substr(s.rfind(',') + 1));
    }
    EXPECT_TRUE(fs::exists(dir / "r_fft.csv"));
}

TEST_F(CliTest, SweepGridLayout) {
    const auto cfg = write("a.json", spin_half(0.3));
    const auto r = run("sweep " + cfg.string() + " --param phi_deg --from 0 --to 90 --steps 4 --jobs 2");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto grid = lines(slurp(dir / "r_grid.csv"));
    EXPECT_EQ(grid[0], "t_us,0,30,60,90");
    const auto fft = lines(slurp(dir / "r_fft.csv"));
    EXPECT_EQ(fft[0], "f_mhz,0,30,60,90");
    const auto m = json::parse(slurp(dir / "r_sweep.manifest.json"));
    EXPECT_EQ(m["results"]["rows"].size(), 4u);
}

TEST_F(CliTest, FloquetTable) {
    auto j = spin_half();
    j["drive"] = {{"delta_mhz", 10}, {"resonance_order", 2}, {"h_i_mhz", 0}};
    ASSERT_EQ(run("floquet " + write("a.json", j).string()).code, 0);
    auto summary = lines(slurp(dir / "r_floquet.csv"));
    ASSERT_EQ(summary.size(), 2u);
    EXPECT_EQ(summary[0], "n_blocks,delta_mhz,h_d_mhz,h_i_mhz,rabi_mhz,splitting_numeric_mhz,splitting_perturbative_mhz");
    EXPECT_EQ(summary[1].substr(0, 2), "7,");
    EXPECT_EQ(summary[1].substr(summary[1].rfind(',') - 1), "0,0");

    // weak image: the crossing gap is converged at 5 blocks
    j["drive"] = {{"delta_mhz", 10}, {"resonance_order", 2}, {"h_i_ratio", 0.05}};
    const auto cfg = write("b.json", j);
    auto split = [&](int n) {
        EXPECT_EQ(run("floquet " + cfg.string() + " --n-blocks " + std::to_string(n)).code, 0);
        const auto l = lines(slurp(dir / "r_floquet.csv"))[1];
        std::vector<std::string> cells;
        std::stringstream ss(l);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        return std::stod(cells[5]);
    };
    EXPECT_LT(std::abs(split(5) - split(7)), 1e-8);
    EXPECT_EQ(lines(slurp(dir / "r_quasi.csv")).size(), 1u + 14u);
}

TEST_F(CliTest, FitRecoversSyntheticDecay) {
    {
        std::ofstream out(dir / "d.csv");
        out << "t_us,sz\n";
        for (int i = 0; i <= 400; ++i) {
            const double t = i * 0.01;
            out << t << ',' << 0.5 * std::exp(-t / 1.7) * std::cos(units::two_pi * 6 * t) << '\n';
        }
    }
    const auto r = run("fit " + (dir / "d.csv").string() + " --model damped_cos --out " + (dir / "f.json").string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(slurp(dir / "f.json"));
    EXPECT_NEAR(j["t_decay_us"].get<double>(), 1.7, 1e-6);
    EXPECT_EQ(run("fit " + (dir / "d.csv").string() + " --column sx").code, 3);
}

TEST(Scenario, LoadsPresetDefaults) {
    const auto sc = load_scenario(json::parse(R"({"material": "P1", "drive": {"delta_mhz": 34, "resonance_order": 2},
                                                 "run": {"duration_us": 1}})"));
    EXPECT_EQ(sc.env.t2_us, 0.69);
    EXPECT_TRUE(std::isinf(sc.env.t1_us));
    EXPECT_NEAR(sc.effective_drive().h_d_mhz, 34 * std::sqrt(3.0), 1e-9);
    EXPECT_NEAR(sc.effective_drive().h_i_mhz, 0.12 * 34 * std::sqrt(3.0), 1e-9);
    EXPECT_TRUE(sc.tls_note.empty());
}

TEST(Scenario, FallsBackToBareSpinHalf) {
    // spin-1 with B0 and microwave field both along z: no transverse element anywhere
    const auto sc = load_scenario(json::parse(R"({"material": {"electron_spin": 1, "mw_direction": [0, 0, 1]},
                                                 "b0_mt": 300, "f0_mhz": 9000,
                                                 "drive": {"delta_mhz": 5, "h_d_mhz": 3}, "run": {"duration_us": 1}})"));
    EXPECT_FALSE(sc.tls_note.empty());
    EXPECT_EQ(sc.tls.drive_scale, 1.0);
}

TEST(Scenario, SweepParametersApply) {
    auto sc = load_scenario(json::parse(R"({"material": "P1", "drive": {"delta_mhz": 34, "h_d_mhz": 50},
                                           "run": {"duration_us": 1}})"));
    EXPECT_NEAR(with_param(sc, "h_d_mhz", 40).drive.h_i_mhz, 0.12 * 40, 1e-12);
    EXPECT_NEAR(with_param(sc, "phi_deg", 90).drive.phi_rad, units::pi / 2, 1e-12);
    const auto hi = with_param(sc, "h_i_mhz", 2);
    EXPECT_EQ(hi.drive.h_i_mhz, 2);
    EXPECT_NEAR(with_param(hi, "h_d_mhz", 10).drive.h_i_mhz, 2, 1e-12);
    EXPECT_THROW(with_param(sc, "theta", 1), InvalidArgument);
}
