#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "common.hpp"
#include "spoc/cli.hpp"

namespace fs = std::filesystem;
using namespace spoc;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "spoc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err, builtin_fixtures());
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("spoc_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string str() const { return path_.string(); }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

double printed_value(const std::string& out) {
  const size_t at = out.find("V = ");
  return at == std::string::npos ? std::nan("") : std::stod(out.substr(at + 4));
}

// Drops the timing columns (t_reduced_s .. t_bounds_s) from each bounds CSV line.
std::string without_timings(const std::string& csv) {
  std::istringstream is(csv);
  std::string line, out;
  while (std::getline(is, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.push_back("");
    for (size_t i = 0; i < f.size(); ++i)
      if (i < 11 || i > 14) out += f[i] + ",";
    out += "\n";
  }
  return out;
}

}  // namespace

TEST(Cli, ValidateFixture) {
  const CliRun r = run({"validate", "example1"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("A22 stable"), std::string::npos);
}

TEST(Cli, ValidateTamperedA22) {
  TempDir dir;
  SpocProblem p = spoc::testing::fixture("example1");
  p.A22 = CoeffMatrix::constant(Eigen::MatrixXd::Identity(2, 2));
  const fs::path file = dir.path() / "bad.json";
  std::ofstream(file) << save_problem(p);
  const CliRun r = run({"validate", file.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("assumption (a)"), std::string::npos) << r.out;
  EXPECT_EQ(run({"bounds", file.string(), "--eps", "1e-3"}).code, 1);
}

TEST(Cli, MalformedFileIsUsageError) {
  TempDir dir;
  const fs::path file = dir.path() / "broken.json";
  std::ofstream(file) << "{ \"m\": 2, ";
  EXPECT_EQ(run({"validate", file.string()}).code, 2);
  EXPECT_EQ(run({"validate", (dir.path() / "missing.json").string()}).code, 2);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"bounds", "example1", "--bogus"}).code, 2);
  EXPECT_EQ(run({"bounds", "example1"}).code, 2);  // empty eps list
  EXPECT_EQ(run({"solve", "primal", "example1", "--eps", "0"}).code, 2);
  EXPECT_EQ(run({"solve", "sideways", "example1", "--eps", "0.01"}).code, 2);
  EXPECT_EQ(run({"bounds", "example1", "--eps", "0.5"}).code, 2);  // above eps_star = 1/30
  EXPECT_EQ(run({"bounds", "example1", "--eps", "1e-3", "--nodes", "1"}).code, 2);
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(run({"--help"}).code, 0); }

TEST(Cli, SolvePrimalAndDualAgree) {
  TempDir dir;
  const CliRun p = run({"solve", "primal", "example1", "--eps", "0.0333333", "--out", dir.str()});
  const CliRun d = run({"solve", "dual", "example1", "--eps", "0.0333333", "--out", dir.str()});
  ASSERT_EQ(p.code, 0) << p.err;
  ASSERT_EQ(d.code, 0) << d.err;
  const double vp = printed_value(p.out), vd = printed_value(d.out);
  EXPECT_TRUE(std::isfinite(vp));
  EXPECT_NEAR(vd, vp, 1e-4 * std::abs(vp));
  const fs::path pf = dir.path() / "example1_primal_eps0.0333333.csv";
  const fs::path df = dir.path() / "example1_dual_eps0.0333333.csv";
  ASSERT_TRUE(fs::exists(pf));
  ASSERT_TRUE(fs::exists(df));
  EXPECT_EQ(first_line(slurp(pf)), "t,z_1,z_2,z_3,z_4,u_1,u_2,chi_1,chi_2,chi_3,chi_4");
  EXPECT_EQ(first_line(slurp(df)), "t,gamma_1,gamma_2,gamma_3,gamma_4,rho_1,rho_2,rho_3,rho_4,xi_1,xi_2");
}

TEST(Cli, SolveReduced) {
  TempDir dir;
  const CliRun r = run({"solve", "reduced", "example2", "--out", dir.str()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::isfinite(printed_value(r.out)));
  const std::string csv = slurp(dir.path() / "example2_reduced.csv");
  EXPECT_EQ(first_line(csv), "t,z_1,z_2,z_3,z_4,u_1,u_2,u_3,chi_1,chi_2,chi_3,chi_4");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 401);
}

TEST(Cli, BoundsCsvToDirectory) {
  TempDir dir;
  const CliRun r = run({"bounds", "example1", "--eps", "1e-3,1e-4", "--out", dir.str()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("slope"), std::string::npos);
  const std::string csv = slurp(dir.path() / "example1_bounds.csv");
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, bounds_csv_header());
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 15) << line;
    EXPECT_EQ(line.rfind("example1,", 0), 0u);
  }
  EXPECT_EQ(rows, 2);
}

TEST(Cli, BoundsWithoutProgramsLeavesEmptyFields) {
  const CliRun r = run({"bounds", "example2", "--eps", "1e-3", "--no-solve-primal", "--no-solve-dual"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream is(r.out);
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_NE(row.find("example2,0.001,"), std::string::npos);
  // V_primal and V_dual are empty
  const size_t third = row.find(',', row.find(',', row.find(',') + 1) + 1);
  EXPECT_EQ(row.substr(third, 3), ",,,");
}

TEST(Cli, BoundsDeterministicApartFromTimings) {
  const CliRun a = run({"bounds", "example2", "--eps", "1e-2,1e-4"});
  const CliRun b = run({"bounds", "example2", "--eps", "1e-2,1e-4"});
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(without_timings(a.out), without_timings(b.out));
}

TEST(Cli, GenerateFilesAndDeterminism) {
  TempDir one, two;
  const CliRun a = run({"generate", "--m", "4", "--n", "6", "--k", "3", "--T", "0.5", "--count", "3", "--seed", "7",
                     "--out", one.str()});
  const CliRun b = run({"generate", "--m", "4", "--n", "6", "--k", "3", "--T", "0.5", "--count", "3", "--seed", "7",
                     "--out", two.str()});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0);
  for (int i = 0; i < 3; ++i) {
    const std::string name = "problem_" + std::to_string(i) + ".json";
    ASSERT_TRUE(fs::exists(one.path() / name));
    EXPECT_EQ(slurp(one.path() / name), slurp(two.path() / name));
    EXPECT_EQ(run({"validate", (one.path() / name).string()}).code, 0);
  }
}

TEST(Cli, GenerateCountZero) {
  TempDir dir;
  const CliRun r = run({"generate", "--count", "0", "--out", (dir.path() / "sub").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_FALSE(fs::exists(dir.path() / "sub"));
}

TEST(Cli, SweepSuiteSingleProblem) {
  TempDir probs, out;
  ASSERT_EQ(run({"generate", "--count", "1", "--seed", "3", "--prefix", "s", "--out", probs.str()}).code, 0);
  std::ofstream(probs.path() / "junk.json") << "not json";
  const CliRun r = run({"sweep-suite", probs.str(), "--eps", "1e-2,1e-3", "--out", out.str(), "--jobs", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("junk.json"), std::string::npos);
  const std::string summary = slurp(out.path() / "suite_summary.csv");
  EXPECT_EQ(first_line(summary),
            "eps,problems,mean_t_primal_s,mean_t_dual_s,mean_t_bounds_s,gain_primal_vs_bounds,gain_dual_vs_bounds,"
            "sandwich_pass_rate");
  const std::string rows = slurp(out.path() / "suite_bounds.csv");
  EXPECT_EQ(first_line(rows), bounds_csv_header());
  EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 3);
  // one problem: the mean timings are that problem's timings
  std::istringstream bs(rows), ss(summary);
  std::string bl, sl;
  std::getline(bs, bl);
  std::getline(ss, sl);
  std::getline(bs, bl);
  std::getline(ss, sl);
  std::vector<std::string> bf, sf;
  for (std::stringstream b(bl); std::getline(b, sl, ',');) bf.push_back(sl);
  std::getline(std::istringstream(summary.substr(summary.find('\n') + 1)), sl);
  for (std::stringstream s(sl); std::getline(s, bl, ',');) sf.push_back(bl);
  ASSERT_GE(bf.size(), 15u);
  ASSERT_GE(sf.size(), 5u);
  EXPECT_EQ(sf[0], bf[1]);   // eps
  EXPECT_EQ(sf[1], "1");
  EXPECT_EQ(sf[2], bf[12]);  // t_primal
  EXPECT_EQ(sf[3], bf[13]);  // t_dual
  EXPECT_EQ(sf[4], bf[14]);  // t_bounds
  EXPECT_TRUE(fs::exists(out.path() / "suite_slopes.csv"));
}

TEST(Cli, SweepSuiteRequiresDirectory) { EXPECT_EQ(run({"sweep-suite", "nowhere", "--eps", "1e-2"}).code, 2); }
