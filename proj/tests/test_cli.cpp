#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "rmu/cli.hpp"
#include "rmu/serialization.hpp"

using namespace rmu;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "rmu");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("rmu_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string scalar_instance(double b) {
    const std::string p = path("scalar_" + std::to_string(b) + ".json");
    EXPECT_EQ(run({"gen", "scalar", "--a", "0.70710678118654752", "--b", std::to_string(b), "-o", p}).code, 0);
    return p;
  }

  fs::path dir_;
};

}  // namespace

TEST(ParseAxis, Forms) {
  EXPECT_EQ(parse_axis("0.5"), std::vector<double>{0.5});
  EXPECT_EQ(parse_axis("1..4"), (std::vector<double>{1, 2, 3, 4}));
  const auto r = parse_axis("0..0.5:0.25");
  ASSERT_EQ(r.size(), 3u);
  EXPECT_DOUBLE_EQ(r[2], 0.5);
  EXPECT_EQ(parse_axis("0, 0.1,2"), (std::vector<double>{0, 0.1, 2}));
  EXPECT_EQ(parse_axis("1..50").size(), 50u);
  EXPECT_EQ(parse_axis("0..3:0.1").size(), 31u);
  EXPECT_THROW(parse_axis(""), std::invalid_argument);
  EXPECT_THROW(parse_axis("1,,2"), std::invalid_argument);
  EXPECT_THROW(parse_axis("3..1"), std::invalid_argument);
  EXPECT_THROW(parse_axis("0..1:0"), std::invalid_argument);
  EXPECT_THROW(parse_axis("abc"), std::invalid_argument);
}

TEST_F(Cli, GenIsByteIdenticalAndSelfDescribing) {
  const std::vector<std::string> base{"gen", "sparse", "--n", "200", "--card", "10", "--sigma", "0.1",
                                      "--delta", "0.2", "--seed", "7", "-o"};
  auto a = base;
  a.push_back(path("a.json"));
  auto b = base;
  b.push_back(path("b.json"));
  ASSERT_EQ(run(a).code, 0);
  ASSERT_EQ(run(b).code, 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));

  const Json j = read_json_file(path("a.json"));
  EXPECT_EQ(j["config"]["seed"], 7);
  EXPECT_EQ(j["config"]["sigma"], 0.1);
  const Instance inst = instance_from_json(j);
  EXPECT_EQ(*inst.delta, 0.2);
  int nz = 0;
  for (Eigen::Index i = 0; i < inst.ground_truth->size(); ++i) nz += (*inst.ground_truth)(i) != 0.0;
  EXPECT_EQ(nz, 10);

  ASSERT_EQ(run({"gen", "lowrank", "--m", "20", "--n", "20", "--rank", "5", "--sigma", "0", "--delta", "0.2", "-o",
                 path("lr.json")})
                .code,
            0);
  const Instance lr = instance_from_json(read_json_file(path("lr.json")));
  EXPECT_EQ(lr.shape().rows, 20);
  EXPECT_LE((lr.op->apply(lr.ground_truth->reshaped()) - lr.b).norm(), 1e-12);
}

TEST_F(Cli, GenRejectsConflictsAndBadValues) {
  EXPECT_EQ(run({"gen", "sparse", "--operator", "gaussian", "--delta", "0.2", "-o", path("g.json")}).code,
            exit_code::kUsage);
  EXPECT_FALSE(fs::exists(path("g.json")));
  EXPECT_EQ(run({"gen", "sparse", "--delta", "1.5", "-o", path("g.json")}).code, exit_code::kUsage);
  EXPECT_EQ(run({"gen", "sparse", "--n", "5", "--card", "9", "-o", path("g.json")}).code, exit_code::kUsage);
  EXPECT_EQ(run({"gen", "sparse", "--bogus", "-o", path("g.json")}).code, exit_code::kUsage);
  EXPECT_EQ(run({}).code, exit_code::kUsage);
  EXPECT_EQ(run({"gen", "sparse", "-o", path("missing_dir/x.json")}).code, exit_code::kIoError);
}

TEST_F(Cli, SolveScalarExample) {
  const std::string inst = scalar_instance(1.5);
  const CliRun r = run({"solve", "-i", inst, "--mu", "1", "-o", path("sol.json"), "--trace", path("trace.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = read_json_file(path("sol.json"));
  EXPECT_NEAR(solution_from_json(j)(0, 0), 2.1213203435596424, 1e-6);
  EXPECT_EQ(j["config"]["reg"]["mu"], 1.0);
  EXPECT_FALSE(slurp(path("trace.jsonl")).empty());

  // stdout when no output path is given.
  const CliRun to_stdout = run({"solve", "-i", inst, "--mu", "1"});
  EXPECT_EQ(to_stdout.code, 0);
  EXPECT_EQ(Json::parse(to_stdout.out)["schema"], kSolveSchema);
}

TEST_F(Cli, SolveL1RecordsConvexStrength) {
  const std::string inst = scalar_instance(1.5);
  ASSERT_EQ(run({"solve", "-i", inst, "--reg", "l1", "--mu", "1", "-o", path("l1.json")}).code, 0);
  const Json j = read_json_file(path("l1.json"));
  EXPECT_DOUBLE_EQ(j["reg"]["mu_prime"].get<double>(), 2.0);
  // argmin 2|x| + (x / sqrt(2) - 1.5)^2: x = 2 (1.5 / sqrt(2) - 1) in closed form.
  EXPECT_NEAR(solution_from_json(j)(0, 0), 2.0 * (1.5 / std::sqrt(2.0) - 1.0), 1e-6);
}

TEST_F(Cli, SolveFailures) {
  const CliRun missing = run({"solve", "-i", path("nope.json"), "--mu", "1", "-o", path("out.json")});
  EXPECT_NE(missing.code, 0);
  EXPECT_EQ(missing.code, exit_code::kIoError);
  EXPECT_FALSE(fs::exists(path("out.json")));

  std::ofstream(path("broken.json")) << "{\n\"schema\": \"rmu.instance/1\",\n oops }";
  const CliRun broken = run({"solve", "-i", path("broken.json"), "--mu", "1", "-o", path("out.json")});
  EXPECT_EQ(broken.code, exit_code::kDataError);
  EXPECT_NE(broken.err.find("3:"), std::string::npos) << broken.err;
  EXPECT_FALSE(fs::exists(path("out.json")));

  const std::string inst = scalar_instance(1.5);
  EXPECT_EQ(run({"solve", "-i", inst}).code, exit_code::kUsage);
  EXPECT_EQ(run({"solve", "-i", inst, "--reg", "nuclear", "--mu", "1"}).code, exit_code::kUsage);
  EXPECT_EQ(run({"solve", "-i", inst, "--mu", "1", "--max-iters", "1", "--tol-obj", "1e-300", "--tol-step", "1e-300",
                 "-o", path("cap.json")})
                .code,
            exit_code::kNotConverged);
}

TEST_F(Cli, CertifyExitCodes) {
  // b = 0.5: x = 0 is stationary and certified.
  const std::string low = scalar_instance(0.5);
  ASSERT_EQ(run({"solve", "-i", low, "--mu", "1", "-o", path("low.json")}).code, 0);
  const CliRun pass = run({"certify", "-i", low, "-s", path("low.json"), "-o", path("cert.json")});
  EXPECT_EQ(pass.code, exit_code::kOk) << pass.err;
  const Json rep = read_json_file(path("cert.json"));
  EXPECT_TRUE(rep["passed"].get<bool>());
  EXPECT_EQ(rep["delta_source"], "instance");

  // b = 1: x = 0 is stationary but inside the interval.
  const std::string mid = scalar_instance(1.0);
  ASSERT_EQ(run({"solve", "-i", mid, "--mu", "1", "-o", path("mid.json")}).code, 0);
  EXPECT_EQ(run({"certify", "-i", mid, "-s", path("mid.json")}).code, exit_code::kCertificateFailed);

  // A non-stationary point is refused.
  const std::string high = scalar_instance(1.5);
  EXPECT_EQ(run({"certify", "-i", high, "-s", path("low.json")}).code, exit_code::kCertificateRefused);

  // No delta anywhere.
  ASSERT_EQ(run({"gen", "scalar", "--a", "1", "--b", "3", "-o", path("nodelta.json")}).code, 0);
  ASSERT_EQ(run({"solve", "-i", path("nodelta.json"), "--mu", "1", "-o", path("nd.json")}).code, 0);
  const CliRun nodelta = run({"certify", "-i", path("nodelta.json"), "-s", path("nd.json")});
  EXPECT_EQ(nodelta.code, exit_code::kMissingDelta);
  EXPECT_NE(nodelta.err.find("delta"), std::string::npos);
  const CliRun noorder = run({"certify", "-i", path("nodelta.json"), "-s", path("nd.json"), "--delta", "0.3"});
  EXPECT_EQ(noorder.code, exit_code::kMissingDelta);
  EXPECT_NE(noorder.err.find("order"), std::string::npos);
  EXPECT_EQ(run({"certify", "-i", path("nodelta.json"), "-s", path("nd.json"), "--delta", "0.3", "--order", "1"}).code,
            exit_code::kOk);

  // A user delta that contradicts the instance is rejected.
  EXPECT_EQ(run({"certify", "-i", low, "-s", path("low.json"), "--delta", "0.3"}).code, exit_code::kUsage);
}

TEST_F(Cli, GridFastIsDeterministic) {
  const CliRun a = run({"grid", "sparse", "--fast", "-o", path("a.csv")});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(run({"grid", "sparse", "--fast", "--threads", "2", "-o", path("b.csv")}).code, 0);
  const std::string csv = slurp(path("a.csv"));
  // Thread count is part of the recorded configuration; compare the records only.
  auto records = [](const std::string& s) { return s.substr(s.find("\nsigma_index")); };
  EXPECT_EQ(records(csv), records(slurp(path("b.csv"))));
  EXPECT_EQ(csv.rfind("# schema: rmu.grid/1", 0), 0u);
  EXPECT_NE(csv.find("\"base_seed\""), std::string::npos);

  ASSERT_EQ(run({"grid", "lowrank", "--fast", "--trials", "1", "--mu", "0,4", "--sigma", "0", "-o", path("g.json")})
                .code,
            0);
  const Json j = read_json_file(path("g.json"));
  EXPECT_EQ(j["schema"], "rmu.grid/1");
  EXPECT_EQ(j["cells"].size(), 4u);

  EXPECT_EQ(run({"grid", "sparse", "--rank", "3", "-o", path("x.csv")}).code, exit_code::kUsage);
  EXPECT_EQ(run({"grid", "sparse", "--mu", "1,0", "-o", path("x.csv")}).code, exit_code::kUsage);
  EXPECT_EQ(run({"grid", "sparse", "-o", path("x.txt")}).code, exit_code::kUsage);
}

TEST_F(Cli, NrsfmWritesBothRegularizers) {
  const CliRun r = run({"nrsfm", "--F", "8", "--n", "6", "--K", "2", "--mu", "5..6", "--derivative", "-o",
                     path("nr.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = read_json_file(path("nr.json"));
  EXPECT_EQ(j["schema"], "rmu.nrsfm/1");
  ASSERT_EQ(j["curves"].size(), 2u);
  EXPECT_EQ(j["curves"][0]["reg"], "rmu");
  EXPECT_EQ(j["curves"][1]["reg"], "nuclear");
  EXPECT_TRUE(j["curves"][0]["derivative"].get<bool>());
  EXPECT_EQ(j["curves"][0]["records"].size(), 2u);
  EXPECT_EQ(j["config"]["seed"], 1);
}

TEST_F(Cli, ConfigFilePrecedence) {
  std::ofstream(path("run.toml")) << "[nrsfm]\nF = 8\nn = 6\nK = 2\nmu = \"5\"\nregs = [\"rmu\"]\n";
  ASSERT_EQ(run({"--config", path("run.toml"), "nrsfm", "-o", path("a.json")}).code, 0);
  Json a = read_json_file(path("a.json"));
  EXPECT_EQ(a["config"]["frames"], 8);
  EXPECT_EQ(a["curves"].size(), 1u);
  // A flag beats the file.
  ASSERT_EQ(run({"--config", path("run.toml"), "nrsfm", "--F", "9", "-o", path("b.json")}).code, 0);
  EXPECT_EQ(read_json_file(path("b.json"))["config"]["frames"], 9);
}

TEST_F(Cli, ConfigFileRejectsUnknownKeys) {
  std::ofstream(path("bad.toml")) << "[nrsfm]\nF = 8\nframez = 3\n";
  EXPECT_EQ(run({"--config", path("bad.toml"), "nrsfm", "-o", path("a.json")}).code, exit_code::kUsage);
  EXPECT_FALSE(fs::exists(path("a.json")));
  EXPECT_EQ(run({"--config", path("missing.toml"), "nrsfm", "-o", path("a.json")}).code, exit_code::kIoError);
}
