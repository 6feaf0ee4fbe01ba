#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "msym/errors.hpp"
#include "msym/parser.hpp"

using namespace msym;
namespace fs = std::filesystem;

namespace {

const std::string kModels = MSYM_MODELS_DIR;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "msym");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("msym_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }

  fs::path dir_;
};

}  // namespace

TEST(ModelFile, ParsesAllKeys) {
  const cli::ModelFile mf = cli::parse_model_file(
      "# minimal surface\n"
      "base_dim = 2\n"
      "fiber_dim = 1\n"
      "lagrangian = sqrt(1 + v1_1^2 + v1_2^2)  # area density\n"
      "domain = [-0.5, 0.5] x [0, 1]\n"
      "boundary = scherk\n");
  EXPECT_EQ(mf.model.m, 2);
  EXPECT_EQ(mf.model.lagrangian, parse("sqrt(1 + v1_1^2 + v1_2^2)"));
  EXPECT_EQ(mf.domain, (Domain{{-0.5, 0.5}, {0.0, 1.0}}));
  ASSERT_EQ(mf.boundary().size(), 1u);
  EXPECT_EQ(mf.boundary()[0], parse("log(cos(x1)) - log(cos(x2))"));
}

TEST(ModelFile, DefaultsAndMultipleFields) {
  const cli::ModelFile mf = cli::parse_model_file(
      "base_dim = 2\nfiber_dim = 2\nlagrangian = (v1_1^2 + v1_2^2 + v2_1^2 + v2_2^2)/2\nboundary = x1; x2*x1\n");
  EXPECT_EQ(mf.domain, (Domain{{-1.0, 1.0}, {-1.0, 1.0}}));
  ASSERT_EQ(mf.boundary().size(), 2u);
  EXPECT_EQ(mf.boundary()[1], parse("x1*x2"));
  const cli::ModelFile none = cli::parse_model_file("base_dim = 2\nfiber_dim = 1\nlagrangian = v1_1\n");
  EXPECT_THROW(none.boundary(), ModelError);
}

TEST(ModelFile, Rejections) {
  const std::string ok = "base_dim = 2\nfiber_dim = 1\nlagrangian = v1_1^2\n";
  EXPECT_THROW(cli::parse_model_file("fiber_dim = 1\nlagrangian = v1_1\n"), ModelError);
  EXPECT_THROW(cli::parse_model_file(ok + "colour = red\n"), ModelError);
  EXPECT_THROW(cli::parse_model_file(ok + "base_dim = 2\n"), ModelError);
  EXPECT_THROW(cli::parse_model_file(ok + "domain = [1,0] x [0,1]\n"), ModelError);
  EXPECT_THROW(cli::parse_model_file(ok + "domain = [0,1]\n"), ModelError);
  EXPECT_THROW(cli::parse_model_file("base_dim = two\nfiber_dim = 1\nlagrangian = v1_1\n"), ModelError);
  EXPECT_THROW(cli::parse_model_file("base_dim = 2\nfiber_dim = 1\nlagrangian = v1_1 +\n"), ParseError);
  EXPECT_THROW(cli::parse_model_file("base_dim = 2\nfiber_dim = 1\nlagrangian = v1_3\n"), SymbolError);
  EXPECT_THROW(cli::parse_model_file(ok + "boundary = x1; x2\n").boundary(), ModelError);
}

TEST(CliRun, DeriveMinimalSurface) {
  const Outcome o = run_cli({"derive", kModels + "/minimal_surface.model"});
  EXPECT_EQ(o.code, cli::kOk) << o.err;
  EXPECT_NE(o.out.find("h = -sqrt(1 - p1_1^2 - p1_2^2)"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("Hessian det = "), std::string::npos);
  EXPECT_NE(o.out.find("EL equations:"), std::string::npos);
  EXPECT_NE(o.out.find("HDW equations:"), std::string::npos);
  EXPECT_NE(o.out.find("primary constraints:"), std::string::npos);
  // byte-stable across runs
  EXPECT_EQ(run_cli({"derive", kModels + "/minimal_surface.model"}).out, o.out);
}

TEST(CliRun, DeriveDegenerateHasNoHamiltonian) {
  const Outcome o = run_cli({"derive", kModels + "/degenerate.model"});
  EXPECT_EQ(o.code, cli::kSingular);
  EXPECT_NE(o.out.find("det = 0 identically"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("h: not available"), std::string::npos) << o.out;
}

TEST(CliRun, CheckVerdicts) {
  Outcome o = run_cli({"check", kModels + "/degenerate.model"});
  EXPECT_EQ(o.code, cli::kSingular);
  EXPECT_NE(o.out.find("verdict: singular"), std::string::npos);
  o = run_cli({"check", kModels + "/minimal_surface.model", "--samples", "20"});
  EXPECT_EQ(o.code, cli::kOk) << o.out << o.err;
  EXPECT_NE(o.out.find("regular at 20 of 20"), std::string::npos) << o.out;
}

TEST(CliRun, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"derive"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"solve", kModels + "/free_field.model", "--grid", "2", "--out", "x.csv"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"derive", kModels + "/no_such.model"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"--help"}).code, cli::kOk);
}

TEST_F(CliFiles, SolveAndVerifyScherk) {
  const std::string model = kModels + "/minimal_surface.model";
  const std::string csv = path("s.csv");
  Outcome o = run_cli({"solve", model, "--grid", "33", "--formalism", "both", "--out", csv});
  ASSERT_EQ(o.code, cli::kOk) << o.out << o.err;
  EXPECT_NE(o.out.find("max |y_el - y_hdw|"), std::string::npos);
  o = run_cli({"verify", model, "--solution", csv, "--unified", "--variational", "5"});
  EXPECT_EQ(o.code, cli::kOk) << o.out << o.err;
  EXPECT_NE(o.out.find("all checks passed"), std::string::npos) << o.out;
  EXPECT_EQ(o.out.find("FAIL"), std::string::npos) << o.out;
}

TEST_F(CliFiles, CorruptedSolutionFailsVerification) {
  const std::string model = kModels + "/minimal_surface.model";
  const std::string csv = path("s.csv");
  ASSERT_EQ(run_cli({"solve", model, "--grid", "17", "--out", csv}).code, cli::kOk);
  SectionGrid g = read_csv_file(csv);
  g.y(1)[g.node({8, 8})] += 0.1;
  write_csv_file(g, csv);
  const Outcome o = run_cli({"verify", model, "--solution", csv});
  EXPECT_EQ(o.code, cli::kVerificationFailed) << o.out;
  EXPECT_NE(o.out.find("FAIL"), std::string::npos);
}

TEST_F(CliFiles, HdwOnlySolveOfFreeField) {
  const std::string csv = path("f.csv");
  const Outcome o = run_cli({"solve", kModels + "/free_field.model", "--grid", "9", "--formalism", "hdw", "--out", csv});
  ASSERT_EQ(o.code, cli::kOk) << o.err;
  const SectionGrid g = read_csv_file(csv);
  ASSERT_TRUE(g.has_momenta());
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const auto x = g.position(i);
    EXPECT_NEAR(g.y(1)[i], x[0] * x[1], 1e-10);
  }
}

TEST_F(CliFiles, SolveWithoutBoundaryIsAUsageError) {
  const std::string model = write("m.model", "base_dim = 2\nfiber_dim = 1\nlagrangian = (v1_1^2 + v1_2^2)/2\n");
  EXPECT_EQ(run_cli({"solve", model, "--grid", "9", "--out", path("o.csv")}).code, cli::kUsage);
}

TEST_F(CliFiles, SingularModelSolveExitsTwo) {
  const std::string model = write("d.model", "base_dim = 2\nfiber_dim = 1\nlagrangian = v1_1 + y1*v1_2\nboundary = x1\n");
  EXPECT_EQ(run_cli({"solve", model, "--grid", "9", "--out", path("o.csv")}).code, cli::kSingular);
}
