#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pathosyn/dataset.hpp"
#include "test_support.hpp"

using namespace pathosyn;
using pathosyn::testing::read_bytes;
using pathosyn::testing::TempDir;
using pathosyn::testing::write_text;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run pathosyn_cli(const std::string& args) {
  const std::string cmd = std::string("PATHOSYN_LOG_LEVEL=quiet ") + PATHOSYN_EXE + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

const char* kTinyConfig = R"({
  "train": {"epochs": 2, "batch_size": 4, "precision": "f64", "learning_rate": 1e-3,
            "validation_subjects": 2, "validation_ddim_steps": 2,
            "schedule": {"steps": 100},
            "substrate_net": {"base_width": 4},
            "noise_net": {"base_width": 8, "time_embed_dim": 16, "attention_resolution": 8}}
})";

/// A 16 px dataset and a briefly trained checkpoint, shared by the tests below.
class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("pathosyn-cli");
    const auto gen = pathosyn_cli("gen-data --out " + q(*dir_ / "data") +
                                  " --subjects 80 --resolution 16 --seed 3 --lesion-free-frac 0.1");
    ASSERT_EQ(gen.code, 0) << gen.output;
    write_text(*dir_ / "cfg.json", kTinyConfig);
    const auto train = pathosyn_cli("train --data " + q(*dir_ / "data") + " --config " + q(*dir_ / "cfg.json") +
                                    " --out " + q(*dir_ / "run"));
    ASSERT_EQ(train.code, 0) << train.output;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::filesystem::path path(const std::string& name) { return *dir_ / name; }
  static std::string data() { return " --data " + q(path("data")); }
  static std::string ckpt() { return " --ckpt " + q(path("run") / "last.ckpt"); }
  static inline TempDir* dir_ = nullptr;
};

}  // namespace

TEST(CliGenData, EmptyDatasetWarns) {
  TempDir dir("pathosyn-cli-empty");
  const auto r = pathosyn_cli("gen-data --out " + q(dir / "d") + " --subjects 0 --resolution 16");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("warning"), std::string::npos);
  EXPECT_TRUE(read_manifest(dir / "d").subjects.empty());
}

TEST(CliGenData, DeterministicAndSplitCounts) {
  TempDir dir("pathosyn-cli-gen");
  for (const char* name : {"a", "b"}) {
    ASSERT_EQ(pathosyn_cli("gen-data --out " + q(dir / name) + " --subjects 250 --resolution 16 --seed 5").code, 0);
  }
  const auto a = read_manifest(dir / "a");
  EXPECT_EQ(a.checksums, read_manifest(dir / "b").checksums);
  EXPECT_EQ(read_bytes(dir / "a" / "manifest.json"), read_bytes(dir / "b" / "manifest.json"));
  EXPECT_EQ(a.ids_in(Split::train).size(), 200u);
  EXPECT_EQ(a.ids_in(Split::val).size(), 25u);
  EXPECT_EQ(a.ids_in(Split::test).size(), 25u);
  const auto again = pathosyn_cli("gen-data --out " + q(dir / "a") + " --subjects 3 --resolution 16");
  EXPECT_EQ(again.code, 3);
  EXPECT_NE(again.output.find("--force"), std::string::npos);
  EXPECT_EQ(pathosyn_cli("gen-data --out " + q(dir / "a") + " --subjects 3 --resolution 16 --force").code, 0);
}

TEST(CliUsage, BadInvocations) {
  EXPECT_EQ(pathosyn_cli("").code, 2);
  EXPECT_EQ(pathosyn_cli("frobnicate").code, 2);
  EXPECT_EQ(pathosyn_cli("gen-data --subjects 3").code, 2);
  EXPECT_EQ(pathosyn_cli("--help").code, 0);
  EXPECT_EQ(pathosyn_cli("--version").code, 0);
}

TEST_F(CliPipeline, TrainOutputs) {
  for (const char* f : {"last.ckpt", "best.ckpt", "metrics.csv", "validation.csv", "config.resolved.json"}) {
    EXPECT_TRUE(std::filesystem::exists(path("run") / f)) << f;
  }
  const auto resolved = nlohmann::json::parse(read_bytes(path("run") / "config.resolved.json"));
  EXPECT_EQ(resolved["train"]["noise_net"]["resolution"], 16);
  EXPECT_TRUE(resolved.contains("pathosyn_version"));
}

TEST_F(CliPipeline, ZeroEpochsAndBadConfig) {
  write_text(path("zero.json"), R"({"train": {"epochs": 0, "substrate_net": {"base_width": 4},
    "noise_net": {"base_width": 8, "time_embed_dim": 16, "attention_resolution": 8}}})");
  const auto zero = pathosyn_cli("train" + data() + " --config " + q(path("zero.json")) + " --out " + q(path("run0")));
  EXPECT_EQ(zero.code, 0) << zero.output;
  EXPECT_TRUE(std::filesystem::exists(path("run0") / "last.ckpt"));
  EXPECT_EQ(read_bytes(path("run0") / "metrics.csv"), std::string("step,epoch,lr,l_sub,l_diff,l_dev,l_syn,total\n"));

  write_text(path("typo.json"), R"({"train": {"learning_rat": 0.1}})");
  const auto typo = pathosyn_cli("train" + data() + " --config " + q(path("typo.json")) + " --out " + q(path("runx")));
  EXPECT_EQ(typo.code, 2);
  EXPECT_NE(typo.output.find("train.learning_rat"), std::string::npos) << typo.output;
}

TEST_F(CliPipeline, ResumeMatchesUninterrupted) {
  const std::string base = "train" + data() + " --config " + q(path("cfg.json")) + " --out " + q(path("resumed"));
  ASSERT_EQ(pathosyn_cli(base + " --max-steps 5").code, 0);
  const auto r = pathosyn_cli(base + " --resume " + q(path("resumed") / "last.ckpt"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(read_bytes(path("resumed") / "metrics.csv"), read_bytes(path("run") / "metrics.csv"));
  EXPECT_EQ(read_bytes(path("resumed") / "last.ckpt"), read_bytes(path("run") / "last.ckpt"));
}

TEST_F(CliPipeline, SynthesizeDeterministicAndDiverse) {
  const auto manifest = read_manifest(path("data"));
  const std::string subject = manifest.ids_in(Split::test).front();
  for (const char* out : {"s1", "s2"}) {
    const auto r = pathosyn_cli("synthesize" + data() + ckpt() + " --subject " + subject +
                                " --samples 1 --steps 4 --seed 7 --no-preview --out " + q(path(out)));
    ASSERT_EQ(r.code, 0) << r.output;
  }
  const std::string rhat = subject + ".s0.rhat.f32";
  EXPECT_EQ(read_bytes(path("s1") / rhat), read_bytes(path("s2") / rhat));

  const auto many = pathosyn_cli("synthesize" + data() + ckpt() + " --subject " + subject +
                                 " --samples 8 --sampler ancestral --out " + q(path("s8")));
  ASSERT_EQ(many.code, 0) << many.output;
  std::set<std::string> distinct;
  for (int k = 0; k < 8; ++k) distinct.insert(read_bytes(path("s8") / (subject + ".s" + std::to_string(k) + ".rhat.f32")));
  EXPECT_EQ(distinct.size(), 8u);
  EXPECT_TRUE(std::filesystem::exists(path("s8") / (subject + ".xsub.f32")));
  EXPECT_TRUE(std::filesystem::exists(path("s8") / (subject + ".s3.xhat.png")));
}

TEST_F(CliPipeline, SynthesizeRejectsEmptyMaskAndBadFlags) {
  const auto ds = read_dataset(path("data"));
  std::string healthy;
  for (const auto& r : ds.records) {
    if (r.mask.empty()) healthy = r.id;
  }
  ASSERT_FALSE(healthy.empty());
  const auto r = pathosyn_cli("synthesize" + data() + ckpt() + " --subject " + healthy + " --out " + q(path("sh")));
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.output.find("empty mask"), std::string::npos) << r.output;
  EXPECT_EQ(pathosyn_cli("synthesize" + data() + ckpt() + " --split test --steps 1000 --out " + q(path("sx"))).code, 2);
  EXPECT_EQ(pathosyn_cli("synthesize" + data() + ckpt() + " --subject nobody --out " + q(path("sx"))).code, 3);
}

TEST_F(CliPipeline, EvaluateReports) {
  ASSERT_EQ(pathosyn_cli("synthesize" + data() + ckpt() + " --split test --samples 2 --steps 4 --no-preview --out " +
                         q(path("st")))
                .code,
            0);
  for (const char* out : {"e1", "e2"}) {
    const auto r = pathosyn_cli("evaluate" + data() + " --synth " + q(path("st")) + " --bootstrap 100 --seed 3 --out " +
                                q(path(out) / "report.json"));
    ASSERT_EQ(r.code, 0) << r.output;
  }
  EXPECT_EQ(read_bytes(path("e1") / "report.json"), read_bytes(path("e2") / "report.json"));
  EXPECT_TRUE(std::filesystem::exists(path("e1") / "ecdf.csv"));
  EXPECT_TRUE(std::filesystem::exists(path("e1") / "roc.csv"));
  const auto report = nlohmann::json::parse(read_bytes(path("e1") / "report.json"));
  EXPECT_TRUE(report["metrics"].contains("discriminability_auc"));

  ASSERT_EQ(pathosyn_cli("synthesize" + data() + ckpt() + " --split train --steps 2 --no-preview --out " + q(path("leak")))
                .code,
            0);
  const auto leak = pathosyn_cli("evaluate" + data() + " --synth " + q(path("leak")) + " --out " + q(path("el") / "r.json"));
  EXPECT_EQ(leak.code, 3);
  EXPECT_NE(leak.output.find("leak"), std::string::npos) << leak.output;
  std::filesystem::create_directories(path("nothing"));
  EXPECT_EQ(pathosyn_cli("evaluate" + data() + " --synth " + q(path("nothing")) + " --out " + q(path("en") / "r.json")).code, 3);
}
