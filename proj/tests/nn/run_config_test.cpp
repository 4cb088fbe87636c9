#include <gtest/gtest.h>

#include "pathosyn/run_config.hpp"
#include "test_support.hpp"

using namespace pathosyn;
using nlohmann::json;
using pathosyn::testing::TempDir;
using pathosyn::testing::write_text;

namespace {

std::string error_of(const json& j) {
  try {
    (void)run_config_from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(RunConfig, EmptyObjectGivesDefaults) {
  const auto c = run_config_from_json(json::object());
  EXPECT_EQ(c.train.epochs, 300);
  EXPECT_EQ(c.train.batch_size, 16);
  EXPECT_EQ(c.train.learning_rate, 1e-4);
  EXPECT_EQ(c.train.schedule.steps, 1000);
  EXPECT_EQ(c.train.noise_net.attention_resolution, 16);
  EXPECT_EQ(c.sampler.kind, SamplerKind::ddim);
  EXPECT_EQ(c.sampler.ddim_steps, 50);
  EXPECT_EQ(c.toy.resolution, 64);
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c;
  c.train.epochs = 7;
  c.train.precision = Precision::f64;
  c.train.loss_weights.lambda_ring = 0.25;
  c.train.schedule.sigma_kind = SigmaKind::posterior;
  c.train.noise_net.norm = NormKind::none;
  c.sampler.kind = SamplerKind::ancestral;
  c.toy = ToyParams::for_resolution(32);
  c.toy.amplitude = {0.1, 0.2};
  const json j = to_json(c);
  EXPECT_EQ(to_json(run_config_from_json(j)), j);
}

TEST(RunConfig, UnknownKeysNamedWithPath) {
  EXPECT_NE(error_of({{"train", {{"epochz", 3}}}}).find("train.epochz"), std::string::npos);
  EXPECT_NE(error_of({{"train", {{"noise_net", {{"widht", 3}}}}}}).find("train.noise_net.widht"), std::string::npos);
  EXPECT_NE(error_of({{"extra", 1}}).find("extra"), std::string::npos);
  EXPECT_NE(error_of({{"sampler", {{"kind", "euler"}}}}), "");
  EXPECT_NE(error_of({{"train", {{"epochs", "many"}}}}).find("train.epochs"), std::string::npos);
  EXPECT_NE(error_of({{"train", {{"batch_size", 0}}}}), "");
  EXPECT_NE(error_of({{"toy", {{"amplitude", 0.3}}}}).find("toy.amplitude"), std::string::npos);
}

TEST(RunConfig, FileLoading) {
  TempDir dir("pathosyn-cfg");
  write_text(dir / "ok.json", R"({"train": {"epochs": 2}, "toy": {"resolution": 32}})");
  const auto c = load_run_config(dir / "ok.json");
  EXPECT_EQ(c.train.epochs, 2);
  EXPECT_EQ(c.toy.resolution, 32);
  EXPECT_EQ(c.toy.lesion_radius.lo, ToyParams::for_resolution(32).lesion_radius.lo);
  write_text(dir / "bad.json", "{ not json");
  EXPECT_THROW((void)load_run_config(dir / "bad.json"), ConfigError);
  EXPECT_THROW((void)load_run_config(dir / "missing.json"), ConfigError);
}
