#include <gtest/gtest.h>

#include <fstream>

#include "nn_fixtures.hpp"
#include "pathosyn/checkpoint.hpp"
#include "test_support.hpp"

using namespace pathosyn;
using pathosyn::testing::read_bytes;
using pathosyn::testing::TempDir;
using pathosyn::testing::tiny_config;

namespace {

struct Fixture {
  std::vector<SubjectRecord> records = generate_corpus(ToyParams::for_resolution(16), 4, 3);
  std::vector<const SubjectRecord*> batch;
  Fixture() {
    for (const auto& r : records) batch.push_back(&r);
  }
};

bool same_parameters(const TrainingState& a, const TrainingState& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!torch::equal(pa[i], pb[i])) return false;
  }
  return true;
}

}  // namespace

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  TempDir dir("pathosyn-ckpt");
  Fixture fx;
  auto state = make_training_state(tiny_config(16));
  (void)train_step(state, fx.batch, 10);
  (void)train_step(state, fx.batch, 10);
  save_checkpoint(state, dir / "a.ckpt");
  const auto loaded = load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(loaded.step, 2);
  EXPECT_TRUE(same_parameters(state, loaded));
  save_checkpoint(loaded, dir / "b.ckpt");
  EXPECT_EQ(read_bytes(dir / "a.ckpt"), read_bytes(dir / "b.ckpt"));
}

TEST(Checkpoint, RejectsWrongVersion) {
  TempDir dir("pathosyn-ckptv");
  save_checkpoint(make_training_state(tiny_config(16)), dir / "a.ckpt");
  std::string bytes = read_bytes(dir / "a.ckpt");
  bytes[8] = static_cast<char>(kCheckpointFormatVersion + 1);
  std::ofstream(dir / "b.ckpt", std::ios::binary) << bytes;
  try {
    (void)load_checkpoint(dir / "b.ckpt");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos) << e.what();
  }
  std::ofstream(dir / "c.ckpt", std::ios::binary) << "not a checkpoint";
  EXPECT_THROW((void)load_checkpoint(dir / "c.ckpt"), DataError);
  EXPECT_THROW((void)load_checkpoint(dir / "missing.ckpt"), DataError);
  bytes[8] = static_cast<char>(kCheckpointFormatVersion);
  std::ofstream(dir / "d.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 100);
  EXPECT_THROW((void)load_checkpoint(dir / "d.ckpt"), DataError);
}

TEST(Checkpoint, ConfigDriftDetected) {
  TempDir dir("pathosyn-ckptd");
  const auto cfg = tiny_config(16);
  save_checkpoint(make_training_state(cfg), dir / "a.ckpt");
  EXPECT_NO_THROW((void)load_checkpoint(dir / "a.ckpt", &cfg));
  auto drifted = cfg;
  drifted.loss_weights.lambda_syn = 0.25;
  EXPECT_THROW((void)load_checkpoint(dir / "a.ckpt", &drifted), ConfigError);
  EXPECT_NE(config_digest(cfg), config_digest(drifted));
}

TEST(Checkpoint, ResumeMatchesUninterrupted) {
  TempDir dir("pathosyn-ckptr");
  Fixture fx;
  auto straight = make_training_state(tiny_config(16));
  (void)train_step(straight, fx.batch, 5);
  save_checkpoint(straight, dir / "mid.ckpt");
  const auto expected = train_step(straight, fx.batch, 5);

  auto resumed = load_checkpoint(dir / "mid.ckpt");
  const auto got = train_step(resumed, fx.batch, 5);
  EXPECT_EQ(got, expected);
  EXPECT_TRUE(same_parameters(straight, resumed));
}
