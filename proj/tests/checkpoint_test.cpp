#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "fedsim/checkpoint.hpp"

using namespace fedsim;

namespace {

ParamVector sample() {
  std::mt19937_64 gen(42);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  ShapeManifest m = {{"hidden.weight", {4, 3}}, {"hidden.bias", {4}}, {"out", {2, 4}}};
  std::vector<double> v(manifest_size(m));
  for (auto& x : v) x = u(gen);
  v[0] = std::numeric_limits<double>::denorm_min();
  v[1] = -0.0;
  v[2] = std::numeric_limits<double>::max();
  return ParamVector(m, v);
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto p = sample();
  const auto back = decode_checkpoint(encode_checkpoint(p));
  ASSERT_EQ(back.manifest(), p.manifest());
  ASSERT_EQ(back.size(), p.size());
  EXPECT_EQ(std::memcmp(back.values().data(), p.values().data(), p.size() * sizeof(double)), 0);
}

TEST(Checkpoint, LayoutIsLengthPrefixedJsonThenLittleEndianDoubles) {
  const auto bytes = encode_checkpoint(ParamVector(ShapeManifest{{"w", {1}}}, {1.0}));
  const std::string header = R"({"count":1,"dtype":"f64","segments":[{"dims":[1],"name":"w"}]})";
  ASSERT_EQ(bytes.size(), 8 + header.size() + 8);
  EXPECT_EQ(static_cast<unsigned char>(bytes[0]), header.size());
  for (int i = 1; i < 8; ++i) EXPECT_EQ(bytes[i], 0);
  EXPECT_EQ(bytes.substr(8, header.size()), header);
  // 1.0 == 0x3FF0000000000000, little-endian
  const std::string payload = bytes.substr(8 + header.size());
  const unsigned char expect[8] = {0, 0, 0, 0, 0, 0, 0xF0, 0x3F};
  for (int i = 0; i < 8; ++i) EXPECT_EQ(static_cast<unsigned char>(payload[i]), expect[i]);
}

TEST(Checkpoint, RejectsMalformedInput) {
  const auto good = encode_checkpoint(sample());
  EXPECT_THROW(decode_checkpoint(good.substr(0, 4)), ValidationError);
  EXPECT_THROW(decode_checkpoint(good.substr(0, good.size() - 3)), ValidationError);
  EXPECT_THROW(decode_checkpoint(good + "x"), ValidationError);
  std::string bad_header = good;
  bad_header[8] = '!';
  EXPECT_THROW(decode_checkpoint(bad_header), ValidationError);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "fedsim_ckpt_test";
  std::filesystem::remove_all(dir);
  const auto path = dir / "model.ckpt";
  save_checkpoint(path, sample());
  EXPECT_FALSE(std::filesystem::exists(dir / "model.ckpt.tmp"));
  EXPECT_EQ(load_checkpoint(path), sample());
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), IoError);
  std::filesystem::remove_all(dir);
}
