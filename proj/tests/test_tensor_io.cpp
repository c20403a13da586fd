#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "saedet/tensor_io.hpp"
#include "support.hpp"

using namespace saedet;
using saedet::testing::TempDir;

namespace {

std::vector<std::uint8_t> float_bytes(std::initializer_list<float> values) {
  std::vector<std::uint8_t> out;
  for (float f : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
  }
  return out;
}

TensorFormatIssue issue_of(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_tensor(bytes);
  } catch (const TensorFormatError& e) {
    return e.issue();
  }
  ADD_FAILURE() << "decode succeeded";
  return TensorFormatIssue::bad_magic;
}

}  // namespace

TEST(TensorIo, ZeroVectorIs26Bytes) {
  TempDir tmp;
  const auto path = tmp / "z.saet";
  write_tensor(Tensor2D::vector({0.0f}), path);
  const auto bytes = read_file_bytes(path);
  ASSERT_EQ(bytes.size(), 26u);
  EXPECT_EQ(bytes[9], 1);  // rank
  for (std::size_t i = 22; i < 26; ++i) EXPECT_EQ(bytes[i], 0);
}

TEST(TensorIo, OneByOneMatrixKeepsBothDims) {
  EXPECT_EQ(encode_tensor(Tensor2D(1, 1)).size(), 34u);
}

TEST(TensorIo, PayloadIsRowMajorLittleEndian) {
  const Tensor2D t(2, 2, {1, 2, 3, 4});
  const auto bytes = encode_tensor(t);
  ASSERT_EQ(bytes.size(), 14u + 16u + 16u);
  const auto expected = float_bytes({1, 2, 3, 4});
  EXPECT_TRUE(std::equal(expected.begin(), expected.end(), bytes.end() - 16));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SAET");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[8], 0);
  EXPECT_EQ(bytes[9], 2);
  // dims
  EXPECT_EQ(bytes[14], 2);
  EXPECT_EQ(bytes[22], 2);
}

TEST(TensorIo, FileRoundTrip) {
  TempDir tmp;
  const Tensor2D t(2, 2, {1, 2, 3, 4});
  write_tensor(t, tmp / "t.saet");
  const Tensor2D back = read_tensor(tmp / "t.saet");
  EXPECT_EQ(back, t);
  EXPECT_EQ(back.rank(), 2);
}

TEST(TensorIo, LargeSeededRoundTripIsBitIdentical) {
  TempDir tmp;
  Rng rng(7);
  const auto t = saedet::testing::random_tensor(rng, 64, 2304);
  write_tensor(t, tmp / "big.saet");
  const auto bytes = read_file_bytes(tmp / "big.saet");
  const Tensor2D back = read_tensor(tmp / "big.saet");
  EXPECT_EQ(encode_tensor(back), bytes);
  EXPECT_EQ(0, std::memcmp(back.data().data(), t.data().data(), t.size() * 4));
}

TEST(TensorIo, RankOneSurvives) {
  const auto v = Tensor2D::vector({1.5f, -2.0f, 3.25f});
  const auto back = decode_tensor(encode_tensor(v));
  EXPECT_EQ(back.rank(), 1);
  EXPECT_EQ(back, v);
}

TEST(TensorIo, BadMagic) {
  auto bytes = encode_tensor(Tensor2D(2, 2, {1, 2, 3, 4}));
  std::memcpy(bytes.data(), "XXXX", 4);
  try {
    decode_tensor(bytes);
    FAIL();
  } catch (const TensorFormatError& e) {
    EXPECT_EQ(e.issue(), TensorFormatIssue::bad_magic);
    EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos);
    EXPECT_EQ(e.code(), "E_PARSE");
  }
}

TEST(TensorIo, TruncatedPayload) {
  auto bytes = encode_tensor(Tensor2D(2, 2, {1, 2, 3, 4}));
  bytes.pop_back();
  EXPECT_EQ(issue_of(bytes), TensorFormatIssue::truncated);
}

TEST(TensorIo, TruncatedHeader) {
  auto bytes = encode_tensor(Tensor2D(2, 2, {1, 2, 3, 4}));
  bytes.resize(12);
  EXPECT_EQ(issue_of(bytes), TensorFormatIssue::truncated);
}

TEST(TensorIo, TrailingBytes) {
  auto bytes = encode_tensor(Tensor2D(2, 2, {1, 2, 3, 4}));
  bytes.push_back(0);
  EXPECT_EQ(issue_of(bytes), TensorFormatIssue::trailing_bytes);
}

TEST(TensorIo, DistinctIssuesForVersionDtypeRank) {
  const auto good = encode_tensor(Tensor2D(2, 2, {1, 2, 3, 4}));
  auto v = good;
  v[4] = 2;
  EXPECT_EQ(issue_of(v), TensorFormatIssue::bad_version);
  auto d = good;
  d[8] = 1;
  EXPECT_EQ(issue_of(d), TensorFormatIssue::bad_dtype);
  auto r = good;
  r[9] = 3;
  EXPECT_EQ(issue_of(r), TensorFormatIssue::bad_rank);
}

TEST(TensorIo, NonFinitePayloadIsValidationError) {
  auto bytes = encode_tensor(Tensor2D(1, 2, {1, 2}));
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(bytes.data() + bytes.size() - 4, &nan, 4);
  EXPECT_THROW(decode_tensor(bytes), ValidationError);
  const float inf = std::numeric_limits<float>::infinity();
  std::memcpy(bytes.data() + bytes.size() - 4, &inf, 4);
  EXPECT_THROW(decode_tensor(bytes), ValidationError);
}

TEST(TensorIo, ConstructorChecks) {
  EXPECT_THROW(Tensor2D(2, 2, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor2D(1, 1, {std::nanf("")}), ValidationError);
}

TEST(TensorIo, MissingFileIsIoError) {
  TempDir tmp;
  EXPECT_THROW(read_tensor(tmp / "missing.saet"), IoError);
}

// Every single-byte change anywhere in the header (fixed part or dims) is rejected.
TEST(TensorIoProperty, AnySingleHeaderByteCorruptionIsRejected) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t rows = 1 + rng.below(5), cols = 1 + rng.below(7);
    const auto good = encode_tensor(saedet::testing::random_tensor(rng, rows, cols));
    const std::size_t header = kSaetFixedHeaderBytes + 16;
    for (std::size_t i = 0; i < header; ++i) {
      for (int delta = 1; delta < 256; delta += 17) {
        auto bad = good;
        bad[i] = static_cast<std::uint8_t>(bad[i] ^ delta);
        EXPECT_THROW(decode_tensor(bad), ParseError) << "byte " << i << " xor " << delta;
      }
    }
  }
}

TEST(TensorIoProperty, RandomTensorsRoundTripBitExactly) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const bool vec = rng.bernoulli(0.2);
    const std::size_t rows = vec ? 1 : rng.below(9), cols = rng.below(9);
    std::vector<float> data(rows * cols);
    for (auto& x : data) {
      std::uint32_t bits = static_cast<std::uint32_t>(rng.next());
      std::memcpy(&x, &bits, 4);
      if (!std::isfinite(x)) x = 0.0f;
    }
    const Tensor2D t = vec ? Tensor2D::vector(data) : Tensor2D(rows, cols, data);
    const auto bytes = encode_tensor(t);
    const Tensor2D back = decode_tensor(bytes);
    EXPECT_EQ(back.rank(), t.rank());
    EXPECT_EQ(back.rows(), t.rows());
    EXPECT_EQ(back.cols(), t.cols());
    EXPECT_EQ(encode_tensor(back), bytes);
  }
}

TEST(TensorMeta, SidecarRoundTrip) {
  TempDir tmp;
  const auto path = tmp / "doc.L3.saet";
  write_tensor(Tensor2D(1, 2, {1, 2}), path);
  TensorMeta m{3, "toy", 2, {{"tokenizer", "ws"}}};
  write_tensor_meta(m, path);
  EXPECT_EQ(meta_path_for(path).filename(), "doc.L3.meta.json");
  const auto back = read_tensor_meta(path);
  EXPECT_EQ(back.layer, 3);
  EXPECT_EQ(back.model, "toy");
  EXPECT_EQ(back.d_model, 2u);
  EXPECT_EQ(back.extra["tokenizer"], "ws");
}

TEST(TensorMeta, MissingKeyIsParseError) {
  EXPECT_THROW(tensor_meta_from_json({{"layer", 1}, {"model", "m"}}, "x"), ParseError);
  EXPECT_THROW(tensor_meta_from_json({{"layer", "1"}, {"model", "m"}, {"d_model", 2}}, "x"), ParseError);
  EXPECT_THROW(tensor_meta_from_json(nlohmann::json::array(), "x"), ParseError);
}

TEST(TensorMeta, MalformedJsonFileIsParseError) {
  TempDir tmp;
  write_file_atomic(tmp / "a.meta.json", std::string("{not json"));
  EXPECT_THROW(read_tensor_meta(tmp / "a.saet"), ParseError);
}
