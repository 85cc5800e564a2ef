#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "fedishc/datagen.hpp"
#include "fedishc/wire.hpp"

namespace fedishc {
namespace {

// Random upload with arbitrary (not sample-derived) doubles, including
// awkward values: negative zero, subnormals, huge magnitudes.
ClientUpload random_upload(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> dim(1, 5), reps(1, 4);
  std::uniform_real_distribution<double> u(-10, 10);
  std::uniform_int_distribution<int> kind(0, 9);
  auto value = [&] {
    switch (kind(rng)) {
      case 0: return -0.0;
      case 1: return 4.9e-320;
      case 2: return u(rng) * 1e300;
      case 3: return u(rng) * 1e-300;
      default: return u(rng);
    }
  };
  const std::size_t d = dim(rng);
  ClientUpload up;
  up.client_id = "client" + std::to_string(rng() % 1000);
  up.n_k = 2 + rng() % 100000;
  up.variable_ids = variable_names(d);
  auto table = [&] {
    CumulantTable t(up.variable_ids);
    for (std::size_t i = 0; i < d; ++i) {
      t.set_c3(i, value());
      for (std::size_t j = 0; j < d; ++j)
        if (i != j) t.set_c21(i, j, value());
    }
    return t;
  };
  up.tensor.seed = rng();
  up.tensor.base = table();
  const int b = reps(rng);
  for (int k = 0; k < b; ++k) up.tensor.replicates.push_back(table());
  up.covariance = RealGrid(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) up.covariance(i, j) = value();
  return up;
}

bool bit_equal(const ClientUpload& a, const ClientUpload& b) {
  auto same = [](const std::vector<double>& x, const std::vector<double>& y) {
    return x.size() == y.size() && std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) == 0;
  };
  auto same_table = [&](const CumulantTable& x, const CumulantTable& y) {
    return x.variable_ids() == y.variable_ids() && same(x.c3_values(), y.c3_values()) &&
           same(x.c21_grid().data(), y.c21_grid().data());
  };
  if (a.client_id != b.client_id || a.n_k != b.n_k || a.variable_ids != b.variable_ids) return false;
  if (a.tensor.seed != b.tensor.seed || !same_table(a.tensor.base, b.tensor.base)) return false;
  if (a.tensor.count() != b.tensor.count()) return false;
  for (std::size_t k = 0; k < a.tensor.count(); ++k)
    if (!same_table(a.tensor.replicates[k], b.tensor.replicates[k])) return false;
  return same(a.covariance.data(), b.covariance.data());
}

TEST(Wire, RoundTripIsBitExact) {
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 300; ++k) {
    const auto up = random_upload(rng);
    const auto back = decode_upload(encode_upload(up));
    ASSERT_TRUE(bit_equal(up, back)) << "upload " << k;
  }
}

TEST(Wire, RoundTripOfRealUpload) {
  const auto s = sample_lingam(random_dag(3, 0.8, {}, 1), NoiseSpec::uniform_spec(3, NoiseFamily::exponential), 500, 2);
  const auto up = make_upload({"client1", s}, 3, 4);
  EXPECT_EQ(decode_upload(encode_upload(up)), up);
}

TEST(Wire, Framing) {
  std::mt19937_64 rng(1);
  const auto bytes = encode_upload(random_upload(rng));
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FISH");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5], '{');
}

TEST(Wire, FlippedVersionByte) {
  std::mt19937_64 rng(1);
  auto bytes = encode_upload(random_upload(rng));
  bytes[4] ^= 0xff;
  EXPECT_THROW(decode_upload(bytes), VersionMismatch);
}

TEST(Wire, EmptyAndShortPayloads) {
  EXPECT_THROW(decode_upload(Bytes{}), TruncatedPayload);
  EXPECT_THROW(decode_upload(Bytes{'F', 'I', 'S'}), TruncatedPayload);
  EXPECT_THROW(decode_upload(Bytes{'F', 'I', 'S', 'H', 1, 0}), TruncatedPayload);
}

TEST(Wire, CorruptedBodyFailsChecksum) {
  std::mt19937_64 rng(3);
  auto bytes = encode_upload(random_upload(rng));
  bytes[10] ^= 0x01;
  EXPECT_THROW(decode_upload(bytes), ChecksumMismatch);
  auto cut = encode_upload(random_upload(rng));
  cut.resize(cut.size() / 2);
  EXPECT_THROW(decode_upload(cut), ChecksumMismatch);
}

TEST(Wire, BadMagic) {
  std::mt19937_64 rng(3);
  auto bytes = encode_upload(random_upload(rng));
  bytes[0] = 'X';
  EXPECT_THROW(decode_upload(bytes), DecodeError);
}

TEST(Wire, MirrorViolationRejected) {
  std::mt19937_64 rng(5);
  auto up = random_upload(rng);
  while (up.variable_ids.size() < 2) up = random_upload(rng);
  auto j = upload_to_json(up);
  j["base"]["c12"][1][0] = 12345.0;  // c21[0][1] no longer mirrored
  const std::string body = j.dump();
  Bytes bytes{'F', 'I', 'S', 'H', 1};
  bytes.insert(bytes.end(), body.begin(), body.end());
  wire::put_u32_be(bytes, wire::crc32_of({reinterpret_cast<const std::uint8_t*>(body.data()), body.size()}));
  EXPECT_THROW(decode_upload(bytes), DecodeError);
}

TEST(Wire, NonFiniteRejectedOnEncode) {
  std::mt19937_64 rng(5);
  auto up = random_upload(rng);
  up.tensor.base.set_c3(0, std::numeric_limits<double>::infinity());
  EXPECT_THROW(encode_upload(up), InvalidArgument);
}

TEST(CommunicationCost, ReportsFormulaAndBytes) {
  const auto s = sample_lingam(random_dag(3, 0.8, {}, 1), NoiseSpec::uniform_spec(3, NoiseFamily::exponential), 500, 2);
  const auto one = communication_cost(make_upload({"c", s}, 1, 4));
  EXPECT_EQ(one.scalars, 16u);
  EXPECT_GE(one.encoded_bytes, 8 * one.scalars);
  const auto s4 = sample_lingam(random_dag(4, 0.8, {}, 1), NoiseSpec::uniform_spec(4, NoiseFamily::exponential), 500, 2);
  const auto many = communication_cost(make_upload({"c", s4}, 30, 4));
  EXPECT_EQ(many.scalars, 841u);
  EXPECT_EQ(many.d_k, 4u);
  EXPECT_GE(many.encoded_bytes, 8 * many.scalars);
}

}  // namespace
}  // namespace fedishc
