// Copyright (c) 2026, The idlike Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <chrono>
#include <cmath>
#include <random>
#include <thread>
#include <vector>

#include "catch_amalgamated.hpp"

#include "oracles.hpp"

using Catch::Approx;
using namespace idlike;

namespace {

Image random_gray(std::mt19937_64& rng, std::size_t side) {
  Image img(side, side, 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& p : img.pixels) p = u(rng);
  return img;
}

TokenSequence random_tokens(std::mt19937_64& rng, std::size_t n, std::size_t width, double scale = 0.5) {
  std::normal_distribution<double> g(0.0, scale);
  TokenSequence t;
  t.entries.assign(n, std::vector<double>(width));
  for (auto& e : t.entries)
    for (double& v : e) v = g(rng);
  return t;
}

// Independent re-evaluation of the toy image path for an 8x8 gray input:
// regenerate the Gaussian parameters from the seed, project 2p - 1, add the
// bias, tanh, normalize.
std::vector<double> toy_image_forward(std::uint64_t seed, std::size_t dim, const Image& img8) {
  const std::size_t pixels = 64;
  std::seed_seq sseq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x1a9eu};
  std::mt19937_64 rng(sseq);
  std::normal_distribution<double> dist(0.0, 1.0 / 8.0);
  std::vector<double> w(dim * pixels);
  for (double& x : w) x = dist(rng);
  std::normal_distribution<double> skip(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  for (std::size_t i = 0; i < dim * dim; ++i) (void)skip(rng);  // text projection
  std::normal_distribution<double> bias(0.0, 0.1);
  std::vector<double> b(dim);
  for (double& x : b) x = bias(rng);
  std::vector<double> h(dim);
  double sq = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    double acc = b[i];
    for (std::size_t p = 0; p < pixels; ++p) acc += w[i * pixels + p] * (2.0 * img8.pixels[p] - 1.0);
    h[i] = std::tanh(acc);
    sq += h[i] * h[i];
  }
  for (double& x : h) x /= std::sqrt(sq);
  return h;
}

// Backend without text gradients.
class FrozenOnly final : public EncoderBackend {
 public:
  FrozenOnly() : inner_(3, 16) { info_ = {"frozen-only", 16, 16, false}; }
  const BackendInfo& info() const noexcept override { return info_; }
  Embedding encode_image(const ImageRef& img) const override { return inner_.encode_image(img); }
  Embedding encode_text(const TokenSequence& toks) const override { return inner_.encode_text(toks); }
  std::vector<double> token_embedding(std::string_view w) const override { return inner_.token_embedding(w); }
  std::uint64_t parameter_checksum() const override { return inner_.parameter_checksum(); }

 private:
  ToyBackend inner_;
  BackendInfo info_;
};

}  // namespace

TEST_CASE("encode_image", "[encoder]") {
  const ToyBackend toy(5, 48);
  std::mt19937_64 rng(8);
  const Image img = random_gray(rng, 8);
  const ImageRef ref = make_image_ref(img);

  SECTION("deterministic and unit norm") {
    const Embedding a = toy.encode_image(ref);
    const Embedding b = toy.encode_image(ref);
    CHECK(a == b);
    CHECK(std::sqrt(oracle::compensated_sum_sq(a.values())) == Approx(1.0).margin(1e-6));
    Image gray(8, 8, 1);
    for (double& p : gray.pixels) p = 0.5;
    CHECK(toy.encode_image(make_image_ref(gray)).dim() == 48);
    for (int i = 0; i < 20; ++i) {
      const Embedding e = toy.encode_image(make_image_ref(random_gray(rng, 5 + static_cast<std::size_t>(i))));
      CHECK(std::sqrt(oracle::compensated_sum_sq(e.values())) == Approx(1.0).margin(1e-6));
    }
  }
  SECTION("matches a direct forward re-evaluation") {
    const auto ref_values = toy_image_forward(5, 48, img);
    const Embedding e = toy.encode_image(ref);
    for (std::size_t i = 0; i < ref_values.size(); ++i) CHECK(e[i] == Approx(ref_values[i]).margin(1e-12));
  }
  SECTION("one-pixel change lowers the cosine to the oracle's value") {
    Image other = img;
    other.at(3, 4) = 1.0 - other.at(3, 4);
    const double got = cosine_similarity(toy.encode_image(ref), toy.encode_image(make_image_ref(other)));
    const double want = oracle::dot(toy_image_forward(5, 48, img), toy_image_forward(5, 48, other));
    CHECK(got < 1.0);
    CHECK(got == Approx(want).margin(1e-12));
  }
  SECTION("crop views encode the cropped pixels") {
    Image big = random_gray(rng, 32);
    ImageRef view{std::make_shared<const Image>(big), CropBox{8, 4, 16, 16}};
    Image cut(16, 16, 1);
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) cut.at(y, x) = big.at(4 + y, 8 + x);
    const Embedding a = toy.encode_image(view);
    const Embedding b = toy.encode_image(make_image_ref(cut));
    for (std::size_t i = 0; i < a.dim(); ++i) CHECK(a[i] == Approx(b[i]).margin(1e-12));
  }
  SECTION("invalid images") {
    const ImageRef out_of_bounds{std::make_shared<const Image>(random_gray(rng, 32)), CropBox{30, 0, 8, 8}};
    CHECK_THROWS_MATCHES(toy.encode_image(out_of_bounds), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) { return e.code() == ErrorCode::InvalidImage; }));
    CHECK_THROWS_AS(toy.encode_image(ImageRef{}), Error);
    Image hot(4, 4, 1);
    hot.pixels[0] = 1.5;
    CHECK_THROWS_AS(toy.encode_image(make_image_ref(hot)), Error);
  }
}

TEST_CASE("encode_text", "[encoder]") {
  const ToyBackend toy(7, 64);

  SECTION("all-zeros sequence of length 16 is a fixed unit vector") {
    TokenSequence zeros;
    zeros.entries.assign(16, std::vector<double>(64, 0.0));
    const Embedding a = toy.encode_text(zeros);
    const Embedding b = ToyBackend(7, 64).encode_text(zeros);
    CHECK(a == b);
    CHECK(std::sqrt(oracle::compensated_sum_sq(a.values())) == Approx(1.0).margin(1e-6));
  }
  SECTION("unit norm for random sequences") {
    std::mt19937_64 rng(3);
    for (std::size_t n = 1; n <= 20; ++n) {
      const Embedding e = toy.encode_text(random_tokens(rng, n, 64));
      CHECK(std::sqrt(oracle::compensated_sum_sq(e.values())) == Approx(1.0).margin(1e-6));
    }
  }
  SECTION("forward of the VJP path equals encode_text") {
    std::mt19937_64 rng(4);
    const TokenSequence t = random_tokens(rng, 5, 64);
    CHECK(toy.encode_text_with_vjp(t).embedding == toy.encode_text(t));
  }
  SECTION("malformed sequences") {
    CHECK_THROWS_AS(toy.encode_text(TokenSequence{}), Error);
    TokenSequence narrow;
    narrow.entries.assign(2, std::vector<double>(63, 0.0));
    CHECK_THROWS_AS(toy.encode_text(narrow), Error);
  }
}

TEST_CASE("text Jacobian matches central differences over 100 probes", "[encoder]") {
  const ToyBackend toy(7, 64);
  std::mt19937_64 rng(77);
  const double h = 1e-4;
  double worst = 0.0;
  for (int probe = 0; probe < 100; ++probe) {
    const std::size_t n = 1 + static_cast<std::size_t>(probe % 6);
    TokenSequence toks = random_tokens(rng, n, 64);
    const std::size_t entry = static_cast<std::size_t>(rng() % n);
    const std::size_t out_i = static_cast<std::size_t>(rng() % 64);
    const std::size_t in_j = static_cast<std::size_t>(rng() % 64);
    const std::vector<double> jac = text_jacobian(toy, toks, entry);
    const double analytic = jac[out_i * 64 + in_j];
    const double x0 = toks.entries[entry][in_j];
    toks.entries[entry][in_j] = x0 + h;
    const double up = toy.encode_text(toks)[out_i];
    toks.entries[entry][in_j] = x0 - h;
    const double down = toy.encode_text(toks)[out_i];
    worst = std::max(worst, oracle::rel_err(analytic, (up - down) / (2.0 * h), 1e-4));
  }
  INFO("max relative error " << worst);
  CHECK(worst < 1e-3);
}

TEST_CASE("zero_shot_tokens", "[encoder]") {
  const ToyBackend toy(1, 16);
  const TokenSequence dog = zero_shot_tokens(toy, "dog", kDefaultTemplate);
  REQUIRE(dog.size() == 5);
  REQUIRE(dog.class_slot.has_value());
  CHECK(*dog.class_slot == 4);
  CHECK(dog == zero_shot_tokens(toy, "dog", kDefaultTemplate));
  CHECK(dog.entries[4] == toy.token_embedding("dog"));

  const TokenSequence wolf = zero_shot_tokens(toy, "wolf", kDefaultTemplate);
  REQUIRE(wolf.size() == dog.size());
  for (std::size_t i = 0; i < dog.size(); ++i) {
    if (i == *dog.class_slot) CHECK(wolf.entries[i] != dog.entries[i]);
    else CHECK(wolf.entries[i] == dog.entries[i]);
  }

  const TokenSequence mid = zero_shot_tokens(toy, "cat", "{} in the wild");
  CHECK(*mid.class_slot == 0);
  CHECK(mid.size() == 4);

  CHECK_THROWS_AS(zero_shot_tokens(toy, "x", "no placeholder here"), Error);
  CHECK_THROWS_AS(zero_shot_tokens(toy, "x", "{} and {}"), Error);
  CHECK_THROWS_AS(zero_shot_tokens(toy, "x", "a photo of a{}"), Error);
}

TEST_CASE("toy_backend seeding", "[encoder]") {
  std::mt19937_64 rng(21);
  const Image probe_img = random_gray(rng, 8);
  const TokenSequence probe_txt = random_tokens(rng, 3, 64);
  const auto a = toy_backend(7, 64);
  const auto b = toy_backend(7, 64);
  const auto c = toy_backend(8, 64);

  CHECK(a->parameter_checksum() == b->parameter_checksum());
  CHECK(a->encode_image(make_image_ref(probe_img)) == b->encode_image(make_image_ref(probe_img)));
  CHECK(a->encode_text(probe_txt) == b->encode_text(probe_txt));
  CHECK(a->token_embedding("zebra") == b->token_embedding("zebra"));

  CHECK(a->parameter_checksum() != c->parameter_checksum());
  CHECK(a->encode_image(make_image_ref(probe_img)) != c->encode_image(make_image_ref(probe_img)));
  CHECK(a->encode_text(probe_txt) != c->encode_text(probe_txt));

  SECTION("explicit context width") {
    const ToyBackend narrow(7, 32, 12);
    CHECK(narrow.text_context_dim() == 12);
    CHECK(narrow.token_embedding("a").size() == 12);
    CHECK(narrow.encode_text(random_tokens(rng, 2, 12)).dim() == 32);
  }
  CHECK_THROWS_AS(ToyBackend(1, 4), Error);
}

TEST_CASE("backends without text gradients", "[encoder]") {
  const FrozenOnly frozen;
  std::mt19937_64 rng(2);
  try {
    frozen.encode_text_with_vjp(random_tokens(rng, 2, 16));
    FAIL("expected GradientUnsupported");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GradientUnsupported);
  }
}

TEST_CASE("adapter round trip against an in-process server", "[encoder][adapter]") {
  const ToyBackend toy(4, 24);
  httplib::Server server;
  install_adapter_routes(server, toy);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  {
    const AdapterBackend remote("http://127.0.0.1:" + std::to_string(port));
    CHECK(remote.dim() == 24);
    CHECK(remote.text_context_dim() == 24);
    CHECK(remote.info().differentiable_text);
    CHECK(remote.parameter_checksum() == toy.parameter_checksum());

    std::mt19937_64 rng(6);
    const Image img = random_gray(rng, 12);
    const Embedding local_img = toy.encode_image(make_image_ref(img));
    const Embedding remote_img = remote.encode_image(make_image_ref(img));
    for (std::size_t i = 0; i < 24; ++i) CHECK(remote_img[i] == Approx(local_img[i]).margin(1e-6));

    const ImageRef view{std::make_shared<const Image>(img), CropBox{2, 3, 7, 5}};
    const Embedding local_view = toy.encode_image(view);
    const Embedding remote_view = remote.encode_image(view);
    for (std::size_t i = 0; i < 24; ++i) CHECK(remote_view[i] == Approx(local_view[i]).margin(1e-6));

    CHECK(remote.token_embedding("owl") == toy.token_embedding("owl"));
    const TokenSequence toks = zero_shot_tokens(remote, "owl", kDefaultTemplate);
    const Embedding local_txt = toy.encode_text(toks);
    const auto fwd = remote.encode_text_with_vjp(toks);
    for (std::size_t i = 0; i < 24; ++i) CHECK(fwd.embedding[i] == Approx(local_txt[i]).margin(1e-6));

    std::vector<double> cot(24);
    for (double& v : cot) v = std::normal_distribution<double>(0.0, 1.0)(rng);
    const TokenGrad g_remote = fwd.vjp(cot);
    const TokenGrad g_local = toy.encode_text_with_vjp(toks).vjp(cot);
    REQUIRE(g_remote.size() == g_local.size());
    for (std::size_t t = 0; t < g_local.size(); ++t)
      for (std::size_t j = 0; j < g_local[t].size(); ++j) CHECK(g_remote[t][j] == Approx(g_local[t][j]).margin(1e-12));

    TokenSequence bad;
    bad.entries.assign(1, std::vector<double>(5, 0.0));
    CHECK_THROWS_AS(remote.encode_text(bad), Error);
    try {
      remote.encode_text(TokenSequence{{std::vector<double>(24, 0.0)}, 3});
      FAIL("expected InvalidConfig from the server");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidConfig);
    }
  }
  server.stop();
  worker.join();

  try {
    AdapterBackend dead("http://127.0.0.1:" + std::to_string(port));
    FAIL("expected BackendUnavailable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BackendUnavailable);
  }
}
