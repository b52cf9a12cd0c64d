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

#ifndef IDLIKE_ADAPTER_HPP_
#define IDLIKE_ADAPTER_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "idlike/embedcore.hpp"
#include "idlike/encoder.hpp"
#include "idlike/errors.hpp"
#include "idlike/image.hpp"

/*
 * Out-of-process encoder protocol. Every call is one POST of a JSON object
 * {"kind": ..., "payload": {...}} to <endpoint>/encode:
 *
 *   info      {}                                  -> {name, dim, text_context_dim, differentiable_text, checksum}
 *   image     {height, width, channels, pixels}   -> {embedding}
 *   text      {entries, class_slot?}              -> {embedding}
 *   text_vjp  {entries, class_slot?, cotangent}   -> {token_grad}
 *   token     {word}                              -> {embedding}   (context-width row)
 *
 * Embeddings travel as float32-rounded numbers. Errors come back as
 * {"error": code-name, "message": text} with HTTP status 400.
 */
namespace idlike {

namespace adapter_detail {

using json = nlohmann::json;

inline std::vector<double> as_float32(std::span<const double> v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (double x : v) out.push_back(static_cast<double>(static_cast<float>(x)));
  return out;
}

inline json tokens_json(const TokenSequence& toks) {
  json j;
  j["entries"] = toks.entries;
  if (toks.class_slot) j["class_slot"] = *toks.class_slot;
  return j;
}

inline TokenSequence tokens_from_json(const json& j) {
  TokenSequence toks;
  toks.entries = j.at("entries").get<std::vector<std::vector<double>>>();
  if (j.contains("class_slot")) toks.class_slot = j.at("class_slot").get<std::size_t>();
  return toks;
}

inline ErrorCode code_from_name(const std::string& name) {
  for (int c = 0; c <= static_cast<int>(ErrorCode::UsageError); ++c)
    if (to_string(static_cast<ErrorCode>(c)) == name) return static_cast<ErrorCode>(c);
  return ErrorCode::BackendUnavailable;
}

}  // namespace adapter_detail

/// Server side: answer one protocol request with any backend.
inline nlohmann::json adapter_handle(const EncoderBackend& backend, const nlohmann::json& request) {
  using adapter_detail::as_float32;
  using json = nlohmann::json;
  const std::string kind = request.at("kind").get<std::string>();
  const json payload = request.value("payload", json::object());
  json out;
  if (kind == "info") {
    const BackendInfo& info = backend.info();
    out["name"] = info.name;
    out["dim"] = info.dim;
    out["text_context_dim"] = info.text_context_dim;
    out["differentiable_text"] = info.differentiable_text;
    out["checksum"] = backend.parameter_checksum();
  } else if (kind == "image") {
    Image img(payload.at("height").get<std::size_t>(), payload.at("width").get<std::size_t>(),
              payload.at("channels").get<std::size_t>());
    img.pixels = payload.at("pixels").get<std::vector<double>>();
    enforce(img.pixels.size() == img.height * img.width * img.channels, ErrorCode::InvalidImage,
            "pixel count does not match the image shape");
    out["embedding"] = as_float32(backend.encode_image(make_image_ref(std::move(img))).values());
  } else if (kind == "text") {
    out["embedding"] = as_float32(backend.encode_text(adapter_detail::tokens_from_json(payload)).values());
  } else if (kind == "text_vjp") {
    const auto fwd = backend.encode_text_with_vjp(adapter_detail::tokens_from_json(payload));
    const auto cot = payload.at("cotangent").get<std::vector<double>>();
    out["token_grad"] = fwd.vjp(cot);
  } else if (kind == "token") {
    out["embedding"] = backend.token_embedding(payload.at("word").get<std::string>());
  } else {
    throw Error(ErrorCode::UsageError, "unknown request kind '" + kind + "'");
  }
  return out;
}

/// Route POST /encode on `server` to `backend`.
inline void install_adapter_routes(httplib::Server& server, const EncoderBackend& backend) {
  server.Post("/encode", [&backend](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json reply;
    try {
      reply = adapter_handle(backend, nlohmann::json::parse(req.body));
    } catch (const Error& e) {
      res.status = 400;
      reply = {{"error", to_string(e.code())}, {"message", e.message()}};
    } catch (const std::exception& e) {
      res.status = 400;
      reply = {{"error", to_string(ErrorCode::FormatError)}, {"message", e.what()}};
    }
    res.set_content(reply.dump(), "application/json");
  });
}

/// Serve `backend` on host:port until the server is stopped. Blocks.
inline void serve_adapter(httplib::Server& server, const EncoderBackend& backend, const std::string& host, int port) {
  install_adapter_routes(server, backend);
  enforce(server.listen(host, port), ErrorCode::BackendUnavailable,
          "cannot listen on " + host + ":" + std::to_string(port));
}

/**
 * Client side: an EncoderBackend whose calls are forwarded to an adapter
 * process. Requests are serialized through one connection.
 */
class AdapterBackend final : public EncoderBackend {
 public:
  explicit AdapterBackend(const std::string& endpoint) : endpoint_(endpoint), client_(endpoint) {
    enforce(client_.is_valid(), ErrorCode::BackendUnavailable, "invalid adapter endpoint '" + endpoint + "'");
    client_.set_connection_timeout(5);
    client_.set_read_timeout(120);
    const auto reply = call("info", nlohmann::json::object());
    info_.name = "adapter:" + reply.at("name").get<std::string>();
    info_.dim = reply.at("dim").get<std::size_t>();
    info_.text_context_dim = reply.at("text_context_dim").get<std::size_t>();
    info_.differentiable_text = reply.at("differentiable_text").get<bool>();
    checksum_ = reply.at("checksum").get<std::uint64_t>();
  }

  const BackendInfo& info() const noexcept override { return info_; }

  Embedding encode_image(const ImageRef& img) const override {
    validate(img);
    const CropBox box = img.region();
    const Image full = materialize(img, box.h, box.w);
    nlohmann::json payload{{"height", full.height}, {"width", full.width}, {"channels", full.channels},
                           {"pixels", full.pixels}};
    return embedding_from(call("image", payload));
  }

  Embedding encode_text(const TokenSequence& toks) const override {
    validate(toks, info_.text_context_dim);
    return embedding_from(call("text", adapter_detail::tokens_json(toks)));
  }

  TextForward encode_text_with_vjp(const TokenSequence& toks) const override {
    enforce(info_.differentiable_text, ErrorCode::GradientUnsupported,
            info_.name + " does not expose text-path gradients");
    Embedding out = encode_text(toks);
    auto vjp = [this, payload = adapter_detail::tokens_json(toks)](std::span<const double> cot) {
      nlohmann::json req = payload;
      req["cotangent"] = std::vector<double>(cot.begin(), cot.end());
      return call("text_vjp", req).at("token_grad").get<TokenGrad>();
    };
    return TextForward{std::move(out), std::move(vjp)};
  }

  std::vector<double> token_embedding(std::string_view word) const override {
    return call("token", {{"word", std::string(word)}}).at("embedding").get<std::vector<double>>();
  }

  std::uint64_t parameter_checksum() const override { return checksum_; }

 private:
  nlohmann::json call(const std::string& kind, const nlohmann::json& payload) const {
    const std::string body = nlohmann::json{{"kind", kind}, {"payload", payload}}.dump();
    std::lock_guard<std::mutex> lock(mutex_);
    const auto res = client_.Post("/encode", body, "application/json");
    enforce(static_cast<bool>(res), ErrorCode::BackendUnavailable,
            "adapter at " + endpoint_ + " unreachable: " + httplib::to_string(res.error()));
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::BackendUnavailable, std::string("adapter sent malformed JSON: ") + e.what());
    }
    if (res->status != 200)
      throw Error(adapter_detail::code_from_name(reply.value("error", std::string())),
                  "adapter: " + reply.value("message", std::string("request failed")));
    return reply;
  }

  Embedding embedding_from(const nlohmann::json& reply) const {
    const auto v = reply.at("embedding").get<std::vector<double>>();
    enforce(v.size() == info_.dim, ErrorCode::DimensionMismatch, "adapter returned a wrong-width embedding");
    return normalize(v);
  }

  std::string endpoint_;
  mutable httplib::Client client_;
  mutable std::mutex mutex_;
  BackendInfo info_;
  std::uint64_t checksum_ = 0;
};

}  // namespace idlike

#endif  // IDLIKE_ADAPTER_HPP_
