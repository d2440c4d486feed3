// Copyright 2026 The SCIR Lab Authors.
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

#include "scir/checkpoint.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "scir/error.hpp"
#include "scir/json_util.hpp"

namespace scir {

namespace fs = std::filesystem;
using nlohmann::json;

json model_config_to_json(const ModelConfig& c) {
  return json{{"vocab_size", c.vocab_size}, {"context_len", c.context_len},
              {"layers", c.layers},         {"model_dim", c.model_dim},
              {"heads", c.heads},           {"mlp_mult", c.mlp_mult},
              {"seed", c.seed}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  StrictObject o(j, "model");
  o.get("vocab_size", c.vocab_size);
  o.get("context_len", c.context_len);
  o.get("layers", c.layers);
  o.get("model_dim", c.model_dim);
  o.get("heads", c.heads);
  o.get("mlp_mult", c.mlp_mult);
  o.get("seed", c.seed);
  o.finish();
  return c;
}

std::vector<std::uint8_t> encode_params_f32le(const grad::ParamVector& params) {
  std::vector<std::uint8_t> out(params.size() * 4);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(params[i]));
    out[4 * i + 0] = static_cast<std::uint8_t>(bits);
    out[4 * i + 1] = static_cast<std::uint8_t>(bits >> 8);
    out[4 * i + 2] = static_cast<std::uint8_t>(bits >> 16);
    out[4 * i + 3] = static_cast<std::uint8_t>(bits >> 24);
  }
  return out;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw IoError("sha256 computation failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0')
       << static_cast<int>(digest[i]);
  }
  return os.str();
}

json save_checkpoint(const fs::path& dir, const std::string& tag,
                     const Model& model, const json& metadata) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto blob = encode_params_f32le(model.params);
  json manifest = metadata.is_object() ? metadata : json::object();
  manifest["config"] = model_config_to_json(model.config);
  manifest["iteration_tag"] = tag;
  manifest["param_count"] = model.params.size();
  manifest["sha256"] = sha256_hex(blob);
  manifest["format"] = "f32le";

  const fs::path bin = dir / (tag + ".bin");
  {
    std::ofstream os(bin, std::ios::binary | std::ios::trunc);
    os.write(reinterpret_cast<const char*>(blob.data()),
             static_cast<std::streamsize>(blob.size()));
    if (!os) throw IoError("failed writing " + bin.string());
  }
  write_json_file(dir / (tag + ".json"), manifest);
  return manifest;
}

Checkpoint load_checkpoint(const fs::path& dir, const std::string& tag) {
  const json manifest = read_json_file(dir / (tag + ".json"));
  Checkpoint ck;
  ck.iteration_tag = manifest.value("iteration_tag", tag);
  ck.manifest = manifest;
  if (!manifest.contains("config")) {
    throw IoError("checkpoint manifest for " + tag + " lacks 'config'");
  }
  ck.model.config = model_config_from_json(manifest.at("config"));
  ck.model.config.validate();
  ck.model.params = grad::ParamVector(model_layout(ck.model.config));

  const fs::path bin = dir / (tag + ".bin");
  std::ifstream is(bin, std::ios::binary);
  if (!is) throw IoError("cannot open " + bin.string());
  std::vector<std::uint8_t> blob((std::istreambuf_iterator<char>(is)),
                                 std::istreambuf_iterator<char>());
  const std::size_t expected = manifest.value("param_count", std::size_t{0});
  if (expected != ck.model.params.size() || blob.size() != expected * 4) {
    throw IoError("checkpoint " + tag + " param_count does not match its config");
  }
  if (sha256_hex(blob) != manifest.value("sha256", std::string())) {
    throw IoError("checkpoint " + tag + " blob hash mismatch");
  }
  for (std::size_t i = 0; i < expected; ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(blob[4 * i]) |
                               static_cast<std::uint32_t>(blob[4 * i + 1]) << 8 |
                               static_cast<std::uint32_t>(blob[4 * i + 2]) << 16 |
                               static_cast<std::uint32_t>(blob[4 * i + 3]) << 24;
    ck.model.params[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  ck.model.params.validate();
  return ck;
}

}  // namespace scir
