#include "manifest.hpp"

#include <array>
#include <fstream>
#include <memory>

#include <openssl/evp.h>

#include "azsearch/error.hpp"
#include "azsearch/io.hpp"

namespace azsearch::cli {

std::string tool_version() { return AZSEARCH_VERSION; }

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for hashing");

  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw DataError("sha256 initialisation failed");
  }
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);

  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xf];
  }
  return hex;
}

void RunManifest::write(const std::filesystem::path& path) const {
  nlohmann::json hashes = nlohmann::json::array();
  for (const auto& out : outputs) {
    hashes.push_back({{"path", out.generic_string()}, {"sha256", sha256_file(out)}});
  }
  nlohmann::json j = {{"tool", "azsearch"},
                      {"version", tool_version()},
                      {"subcommand", subcommand},
                      {"seed", seed},
                      {"config", config},
                      {"inputs", inputs},
                      {"outputs", hashes}};
  if (!extra.empty()) j["summary"] = extra;
  io::write_json(path, j);
}

}  // namespace azsearch::cli
