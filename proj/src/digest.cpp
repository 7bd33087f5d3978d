#include "dsbmm/digest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <memory>

#include "dsbmm/errors.hpp"

namespace dsbmm {

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) {
      throw Error(ErrorCode::IoError, "SHA-256 initialisation failed");
    }
  }
  void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx_.get(), data, n); }
  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md.data(), &len);
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned int k = 0; k < len; ++k) {
      out.push_back(digits[md[k] >> 4]);
      out.push_back(digits[md[k] & 15]);
    }
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

std::string panel_digest(const MultiLayerPanel& panel) {
  Sha256 h;
  const int dims[2] = {panel.n_nodes(), panel.n_times()};
  h.update(dims, sizeof dims);
  for (int l = 0; l < panel.n_layers(); ++l) {
    const auto& layer = panel.layer(l);
    const int s[5] = {layer.spec.layer_id, layer.spec.directed, layer.spec.weighted, layer.spec.n_blocks,
                      layer.spec.covariate_dim};
    h.update(s, sizeof s);
    h.update(layer.d.data(), layer.d.size());
    h.update(layer.y.data(), layer.y.size() * sizeof(double));
    h.update(layer.x.data(), layer.x.size() * sizeof(double));
  }
  return h.hex();
}

std::vector<std::pair<std::string, std::string>> file_digests(const std::filesystem::path& dir,
                                                              const std::vector<std::string>& exclude) {
  std::vector<std::pair<std::string, std::string>> out;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (std::find(exclude.begin(), exclude.end(), name) != exclude.end()) continue;
    out.emplace_back(std::filesystem::relative(e.path(), dir).generic_string(), sha256_file(e.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string directory_digest(const std::filesystem::path& dir, const std::vector<std::string>& exclude) {
  std::string text;
  for (const auto& [path, digest] : file_digests(dir, exclude)) text += path + "\t" + digest + "\n";
  return sha256_hex(text);
}

}  // namespace dsbmm
