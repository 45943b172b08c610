#include "dtmc/manifest.hpp"

#include <array>
#include <memory>

#include <openssl/evp.h>

#include "dtmc/csv.hpp"
#include "dtmc/errors.hpp"
#include "dtmc/version.hpp"

namespace dtmc {

std::string sha256_hex(const std::string& bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    const std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                                      EVP_MD_CTX_free);
    if (ctx == nullptr || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest.data(), &length) != 1) {
        throw Error("sha256 digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out = "sha256:";
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xF]);
    }
    return out;
}

std::string file_fingerprint(const std::string& path) {
    return sha256_hex(csv::read_text_file(path));
}

nlohmann::json manifest_to_json(const RunManifest& manifest) {
    return nlohmann::json{{"command", manifest.command},
                          {"inputs", manifest.inputs},
                          {"config", manifest.config},
                          {"tool_version", manifest.tool_version.empty() ? kVersion
                                                                         : manifest.tool_version},
                          {"wall_time_seconds", manifest.wall_time_seconds}};
}

void write_manifest(const RunManifest& manifest, const std::string& out_dir) {
    csv::write_text_file(out_dir + "/manifest.json", manifest_to_json(manifest).dump(2) + "\n");
}

}
