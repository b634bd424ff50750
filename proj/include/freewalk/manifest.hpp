#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>
#include <openssl/evp.h>

#include "freewalk/errors.hpp"
#include "freewalk/io.hpp"
#include "freewalk/version.hpp"

namespace freewalk {

inline std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("sha256 failed");
    }
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

inline std::string sha256_file(const std::string& path) { return sha256_hex(io::read_file(path)); }

/// Record of one data-producing run: enough to re-run it exactly and check
/// that the outputs come back byte-identical.
struct ExperimentManifest {
    std::string version{kVersion};
    int schema = kSchemaVersion;
    std::string command;        // e.g. "walk drift"
    nlohmann::json params;      // full parameter set
    std::uint64_t seed = 0;
    double wall_clock_ms = 0.0; // informational; excluded from replay comparison
    std::map<std::string, std::string> outputs; // path -> sha256

    nlohmann::json to_json() const {
        return nlohmann::json{{"version", version}, {"schema", schema},
                              {"command", command}, {"params", params},
                              {"seed", seed},       {"wall_clock_ms", wall_clock_ms},
                              {"outputs", outputs}};
    }

    static ExperimentManifest from_json(const nlohmann::json& j) {
        ExperimentManifest m;
        m.version = j.at("version").get<std::string>();
        m.schema = j.at("schema").get<int>();
        m.command = j.at("command").get<std::string>();
        m.params = j.at("params");
        m.seed = j.at("seed").get<std::uint64_t>();
        m.wall_clock_ms = j.value("wall_clock_ms", 0.0);
        m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
        return m;
    }

    void save(const std::string& path) const { io::write_file(path, to_json().dump(2) + "\n"); }

    static ExperimentManifest load(const std::string& path) {
        auto m = from_json(nlohmann::json::parse(io::read_file(path)));
        if (m.version != kVersion)
            throw InputError("manifest version " + m.version + " does not match tool version " +
                             std::string(kVersion));
        return m;
    }
};

} // namespace freewalk
