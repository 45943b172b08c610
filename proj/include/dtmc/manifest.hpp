#pragma once

#include <map>
#include <string>

#include <json.hpp>

// Run provenance: every output directory gets exactly one manifest.json
// recording the command, content fingerprints of the inputs, the resolved
// configuration, the tool version, and the wall time.

namespace dtmc {

/// "sha256:" + lowercase hex digest of the bytes.
std::string sha256_hex(const std::string& bytes);

/// Fingerprint of a file's contents; throws IoError when unreadable.
std::string file_fingerprint(const std::string& path);

struct RunManifest {
    std::string command;                        // resolved argv, joined
    std::map<std::string, std::string> inputs;  // path -> fingerprint
    nlohmann::json config;                      // full resolved configuration
    std::string tool_version;
    double wall_time_seconds = 0.0;
};

nlohmann::json manifest_to_json(const RunManifest& manifest);

/// Writes <out_dir>/manifest.json.
void write_manifest(const RunManifest& manifest, const std::string& out_dir);

}
