#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace l2e {

// Provenance record written next to every CLI output. The payload files
// themselves carry no timestamps, so reruns stay byte-identical; the
// manifest holds the wall-clock stamp and the digests needed to audit a run.
struct RunManifest {
    std::string command;                 // subcommand that produced the output
    std::string version;                 // artifact version
    std::uint64_t seed = 0;
    nlohmann::json config;               // resolved options after defaults
    std::vector<std::pair<std::string, std::string>> input_digests;
    std::string timestamp;               // ISO-8601 UTC

    nlohmann::json to_json() const;
};

// FNV-1a 64-bit digest of a file's bytes, rendered as 16 hex digits.
// Throws DataError{missing_file} if the file cannot be read.
std::string fnv1a_file_digest(const std::string& path);

// FNV-1a 64-bit digest of a byte string (exposed for tests).
std::uint64_t fnv1a64(const void* data, std::size_t size);

// Current time as ISO-8601 UTC, e.g. "2026-01-31T09:15:02Z".
std::string iso8601_utc_now();

// Serialize and write `<path>.manifest.json` next to the given output path.
void write_manifest_sidecar(const RunManifest& manifest,
                            const std::string& output_path);

}  // namespace l2e
