#include "l2e/manifest.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <vector>

#include "l2e/errors.hpp"

namespace l2e {

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string fnv1a_file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError(DataError::Code::missing_file,
                        "cannot open \"" + path + "\" for digest");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(
                      fnv1a64(bytes.data(), bytes.size())));
    return buf;
}

std::string iso8601_utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

nlohmann::json RunManifest::to_json() const {
    nlohmann::json digests = nlohmann::json::object();
    for (const auto& [name, digest] : input_digests) digests[name] = digest;
    return nlohmann::json{{"command", command},
                          {"version", version},
                          {"seed", seed},
                          {"config", config},
                          {"input_digests", digests},
                          {"timestamp", timestamp}};
}

void write_manifest_sidecar(const RunManifest& manifest,
                            const std::string& output_path) {
    const std::string path = output_path + ".manifest.json";
    std::ofstream out(path);
    if (!out)
        throw DataError(DataError::Code::missing_file,
                        "cannot write manifest \"" + path + "\"");
    out << manifest.to_json().dump(2) << "\n";
}

}  // namespace l2e
