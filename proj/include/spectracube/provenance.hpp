#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace spectracube {

std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file(const std::filesystem::path& path);

// Sidecar written next to every CLI artifact: the command, the hashes of its
// inputs, and the seeds/options that produced it. Deliberately carries no
// timestamps so replays are byte-identical.
struct Provenance {
    std::string command;
    std::map<std::string, std::string> inputs;  // path -> sha256
    nlohmann::json options;

    void add_input(const std::filesystem::path& path);
    void write_sidecar(const std::filesystem::path& artifact) const;  // artifact + ".prov.json"
};

}  // namespace spectracube
