#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fieldscout/common.hpp"

namespace fieldscout {

constexpr const char* kToolVersion = "0.1.0";

/// Run provenance: config snapshot, input hashes, seed, and a content hash
/// for every output file. Re-running with the same snapshot in deterministic
/// mode reproduces the hashes.
class RunManifest {
public:
    RunManifest(std::string command, uint64_t seed, bool deterministic)
        : command_(std::move(command)), seed_(seed), deterministic_(deterministic) {}

    void set_config_snapshot(const std::string& text) { config_snapshot_ = text; }

    void add_input(const std::string& label, const std::string& path) {
        inputs_.push_back({label, path, hash_file(path)});
    }
    void add_input_text(const std::string& label, const std::string& text) {
        inputs_.push_back({label, "<inline>", hex64(fnv1a(text.data(), text.size()))});
    }
    void add_output(const std::string& path) { outputs_.push_back(path); }

    void save(const std::string& path) const {
        nlohmann::json j;
        j["tool"] = "fieldscout";
        j["version"] = kToolVersion;
        j["command"] = command_;
        j["seed"] = seed_;
        j["deterministic"] = deterministic_;
        j["config"] = config_snapshot_;
        j["inputs"] = nlohmann::json::array();
        for (const auto& in : inputs_)
            j["inputs"].push_back({{"label", in.label}, {"path", in.path}, {"fnv64", in.hash}});
        j["outputs"] = nlohmann::json::array();
        for (const auto& out : outputs_)
            j["outputs"].push_back({{"path", out}, {"fnv64", hash_file(out)}});
        std::ofstream f(path, std::ios::binary);
        if (!f) throw io_error("cannot write " + path);
        f << j.dump(2) << "\n";
    }

    static std::string hash_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw io_error("cannot hash missing file " + path);
        uint64_t h = 0xcbf29ce484222325ULL;
        char buf[4096];
        while (in.read(buf, sizeof buf) || in.gcount() > 0)
            h = fnv1a(buf, size_t(in.gcount()), h);
        return hex64(h);
    }

private:
    struct Input {
        std::string label, path, hash;
    };
    std::string command_;
    uint64_t seed_;
    bool deterministic_;
    std::string config_snapshot_;
    std::vector<Input> inputs_;
    std::vector<std::string> outputs_;
};

} // namespace fieldscout
