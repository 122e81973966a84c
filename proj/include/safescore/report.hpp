#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "safescore/csv.hpp"
#include "safescore/errors.hpp"
#include "safescore/io.hpp"
#include "safescore/version.hpp"

namespace safescore {

// Describes one finished run: what ran, with which resolved settings, and the
// content hash of every file it produced. Deliberately carries no wall-clock
// state so a rerun with the same inputs writes identical bytes.
struct RunManifest {
    std::string command;
    std::string version = std::string(kVersion);
    std::uint64_t seed = 0;
    json config;
    std::map<std::string, std::string> outputs;  // file name -> fnv1a64 hex

    json to_json() const {
        return json{{"command", command},
                    {"version", version},
                    {"seed", seed},
                    {"config", config},
                    {"outputs", outputs}};
    }
};

// Collects report files in memory and lands them together. Files hit disk
// only in commit(): temps first, then renames, so a failed run leaves no
// half-written report behind.
class ReportWriter {
   public:
    explicit ReportWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}

    const std::filesystem::path& dir() const { return dir_; }

    void stage(const std::string& name, std::string content) {
        for (const auto& [existing, unused] : staged_)
            if (existing == name) throw ConfigError("duplicate report file: " + name);
        staged_.emplace_back(name, std::move(content));
    }

    void stage_json(const std::string& name, const json& j) { stage(name, dump_json(j)); }

    void stage_csv(const std::string& name, const CsvWriter& w) { stage(name, w.str()); }

    RunManifest commit(const std::string& command, std::uint64_t seed, json config) {
        RunManifest manifest;
        manifest.command = command;
        manifest.seed = seed;
        manifest.config = std::move(config);
        for (const auto& [name, content] : staged_)
            manifest.outputs[name] = fnv1a64_hex(content);
        const std::string manifest_text = dump_json(manifest.to_json());
        manifest.outputs["manifest.json"] = fnv1a64_hex(manifest_text);

        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw DataError("cannot create report directory " + dir_.string());

        std::vector<std::pair<std::filesystem::path, std::filesystem::path>> pending;
        auto cleanup = [&] {
            for (const auto& [tmp, unused] : pending) std::filesystem::remove(tmp, ec);
        };
        try {
            for (const auto& [name, content] : staged_) {
                const auto final_path = dir_ / name;
                const auto tmp = final_path.string() + ".tmp";
                write_text_file(tmp, content);
                pending.emplace_back(tmp, final_path);
            }
            {
                const auto final_path = dir_ / "manifest.json";
                const auto tmp = final_path.string() + ".tmp";
                write_text_file(tmp, manifest_text);
                pending.emplace_back(tmp, final_path);
            }
        } catch (...) {
            cleanup();
            throw;
        }
        for (const auto& [tmp, final_path] : pending) {
            std::filesystem::rename(tmp, final_path, ec);
            if (ec) {
                cleanup();
                throw DataError("cannot write " + final_path.string());
            }
        }
        staged_.clear();
        return manifest;
    }

   private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::string, std::string>> staged_;
};

}  // namespace safescore
