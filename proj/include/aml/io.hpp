#pragma once

// File formats: trajectory CSV, NBigBang manifests, binary grid states,
// plain CSV tables and the JSON run manifest.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aml/geometry.hpp"
#include "aml/quantum.hpp"

namespace aml::io {

namespace fs = std::filesystem;

/// Writes `content` to a temporary sibling and renames it over `path`.
void atomic_write(const fs::path& path, const std::string& content);
std::string read_file(const fs::path& path);

/// Shortest round-trip decimal form of a double.
std::string format_double(double x);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::string to_csv() const;
};

void write_table(const fs::path& path, const Table& table);

/// CSV with header `t,x,y,z`.
void write_trajectory_csv(const fs::path& path, const SampledTrajectory& traj);
SampledTrajectory read_trajectory_csv(const fs::path& path);

/// One CSV per trajectory next to a JSON manifest listing files and origin.
void write_nbigbang(const fs::path& manifest, const NBigBang& bigbang);
NBigBang read_nbigbang(const fs::path& manifest);

/// Little-endian int32 dim, int32 n, f64 L, f64 m, f64 t, then re/im pairs.
void save_state(const fs::path& path, const GridState& state);
GridState load_state(const fs::path& path);

std::uint64_t fnv1a(const std::string& data);

struct RunManifest {
    std::string subcommand;
    std::string config_hash;  // FNV-1a of the canonical config JSON, hex
    std::uint64_t seed = 0;
    std::string version;
    double wall_seconds = 0.0;
    std::vector<std::string> outputs;
    std::string config_json;  // canonical config, embedded for the journal
};

void write_manifest(const fs::path& path, const RunManifest& manifest);

}  // namespace aml::io
