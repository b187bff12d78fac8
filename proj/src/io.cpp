#include "aml/io.hpp"

#include <json.hpp>

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "aml/errors.hpp"

namespace aml::io {

namespace {

using nlohmann::json;

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const fs::path& where) {
    double v = 0.0;
    const char* b = s.data();
    while (b < s.data() + s.size() && *b == ' ') ++b;
    const auto [p, ec] = std::from_chars(b, s.data() + s.size(), v);
    if (ec != std::errc() || p == b) throw IoError("bad number '" + s + "' in " + where.string());
    return v;
}

template <typename T>
void put(std::string& out, T v) {
    static_assert(std::endian::native == std::endian::little, "little-endian host required");
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& pos) {
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

void atomic_write(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write " + tmp.string());
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!os) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string format_double(double x) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, p);
}

std::string Table::to_csv() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
    out += "\n";
    for (const auto& row : rows) {
        if (row.size() != header.size()) throw ConfigError("table row width does not match the header");
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ",";
            out += format_double(row[i]);
        }
        out += "\n";
    }
    return out;
}

void write_table(const fs::path& path, const Table& table) { atomic_write(path, table.to_csv()); }

void write_trajectory_csv(const fs::path& path, const SampledTrajectory& traj) {
    Table t{{"t", "x", "y", "z"}, {}};
    for (Eigen::Index i = 0; i < traj.size(); ++i) {
        const Vec3 p = traj.position(i);
        t.rows.push_back({traj.times()[static_cast<std::size_t>(i)], p.x(), p.y(), p.z()});
    }
    write_table(path, t);
}

SampledTrajectory read_trajectory_csv(const fs::path& path) {
    std::istringstream is(read_file(path));
    std::string line;
    if (!std::getline(is, line)) throw IoError(path.string() + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t,x,y,z") throw IoError(path.string() + ": expected header t,x,y,z");
    std::vector<double> times;
    std::vector<Vec3> pts;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 4) throw IoError(path.string() + ": expected 4 columns in '" + line + "'");
        times.push_back(parse_double(f[0], path));
        pts.emplace_back(parse_double(f[1], path), parse_double(f[2], path), parse_double(f[3], path));
    }
    Eigen::Matrix3Xd m(3, static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = pts[i];
    try {
        return SampledTrajectory(std::move(times), std::move(m));
    } catch (const std::exception& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_nbigbang(const fs::path& manifest, const NBigBang& bigbang) {
    json j;
    j["origin"] = {{"t", bigbang.origin().t},
                   {"x", {bigbang.origin().x.x(), bigbang.origin().x.y(), bigbang.origin().x.z()}}};
    j["trajectories"] = json::array();
    const std::string stem = manifest.stem().string();
    for (std::size_t i = 0; i < bigbang.size(); ++i) {
        const std::string name = stem + "_" + std::to_string(i) + ".csv";
        write_trajectory_csv(manifest.parent_path() / name, bigbang.trajectories()[i]);
        j["trajectories"].push_back(name);
    }
    atomic_write(manifest, j.dump(2) + "\n");
}

NBigBang read_nbigbang(const fs::path& manifest) {
    json j;
    try {
        j = json::parse(read_file(manifest));
        SpaceTimePoint o;
        o.t = j.at("origin").at("t").get<double>();
        const auto x = j.at("origin").at("x").get<std::vector<double>>();
        if (x.size() != 3) throw IoError("origin must have 3 coordinates");
        o.x = Vec3(x[0], x[1], x[2]);
        std::vector<SampledTrajectory> trajs;
        for (const auto& name : j.at("trajectories"))
            trajs.push_back(read_trajectory_csv(manifest.parent_path() / name.get<std::string>()));
        return NBigBang(o, std::move(trajs));
    } catch (const IoError&) {
        throw;
    } catch (const std::exception& e) {
        throw IoError(manifest.string() + ": " + e.what());
    }
}

void save_state(const fs::path& path, const GridState& state) {
    state.validate();
    std::string out;
    put<std::int32_t>(out, state.dim);
    put<std::int32_t>(out, state.n);
    put<double>(out, state.L);
    put<double>(out, state.mass);
    put<double>(out, state.t);
    for (Eigen::Index k = 0; k < state.size(); ++k) {
        put<double>(out, state.psi[k].real());
        put<double>(out, state.psi[k].imag());
    }
    atomic_write(path, out);
}

GridState load_state(const fs::path& path) {
    const std::string in = read_file(path);
    constexpr std::size_t header = 2 * sizeof(std::int32_t) + 3 * sizeof(double);
    if (in.size() < header) throw IoError(path.string() + ": truncated header");
    std::size_t pos = 0;
    GridState g;
    g.dim = get<std::int32_t>(in, pos);
    g.n = get<std::int32_t>(in, pos);
    g.L = get<double>(in, pos);
    g.mass = get<double>(in, pos);
    g.t = get<double>(in, pos);
    if ((g.dim != 1 && g.dim != 2) || g.n < 16 || g.n > (1 << 24))
        throw IoError(path.string() + ": invalid grid header");
    const std::size_t count = g.dim == 1 ? static_cast<std::size_t>(g.n) : static_cast<std::size_t>(g.n) * g.n;
    if (in.size() != header + count * 2 * sizeof(double))
        throw IoError(path.string() + ": size does not match the header");
    g.psi.resize(static_cast<Eigen::Index>(count));
    for (std::size_t k = 0; k < count; ++k) {
        const double re = get<double>(in, pos);
        const double im = get<double>(in, pos);
        g.psi[static_cast<Eigen::Index>(k)] = cplx(re, im);
    }
    try {
        g.validate();
    } catch (const Error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
    if (!g.psi.allFinite()) throw IoError(path.string() + ": non-finite amplitudes");
    return g;
}

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_manifest(const fs::path& path, const RunManifest& m) {
    json j;
    j["subcommand"] = m.subcommand;
    j["config_hash"] = m.config_hash;
    j["seed"] = m.seed;
    j["version"] = m.version;
    j["wall_seconds"] = m.wall_seconds;
    j["outputs"] = m.outputs;
    if (!m.config_json.empty()) j["config"] = json::parse(m.config_json);
    atomic_write(path, j.dump(2) + "\n");
}

}  // namespace aml::io
