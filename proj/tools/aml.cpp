// Single entry point: every experiment is a subcommand driven by a JSON config
// with per-field flag overrides. Outputs are CSV plus a JSON run manifest.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "aml/acceptance.hpp"
#include "aml/classical.hpp"
#include "aml/errors.hpp"
#include "aml/geometry.hpp"
#include "aml/io.hpp"
#include "aml/measures.hpp"
#include "aml/numerics.hpp"
#include "aml/probability.hpp"
#include "aml/quantum.hpp"

#ifndef AML_VERSION
#define AML_VERSION "dev"
#endif

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using namespace aml;

constexpr double pi = std::numbers::pi;

// ---------------------------------------------------------------- schema

enum class Type { Number, Integer, String, Bool, Numbers, Strings, Boxes, Potential, Transform };

struct Field {
    std::string name;
    Type type;
    json fallback;  // null means required unless `optional`
    std::string help;
    bool optional = false;
};

const char* type_name(Type t) {
    switch (t) {
        case Type::Number: return "number";
        case Type::Integer: return "integer";
        case Type::String: return "string";
        case Type::Bool: return "boolean";
        case Type::Numbers: return "array of numbers";
        case Type::Strings: return "array of strings";
        case Type::Boxes: return "array of [lo, hi] pairs";
        case Type::Potential: return "potential object";
        case Type::Transform: return "transform object";
    }
    return "?";
}

void require_keys(const json& obj, const std::string& where, const std::vector<std::string>& allowed) {
    for (const auto& [k, _] : obj.items())
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            throw ConfigError(where + ": unknown key '" + k + "'");
}

void require_numbers(const json& obj, const std::string& where, const std::vector<std::string>& keys) {
    for (const auto& k : keys)
        if (obj.contains(k) && !obj[k].is_number()) throw ConfigError(where + "." + k + " must be a number");
}

void check_potential(const json& v, const std::string& where) {
    if (!v.is_object() || !v.contains("kind") || !v["kind"].is_string())
        throw ConfigError(where + " must be an object with a string 'kind'");
    const std::string kind = v["kind"];
    const std::map<std::string, std::vector<std::string>> params{{"zero", {}},
                                                                 {"square_barrier", {"V0", "a", "smoothing"}},
                                                                 {"gaussian", {"V0", "width"}},
                                                                 {"soft_coulomb", {"q", "softening"}},
                                                                 {"power", {"k", "n"}}};
    const auto it = params.find(kind);
    if (it == params.end()) throw ConfigError(where + ": unknown potential kind '" + kind + "'");
    auto allowed = it->second;
    allowed.push_back("kind");
    require_keys(v, where, allowed);
    require_numbers(v, where, it->second);
    for (const auto& k : it->second)
        if (k != "smoothing" && !v.contains(k)) throw ConfigError(where + ": missing '" + k + "'");
}

void check_vec3(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 3) throw ConfigError(where + " must be an array of 3 numbers");
    for (const auto& x : v)
        if (!x.is_number()) throw ConfigError(where + " must be an array of 3 numbers");
}

void check_transform(const json& v, const std::string& where) {
    if (!v.is_object() || !v.contains("name") || !v["name"].is_string())
        throw ConfigError(where + " must be an object with a string 'name'");
    const std::string name = v["name"];
    if (name == "galilean") {
        require_keys(v, where, {"name", "v0", "axis", "angle"});
        check_vec3(v.value("v0", json::array({0, 0, 0})), where + ".v0");
        check_vec3(v.value("axis", json::array({0, 0, 1})), where + ".axis");
        require_numbers(v, where, {"angle"});
    } else if (name == "boost") {
        require_keys(v, where, {"name", "v0"});
        if (!v.contains("v0")) throw ConfigError(where + ": missing 'v0'");
        check_vec3(v["v0"], where + ".v0");
    } else if (name == "scale") {
        require_keys(v, where, {"name", "a"});
        require_numbers(v, where, {"a"});
    } else if (name == "log_drift") {
        require_keys(v, where, {"name", "c", "axis"});
        require_numbers(v, where, {"c"});
        if (v.contains("axis")) check_vec3(v["axis"], where + ".axis");
    } else if (name == "shear_over_t") {
        require_keys(v, where, {"name"});
    } else if (name == "swirl") {
        require_keys(v, where, {"name", "theta"});
        require_numbers(v, where, {"theta"});
    } else {
        throw ConfigError(where + ": unknown transform '" + name + "'");
    }
}

void check_field(const Field& f, const json& v) {
    const std::string& n = f.name;
    const auto bad = [&] { throw ConfigError("config key '" + n + "' must be a " + type_name(f.type)); };
    switch (f.type) {
        case Type::Number:
            if (!v.is_number()) bad();
            break;
        case Type::Integer:
            if (!v.is_number_integer()) bad();
            break;
        case Type::String:
            if (!v.is_string()) bad();
            break;
        case Type::Bool:
            if (!v.is_boolean()) bad();
            break;
        case Type::Numbers:
            if (!v.is_array()) bad();
            for (const auto& x : v)
                if (!x.is_number()) bad();
            break;
        case Type::Strings:
            if (!v.is_array()) bad();
            for (const auto& x : v)
                if (!x.is_string()) bad();
            break;
        case Type::Boxes:
            if (!v.is_array() || v.empty()) bad();
            for (const auto& b : v)
                if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number()) bad();
            break;
        case Type::Potential:
            check_potential(v, n);
            break;
        case Type::Transform:
            check_transform(v, n);
            break;
    }
}

// Flag text to JSON: JSON literals pass through; bare words are strings;
// comma lists become arrays.
json parse_override(const Field& f, const std::string& text) {
    if (f.type == Type::String) return text;
    if (f.type == Type::Strings && (text.empty() || text.front() != '[')) {
        json arr = json::array();
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) arr.push_back(item);
        return arr;
    }
    if (f.type == Type::Numbers && (text.empty() || text.front() != '[')) {
        json arr = json::array();
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            try {
                arr.push_back(json::parse(item));
            } catch (const json::exception&) {
                throw ConfigError("--" + f.name + ": '" + item + "' is not a number");
            }
        }
        return arr;
    }
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        throw ConfigError("--" + f.name + ": cannot parse '" + text + "'");
    }
}

json validate(const std::vector<Field>& schema, json cfg) {
    if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [k, _] : cfg.items()) {
        const bool known = std::any_of(schema.begin(), schema.end(), [&](const Field& f) { return f.name == k; });
        if (!known) throw ConfigError("unknown config key '" + k + "'");
    }
    for (const auto& f : schema) {
        if (cfg.contains(f.name)) {
            check_field(f, cfg[f.name]);
        } else if (!f.fallback.is_null()) {
            cfg[f.name] = f.fallback;
        } else if (!f.optional) {
            throw ConfigError("missing config key '" + f.name + "'");
        }
    }
    return cfg;
}

// ---------------------------------------------------------------- config accessors

Vec3 vec3(const json& v) { return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()}; }

std::vector<double> numbers(const json& v) { return v.get<std::vector<double>>(); }

std::vector<IntervalBox> boxes(const json& v) {
    std::vector<IntervalBox> out;
    for (const auto& b : v) {
        const double lo = b[0], hi = b[1];
        if (!(lo <= hi)) throw ConfigError("box bounds must satisfy lo <= hi");
        out.push_back(IntervalBox::interval(lo, hi));
    }
    return out;
}

PotentialSpec potential(const json& v) {
    const std::string kind = v["kind"];
    if (kind == "zero") return PotentialSpec::zero();
    if (kind == "square_barrier") {
        if (v.contains("smoothing")) return PotentialSpec::square_barrier(v["V0"], v["a"], v["smoothing"]);
        return PotentialSpec::square_barrier(v["V0"], v["a"]);
    }
    if (kind == "gaussian") return PotentialSpec::gaussian(v["V0"], v["width"]);
    if (kind == "soft_coulomb") return PotentialSpec::soft_coulomb(v["q"], v["softening"]);
    return PotentialSpec::central_repulsive_power(v["k"], v["n"]);
}

CausalTransform transform(const json& v) {
    const std::string name = v["name"];
    if (name == "galilean") {
        const Vec3 axis = vec3(v.value("axis", json::array({0, 0, 1})));
        if (axis.norm() == 0.0) throw ConfigError("transform axis must be nonzero");
        const Mat3 R = Eigen::AngleAxisd(v.value("angle", 0.0), axis.normalized()).toRotationMatrix();
        return transforms::galilean(R, vec3(v.value("v0", json::array({0, 0, 0}))));
    }
    if (name == "boost") return transforms::boost(vec3(v["v0"]));
    if (name == "scale") return transforms::scale(v.value("a", 2.0));
    if (name == "log_drift") return transforms::log_drift(v.value("c", 0.5), vec3(v.value("axis", json::array({1, 0, 0}))));
    if (name == "shear_over_t") return transforms::shear_over_t();
    return transforms::swirl(v.value("theta", 0.5));
}

GridSpec grid(const json& c) { return GridSpec{1, c["n"].get<int>(), c["L"].get<double>(), c["mass"].get<double>()}; }

PointSourceSpec source(const json& c) {
    PointSourceSpec s;
    s.x0 = Eigen::VectorXd::Constant(1, c["x0"].get<double>());
    s.sigma = c["sigma"];
    return s;
}

void require_positive(const json& c, std::initializer_list<const char*> keys) {
    for (const char* k : keys)
        if (!(c[k].get<double>() > 0.0)) throw ConfigError(std::string(k) + " must be positive");
}

// ---------------------------------------------------------------- run context

struct Run {
    json cfg;
    fs::path out;
    std::vector<std::string> outputs;

    void table(const std::string& name, const io::Table& t) {
        io::write_table(out / name, t);
        outputs.push_back(name);
    }
};

std::vector<Field> grid_fields(int n, double L, double sigma, std::vector<double> ts, double dt) {
    return {{"n", Type::Integer, n, "grid points"},
            {"L", Type::Number, L, "half-width of the grid"},
            {"mass", Type::Number, 1.0, "particle mass"},
            {"sigma", Type::Number, sigma, "point-source width"},
            {"x0", Type::Number, 0.0, "point-source position"},
            {"t_list", Type::Numbers, ts, "snapshot times"},
            {"dt", Type::Number, dt, "split-step time step"}};
}

// ---------------------------------------------------------------- subcommands

int cmd_asymvel(Run& r) {
    const json& c = r.cfg;
    std::optional<SampledTrajectory> traj;
    const std::string ex = c.value("example", "");
    const double tol = c.value("tol", ex == "1b" ? 2e-3 : 1e-3);
    if (c.contains("file")) {
        traj = io::read_trajectory_csv(c["file"].get<std::string>());
    } else if (c.contains("example")) {
        const Vec3 v = vec3(c["v"]), x0 = vec3(c["x0"]), a = vec3(c["a"]);
        const double w = c["omega"], eps = c["epsilon"], t0 = c["t0"];
        if (!(t0 > 0.0)) throw ConfigError("t0 must be positive");
        if (ex == "1a") {
            traj = SampledTrajectory::sample([&](double t) -> Vec3 { return v * t + x0 * std::sin(w * t); }, t0,
                                             c.value("t_final", 1e4));
        } else if (ex == "1b") {
            if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
            traj = SampledTrajectory::sample([&](double t) -> Vec3 { return a * std::pow(t, 1.0 - eps) + x0; }, t0,
                                             c.value("t_final", 1e6));
        } else if (ex == "1c") {
            traj = SampledTrajectory::sample([&](double t) -> Vec3 { return v * t * std::sin(w * t); }, t0,
                                             c.value("t_final", 1e4));
        } else {
            throw ConfigError("example must be 1a, 1b or 1c");
        }
    } else {
        throw ConfigError("asymvel needs an example or a file");
    }
    AsymptoticVelocityEstimate est;
    try {
        est = estimate_asymptotic_velocity(*traj, tol);
    } catch (const NotConverged& e) {
        throw NotConverged(std::string("not asymptotically regular: ") + e.what());
    }
    io::Table t{{"T", "estimate_x", "estimate_y", "estimate_z", "residual"}, {}};
    for (auto it = est.decades.rbegin(); it != est.decades.rend(); ++it)
        t.rows.push_back({it->T, it->value.x(), it->value.y(), it->value.z(), it->residual});
    r.table("asymvel.csv", t);
    std::printf("asymptotic velocity %s %s %s (residual %s)\n", io::format_double(est.value.x()).c_str(),
                io::format_double(est.value.y()).c_str(), io::format_double(est.value.z()).c_str(),
                io::format_double(est.residual).c_str());
    return 0;
}

int cmd_classical_sim(Run& r) {
    const json& c = r.cfg;
    SystemSpec sys;
    sys.masses = numbers(c["masses"]);
    const auto v = numbers(c["velocities"]);
    if (v.size() != 3 * sys.masses.size()) throw ConfigError("velocities must hold 3 numbers per particle");
    const PotentialSpec ext = potential(c["external"]);
    if (!ext.is_zero()) sys.external.assign(sys.masses.size(), ext);
    const PotentialSpec pair = potential(c["pair"]);
    if (!pair.is_zero())
        for (int i = 0; i < static_cast<int>(sys.masses.size()); ++i)
            for (int j = i + 1; j < static_cast<int>(sys.masses.size()); ++j) sys.pairs.push_back({i, j, pair});
    sys.validate();
    require_positive(c, {"t_final", "dt", "tol"});
    const auto run = integrate_nbigbang(sys, Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())),
                                        c["t_final"], c["dt"]);
    io::write_nbigbang(r.out / "bigbang.json", run.bigbang);
    r.outputs.push_back("bigbang.json");
    for (std::size_t i = 0; i < run.bigbang.size(); ++i) r.outputs.push_back("bigbang_" + std::to_string(i) + ".csv");
    io::Table t{{"particle", "vx", "vy", "vz"}, {}};
    const Eigen::VectorXd omega = estimate_asymptotic_velocity(run.bigbang, c["tol"]);
    for (Eigen::Index i = 0; i < omega.size() / 3; ++i)
        t.rows.push_back({static_cast<double>(i), omega(3 * i), omega(3 * i + 1), omega(3 * i + 2)});
    r.table("velocities.csv", t);
    std::printf("steps %ld, relative energy drift %s\n", run.steps, io::format_double(run.energy_drift).c_str());
    return 0;
}

int cmd_boundary_solve(Run& r) {
    const json& c = r.cfg;
    require_positive(c, {"m", "V0", "a", "t_min", "t_max"});
    if (!(c["ratio"].get<double>() > 1.0) || !(c["t_max"].get<double>() > c["t_min"].get<double>()))
        throw ConfigError("need t_max > t_min and ratio > 1");
    const auto ts = numerics::geometric_grid(c["t_min"], c["t_max"], c["ratio"]);
    const auto s = solve_asymptotic_boundary_condition(c["m"], c["V0"], c["a"], c["v"], ts);
    io::Table t{{"t", "v_I"}, {}};
    for (std::size_t i = 0; i < s.t.size(); ++i) t.rows.push_back({s.t[i], s.v_I_of_t[i]});
    r.table("boundary.csv", t);
    r.table("boundary_summary.csv", {{"v", "v_I_limit", "decay_exponent", "degenerate"},
                                     {{s.v, s.v_I_limit, s.decay_exponent.value_or(std::nan("")),
                                       s.degenerate ? 1.0 : 0.0}}});
    std::printf("v_I limit %s%s\n", io::format_double(s.v_I_limit).c_str(), s.degenerate ? " (degenerate)" : "");
    return 0;
}

int cmd_cross_section(Run& r) {
    const json& c = r.cfg;
    require_positive(c, {"energy", "mass", "intensity"});
    const int n = c["n_theta"];
    if (n < 2) throw ConfigError("n_theta must be at least 2");
    const double lo = c["theta_min"], hi = c["theta_max"];
    if (!(lo > 0.0 && hi < pi && lo < hi)) throw ConfigError("need 0 < theta_min < theta_max < pi");
    CrossSectionOptions opts;
    opts.mass = c["mass"];
    opts.intensity = c["intensity"];
    opts.s_min = c["s_min"];
    if (c.contains("s_max")) opts.s_max = c["s_max"].get<double>();
    const auto res = classical_cross_section(potential(c["potential"]), c["energy"], nullptr,
                                             numerics::linspace(lo, hi, n), opts);
    io::Table t{{"theta", "sigma"}, {}};
    for (std::size_t i = 0; i < res.theta_grid.size(); ++i) t.rows.push_back({res.theta_grid[i], res.sigma[i]});
    r.table("cross_section.csv", t);
    return 0;
}

int cmd_quantum_measure(Run& r) {
    const json& c = r.cfg;
    require_positive(c, {"dt", "sigma"});
    const auto bx = boxes(c["boxes"]);
    const auto ts = numbers(c["t_list"]);
    EvolveOptions eo;
    eo.absorber = c["absorber"];
    const GridState init =
        c.contains("state") ? io::load_state(c["state"].get<std::string>()) : make_point_source(source(c), grid(c));
    const Snapshots snaps = propagate_snapshots(init, QuantumPotential(potential(c["potential"])), ts, c["dt"], eo);
    const GridMeasure gm = measure_from_snapshots(snaps, bx, c["sigma"]);
    io::Table t{{"lo", "hi", "t", "mass"}, {}};
    for (std::size_t k = 0; k < gm.t.size(); ++k)
        for (std::size_t b = 0; b < bx.size(); ++b)
            t.rows.push_back({bx[b].lo()[0], bx[b].hi()[0], gm.t[k], gm.mass[k][b]});
    r.table("quantum_measure.csv", t);
    io::Table lim{{"lo", "hi", "limit", "last_decade_delta", "ratio", "lebesgue_ratio", "lebesgue_over_2pi"}, {}};
    const double w0 = bx[0].hi()[0] - bx[0].lo()[0];
    const double m = init.mass;
    for (std::size_t b = 0; b < bx.size(); ++b) {
        const double w = bx[b].hi()[0] - bx[b].lo()[0];
        lim.rows.push_back({bx[b].lo()[0], bx[b].hi()[0], gm.limit[b], gm.last_decade_delta[b],
                            gm.limit[0] > 0.0 ? gm.limit[b] / gm.limit[0] : std::nan(""),
                            w0 > 0.0 ? w / w0 : std::nan(""), m * w / (2.0 * pi)});
    }
    r.table("quantum_measure_limit.csv", lim);
    if (c.contains("save_state")) {
        const std::string path = c["save_state"];
        io::save_state(r.out / path, snaps.states().back());
        r.outputs.push_back(path);
    }
    return 0;
}

int cmd_aet_check(Run& r) {
    const json& c = r.cfg;
    require_positive(c, {"dt", "sigma"});
    const auto I = boxes(json::array({c["I"]})).front();
    const auto eps = numbers(c["epsilons"]);
    const Snapshots snaps =
        propagate_snapshots(make_point_source(source(c), grid(c)), QuantumPotential{}, numbers(c["t_list"]), c["dt"]);
    AetCheckOptions opts;
    opts.require_identical = c["require_identical"];
    opts.gap_tolerance = c["gap_tolerance"];
    const auto rep = aet_invariance_check(snaps, transform(c["transform"]), I, eps, opts);
    io::Table t{{"epsilon", "t", "mass_I", "mass_fI", "mass_minus", "mass_plus", "holds"}, {}};
    for (const auto& e : rep.by_epsilon)
        for (const auto& row : e.rows)
            t.rows.push_back({e.epsilon, row.t, row.mass_I, row.mass_fI, row.mass_minus, row.mass_plus,
                              row.holds ? 1.0 : 0.0});
    r.table("aet.csv", t);
    for (const auto& e : rep.by_epsilon)
        std::printf("epsilon %s: t0 %s\n", io::format_double(e.epsilon).c_str(),
                    e.t0 ? io::format_double(*e.t0).c_str() : "none");
    std::printf("relative gap at the largest t %s%s\n", io::format_double(rep.final_relative_gap).c_str(),
                rep.violation ? " (violation)" : "");
    return 0;
}

int cmd_transfer(Run& r) {
    const json& c = r.cfg;
    require_positive(c, {"m", "V0", "a", "dt", "sigma"});
    const double m = c["m"], V0 = c["V0"], a = c["a"];
    const auto box = boxes(json::array({c["box"]})).front();
    const auto ts = numbers(c["t_list"]);
    const std::string src = c["source"];
    EtaProvider eta;
    IntervalMass mu;
    std::optional<Snapshots> snaps;
    if (src == "quantum") {
        json g = c;
        g["mass"] = m;
        snaps = propagate_snapshots(make_point_source(source(g), grid(g)),
                                    QuantumPotential(PotentialSpec::square_barrier(V0, a)), ts, c["dt"]);
        eta = snapshot_provider(*snaps);
        const std::size_t last = snaps->size() - 1;
        mu = [&, last](const IntervalBox& b) { return snaps->cone_mass(last, b); };
    } else if (src == "uniform") {
        eta = [](double t, const IntervalBox& b) { return (b.hi()[0] - b.lo()[0]) / t; };
        mu = [](const IntervalBox& b) { return b.hi()[0] - b.lo()[0]; };
    } else {
        throw ConfigError("source must be 'quantum' or 'uniform'");
    }
    const auto rep = corrected_transfer(eta, barrier_flow(m, V0, a), box, ts);
    const double naive = naive_transfer(mu, barrier_omega_V(m, V0), box);
    io::Table t{{"t", "image_lo", "image_hi", "value"}, {}};
    for (std::size_t k = 0; k < rep.t.size(); ++k)
        t.rows.push_back({rep.t[k], rep.images[k].lo()[0], rep.images[k].hi()[0], rep.values[k]});
    r.table("transfer.csv", t);
    r.table("transfer_summary.csv", {{"corrected", "naive", "last_decade_delta"}, {{rep.value, naive, rep.last_decade_delta}}});
    std::printf("corrected %s naive %s\n", io::format_double(rep.value).c_str(), io::format_double(naive).c_str());
    return 0;
}

int cmd_quotient(Run& r) {
    const json& c = r.cfg;
    const auto win = numbers(c["window"]);
    if (win.size() != 4 || !(win[0] < win[2] && win[1] < win[3]))
        throw ConfigError("window must be [x_lo, y_lo, x_hi, y_hi] with lo < hi");
    const int cells = c["cells"];
    if (cells < 1) throw ConfigError("cells must be positive");
    const IntervalBox window(Eigen::Vector2d(win[0], win[1]), Eigen::Vector2d(win[2], win[3]));
    const std::string density = c["density"];
    DiscreteMeasure mu(2);
    if (density == "uniform") {
        mu = DiscreteMeasure::uniform(window, cells, c["density_value"]);
    } else if (density == "one_plus_y2") {
        const double hx = (win[2] - win[0]) / cells, hy = (win[3] - win[1]) / cells;
        for (int i = 0; i < cells; ++i)
            for (int j = 0; j < cells; ++j) {
                const double x0 = win[0] + hx * i, y0 = win[1] + hy * j, y1 = y0 + hy;
                const double gy = (y1 - y0) + (y1 * y1 * y1 - y0 * y0 * y0) / 3.0;
                mu.add(IntervalBox(Eigen::Vector2d(x0, y0), Eigen::Vector2d(x0 + hx, y1)), hx * gy);
            }
    } else {
        throw ConfigError("density must be 'uniform' or 'one_plus_y2'");
    }
    GroupActionSpec act;
    const std::string kind = c["action"];
    if (kind == "translations") act.kind = GroupActionSpec::Kind::TranslationsAlongAxis;
    else if (kind == "rotations") act.kind = GroupActionSpec::Kind::EuclideanOnV;
    else throw ConfigError("action must be 'translations' or 'rotations'");
    act.axis = c["axis"];
    act.g_lo = c["g_lo"];
    act.g_hi = c["g_hi"];
    act.transversal_offset = c["offset"];
    QuotientOptions opts;
    opts.invariance_tolerance = c["invariance_tolerance"];
    opts.window_tolerance = c["window_tolerance"];
    const auto bs = boxes(c["b_boxes"]);
    const auto q = quotient_measure(mu, act, bs, opts);
    io::Table t{{"lo", "hi", "nu"}, {}};
    for (const auto& w : q.nu.support()) t.rows.push_back({w.box.lo()[0], w.box.hi()[0], w.mass});
    r.table("quotient.csv", t);
    std::printf("window defect %s\n", io::format_double(q.window_defect).c_str());
    return 0;
}

int cmd_bernoulli(Run& r) {
    const json& c = r.cfg;
    const auto x0 = c["x0"].get<std::vector<std::int64_t>>();
    if (x0.size() != 2) throw ConfigError("x0 must be [numerator, denominator]");
    const auto horizons = c["horizons"].get<std::vector<int>>();
    io::Table f{{"horizon", "numerator", "denominator", "frequency"}, {}};
    for (int h : horizons) {
        const Rational q = relative_frequency(Rational(x0[0], x0[1]), h);
        f.rows.push_back({static_cast<double>(h), static_cast<double>(q.num()), static_cast<double>(q.den()),
                          q.to_double()});
    }
    r.table("frequency.csv", f);
    const auto ns = c["ns"].get<std::vector<int>>();
    const long samples = c["samples"];
    io::Table t{{"n", "epsilon", "measure", "chebyshev_bound"}, {}};
    for (double eps : numbers(c["epsilons"]))
        for (int n : ns) {
            const auto d = lln_deviation_measure(c["P"], n, eps, samples, c["seed"]);
            t.rows.push_back({static_cast<double>(n), eps, d.measure, d.chebyshev_bound});
        }
    r.table("bernoulli.csv", t);
    return 0;
}

int cmd_ncdic(Run& r) {
    const json& c = r.cfg;
    require_positive(c, {"dt", "sigma"});
    const PotentialSpec V = potential(c["potential"]);
    const auto bx = boxes(c["boxes"]);
    const Snapshots snaps =
        propagate_snapshots(make_point_source(source(c), grid(c)), QuantumPotential(V), numbers(c["t_list"]), c["dt"]);
    io::Table t{{"lo", "hi", "pi_C", "pi_Q", "mu_C", "mu_Q", "gap"}, {}};
    for (const auto& row : ncdic_report(snaps, V, bx))
        t.rows.push_back({row.box.lo()[0], row.box.hi()[0], row.pi_C, row.pi_Q, row.mu_C, row.mu_Q, row.gap});
    r.table("ncdic.csv", t);
    return 0;
}

int cmd_suite(Run& r) {
    const json& c = r.cfg;
    json state_info = nullptr;
    if (c.contains("state")) {
        const GridState g = io::load_state(c["state"].get<std::string>());
        state_info = {{"path", c["state"]}, {"dim", g.dim}, {"n", g.n}, {"t", g.t}, {"norm", g.norm()}};
    }
    acceptance::SuiteOptions opts;
    opts.only = c["only"].get<std::vector<std::string>>();
    opts.seed = c["seed"];
    const auto results = acceptance::run(opts, [](const acceptance::CriterionResult& res) {
        std::printf("%s\n", acceptance::format_line(res).c_str());
        std::fflush(stdout);
    });
    json summary;
    summary["results"] = json::array();
    bool all = true;
    for (const auto& res : results) {
        all = all && res.passed;
        summary["results"].push_back({{"id", res.id},
                                      {"module", res.module},
                                      {"title", res.title},
                                      {"passed", res.passed},
                                      {"seconds", res.seconds},
                                      {"budget_seconds", res.budget_seconds},
                                      {"detail", res.detail}});
    }
    summary["passed"] = all;
    if (!state_info.is_null()) summary["state"] = state_info;
    io::atomic_write(r.out / "suite.json", summary.dump(2) + "\n");
    r.outputs.push_back("suite.json");
    return all ? 0 : 4;
}

struct Command {
    std::string name;
    std::string help;
    std::vector<Field> schema;
    std::function<int(Run&)> run;
};

std::vector<Command> commands() {
    const json barrier{{"kind", "square_barrier"}, {"V0", 0.5}, {"a", 1.0}};
    const json zero{{"kind", "zero"}};
    std::vector<Command> cmds;

    cmds.push_back({"asymvel", "asymptotic velocity of a built-in example or a trajectory CSV",
                    {{"example", Type::String, nullptr, "1a, 1b or 1c", true},
                     {"file", Type::String, nullptr, "trajectory CSV with header t,x,y,z", true},
                     {"v", Type::Numbers, {1, 0, 0}, "velocity of examples 1a and 1c"},
                     {"x0", Type::Numbers, {1, 1, 1}, "offset of examples 1a and 1b"},
                     {"a", Type::Numbers, {1, 1, 1}, "amplitude of example 1b"},
                     {"omega", Type::Number, 3.0, "angular frequency of examples 1a and 1c"},
                     {"epsilon", Type::Number, 0.5, "exponent gap of example 1b"},
                     {"t0", Type::Number, 1.0, "first sample time"},
                     {"t_final", Type::Number, nullptr, "last sample time", true},
                     {"tol", Type::Number, nullptr, "convergence tolerance, 2e-3 for 1b and 1e-3 otherwise", true}},
                    cmd_asymvel});
    cmds.push_back({"classical-sim", "integrate a classical N-bigbang and estimate its asymptotic velocity",
                    {{"masses", Type::Numbers, {1.0}, "particle masses"},
                     {"velocities", Type::Numbers, {2.0, 0.0, 0.0}, "initial velocities, 3 per particle"},
                     {"external", Type::Potential, barrier, "central potential acting on each particle"},
                     {"pair", Type::Potential, zero, "pair potential acting on every pair"},
                     {"t_final", Type::Number, 20.0, "final time"},
                     {"dt", Type::Number, 2e-5, "time step"},
                     {"tol", Type::Number, 1e-3, "velocity convergence tolerance"}},
                    cmd_classical_sim});
    cmds.push_back({"boundary-solve", "asymptotic boundary condition v_I(t) for the barrier",
                    {{"m", Type::Number, 1.0, "mass"},
                     {"V0", Type::Number, 0.5, "barrier height"},
                     {"a", Type::Number, 1.0, "barrier half-width"},
                     {"v", Type::Number, 3.0, "asymptotic boundary condition"},
                     {"t_min", Type::Number, 1e2, "first time"},
                     {"t_max", Type::Number, 1e6, "last time"},
                     {"ratio", Type::Number, 1.25, "geometric time ratio"}},
                    cmd_boundary_solve});
    cmds.push_back({"cross-section", "classical differential cross-section sigma(theta)",
                    {{"potential", Type::Potential, json{{"kind", "power"}, {"k", 1.0}, {"n", 12.0}}, "central potential"},
                     {"energy", Type::Number, 1.0, "beam energy"},
                     {"mass", Type::Number, 1.0, "particle mass"},
                     {"intensity", Type::Number, 1.0, "beam intensity"},
                     {"theta_min", Type::Number, 0.5, "smallest angle"},
                     {"theta_max", Type::Number, 2.8, "largest angle"},
                     {"n_theta", Type::Integer, 100, "number of angles"},
                     {"s_min", Type::Number, 0.0, "smallest impact parameter"},
                     {"s_max", Type::Number, nullptr, "largest impact parameter", true}},
                    cmd_cross_section});
    {
        auto f = grid_fields(4096, 25.6, 0.05, {0.075, 0.15, 0.3}, 0.01);
        f.push_back({"potential", Type::Potential, zero, "central potential"});
        f.push_back({"boxes", Type::Boxes, json::array({{0.0, 1.0}, {-1.0, -0.25}, {0.5, 0.75}}), "velocity boxes"});
        f.push_back({"absorber", Type::Bool, false, "absorbing boundary layer"});
        f.push_back({"state", Type::String, nullptr, "initial state file instead of a point source", true});
        f.push_back({"save_state", Type::String, nullptr, "file for the final state, relative to --out", true});
        cmds.push_back({"quantum-measure", "asymptotic quantum measure of velocity boxes", f, cmd_quantum_measure});
    }
    {
        auto f = grid_fields(8192, 400.0, 0.5, {1, 2, 5, 10, 20, 40}, 0.05);
        f.push_back({"transform", Type::Transform, json{{"name", "log_drift"}, {"c", 0.5}}, "causal transform"});
        f.push_back({"I", Type::Numbers, {-1.0, 1.0}, "velocity interval"});
        f.push_back({"epsilons", Type::Numbers, {0.2, 0.3}, "sandwich margins"});
        f.push_back({"require_identical", Type::Bool, true, "reject transforms that are not asymptotically identical"});
        f.push_back({"gap_tolerance", Type::Number, 0.05, "relative gap that counts as a violation"});
        cmds.push_back({"aet-check", "invariance of the quantum measure under a causal transform", f, cmd_aet_check});
    }
    {
        auto f = grid_fields(16384, 320.0, 0.25, {2.5, 5, 10, 20}, 0.005);
        f.erase(std::remove_if(f.begin(), f.end(), [](const Field& x) { return x.name == "mass"; }), f.end());
        f.push_back({"m", Type::Number, 1.0, "mass"});
        f.push_back({"V0", Type::Number, 0.5, "barrier height"});
        f.push_back({"a", Type::Number, 1.0, "barrier half-width"});
        f.push_back({"box", Type::Numbers, {-1.0, 1.0}, "initial-velocity interval"});
        f.push_back({"source", Type::String, "quantum", "quantum or uniform"});
        cmds.push_back({"transfer", "corrected and naive transfer through the barrier flow", f, cmd_transfer});
    }
    cmds.push_back({"quotient", "quotient measure of a planar density by a group action",
                    {{"density", Type::String, "uniform", "uniform or one_plus_y2"},
                     {"density_value", Type::Number, 1.0, "value of the uniform density"},
                     {"window", Type::Numbers, {-5, -5, 5, 5}, "support [x_lo, y_lo, x_hi, y_hi]"},
                     {"cells", Type::Integer, 10, "cells per axis"},
                     {"action", Type::String, "translations", "translations or rotations"},
                     {"axis", Type::Integer, 0, "translated axis"},
                     {"g_lo", Type::Number, -1.0, "group window lower end"},
                     {"g_hi", Type::Number, 1.0, "group window upper end"},
                     {"offset", Type::Number, 0.0, "position of the transversal"},
                     {"b_boxes", Type::Boxes, json::array({{0.1, 0.8}}), "transversal intervals"},
                     {"invariance_tolerance", Type::Number, 1e-9, "allowed non-invariance"},
                     {"window_tolerance", Type::Number, 1e-9, "allowed group-window dependence"}},
                    cmd_quotient});
    cmds.push_back({"bernoulli", "doubling-map frequencies and law-of-large-numbers deviation measures",
                    {{"x0", Type::Numbers, {1, 7}, "rational initial state [numerator, denominator]"},
                     {"horizons", Type::Numbers, {3, 30, 300}, "orbit lengths for the frequency table"},
                     {"P", Type::Number, 0.5, "event probability (dyadic)"},
                     {"epsilons", Type::Numbers, {0.05, 0.1}, "deviation thresholds"},
                     {"ns", Type::Numbers, {100, 1000, 10000}, "numbers of events"},
                     {"samples", Type::Integer, 20000, "Monte Carlo samples"}},
                    cmd_bernoulli});
    {
        auto f = grid_fields(16384, 320.0, 0.25, {2.5, 5, 10, 20}, 0.005);
        f.push_back({"potential", Type::Potential, barrier, "zero or square_barrier"});
        f.push_back({"boxes", Type::Boxes, json::array({{-1.0, -0.5}, {0.0, 0.5}, {0.25, 0.75}, {0.5, 1.0}}),
                     "velocity boxes"});
        cmds.push_back({"ncdic", "pi_C, pi_Q, mu_C and mu_Q on velocity boxes", f, cmd_ncdic});
    }
    cmds.push_back({"suite", "run the acceptance battery",
                    {{"only", Type::Strings, json::array(), "modules to run"},
                     {"state", Type::String, nullptr, "state file to verify before running", true}},
                    cmd_suite});

    for (auto& cmd : cmds) cmd.schema.push_back({"seed", Type::Integer, cmd.name == "suite" ? 2024 : 0, "random seed"});
    return cmds;
}

int execute(const Command& cmd, const std::string& config_path, const std::map<std::string, std::string>& overrides,
            const std::string& out_dir) {
    const auto start = std::chrono::steady_clock::now();
    json cfg = json::object();
    if (!config_path.empty()) {
        try {
            cfg = json::parse(io::read_file(config_path));
        } catch (const json::exception& e) {
            throw ConfigError(config_path + ": malformed JSON: " + e.what());
        } catch (const IoError& e) {
            throw ConfigError(e.what());
        }
    }
    for (const auto& f : cmd.schema) {
        const auto it = overrides.find(f.name);
        if (it != overrides.end()) cfg[f.name] = parse_override(f, it->second);
    }
    Run run{validate(cmd.schema, cfg), out_dir, {}};
    fs::create_directories(run.out);

    const int code = cmd.run(run);

    io::RunManifest m;
    m.subcommand = cmd.name;
    m.config_json = run.cfg.dump();
    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(io::fnv1a(m.config_json)));
    m.config_hash = hash;
    m.seed = run.cfg["seed"].get<std::uint64_t>();
    m.version = AML_VERSION;
    m.outputs = run.outputs;
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    io::write_manifest(run.out / (cmd.name + ".manifest.json"), m);
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Asymptotic-measure experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", AML_VERSION);

    const auto cmds = commands();
    std::string config_path, out_dir = ".";
    std::map<std::string, std::map<std::string, std::string>> overrides;
    std::vector<std::pair<const Command*, CLI::App*>> subs;
    for (const auto& cmd : cmds) {
        CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--out", out_dir, "output directory");
        for (const auto& f : cmd.schema) {
            std::string desc = f.help + " (" + type_name(f.type) + ")";
            if (!f.fallback.is_null()) desc += ", default " + f.fallback.dump();
            sub->add_option_function<std::string>(
                "--" + f.name, [&overrides, &cmd, &f](const std::string& v) { overrides[cmd.name][f.name] = v; }, desc);
        }
        subs.emplace_back(&cmd, sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    for (const auto& [cmd, sub] : subs) {
        if (!sub->parsed()) continue;
        try {
            return execute(*cmd, config_path, overrides[cmd->name], out_dir);
        } catch (const GridTooSmall& e) {
            std::fprintf(stderr, "error: grid too small at t=%s: %s\n", io::format_double(e.time()).c_str(), e.what());
            return e.exit_code();
        } catch (const Error& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return e.exit_code();
        } catch (const json::exception& e) {
            std::fprintf(stderr, "error: config: %s\n", e.what());
            return 1;
        } catch (const std::invalid_argument& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return 1;
        } catch (const fs::filesystem_error& e) {
            std::fprintf(stderr, "error: %s\n", e.what());
            return 3;
        }
    }
    return 1;
}
