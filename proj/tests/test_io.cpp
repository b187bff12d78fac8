#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "aml/errors.hpp"
#include "aml/io.hpp"

using namespace aml;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "aml_io_test";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("FNV-1a reference vectors") {
    CHECK(io::fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(io::fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(io::fnv1a("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("doubles round-trip through text") {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0})
        CHECK(std::stod(io::format_double(x)) == x);
    io::Table t{{"a", "b"}, {{1.0, 0.5}}};
    CHECK(t.to_csv() == "a,b\n1,0.5\n");
    t.rows.push_back({1.0});
    CHECK_THROWS_AS(t.to_csv(), ConfigError);
}

TEST_CASE("trajectory and N-bigbang files") {
    Eigen::Matrix3Xd pos(3, 3);
    pos << 0, 1, 2, 0, 0.5, 1.0 / 3.0, 0, -1, -2;
    const SampledTrajectory tr({1.0, 2.0, 3.0}, pos);
    const auto path = scratch("traj.csv");
    io::write_trajectory_csv(path, tr);
    const auto back = io::read_trajectory_csv(path);
    CHECK(back.times() == tr.times());
    CHECK(back.positions() == tr.positions());

    Eigen::Matrix3Xd other = -pos;
    other.col(0).setZero();
    const NBigBang bb(SpaceTimePoint{1.0, Vec3::Zero()}, {SampledTrajectory({1.0, 2.0, 3.0}, pos),
                                                          SampledTrajectory({1.0, 2.0, 3.0}, other)});
    const auto manifest = scratch("bb.json");
    io::write_nbigbang(manifest, bb);
    const auto bb2 = io::read_nbigbang(manifest);
    CHECK(bb2.size() == 2);
    CHECK(bb2.trajectories()[1].positions() == other);

    std::ofstream(scratch("bad.csv")) << "t,x,y\n1,2,3\n";
    CHECK_THROWS_AS(io::read_trajectory_csv(scratch("bad.csv")), IoError);
    std::ofstream(scratch("nonmono.csv")) << "t,x,y,z\n2,0,0,0\n1,0,0,0\n";
    CHECK_THROWS_AS(io::read_trajectory_csv(scratch("nonmono.csv")), IoError);
    CHECK_THROWS_AS(io::read_trajectory_csv(scratch("missing.csv")), IoError);
}

TEST_CASE("grid states round-trip and corruption is detected") {
    PointSourceSpec s;
    s.x0 = Eigen::VectorXd::Zero(1);
    s.sigma = 0.5;
    GridState g = make_point_source(s, GridSpec{1, 256, 12.8, 2.0});
    g.t = 0.75;
    const auto path = scratch("state.bin");
    io::save_state(path, g);
    CHECK(fs::file_size(path) == 2 * 4 + 3 * 8 + 256 * 16);
    const GridState h = io::load_state(path);
    CHECK(h.dim == 1);
    CHECK(h.n == 256);
    CHECK(h.L == 12.8);
    CHECK(h.mass == 2.0);
    CHECK(h.t == 0.75);
    CHECK((h.psi == g.psi).all());

    fs::resize_file(path, fs::file_size(path) - 8);
    CHECK_THROWS_AS(io::load_state(path), IoError);
    std::ofstream(scratch("tiny.bin")) << "abc";
    CHECK_THROWS_AS(io::load_state(scratch("tiny.bin")), IoError);
}

TEST_CASE("atomic writes leave no temporary file") {
    const auto path = scratch("atomic.txt");
    io::atomic_write(path, "one");
    io::atomic_write(path, "two");
    CHECK(io::read_file(path) == "two");
    CHECK_FALSE(fs::exists(path.string() + ".tmp"));
}
