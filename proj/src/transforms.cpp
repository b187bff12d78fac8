#include <cmath>
#include <stdexcept>

#include "aml/geometry.hpp"

namespace aml::transforms {

namespace {
Mat3 rot_z(double theta) {
    return Eigen::AngleAxisd(theta, Vec3::UnitZ()).toRotationMatrix();
}
}  // namespace

CausalTransform galilean(const Mat3& rotation, const Vec3& v0, double t_shift, const Vec3& x_shift) {
    if ((rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("galilean: rotation is not orthogonal");
    CausalTransform f;
    f.name = "galilean";
    f.time_map = [t_shift](double t) { return t + t_shift; };
    f.space_map = [rotation, v0, x_shift](double t, const Vec3& x) -> Vec3 { return rotation * x - v0 * t + x_shift; };
    f.analytic_plus = [rotation, v0](const Vec3& v) -> Vec3 { return rotation * v - v0; };
    f.inverse_time_map = [t_shift](double t) { return t - t_shift; };
    f.inverse_space_map = [rotation, v0, x_shift](double t, const Vec3& y) -> Vec3 {
        return rotation.transpose() * (y + v0 * t - x_shift);
    };
    return f;
}

CausalTransform boost(const Vec3& v0) {
    auto f = galilean(Mat3::Identity(), v0);
    f.name = "boost";
    return f;
}

CausalTransform scale(double a) {
    if (!(a > 0)) throw std::invalid_argument("scale: factor must be positive");
    CausalTransform f;
    f.name = "scale";
    f.time_map = [a](double t) { return a * t; };
    f.space_map = [a](double, const Vec3& x) -> Vec3 { return a * x; };
    f.analytic_plus = [](const Vec3& v) { return v; };
    f.inverse_time_map = [a](double t) { return t / a; };
    f.inverse_space_map = [a](double, const Vec3& y) -> Vec3 { return y / a; };
    return f;
}

CausalTransform log_drift(double c, const Vec3& axis) {
    CausalTransform f;
    f.name = "log_drift";
    f.time_map = [](double t) { return t; };
    f.space_map = [c, axis](double t, const Vec3& x) -> Vec3 { return x + c * std::log1p(std::abs(t)) * axis; };
    f.analytic_plus = [](const Vec3& v) { return v; };
    f.inverse_time_map = f.time_map;
    f.inverse_space_map = [c, axis](double t, const Vec3& y) -> Vec3 {
        return y - c * std::log1p(std::abs(t)) * axis;
    };
    return f;
}

CausalTransform shear_over_t() {
    CausalTransform f;
    f.name = "shear_over_t";
    f.time_map = [](double t) { return t; };
    f.space_map = [](double t, const Vec3& x) -> Vec3 { return x / t; };
    f.analytic_plus = [](const Vec3&) -> Vec3 { return Vec3::Zero(); };
    f.inverse_time_map = f.time_map;
    f.inverse_space_map = [](double t, const Vec3& y) -> Vec3 { return y * t; };
    return f;
}

CausalTransform time_stretch() {
    CausalTransform f;
    f.name = "time_stretch";
    f.time_map = [](double t) { return t; };
    f.space_map = [](double t, const Vec3& x) -> Vec3 { return x * t; };
    f.inverse_time_map = f.time_map;
    f.inverse_space_map = [](double t, const Vec3& y) -> Vec3 { return y / t; };
    return f;
}

CausalTransform swirl(double theta_inf) {
    CausalTransform f;
    f.name = "swirl";
    f.time_map = [](double t) { return t; };
    f.space_map = [theta_inf](double t, const Vec3& x) -> Vec3 {
        return rot_z(theta_inf * t / (1.0 + t)) * x;
    };
    f.analytic_plus = [theta_inf](const Vec3& v) -> Vec3 { return rot_z(theta_inf) * v; };
    f.inverse_time_map = f.time_map;
    f.inverse_space_map = [theta_inf](double t, const Vec3& y) -> Vec3 {
        return rot_z(-theta_inf * t / (1.0 + t)) * y;
    };
    return f;
}

CausalTransform sine_boost(const Vec3& v0, double omega) {
    CausalTransform f;
    f.name = "sine_boost";
    f.time_map = [](double t) { return t; };
    f.space_map = [v0, omega](double t, const Vec3& x) -> Vec3 { return x + v0 * t * std::sin(omega * t); };
    f.inverse_time_map = f.time_map;
    f.inverse_space_map = [v0, omega](double t, const Vec3& y) -> Vec3 { return y - v0 * t * std::sin(omega * t); };
    return f;
}

CausalTransform space_scale(double a) {
    if (a == 0) throw std::invalid_argument("space_scale: factor must be nonzero");
    CausalTransform f;
    f.name = "space_scale";
    f.time_map = [](double t) { return t; };
    f.space_map = [a](double, const Vec3& x) -> Vec3 { return a * x; };
    f.analytic_plus = [a](const Vec3& v) -> Vec3 { return a * v; };
    f.inverse_time_map = f.time_map;
    f.inverse_space_map = [a](double, const Vec3& y) -> Vec3 { return y / a; };
    return f;
}

}  // namespace aml::transforms
