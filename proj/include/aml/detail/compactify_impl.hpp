#pragma once

#include "aml/errors.hpp"

namespace aml {

template <typename Scalar>
CompactPoint<Scalar> compactify(Scalar t, const Eigen::Matrix<Scalar, 3, 1>& x) {
    if (!(t > Scalar(0))) throw NonPositiveTime("compactify: time must be positive");
    return {Scalar(1) / t, x / t};
}

template <typename Scalar>
std::pair<Scalar, Eigen::Matrix<Scalar, 3, 1>> decompactify(const CompactPoint<Scalar>& p) {
    if (!(p.s > Scalar(0))) throw NonPositiveTime("decompactify: s must be positive");
    return {Scalar(1) / p.s, p.w / p.s};
}

}  // namespace aml
