// SPDX-License-Identifier: Apache-2.0
//
// pwrsim: passive Wi-Fi radar multitarget localization with
// beamforming-feedback fusion
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef pwr_geometry_H
#define pwr_geometry_H

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>

#include <Eigen/Dense>

#include "pwr/errors.hpp"

namespace pwr {

using Vec2 = Eigen::Vector2d;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using Complex = std::complex<double>;

inline constexpr double kSpeedOfLight = 299792458.0; // m/s
inline constexpr double kPi = std::numbers::pi;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Uniform linear array. Spacing is a fraction of the carrier wavelength;
/// boresight is the outward array normal in the 2D plane.
struct ArrayConfig {
    int num_elements = 4;
    double spacing = 0.5;
    Vec2 boresight = Vec2(0.0, 1.0);

    void validate() const {
        if (num_elements < 1)
            throw config_error("ArrayConfig: num_elements must be >= 1");
        if (!(spacing > 0.0) || !std::isfinite(spacing))
            throw config_error("ArrayConfig: spacing must be positive");
        if (std::abs(boresight.norm() - 1.0) > 1e-9)
            throw config_error("ArrayConfig: boresight must have unit norm");
    }
};

/// ULA steering vector. Element m carries phase 2*pi*spacing*m*sin(angle),
/// so the first element is always 1 and every element has unit modulus.
inline CVec steering_vector(double angle, int n, double spacing = 0.5) {
    if (!std::isfinite(angle))
        throw invalid_input("steering_vector: angle must be finite");
    if (n < 1)
        throw invalid_input("steering_vector: element count must be >= 1");
    CVec a(n);
    const double step = 2.0 * kPi * spacing * std::sin(angle);
    for (int m = 0; m < n; ++m)
        a(m) = std::polar(1.0, step * static_cast<double>(m));
    return a;
}

/// Joint AoD/AoA steering vector for vectorized n_pwr x n_ap channel slices.
/// Uses the column-major vectorization identity
///   vec(a(aoa) * b * a(aod)^H) = kron(conj(a(aod)), a(aoa)) * b,
/// which keeps the synthesizer and the estimators on one convention.
inline CVec joint_steering(double aod, double aoa, int n_ap, int n_pwr,
                           double spacing = 0.5) {
    const CVec at = steering_vector(aod, n_ap, spacing);
    const CVec ar = steering_vector(aoa, n_pwr, spacing);
    CVec out(static_cast<Eigen::Index>(n_ap) * n_pwr);
    for (int i = 0; i < n_ap; ++i)
        out.segment(static_cast<Eigen::Index>(i) * n_pwr, n_pwr) =
            std::conj(at(i)) * ar;
    return out;
}

/// Signed angle between the boresight and the observer->target direction.
/// Positive angles open towards the clockwise side of the boresight: for a
/// boresight of (0,1), positive angles point towards +x. Returns nullopt
/// when the target coincides with the observer or lies on/behind the array
/// plane (|angle| >= pi/2).
inline std::optional<double> try_angle_of(const Vec2& observer,
                                          const Vec2& boresight,
                                          const Vec2& target) {
    const Vec2 d = target - observer;
    const double forward = boresight.dot(d);
    if (d.squaredNorm() == 0.0 || forward <= 0.0)
        return std::nullopt;
    const double lateral = boresight.y() * d.x() - boresight.x() * d.y();
    return std::atan2(lateral, forward);
}

inline double angle_of(const Vec2& observer, const Vec2& boresight,
                       const Vec2& target) {
    if ((target - observer).squaredNorm() == 0.0)
        throw invalid_input("angle_of: target coincides with the observer");
    const auto angle = try_angle_of(observer, boresight, target);
    if (!angle)
        throw out_of_field("angle_of: target outside the +-90 degree field of view");
    return *angle;
}

/// Unit propagation direction for an angle relative to a boresight, using
/// the same clockwise-positive convention as angle_of.
inline Vec2 ray_direction(const Vec2& boresight, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return Vec2(boresight.x() * c + boresight.y() * s,
                -boresight.x() * s + boresight.y() * c);
}

/// Intersection of the departure ray from the AP and the arrival ray at the
/// PWR. Returns nullopt when the rays are parallel or meet behind an array.
inline std::optional<Vec2> try_triangulate(double aod, const Vec2& ap,
                                           double aoa, const Vec2& pwr,
                                           const Vec2& ap_boresight,
                                           const Vec2& pwr_boresight) {
    const Vec2 d1 = ray_direction(ap_boresight, aod);
    const Vec2 d2 = ray_direction(pwr_boresight, aoa);
    const double det = d1.x() * d2.y() - d1.y() * d2.x();
    if (std::abs(det) < 1e-12)
        return std::nullopt;
    const Vec2 w = pwr - ap;
    const double t = (w.x() * d2.y() - w.y() * d2.x()) / det;
    const double s = (w.x() * d1.y() - w.y() * d1.x()) / det;
    if (t <= 0.0 || s <= 0.0)
        return std::nullopt;
    return Vec2(ap + t * d1);
}

inline Vec2 triangulate(double aod, const Vec2& ap, double aoa,
                        const Vec2& pwr, const Vec2& ap_boresight,
                        const Vec2& pwr_boresight) {
    const auto p = try_triangulate(aod, ap, aoa, pwr, ap_boresight, pwr_boresight);
    if (!p)
        throw no_intersection("triangulate: rays are parallel or do not meet ahead of both arrays");
    return *p;
}

} // namespace pwr

#endif
