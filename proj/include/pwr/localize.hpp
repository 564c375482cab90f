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

#ifndef pwr_localize_H
#define pwr_localize_H

#include <chrono>
#include <string>

#include "pwr/estimator.hpp"
#include "pwr/scenario.hpp"

namespace pwr {

/// Fixed AP/PWR geometry the estimators need to map candidate positions to
/// angles.
struct RadarGeometry {
    Vec2 ap_position = Vec2(0.0, 0.0);
    Vec2 pwr_position = Vec2(10.0, 0.0);
    Vec2 ap_boresight = Vec2(0.0, 1.0);
    Vec2 pwr_boresight = Vec2(0.0, 1.0);
    double spacing = 0.5;
};

inline RadarGeometry geometry_of(const Scenario& sc) {
    return {sc.ap_position, sc.pwr_position, sc.ap_array.boresight,
            sc.pwr_array.boresight, sc.ap_array.spacing};
}

/// Position-search configuration: a coarse sweep over the region followed by
/// a local refinement window around the coarse argmax.
struct SearchConfig {
    std::array<double, 4> region = {0.0, 10.0, 5.0, 15.0}; // xmin xmax ymin ymax
    double coarse_step = 0.25;
    double refine_step = 0.05;
    double refine_radius = 0.5;
    bool refine = true;
    int max_passes = 5;
    double converge_tol = 0.05;
    bool single_pass = false;

    void validate() const {
        if (region[1] < region[0] || region[3] < region[2])
            throw config_error("SearchConfig: empty search region");
        if (!(coarse_step > 0.0) || !(refine_step > 0.0) || refine_radius < 0.0)
            throw config_error("SearchConfig: steps must be positive");
        if (max_passes < 1)
            throw config_error("SearchConfig: max_passes must be >= 1");
        if (!(converge_tol >= 0.0))
            throw config_error("SearchConfig: converge_tol must be >= 0");
    }
};

struct TargetEstimate {
    Vec2 position = Vec2(std::numeric_limits<double>::quiet_NaN(),
                         std::numeric_limits<double>::quiet_NaN());
    bool valid = false;
    bool associated = false;
    double objective = 0.0;
    bool degenerate = false;
};

struct LocalizationResult {
    std::string method;
    std::vector<TargetEstimate> targets; // in pre-estimate order
    double wall_time_s = 0.0;
};

namespace detail {

inline int grid_count(double lo, double hi, double step) {
    return static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
}

// Decoupled per-target maximization: target k's position is swept while the
// other K-1 targets stay at their current angle estimates; after each update
// the refined angles replace the old ones. Full passes repeat until every
// position moved less than the tolerance or the pass cap is reached.
inline LocalizationResult alternating_summation(const PreEstimate& pre,
                                                const CovarianceSet& covs,
                                                const RadarGeometry& geom,
                                                const SearchConfig& search,
                                                bool use_client,
                                                const char* method_name) {
    search.validate();
    covs.validate();
    const int k_count = pre.num_targets();
    if (k_count < 1)
        throw invalid_input("alternating_summation: empty pre-estimate");
    if (use_client)
        for (const auto& t : pre.targets)
            if (t.client >= 0 && t.client >= static_cast<int>(covs.client_covs.size()))
                throw invalid_input("alternating_summation: association without covariance");
    const auto t_start = std::chrono::steady_clock::now();

    std::vector<std::pair<double, double>> work(k_count);
    std::vector<std::optional<Vec2>> pos(k_count);
    for (int k = 0; k < k_count; ++k) {
        work[k] = {pre.targets[k].aod, pre.targets[k].aoa};
        pos[k] = try_triangulate(work[k].first, geom.ap_position, work[k].second,
                                 geom.pwr_position, geom.ap_boresight,
                                 geom.pwr_boresight);
    }

    // Strongest pre-estimate first; angle values break exact peak ties so the
    // processing order is invariant under input permutation.
    std::vector<int> order(k_count);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const auto& ta = pre.targets[a];
        const auto& tb = pre.targets[b];
        if (ta.peak != tb.peak)
            return ta.peak > tb.peak;
        if (ta.aod != tb.aod)
            return ta.aod < tb.aod;
        return ta.aoa < tb.aoa;
    });

    const double scale_r =
        covs.num_subcarriers / (2.0 * effective_sigma2(covs.sigma2_r));
    std::vector<double> objective(k_count, 0.0);

    // A rank-deficient pre-estimate (coincident targets) marks every target.
    const LogLik joint0 = loglik_radar(work, covs.radar_cov, covs.sigma2_r,
                                       covs.num_subcarriers, covs.n_a, covs.n_p,
                                       covs.spacing);
    std::vector<bool> degen(k_count, joint0.degenerate);

    const double x0 = search.region[0], x1 = search.region[1];
    const double y0 = search.region[2], y1 = search.region[3];
    const int nx = grid_count(x0, x1, search.coarse_step);
    const int ny = grid_count(y0, y1, search.coarse_step);

    for (int pass = 0; pass < search.max_passes; ++pass) {
        double max_change = 0.0;
        for (int k : order) {
            std::vector<std::pair<double, double>> fixed;
            fixed.reserve(k_count - 1);
            for (int j = 0; j < k_count; ++j)
                if (j != k)
                    fixed.push_back(work[j]);
            const RadarSweepObjective sweep(covs.radar_cov, fixed, scale_r,
                                            covs.n_a, covs.n_p, covs.spacing);
            const CMat* client_cov = nullptr;
            if (use_client && pre.targets[k].client >= 0)
                client_cov = &covs.client_covs[pre.targets[k].client];

            double best = -std::numeric_limits<double>::infinity();
            Vec2 best_pos(0.0, 0.0);
            bool best_degen = false;
            bool found = false;
            auto consider = [&](double x, double y) {
                const Vec2 p(x, y);
                const auto aod = try_angle_of(geom.ap_position, geom.ap_boresight, p);
                const auto aoa = try_angle_of(geom.pwr_position, geom.pwr_boresight, p);
                if (!aod || !aoa)
                    return;
                const LogLik l = sweep.eval(*aod, *aoa);
                double v = l.value;
                if (client_cov)
                    v += loglik_client(*aod, *client_cov, covs.sigma2_u,
                                       covs.num_subcarriers, covs.n_u, covs.spacing);
                if (v > best) {
                    best = v;
                    best_pos = p;
                    best_degen = l.degenerate;
                    found = true;
                }
            };

            // the current position competes first, so an update never lowers
            // the per-target objective
            if (pos[k] && pos[k]->x() >= x0 - 1e-12 && pos[k]->x() <= x1 + 1e-12 &&
                pos[k]->y() >= y0 - 1e-12 && pos[k]->y() <= y1 + 1e-12)
                consider(pos[k]->x(), pos[k]->y());

            for (int ix = 0; ix < nx; ++ix)
                for (int iy = 0; iy < ny; ++iy)
                    consider(x0 + ix * search.coarse_step, y0 + iy * search.coarse_step);

            if (search.refine && found) {
                const Vec2 center = best_pos;
                const int nr = static_cast<int>(
                    std::floor(search.refine_radius / search.refine_step + 1e-9));
                for (int ix = -nr; ix <= nr; ++ix) {
                    const double x = center.x() + ix * search.refine_step;
                    if (x < x0 - 1e-12 || x > x1 + 1e-12)
                        continue;
                    for (int iy = -nr; iy <= nr; ++iy) {
                        const double y = center.y() + iy * search.refine_step;
                        if (y < y0 - 1e-12 || y > y1 + 1e-12)
                            continue;
                        consider(x, y);
                    }
                }
            }

            if (!found) {
                // whole region out of field for this geometry
                degen[k] = true;
                continue;
            }
            const double change =
                pos[k] ? (best_pos - *pos[k]).norm()
                       : std::numeric_limits<double>::infinity();
            pos[k] = best_pos;
            work[k] = {angle_of(geom.ap_position, geom.ap_boresight, best_pos),
                       angle_of(geom.pwr_position, geom.pwr_boresight, best_pos)};
            objective[k] = best;
            degen[k] = degen[k] || best_degen;
            max_change = std::max(max_change, change);
        }
        if (search.single_pass || max_change < search.converge_tol)
            break;
    }

    LocalizationResult out;
    out.method = method_name;
    out.targets.resize(k_count);
    for (int k = 0; k < k_count; ++k) {
        TargetEstimate& t = out.targets[k];
        if (pos[k]) {
            t.position = *pos[k];
            t.valid = true;
        }
        t.associated = use_client && pre.targets[k].client >= 0;
        t.objective = objective[k];
        t.degenerate = degen[k] || pre.degenerate;
    }
    out.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    return out;
}

} // namespace detail

/// Associative alternating summation: per-target position search maximizing
/// the radar likelihood plus, for targets with an associated feedback, the
/// client likelihood.
inline LocalizationResult localize_hybrid_as(const PreEstimate& pre,
                                             const CovarianceSet& covs,
                                             const RadarGeometry& geom,
                                             const SearchConfig& search) {
    return detail::alternating_summation(pre, covs, geom, search, true, "hybrid_as");
}

/// Alternating summation from the radar channel alone; the client term is
/// always omitted.
inline LocalizationResult localize_ndp_as(const PreEstimate& pre,
                                          const CovarianceSet& covs,
                                          const RadarGeometry& geom,
                                          const SearchConfig& search) {
    return detail::alternating_summation(pre, covs, geom, search, false, "ndp_as");
}

/// Baseline: triangulates each radar MUSIC pre-estimate directly. Targets
/// whose rays do not intersect are recorded as invalid.
inline LocalizationResult localize_music_ndp(const PreEstimate& pre,
                                             const RadarGeometry& geom) {
    const auto t_start = std::chrono::steady_clock::now();
    LocalizationResult out;
    out.method = "music_ndp";
    out.targets.resize(pre.num_targets());
    for (int k = 0; k < pre.num_targets(); ++k) {
        const auto& e = pre.targets[k];
        const auto p = try_triangulate(e.aod, geom.ap_position, e.aoa,
                                       geom.pwr_position, geom.ap_boresight,
                                       geom.pwr_boresight);
        TargetEstimate& t = out.targets[k];
        if (p) {
            t.position = *p;
            t.valid = true;
        }
        t.objective = e.peak;
        t.degenerate = pre.degenerate;
    }
    out.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    return out;
}

/// Baseline: as localize_music_ndp, but targets with an associated feedback
/// replace the radar AoD with the client LoS AoD before triangulation.
inline LocalizationResult localize_music_bff(const PreEstimate& pre,
                                             const RadarGeometry& geom) {
    const auto t_start = std::chrono::steady_clock::now();
    LocalizationResult out;
    out.method = "music_bff";
    out.targets.resize(pre.num_targets());
    for (int k = 0; k < pre.num_targets(); ++k) {
        const auto& e = pre.targets[k];
        const double aod = e.client >= 0 ? e.client_aod : e.aod;
        const auto p = try_triangulate(aod, geom.ap_position, e.aoa,
                                       geom.pwr_position, geom.ap_boresight,
                                       geom.pwr_boresight);
        TargetEstimate& t = out.targets[k];
        if (p) {
            t.position = *p;
            t.valid = true;
        }
        t.associated = e.client >= 0;
        t.objective = e.peak;
        t.degenerate = pre.degenerate;
    }
    out.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    return out;
}

} // namespace pwr

#endif
