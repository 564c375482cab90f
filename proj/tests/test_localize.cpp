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

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "pwr/bff.hpp"
#include "pwr/localize.hpp"

using namespace pwr;

namespace {

struct Pipeline {
    Scenario sc;
    CovarianceSet covs;
    PreEstimate pre;
    RadarGeometry geom;
    SearchConfig search;
};

// channel sounding + covariance estimation + MUSIC pre-estimation on a
// hand-built scenario
Pipeline run_pipeline(std::vector<Vec2> targets, int n_clients,
                      std::uint64_t seed, double snr_db, int q = 64) {
    Scenario sc;
    sc.ap_position = Vec2(0.0, 0.0);
    sc.pwr_position = Vec2(10.0, 0.0);
    sc.ap_array = ArrayConfig{4, 0.5, Vec2(0.0, 1.0)};
    sc.pwr_array = ArrayConfig{4, 0.5, Vec2(0.0, 1.0)};
    sc.targets = std::move(targets);
    sc.num_subcarriers = q;
    for (int u = 0; u < n_clients; ++u) {
        ClientNode c;
        c.position = sc.targets[u];
        c.array = ArrayConfig{4, 0.5, (sc.ap_position - c.position).normalized()};
        c.num_multipath = 3;
        c.ricean_k_db = 15.0;
        sc.clients.push_back(c);
    }

    std::mt19937_64 rng(seed);
    const RadarChannel radar = synth_radar_channel(sc, rng);
    const CsiTensor radar_csi = observe_csi(radar.slices, snr_db, rng);

    Pipeline p;
    p.sc = sc;
    p.covs.radar_cov = radar_sample_cov(radar_csi);
    p.covs.sigma2_r = radar_csi.noise_variance;
    p.covs.sigma2_u = radar_csi.noise_variance;
    p.covs.num_subcarriers = q;
    p.covs.n_a = 4;
    p.covs.n_p = 4;
    p.covs.n_u = 4;

    std::vector<ClientSpectrumResult> spectra(n_clients);
    for (int u = 0; u < n_clients; ++u) {
        const CommChannel comm = synth_comm_channel(sc, u, rng);
        const CsiTensor csi = observe_csi(comm.slices, snr_db, rng);
        const BffReport bff = build_bff(csi, csi.noise_variance, u, 9, 7);
        p.covs.client_covs.push_back(approx_covariance(bff));
        spectra[u] = music_client(p.covs.client_covs[u], default_client_grid());
    }

    const Music2dResult peaks =
        music_2d(p.covs.radar_cov, sc.num_targets(), default_music_grid(), 4, 4);
    p.pre = make_pre_estimate(peaks, spectra, deg2rad(10.0));
    p.geom = geometry_of(sc);
    p.search.region = {0.0, 10.0, 5.0, 15.0};
    return p;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace

TEST_CASE("noiseless single client target localizes within one refined step",
          "[localize]") {
    const Vec2 truth(4.2, 9.3);
    Pipeline p = run_pipeline({truth}, 1, 1, kInf);
    const LocalizationResult hybrid = localize_hybrid_as(p.pre, p.covs, p.geom, p.search);
    const LocalizationResult ndp = localize_ndp_as(p.pre, p.covs, p.geom, p.search);
    REQUIRE(hybrid.targets.size() == 1);
    REQUIRE(hybrid.targets[0].valid);
    REQUIRE(ndp.targets[0].valid);
    CHECK((hybrid.targets[0].position - truth).norm() <= 0.1);
    CHECK((ndp.targets[0].position - truth).norm() <= 0.1);
    CHECK(hybrid.method == "hybrid_as");
    CHECK(ndp.method == "ndp_as");
    CHECK(hybrid.targets[0].associated);
    CHECK_FALSE(ndp.targets[0].associated);
}

TEST_CASE("hybrid without associations equals the NDP-only method", "[localize]") {
    Pipeline p = run_pipeline({Vec2(3.1, 8.4), Vec2(6.9, 11.2)}, 1, 2, 15.0);
    PreEstimate stripped = p.pre;
    for (auto& t : stripped.targets)
        t.client = -1;
    const LocalizationResult hybrid =
        localize_hybrid_as(stripped, p.covs, p.geom, p.search);
    const LocalizationResult ndp = localize_ndp_as(stripped, p.covs, p.geom, p.search);
    REQUIRE(hybrid.targets.size() == ndp.targets.size());
    for (size_t k = 0; k < ndp.targets.size(); ++k) {
        REQUIRE(hybrid.targets[k].valid == ndp.targets[k].valid);
        CHECK(hybrid.targets[k].position == ndp.targets[k].position);
        CHECK(hybrid.targets[k].objective == ndp.targets[k].objective);
    }
}

TEST_CASE("coincident pre-estimates are flagged and survive", "[localize]") {
    Pipeline p = run_pipeline({Vec2(3.1, 8.4), Vec2(6.9, 11.2)}, 0, 3, 20.0);
    PreEstimate coincident = p.pre;
    coincident.targets[1] = coincident.targets[0];
    const LocalizationResult res =
        localize_ndp_as(coincident, p.covs, p.geom, p.search);
    REQUIRE(res.targets.size() == 2);
    CHECK(res.targets[0].degenerate);
    CHECK(res.targets[1].degenerate);
    for (const auto& t : res.targets)
        CHECK(t.valid);
}

TEST_CASE("single-pass mode equals a one-pass cap", "[localize]") {
    Pipeline p = run_pipeline({Vec2(2.7, 7.7), Vec2(7.3, 12.4)}, 1, 4, 10.0);
    SearchConfig single = p.search;
    single.single_pass = true;
    SearchConfig capped = p.search;
    capped.max_passes = 1;
    const LocalizationResult a = localize_hybrid_as(p.pre, p.covs, p.geom, single);
    const LocalizationResult b = localize_hybrid_as(p.pre, p.covs, p.geom, capped);
    for (size_t k = 0; k < a.targets.size(); ++k)
        CHECK(a.targets[k].position == b.targets[k].position);
}

TEST_CASE("search configuration is validated", "[localize]") {
    Pipeline p = run_pipeline({Vec2(4.0, 9.0)}, 0, 5, kInf, 16);
    SearchConfig bad = p.search;
    bad.region = {5.0, 4.0, 5.0, 15.0};
    CHECK_THROWS_AS(localize_ndp_as(p.pre, p.covs, p.geom, bad), config_error);
    bad = p.search;
    bad.coarse_step = 0.0;
    CHECK_THROWS_AS(localize_ndp_as(p.pre, p.covs, p.geom, bad), config_error);
    bad = p.search;
    bad.max_passes = 0;
    CHECK_THROWS_AS(localize_ndp_as(p.pre, p.covs, p.geom, bad), config_error);
}

TEST_CASE("music triangulation reproduces exact pre-estimates", "[localize]") {
    const Vec2 truth(4.2, 9.3);
    RadarGeometry geom;
    PreEstimate pre;
    PreEstimateEntry e;
    e.aod = angle_of(geom.ap_position, geom.ap_boresight, truth);
    e.aoa = angle_of(geom.pwr_position, geom.pwr_boresight, truth);
    e.peak = 1.0;
    pre.targets.push_back(e);
    const LocalizationResult res = localize_music_ndp(pre, geom);
    REQUIRE(res.targets[0].valid);
    CHECK((res.targets[0].position - truth).norm() <= 1e-9);
}

TEST_CASE("music triangulation records parallel rays as invalid", "[localize]") {
    RadarGeometry geom;
    PreEstimate pre;
    pre.targets.push_back({0.0, 0.0, 1.0, -1, 0.0});
    const LocalizationResult res = localize_music_ndp(pre, geom);
    REQUIRE(res.targets.size() == 1);
    CHECK_FALSE(res.targets[0].valid);
    CHECK(std::isnan(res.targets[0].position.x()));
}

TEST_CASE("music baseline error stays within the grid-induced bound", "[localize]") {
    const Vec2 truth(4.2, 9.3);
    Pipeline p = run_pipeline({truth}, 0, 6, kInf);
    const LocalizationResult res = localize_music_ndp(p.pre, p.geom);
    REQUIRE(res.targets[0].valid);
    const double err = (res.targets[0].position - truth).norm();

    // propagate one grid step in each angle through the ray geometry
    const double step = default_music_grid().step;
    const double aod = angle_of(p.geom.ap_position, p.geom.ap_boresight, truth);
    const double aoa = angle_of(p.geom.pwr_position, p.geom.pwr_boresight, truth);
    double bound = 0.0;
    for (int si = -1; si <= 1; ++si)
        for (int sj = -1; sj <= 1; ++sj) {
            const auto q = try_triangulate(aod + si * step, p.geom.ap_position,
                                           aoa + sj * step, p.geom.pwr_position,
                                           p.geom.ap_boresight, p.geom.pwr_boresight);
            if (q)
                bound = std::max(bound, (*q - truth).norm());
        }
    CHECK(err <= bound * 1.05 + 1e-9);
}

TEST_CASE("substituting an exact feedback AoD improves triangulation", "[localize]") {
    const Vec2 truth(4.2, 9.3);
    RadarGeometry geom;
    const double aod = angle_of(geom.ap_position, geom.ap_boresight, truth);
    const double aoa = angle_of(geom.pwr_position, geom.pwr_boresight, truth);

    PreEstimate pre;
    PreEstimateEntry e;
    e.aod = aod + deg2rad(1.5); // radar AoD off by 1.5 degrees
    e.aoa = aoa;
    e.peak = 1.0;
    e.client = 0;
    e.client_aod = aod; // exact feedback AoD
    pre.targets.push_back(e);

    const LocalizationResult ndp = localize_music_ndp(pre, geom);
    const LocalizationResult bff = localize_music_bff(pre, geom);
    REQUIRE(ndp.targets[0].valid);
    REQUIRE(bff.targets[0].valid);
    CHECK(bff.targets[0].associated);
    const double err_ndp = (ndp.targets[0].position - truth).norm();
    const double err_bff = (bff.targets[0].position - truth).norm();
    CHECK(err_bff < err_ndp);
    CHECK(err_bff <= 1e-9);
}

TEST_CASE("music baselines coincide without associations", "[localize]") {
    Pipeline p = run_pipeline({Vec2(3.3, 8.1), Vec2(6.1, 12.3)}, 0, 7, 20.0);
    const LocalizationResult ndp = localize_music_ndp(p.pre, p.geom);
    const LocalizationResult bff = localize_music_bff(p.pre, p.geom);
    for (size_t k = 0; k < ndp.targets.size(); ++k) {
        REQUIRE(bff.targets[k].valid == ndp.targets[k].valid);
        if (ndp.targets[k].valid)
            CHECK(bff.targets[k].position == ndp.targets[k].position);
    }
}

TEST_CASE("a wrong association can degrade the feedback baseline", "[localize]") {
    // two targets, feedback AoDs deliberately swapped
    const Vec2 t0(3.0, 8.0), t1(7.0, 12.0);
    RadarGeometry geom;
    auto angles_of = [&](const Vec2& t) {
        return std::pair<double, double>{
            angle_of(geom.ap_position, geom.ap_boresight, t),
            angle_of(geom.pwr_position, geom.pwr_boresight, t)};
    };
    const auto [aod0, aoa0] = angles_of(t0);
    const auto [aod1, aoa1] = angles_of(t1);

    PreEstimate pre;
    pre.targets.push_back({aod0, aoa0, 2.0, 0, aod1}); // swapped client AoDs
    pre.targets.push_back({aod1, aoa1, 1.0, 1, aod0});

    const LocalizationResult ndp = localize_music_ndp(pre, geom);
    const LocalizationResult bff = localize_music_bff(pre, geom);
    const double err_ndp0 = (ndp.targets[0].position - t0).norm();
    const double err_bff0 = (bff.targets[0].position - t0).norm();
    CHECK(err_ndp0 <= 1e-9);
    CHECK(err_bff0 > err_ndp0); // recorded, not suppressed
}

TEST_CASE("alternating summation is permutation equivariant", "[localize]") {
    Pipeline p = run_pipeline({Vec2(2.5, 7.5), Vec2(5.0, 12.0), Vec2(8.0, 9.0)}, 0, 8,
                              20.0);
    REQUIRE(p.pre.num_targets() == 3);
    PreEstimate reversed = p.pre;
    std::reverse(reversed.targets.begin(), reversed.targets.end());
    const LocalizationResult a = localize_ndp_as(p.pre, p.covs, p.geom, p.search);
    const LocalizationResult b = localize_ndp_as(reversed, p.covs, p.geom, p.search);
    REQUIRE(a.targets.size() == 3);
    for (int k = 0; k < 3; ++k) {
        CHECK(a.targets[k].position == b.targets[2 - k].position);
        CHECK(a.targets[k].objective == b.targets[2 - k].objective);
    }
}

TEST_CASE("client term only adds information", "[localize]") {
    // the client likelihood is a non-negative quadratic form, so the hybrid
    // objective at any position dominates the radar-only objective
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        CMat m(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j)
                m(i, j) = Complex(g(rng), g(rng));
        const CMat psd = m * m.adjoint();
        std::uniform_real_distribution<double> uangle(-1.3, 1.3);
        REQUIRE(loglik_client(uangle(rng), psd, 1.0, 16, 4) >= 0.0);
    }
}
