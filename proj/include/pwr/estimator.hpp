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

#ifndef pwr_estimator_H
#define pwr_estimator_H

#include <algorithm>
#include <numeric>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "pwr/assignment.hpp"
#include "pwr/channel.hpp"

namespace pwr {

/// Covariances available at the PWR: the radar sample covariance from its own
/// CSI plus one approximate covariance per intercepted client feedback.
struct CovarianceSet {
    CMat radar_cov;                // (n_a*n_p) square
    std::vector<CMat> client_covs; // per client, n_a square
    double sigma2_r = 1.0;
    double sigma2_u = 1.0;
    int num_subcarriers = 1;
    int n_a = 4;
    int n_p = 4;
    int n_u = 4;
    double spacing = 0.5;

    void validate() const {
        const Eigen::Index n = static_cast<Eigen::Index>(n_a) * n_p;
        if (radar_cov.rows() != n || radar_cov.cols() != n)
            throw invalid_input("CovarianceSet: radar covariance has wrong shape");
        for (const CMat& c : client_covs)
            if (c.rows() != n_a || c.cols() != n_a)
                throw invalid_input("CovarianceSet: client covariance has wrong shape");
        if (num_subcarriers < 1 || n_a < 1 || n_p < 1 || n_u < 1)
            throw invalid_input("CovarianceSet: bad dimensions");
    }
};

namespace detail {

// Likelihood scales fall back to unit noise variance in noiseless runs;
// argmax positions are invariant to the positive scale.
inline double effective_sigma2(double sigma2) {
    return sigma2 > 0.0 ? sigma2 : 1.0;
}

} // namespace detail

/// Radar sample covariance: mean over subcarriers of the outer product of the
/// column-major vectorized CSI slices.
inline CMat radar_sample_cov(const CsiTensor& csi) {
    if (csi.slices.empty())
        throw invalid_input("radar_sample_cov: empty CSI");
    const Eigen::Index n = csi.rows() * csi.cols();
    CMat r = CMat::Zero(n, n);
    for (const CMat& m : csi.slices) {
        Eigen::Map<const CVec> v(m.data(), n);
        r.noalias() += v * v.adjoint();
    }
    r /= static_cast<double>(csi.slices.size());
    return (r + r.adjoint()) / 2.0;
}

/// Client-side sample covariance from full CSI, H^H H averaged over
/// subcarriers and receive antennas. Serves as the exact reference the
/// feedback-based approximation is measured against.
inline CMat client_sample_cov(const CsiTensor& csi) {
    if (csi.slices.empty())
        throw invalid_input("client_sample_cov: empty CSI");
    const Eigen::Index n_a = csi.cols();
    CMat r = CMat::Zero(n_a, n_a);
    for (const CMat& m : csi.slices)
        r.noalias() += m.adjoint() * m;
    r /= static_cast<double>(csi.slices.size()) * static_cast<double>(csi.rows());
    return (r + r.adjoint()) / 2.0;
}

/// Uniform angle grid in radians, endpoints inclusive.
struct AngleGrid {
    double lo = deg2rad(-80.0);
    double hi = deg2rad(80.0);
    double step = deg2rad(0.5);

    int size() const {
        return static_cast<int>(std::floor((hi - lo) / step + 0.5)) + 1;
    }
    double at(int i) const { return lo + step * i; }
    void validate() const {
        if (!(step > 0.0) || hi < lo)
            throw config_error("AngleGrid: need step > 0 and hi >= lo");
    }
};

inline AngleGrid default_music_grid() {
    return {deg2rad(-80.0), deg2rad(80.0), deg2rad(0.5)};
}
inline AngleGrid default_client_grid() {
    return {deg2rad(-80.0), deg2rad(80.0), deg2rad(0.25)};
}

struct MusicPeak {
    double aod = 0.0;
    double aoa = 0.0;
    double value = 0.0;
};

struct Music2dResult {
    std::vector<MusicPeak> peaks; // strongest first
    bool degenerate = false;      // fewer strict local maxima than targets
};

/// Two-dimensional MUSIC pseudo-spectrum over the joint AoD/AoA grid. The
/// noise subspace spans the eigenvectors beyond the num_targets strongest.
/// Peaks are strict 8-neighbour local maxima, ties broken by lower AoD then
/// lower AoA; if fewer than num_targets maxima exist, the highest grid values
/// are returned with the degenerate flag set.
inline Music2dResult music_2d(const CMat& radar_cov, int num_targets,
                              const AngleGrid& grid, int n_a, int n_p,
                              double spacing = 0.5) {
    grid.validate();
    const Eigen::Index n = static_cast<Eigen::Index>(n_a) * n_p;
    if (radar_cov.rows() != n || radar_cov.cols() != n)
        throw invalid_input("music_2d: covariance shape mismatch");
    if (num_targets < 1 || num_targets >= n)
        throw invalid_input("music_2d: need 1 <= num_targets < n_a*n_p");

    Eigen::SelfAdjointEigenSolver<CMat> es(radar_cov);
    const CMat noise_subspace = es.eigenvectors().leftCols(n - num_targets);
    const CMat m = noise_subspace * noise_subspace.adjoint();

    // no eigenvalue gap between signal and noise subspaces means the
    // spectrum carries no directional information
    const auto& ev = es.eigenvalues();
    const bool no_gap =
        !(ev(n - 1) > 0.0) || ev(n - num_targets - 1) >= ev(n - 1) * (1.0 - 1e-9);

    const int ni = grid.size();
    std::vector<CVec> steer_tx(ni), steer_rx(ni);
    for (int i = 0; i < ni; ++i) {
        steer_tx[i] = steering_vector(grid.at(i), n_a, spacing);
        steer_rx[i] = steering_vector(grid.at(i), n_p, spacing);
    }

    Eigen::MatrixXd spectrum(ni, ni); // (aod index, aoa index)
    CMat t(n_p, n_p);
    for (int i = 0; i < ni; ++i) {
        t.setZero();
        for (int r = 0; r < n_a; ++r)
            for (int c = 0; c < n_a; ++c)
                t.noalias() += (steer_tx[i](r) * std::conj(steer_tx[i](c))) *
                               m.block(static_cast<Eigen::Index>(r) * n_p,
                                       static_cast<Eigen::Index>(c) * n_p, n_p, n_p);
        for (int j = 0; j < ni; ++j) {
            const double denom = std::real(steer_rx[j].dot(t * steer_rx[j]));
            spectrum(i, j) = 1.0 / std::max(denom, 1e-30);
        }
    }

    auto tie_less = [&](const std::tuple<double, int, int>& a,
                        const std::tuple<double, int, int>& b) {
        if (std::get<0>(a) != std::get<0>(b))
            return std::get<0>(a) > std::get<0>(b);
        if (std::get<1>(a) != std::get<1>(b))
            return std::get<1>(a) < std::get<1>(b);
        return std::get<2>(a) < std::get<2>(b);
    };

    std::vector<std::tuple<double, int, int>> maxima;
    for (int i = 0; i < ni; ++i)
        for (int j = 0; j < ni; ++j) {
            const double v = spectrum(i, j);
            bool is_peak = true;
            for (int di = -1; di <= 1 && is_peak; ++di)
                for (int dj = -1; dj <= 1 && is_peak; ++dj) {
                    if (di == 0 && dj == 0)
                        continue;
                    const int ii = i + di, jj = j + dj;
                    if (ii < 0 || jj < 0 || ii >= ni || jj >= ni)
                        continue;
                    if (spectrum(ii, jj) >= v)
                        is_peak = false;
                }
            if (is_peak)
                maxima.emplace_back(v, i, j);
        }
    std::sort(maxima.begin(), maxima.end(), tie_less);

    Music2dResult out;
    out.degenerate = no_gap;
    if (static_cast<int>(maxima.size()) < num_targets) {
        out.degenerate = true;
        maxima.clear();
        maxima.reserve(static_cast<size_t>(ni) * ni);
        for (int i = 0; i < ni; ++i)
            for (int j = 0; j < ni; ++j)
                maxima.emplace_back(spectrum(i, j), i, j);
        std::sort(maxima.begin(), maxima.end(), tie_less);
    }
    out.peaks.reserve(num_targets);
    for (int k = 0; k < num_targets; ++k) {
        const auto& [v, i, j] = maxima[k];
        out.peaks.push_back({grid.at(i), grid.at(j), v});
    }
    return out;
}

struct ClientSpectrumResult {
    double aod = 0.0;
    double value = 0.0;
    bool degenerate = false; // flat spectrum
};

/// Client LoS AoD pre-estimate: argmax over the grid of the beamforming
/// quadratic form a(aod)^H R_u a(aod). Ties keep the lowest grid index; a
/// flat spectrum raises the degenerate flag.
inline ClientSpectrumResult music_client(const CMat& client_cov,
                                         const AngleGrid& grid,
                                         double spacing = 0.5) {
    grid.validate();
    const int n_a = static_cast<int>(client_cov.rows());
    if (client_cov.cols() != n_a || n_a < 1)
        throw invalid_input("music_client: covariance must be square");
    const int ni = grid.size();
    ClientSpectrumResult out;
    double best = -std::numeric_limits<double>::infinity();
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < ni; ++i) {
        const CVec a = steering_vector(grid.at(i), n_a, spacing);
        const double v = std::real(a.dot(client_cov * a));
        if (v > best) {
            best = v;
            out.aod = grid.at(i);
        }
        worst = std::min(worst, v);
    }
    out.value = best;
    out.degenerate = (best - worst) <= 1e-9 * std::max(std::abs(best), 1e-300);
    return out;
}

/// Associates client LoS AoDs with radar AoDs by minimum total absolute
/// angular difference (Hungarian); assignments costlier than the gate are
/// dropped. Returns the assigned target index per client, -1 if gated.
inline std::vector<int> associate(const std::vector<double>& client_aods,
                                  const std::vector<double>& radar_aods,
                                  double gate) {
    const int c = static_cast<int>(client_aods.size());
    const int k = static_cast<int>(radar_aods.size());
    if (c > k)
        throw invalid_input("associate: more clients than targets");
    if (c == 0)
        return {};
    Eigen::MatrixXd cost(c, k);
    for (int u = 0; u < c; ++u)
        for (int t = 0; t < k; ++t)
            cost(u, t) = std::abs(client_aods[u] - radar_aods[t]);
    std::vector<int> assigned = solve_assignment(cost);
    for (int u = 0; u < c; ++u)
        if (assigned[u] >= 0 && cost(u, assigned[u]) > gate)
            assigned[u] = -1;
    return assigned;
}

/// Per-target information available at the PWR after pre-estimation.
struct PreEstimateEntry {
    double aod = 0.0;        // radar AoD pre-estimate
    double aoa = 0.0;        // radar AoA pre-estimate
    double peak = 0.0;       // MUSIC peak height
    int client = -1;         // associated client index, or -1
    double client_aod = 0.0; // valid when client >= 0
};

struct PreEstimate {
    std::vector<PreEstimateEntry> targets;
    bool degenerate = false;

    int num_targets() const { return static_cast<int>(targets.size()); }
};

/// Bundles the radar MUSIC peaks with gated client associations. At most one
/// target per client and vice versa, by construction of the assignment.
inline PreEstimate make_pre_estimate(const Music2dResult& radar,
                                     const std::vector<ClientSpectrumResult>& clients,
                                     double gate) {
    PreEstimate pe;
    pe.degenerate = radar.degenerate;
    pe.targets.reserve(radar.peaks.size());
    for (const MusicPeak& p : radar.peaks)
        pe.targets.push_back({p.aod, p.aoa, p.value, -1, 0.0});

    std::vector<double> client_aods, radar_aods;
    for (const auto& c : clients) {
        client_aods.push_back(c.aod);
        pe.degenerate = pe.degenerate || c.degenerate;
    }
    for (const MusicPeak& p : radar.peaks)
        radar_aods.push_back(p.aod);

    const auto assigned = associate(client_aods, radar_aods, gate);
    for (size_t u = 0; u < assigned.size(); ++u) {
        if (assigned[u] >= 0) {
            pe.targets[assigned[u]].client = static_cast<int>(u);
            pe.targets[assigned[u]].client_aod = client_aods[u];
        }
    }
    return pe;
}

struct LogLik {
    double value = 0.0;
    bool degenerate = false;
};

namespace detail {

// Tr{ A (A^H A)^+ A^H R } * scale from the precomputed Gram blocks
// gram = A^H A and arr = A^H R A. A numerically rank-deficient Gram matrix
// (coincident candidates) switches to a Tikhonov-regularized inverse with
// lambda = 1e-9 * trace and sets the degeneracy flag.
inline LogLik gram_projector_trace(const CMat& gram, const CMat& arr, double scale) {
    LogLik out;
    Eigen::LDLT<CMat> ldlt(gram);
    bool deficient = ldlt.info() != Eigen::Success;
    if (!deficient) {
        const Eigen::VectorXd d = ldlt.vectorD().real();
        const double dmax = d.maxCoeff();
        deficient = !(dmax > 0.0) || d.minCoeff() < 1e-12 * dmax;
    }
    if (deficient) {
        out.degenerate = true;
        CMat reg = gram;
        const double lambda = 1e-9 * std::real(gram.trace());
        reg.diagonal().array() += (lambda > 0.0 ? lambda : 1e-30);
        ldlt.compute(reg);
    }
    out.value = scale * std::real(ldlt.solve(arr).trace());
    return out;
}

} // namespace detail

/// Radar log-likelihood of a joint AoD/AoA candidate set in trace form:
///   Q/(2*sigma_r^2) * Tr{ A' (A')^+ R }.
inline LogLik loglik_radar(const std::vector<std::pair<double, double>>& candidates,
                           const CMat& radar_cov, double sigma2,
                           int num_subcarriers, int n_a, int n_p,
                           double spacing = 0.5) {
    const int k = static_cast<int>(candidates.size());
    if (k < 1)
        throw invalid_input("loglik_radar: need at least one candidate");
    const Eigen::Index n = static_cast<Eigen::Index>(n_a) * n_p;
    if (radar_cov.rows() != n || radar_cov.cols() != n)
        throw invalid_input("loglik_radar: covariance shape mismatch");

    CMat a(n, k);
    for (int j = 0; j < k; ++j)
        a.col(j) = joint_steering(candidates[j].first, candidates[j].second,
                                  n_a, n_p, spacing);
    const CMat gram = a.adjoint() * a;
    const CMat arr = a.adjoint() * (radar_cov * a);
    const double scale =
        num_subcarriers / (2.0 * detail::effective_sigma2(sigma2));
    return detail::gram_projector_trace(gram, arr, scale);
}

/// Client log-likelihood of a candidate LoS AoD in trace form; with a single
/// steering column the projector reduces to a^H R a / n_a:
///   Q*N_u/(2*sigma_u^2) * a^H R_u a / n_a.
inline double loglik_client(double aod, const CMat& client_cov, double sigma2,
                            int num_subcarriers, int n_u, double spacing = 0.5) {
    const int n_a = static_cast<int>(client_cov.rows());
    if (client_cov.cols() != n_a || n_a < 1)
        throw invalid_input("loglik_client: covariance must be square");
    const CVec a = steering_vector(aod, n_a, spacing);
    const double quad = std::real(a.dot(client_cov * a));
    const double scale = num_subcarriers * static_cast<double>(n_u) /
                         (2.0 * detail::effective_sigma2(sigma2));
    return scale * quad / n_a;
}

namespace detail {

// Per-target sweep objective: the other targets' steering columns are fixed,
// only the swept target's column changes per candidate, so the Gram blocks
// involving fixed columns are computed once.
class RadarSweepObjective {
  public:
    RadarSweepObjective(const CMat& radar_cov,
                        const std::vector<std::pair<double, double>>& fixed,
                        double scale, int n_a, int n_p, double spacing)
        : r_(radar_cov), scale_(scale), n_a_(n_a), n_p_(n_p), spacing_(spacing) {
        const int kf = static_cast<int>(fixed.size());
        const Eigen::Index n = static_cast<Eigen::Index>(n_a) * n_p;
        f_.resize(n, kf);
        for (int j = 0; j < kf; ++j)
            f_.col(j) = joint_steering(fixed[j].first, fixed[j].second, n_a, n_p, spacing);
        rf_ = r_ * f_;
        fhf_ = f_.adjoint() * f_;
        fhrf_ = f_.adjoint() * rf_;
    }

    LogLik eval(double aod, double aoa) const {
        const CVec a = joint_steering(aod, aoa, n_a_, n_p_, spacing_);
        const CVec ra = r_ * a;
        const int kf = static_cast<int>(f_.cols());
        CMat gram(kf + 1, kf + 1), arr(kf + 1, kf + 1);
        gram.topLeftCorner(kf, kf) = fhf_;
        arr.topLeftCorner(kf, kf) = fhrf_;
        const CVec fha = f_.adjoint() * a;
        const CVec fhra = f_.adjoint() * ra;
        gram.topRightCorner(kf, 1) = fha;
        gram.bottomLeftCorner(1, kf) = fha.adjoint();
        gram(kf, kf) = Complex(a.squaredNorm(), 0.0);
        arr.topRightCorner(kf, 1) = fhra;
        arr.bottomLeftCorner(1, kf) = fhra.adjoint();
        arr(kf, kf) = Complex(std::real(a.dot(ra)), 0.0);
        return gram_projector_trace(gram, arr, scale_);
    }

  private:
    const CMat& r_;
    CMat f_, rf_, fhf_, fhrf_;
    double scale_;
    int n_a_, n_p_;
    double spacing_;
};

} // namespace detail

} // namespace pwr

#endif
