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

#ifndef pwr_channel_H
#define pwr_channel_H

#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <vector>

#include "pwr/scenario.hpp"

namespace pwr {

/// Bistatic AP -> targets -> PWR channel, one N_P x N_A matrix per
/// subcarrier. Each slice factors exactly as
///   H_q = A(aoa) * diag(coeff_q) * A(aod)^H,
/// with per-target coefficients carrying a phase ramp across subcarriers set
/// by the bistatic delay. Direct AP->PWR leakage and static clutter are
/// assumed suppressed upstream.
struct RadarChannel {
    std::vector<CMat> slices;       // Q of N_P x N_A
    CMat path_coefficients;         // Q x K
    std::vector<double> aod, aoa;   // per target, radians
    int n_ap = 0, n_pwr = 0;
    double spacing = 0.5;

    int num_subcarriers() const { return static_cast<int>(slices.size()); }
    int num_targets() const { return static_cast<int>(aod.size()); }
};

/// AP -> client communication channel: dominant LoS outer product plus
/// multipath/clutter columns, one N_u x N_A matrix per subcarrier.
struct CommChannel {
    std::vector<CMat> slices;                  // Q of N_u x N_A
    CMat los_coefficients;                     // Q x N_u
    std::vector<CMat> multipath_coefficients;  // Q of N_u x (K_u-1)
    double los_aod = 0.0;
    std::vector<double> multipath_aod;         // K_u-1 entries
    int n_a = 0;
    double spacing = 0.5;

    int num_subcarriers() const { return static_cast<int>(slices.size()); }
};

/// Per-subcarrier CSI estimates plus the per-entry complex noise variance.
struct CsiTensor {
    std::vector<CMat> slices; // Q of rows x cols
    double noise_variance = 0.0;

    int num_subcarriers() const { return static_cast<int>(slices.size()); }
    Eigen::Index rows() const { return slices.empty() ? 0 : slices[0].rows(); }
    Eigen::Index cols() const { return slices.empty() ? 0 : slices[0].cols(); }

    void write(std::ostream& os) const;
    static CsiTensor read(std::istream& is);
};

/// Known NDP training matrix: columns are HE-LTF symbols, rows AP antennas.
/// A normalized Hadamard mapping, unitary and identical for every subcarrier.
inline CMat ndp_signal(int /*subcarrier*/, int n_a) {
    if (n_a < 1 || (n_a & (n_a - 1)) != 0)
        throw config_error("ndp_signal: antenna count must be 1 or a power of two");
    Eigen::MatrixXd h(1, 1);
    h(0, 0) = 1.0;
    while (h.rows() < n_a) {
        Eigen::MatrixXd g(h.rows() * 2, h.cols() * 2);
        g << h, h, h, -h;
        h = std::move(g);
    }
    return (h / std::sqrt(static_cast<double>(n_a))).cast<Complex>();
}

/// Synthesizes the radar channel. Per-target coefficients combine a random
/// global phase, a subcarrier phase ramp from the bistatic delay, and
/// bistatic range attenuation; amplitudes are rescaled so the mean per-path
/// power is exactly one, which makes the SNR definition map to 1/sigma^2.
inline RadarChannel synth_radar_channel(const Scenario& sc, std::mt19937_64& rng) {
    sc.validate();
    const int K = sc.num_targets();
    const int Q = sc.num_subcarriers;

    std::vector<double> alpha(K), tau(K), phase(K);
    std::uniform_real_distribution<double> uphase(0.0, 2.0 * kPi);
    for (int k = 0; k < K; ++k) {
        const double d1 = (sc.targets[k] - sc.ap_position).norm();
        const double d2 = (sc.targets[k] - sc.pwr_position).norm();
        if (d1 < 1e-9 || d2 < 1e-9)
            throw infeasible_geometry("synth_radar_channel: target co-located with AP or PWR");
        alpha[k] = 1.0 / (d1 * d2);
        tau[k] = (d1 + d2) / kSpeedOfLight;
        phase[k] = uphase(rng);
    }
    const AngleSet ang = sc.angles();
    double mean_sq = 0.0;
    for (double a : alpha)
        mean_sq += a * a;
    mean_sq /= K;
    const double scale = 1.0 / std::sqrt(mean_sq);
    for (double& a : alpha)
        a *= scale;

    RadarChannel ch;
    ch.aod = ang.aod;
    ch.aoa = ang.aoa;
    ch.n_ap = sc.ap_array.num_elements;
    ch.n_pwr = sc.pwr_array.num_elements;
    ch.spacing = sc.ap_array.spacing;

    CMat steer_aod(ch.n_ap, K), steer_aoa(ch.n_pwr, K);
    for (int k = 0; k < K; ++k) {
        steer_aod.col(k) = steering_vector(ang.aod[k], ch.n_ap, ch.spacing);
        steer_aoa.col(k) = steering_vector(ang.aoa[k], ch.n_pwr, ch.spacing);
    }

    ch.path_coefficients.resize(Q, K);
    ch.slices.resize(Q);
    for (int q = 0; q < Q; ++q) {
        for (int k = 0; k < K; ++k)
            ch.path_coefficients(q, k) = alpha[k] *
                std::polar(1.0, phase[k] - 2.0 * kPi * q * sc.subcarrier_spacing * tau[k]);
        ch.slices[q] = steer_aoa *
                       ch.path_coefficients.row(q).transpose().asDiagonal() *
                       steer_aod.adjoint();
    }
    return ch;
}

/// Synthesizes the AP -> client channel for client u. The LoS coefficients
/// have unit power per receive-antenna entry; the multipath block is rescaled
/// so total LoS power over total multipath power equals the configured Ricean
/// K-factor exactly. A +inf K-factor yields a pure LoS (rank-1) channel.
inline CommChannel synth_comm_channel(const Scenario& sc, int u, std::mt19937_64& rng) {
    sc.validate();
    if (u < 0 || u >= sc.num_clients())
        throw invalid_input("synth_comm_channel: no such client");
    const ClientNode& client = sc.clients[u];
    const double k_db = client.ricean_k_db;
    if (std::isnan(k_db) || k_db == -std::numeric_limits<double>::infinity())
        throw config_error("synth_comm_channel: Ricean K-factor must be finite or +inf");

    const int Q = sc.num_subcarriers;
    const int n_a = sc.ap_array.num_elements;
    const int n_u = client.array.num_elements;
    const int paths = client.num_multipath;
    const bool pure_los = std::isinf(k_db) || paths == 0;

    CommChannel ch;
    ch.n_a = n_a;
    ch.spacing = sc.ap_array.spacing;
    ch.los_aod = angle_of(sc.ap_position, sc.ap_array.boresight, client.position);

    const double d_los = (client.position - sc.ap_position).norm();
    const double tau_los = d_los / kSpeedOfLight;
    const double los_aoa = angle_of(client.position, client.array.boresight, sc.ap_position);
    const CVec rx_los = steering_vector(los_aoa, n_u, client.array.spacing);
    const CVec tx_los = steering_vector(ch.los_aod, n_a, ch.spacing);

    std::uniform_real_distribution<double> uphase(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> uangle(-kPi / 2.0, kPi / 2.0);
    std::uniform_real_distribution<double> udelay(0.0, 200e-9);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const double global_phase = uphase(rng);

    std::vector<double> mp_tau(paths), mp_aoa(paths);
    std::vector<Complex> mp_gain(paths);
    ch.multipath_aod.resize(paths);
    for (int p = 0; p < paths; ++p) {
        ch.multipath_aod[p] = uangle(rng);
        mp_aoa[p] = uangle(rng);
        mp_tau[p] = tau_los + udelay(rng);
        mp_gain[p] = Complex(gauss(rng), gauss(rng)) / std::sqrt(2.0);
    }

    CMat mp_tx(n_a, paths), mp_rx(n_u, paths);
    for (int p = 0; p < paths; ++p) {
        mp_tx.col(p) = steering_vector(ch.multipath_aod[p], n_a, ch.spacing);
        mp_rx.col(p) = steering_vector(mp_aoa[p], n_u, client.array.spacing);
    }

    ch.los_coefficients.resize(Q, n_u);
    ch.multipath_coefficients.assign(Q, CMat::Zero(n_u, paths));
    std::vector<CMat> los_part(Q), mp_part(Q);
    double p_los = 0.0, p_mp = 0.0;
    for (int q = 0; q < Q; ++q) {
        const Complex ramp =
            std::polar(1.0, global_phase - 2.0 * kPi * q * sc.subcarrier_spacing * tau_los);
        ch.los_coefficients.row(q) = (ramp * rx_los).transpose();
        los_part[q] = (ramp * rx_los) * tx_los.adjoint();
        p_los += los_part[q].squaredNorm();

        if (!pure_los) {
            CMat b(n_u, paths);
            for (int p = 0; p < paths; ++p)
                b.col(p) = mp_gain[p] *
                           std::polar(1.0, -2.0 * kPi * q * sc.subcarrier_spacing * mp_tau[p]) *
                           mp_rx.col(p);
            ch.multipath_coefficients[q] = std::move(b);
            mp_part[q] = ch.multipath_coefficients[q] * mp_tx.adjoint();
            p_mp += mp_part[q].squaredNorm();
        }
    }

    ch.slices.resize(Q);
    if (pure_los || p_mp <= 0.0) {
        for (int q = 0; q < Q; ++q) {
            ch.multipath_coefficients[q].setZero();
            ch.slices[q] = los_part[q];
        }
        return ch;
    }

    const double k_lin = std::pow(10.0, k_db / 10.0);
    const double mp_scale = std::sqrt(p_los / (p_mp * k_lin));
    for (int q = 0; q < Q; ++q) {
        ch.multipath_coefficients[q] *= mp_scale;
        ch.slices[q] = los_part[q] + mp_scale * mp_part[q];
    }
    return ch;
}

/// Passes the channel through the unitary NDP training and a least-squares
/// equalization: Z_q = H_q S + N_q, Hhat_q = Z_q S^H. The equalized noise
/// keeps the i.i.d. circular Gaussian statistics of N_q. An SNR of +inf
/// returns the channel unchanged with zero noise variance.
inline CsiTensor observe_csi(const std::vector<CMat>& channel, double snr_db,
                             std::mt19937_64& rng) {
    if (channel.empty())
        throw invalid_input("observe_csi: empty channel");
    if (std::isnan(snr_db))
        throw invalid_input("observe_csi: snr_db must not be NaN");

    CsiTensor out;
    if (snr_db == std::numeric_limits<double>::infinity()) {
        out.slices = channel;
        out.noise_variance = 0.0;
        return out;
    }

    const double sigma2 = std::pow(10.0, -snr_db / 10.0);
    const double dim_std = std::sqrt(sigma2 / 2.0);
    const int rows = static_cast<int>(channel[0].rows());
    const int n_a = static_cast<int>(channel[0].cols());
    const CMat s = ndp_signal(0, n_a);
    const CMat sh = s.adjoint();

    std::normal_distribution<double> gauss(0.0, 1.0);
    out.slices.resize(channel.size());
    for (size_t q = 0; q < channel.size(); ++q) {
        CMat noise(rows, n_a);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < n_a; ++c)
                noise(r, c) = Complex(dim_std * gauss(rng), dim_std * gauss(rng));
        out.slices[q] = (channel[q] * s + noise) * sh;
    }
    out.noise_variance = sigma2;
    return out;
}

// --- CsiTensor binary dump: "CSI1" magic, u32 dims, f64 noise variance,
// --- then per slice row-major f64 (re, im) pairs.

namespace detail {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is)
        throw invalid_input("CsiTensor: truncated stream");
    return v;
}

} // namespace detail

inline void CsiTensor::write(std::ostream& os) const {
    os.write("CSI1", 4);
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(rows()));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(cols()));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(slices.size()));
    detail::write_pod<double>(os, noise_variance);
    for (const CMat& m : slices)
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                detail::write_pod<double>(os, m(r, c).real());
                detail::write_pod<double>(os, m(r, c).imag());
            }
}

inline CsiTensor CsiTensor::read(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "CSI1", 4) != 0)
        throw invalid_input("CsiTensor: bad magic");
    const auto rows = detail::read_pod<std::uint32_t>(is);
    const auto cols = detail::read_pod<std::uint32_t>(is);
    const auto q = detail::read_pod<std::uint32_t>(is);
    CsiTensor t;
    t.noise_variance = detail::read_pod<double>(is);
    t.slices.assign(q, CMat(rows, cols));
    for (auto& m : t.slices)
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                const double re = detail::read_pod<double>(is);
                const double im = detail::read_pod<double>(is);
                m(r, c) = Complex(re, im);
            }
    return t;
}

} // namespace pwr

#endif
