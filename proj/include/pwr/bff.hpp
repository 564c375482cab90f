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

#ifndef pwr_bff_H
#define pwr_bff_H

#include <algorithm>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "pwr/channel.hpp"

namespace pwr {

/// Economy SVD of one CSI slice, singular values descending. Right singular
/// vectors are phase-normalized so the last entry of each column is real and
/// non-negative (compressed-feedback convention); the left vectors carry the
/// compensating phasor so U * S * V^H still reconstructs the input.
struct SvdTriple {
    CMat u;
    Eigen::VectorXd s;
    CMat v;
};

inline std::vector<SvdTriple> client_svd(const CsiTensor& csi) {
    if (csi.slices.empty())
        throw invalid_input("client_svd: empty CSI");
    std::vector<SvdTriple> out(csi.slices.size());
    for (size_t q = 0; q < csi.slices.size(); ++q) {
        Eigen::JacobiSVD<CMat> svd(csi.slices[q],
                                   Eigen::ComputeThinU | Eigen::ComputeThinV);
        SvdTriple t;
        t.u = svd.matrixU();
        t.s = svd.singularValues();
        t.v = svd.matrixV();
        for (Eigen::Index j = 0; j < t.v.cols(); ++j) {
            const Complex last = t.v(t.v.rows() - 1, j);
            if (std::abs(last) > 0.0) {
                const Complex phasor = std::conj(last) / std::abs(last);
                t.v.col(j) *= phasor;
                t.u.col(j) *= phasor;
            }
        }
        out[q] = std::move(t);
    }
    return out;
}

/// Givens-angle decomposition of one unit feedback column.
struct GivensAngles {
    std::vector<double> phi; // element phases, [0, 2*pi)
    std::vector<double> psi; // rotation angles, [0, pi/2]
};

namespace detail {

inline double wrap_two_pi(double x) {
    const double two_pi = 2.0 * kPi;
    double y = std::fmod(x, two_pi);
    if (y < 0.0)
        y += two_pi;
    return y;
}

} // namespace detail

/// Decomposes a unit vector with real non-negative last entry into N-1
/// element phases and N-1 Givens angles. The magnitude profile is
///   w[0] = prod_l sin(psi_l),   w[m] = cos(psi_m) * prod_{l>m} sin(psi_l),
/// so e_1 maps to all psi = pi/2 and e_N to all psi = 0; exhausted
/// remainders resolve degenerate angles to 0.
inline GivensAngles compress_v(const CVec& v) {
    const int n = static_cast<int>(v.size());
    if (n < 1 || v.norm() < 1e-12)
        throw invalid_input("compress_v: zero vector");
    if (std::abs(v.norm() - 1.0) > 1e-6)
        throw invalid_input("compress_v: vector must have unit norm");
    if (std::abs(std::imag(v(n - 1))) > 1e-9 || std::real(v(n - 1)) < -1e-9)
        throw invalid_input("compress_v: last entry must be real non-negative");

    GivensAngles g;
    g.phi.resize(n - 1);
    g.psi.resize(n - 1);
    std::vector<double> w(n);
    for (int m = 0; m < n - 1; ++m) {
        w[m] = std::abs(v(m));
        g.phi[m] = (w[m] > 0.0) ? detail::wrap_two_pi(std::arg(v(m))) : 0.0;
    }
    w[n - 1] = std::max(0.0, std::real(v(n - 1)));

    double rem = 1.0;
    for (int m = n - 1; m >= 1; --m) {
        double c = 1.0;
        if (rem > 1e-15)
            c = std::clamp(w[m] / rem, 0.0, 1.0);
        g.psi[m - 1] = std::acos(c);
        rem *= std::sin(g.psi[m - 1]);
    }
    return g;
}

/// Exact inverse of compress_v for unquantized angles.
inline CVec decompress_v(const GivensAngles& g) {
    const int n = static_cast<int>(g.phi.size()) + 1;
    if (g.psi.size() != g.phi.size())
        throw invalid_input("decompress_v: phi/psi length mismatch");
    std::vector<double> w(n);
    double rem = 1.0;
    for (int m = n - 1; m >= 1; --m) {
        w[m] = rem * std::cos(g.psi[m - 1]);
        rem *= std::sin(g.psi[m - 1]);
    }
    w[0] = rem;
    CVec v(n);
    for (int m = 0; m < n - 1; ++m)
        v(m) = std::polar(w[m], g.phi[m]);
    v(n - 1) = w[n - 1];
    return v;
}

// --- Uniform mid-rise quantizers on the feedback angle grids:
// --- phi on [0, 2*pi) with 2^b_phi points, psi on [0, pi/2) with 2^b_psi.

inline int quantize_phi_index(double phi, int bits) {
    if (bits <= 0)
        throw config_error("quantize_phi_index: bits must be positive");
    const double step = 2.0 * kPi / static_cast<double>(1 << bits);
    const int k = static_cast<int>(std::floor(detail::wrap_two_pi(phi) / step));
    return std::clamp(k, 0, (1 << bits) - 1);
}

inline double dequantize_phi(int index, int bits) {
    if (bits <= 0)
        throw config_error("dequantize_phi: bits must be positive");
    const double step = 2.0 * kPi / static_cast<double>(1 << bits);
    return (index + 0.5) * step;
}

inline int quantize_psi_index(double psi, int bits) {
    if (bits <= 0)
        throw config_error("quantize_psi_index: bits must be positive");
    const double step = kPi / (2.0 * static_cast<double>(1 << bits));
    const int k = static_cast<int>(std::floor(std::max(psi, 0.0) / step));
    return std::clamp(k, 0, (1 << bits) - 1);
}

inline double dequantize_psi(int index, int bits) {
    if (bits <= 0)
        throw config_error("dequantize_psi: bits must be positive");
    const double step = kPi / (2.0 * static_cast<double>(1 << bits));
    return (index + 0.5) * step;
}

struct QuantizedAngles {
    std::vector<int> phi;
    std::vector<int> psi;
};

inline QuantizedAngles quantize_angles(const GivensAngles& g, int b_phi, int b_psi) {
    QuantizedAngles q;
    q.phi.reserve(g.phi.size());
    q.psi.reserve(g.psi.size());
    for (double a : g.phi)
        q.phi.push_back(quantize_phi_index(a, b_phi));
    for (double a : g.psi)
        q.psi.push_back(quantize_psi_index(a, b_psi));
    return q;
}

inline GivensAngles dequantize_angles(const QuantizedAngles& q, int b_phi, int b_psi) {
    GivensAngles g;
    g.phi.reserve(q.phi.size());
    g.psi.reserve(q.psi.size());
    for (int k : q.phi)
        g.phi.push_back(dequantize_phi(k, b_phi));
    for (int k : q.psi)
        g.psi.push_back(dequantize_psi(k, b_psi));
    return g;
}

// --- Stream-gain quantization: average SNR on a 0.25 dB grid clamped to
// --- [-10, 53.75] dB (8 bits); per-subcarrier delta on a 1 dB grid clamped
// --- to [-8, +7] dB (4 bits), relative to the unquantized average.

struct QuantizedGain {
    int avg_index = 0;               // 0..255
    std::vector<int> delta_indices;  // per subcarrier, 0..15 (value = index - 8)
    double reference = 1.0;          // linear power the SNR grid is anchored to
};

inline constexpr double kAvgSnrMinDb = -10.0;
inline constexpr double kAvgSnrStepDb = 0.25;
inline constexpr int kDeltaSnrMinDb = -8;
inline constexpr int kDeltaSnrMaxDb = 7;

/// Quantizes per-subcarrier stream gains as SNR values. The reference is the
/// noise variance; a noiseless input (variance 0) anchors the grid at the
/// geometric mean of the singular-value powers instead, which centers the
/// quantized average at 0 dB. The reference travels with the report, so
/// dequantization is self-contained.
inline QuantizedGain quantize_gain(const std::vector<double>& sigma1,
                                   double noise_variance) {
    if (sigma1.empty())
        throw invalid_input("quantize_gain: empty singular value list");
    for (double s : sigma1)
        if (!(s > 0.0))
            throw invalid_input("quantize_gain: singular values must be positive");

    double ref = noise_variance;
    if (!(ref > 0.0)) {
        double log_acc = 0.0;
        for (double s : sigma1)
            log_acc += std::log(s * s);
        ref = std::exp(log_acc / static_cast<double>(sigma1.size()));
    }

    std::vector<double> snr_db(sigma1.size());
    double avg = 0.0;
    for (size_t q = 0; q < sigma1.size(); ++q) {
        snr_db[q] = 10.0 * std::log10(sigma1[q] * sigma1[q] / ref);
        avg += snr_db[q];
    }
    avg /= static_cast<double>(sigma1.size());

    QuantizedGain g;
    g.reference = ref;
    g.avg_index = std::clamp(
        static_cast<int>(std::llround((avg - kAvgSnrMinDb) / kAvgSnrStepDb)), 0, 255);
    g.delta_indices.resize(sigma1.size());
    for (size_t q = 0; q < sigma1.size(); ++q) {
        const int d = std::clamp(static_cast<int>(std::llround(snr_db[q] - avg)),
                                 kDeltaSnrMinDb, kDeltaSnrMaxDb);
        g.delta_indices[q] = d - kDeltaSnrMinDb;
    }
    return g;
}

inline std::vector<double> dequantize_gain(const QuantizedGain& g) {
    const double avg_db = kAvgSnrMinDb + kAvgSnrStepDb * g.avg_index;
    std::vector<double> sigma1(g.delta_indices.size());
    for (size_t q = 0; q < sigma1.size(); ++q) {
        const double snr_db = avg_db + (g.delta_indices[q] + kDeltaSnrMinDb);
        sigma1[q] = std::sqrt(g.reference * std::pow(10.0, snr_db / 10.0));
    }
    return sigma1;
}

/// One intercepted MU-MIMO feedback: quantized Givens angles of the strongest
/// right singular vector per subcarrier plus quantized stream gains.
struct BffReport {
    int client_index = 0;
    int n_a = 0; // feedback vector length
    int n_u = 0; // client antennas (for the covariance normalization)
    int b_phi = 9;
    int b_psi = 7;
    QuantizedGain gain;
    std::vector<QuantizedAngles> angles; // per subcarrier

    int num_subcarriers() const { return static_cast<int>(angles.size()); }

    /// Dequantized feedback vector for subcarrier q.
    CVec reconstruct_v(int q) const {
        return decompress_v(dequantize_angles(angles[q], b_phi, b_psi));
    }

    /// Dequantized strongest singular values, all subcarriers.
    std::vector<double> reconstruct_sigma1() const { return dequantize_gain(gain); }

    std::vector<std::uint8_t> serialize() const;
    static BffReport deserialize(std::span<const std::uint8_t> bytes);
    std::string debug_dump() const;
};

/// Client-side feedback generation: per-subcarrier SVD, strongest right
/// singular vector compressed to Givens angles, stream gains quantized.
inline BffReport build_bff(const CsiTensor& csi, double noise_variance,
                           int client_index = 0, int b_phi = 9, int b_psi = 7) {
    if (b_phi <= 0 || b_psi <= 0)
        throw config_error("build_bff: quantizer bit widths must be positive");
    const auto svds = client_svd(csi);
    BffReport r;
    r.client_index = client_index;
    r.n_a = static_cast<int>(csi.cols());
    r.n_u = static_cast<int>(csi.rows());
    r.b_phi = b_phi;
    r.b_psi = b_psi;
    r.angles.resize(svds.size());
    std::vector<double> sigma1(svds.size());
    for (size_t q = 0; q < svds.size(); ++q) {
        sigma1[q] = svds[q].s(0);
        r.angles[q] = quantize_angles(compress_v(svds[q].v.col(0)), b_phi, b_psi);
    }
    r.gain = quantize_gain(sigma1, noise_variance);
    return r;
}

/// PWR-side approximation of the client channel covariance from an
/// intercepted feedback:
///   R_u ~= 1/(Q*N_u) * sum_q vhat_q * sigma1hat_q^2 * vhat_q^H.
/// The squared singular value keeps the approximation consistent with the
/// full-CSI sample covariance H^H H / (Q*N_u).
inline CMat approx_covariance(const BffReport& report) {
    if (report.angles.empty() || report.n_a < 1 || report.n_u < 1)
        throw invalid_input("approx_covariance: malformed report");
    const int q_count = report.num_subcarriers();
    const auto sigma1 = report.reconstruct_sigma1();
    CMat r = CMat::Zero(report.n_a, report.n_a);
    for (int q = 0; q < q_count; ++q) {
        const CVec v = report.reconstruct_v(q);
        r.noalias() += (sigma1[q] * sigma1[q]) * (v * v.adjoint());
    }
    r /= static_cast<double>(q_count) * report.n_u;
    return (r + r.adjoint()) / 2.0; // exact Hermitian symmetry
}

// --- Binary record. Header: "BFF1", u16 client, u16 n_a, u16 n_u,
// --- u16 reserved, u32 q, u8 b_phi, u8 b_psi, u8 avg index, u8 reserved,
// --- f64 gain reference power. Payload: one LSB-first bitstream, per
// --- subcarrier a 4-bit delta index then the phi and psi angle indices in
// --- feedback order.

namespace detail {

class BitWriter {
  public:
    void put(std::uint32_t value, int bits) {
        for (int b = 0; b < bits; ++b) {
            if (bit_ == 0)
                bytes_.push_back(0);
            if ((value >> b) & 1u)
                bytes_.back() |= static_cast<std::uint8_t>(1u << bit_);
            bit_ = (bit_ + 1) % 8;
        }
    }
    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

  private:
    std::vector<std::uint8_t> bytes_;
    int bit_ = 0;
};

class BitReader {
  public:
    explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
    std::uint32_t get(int bits) {
        std::uint32_t v = 0;
        for (int b = 0; b < bits; ++b) {
            if (pos_ >= bytes_.size() * 8)
                throw invalid_input("BffReport: truncated payload");
            if ((bytes_[pos_ / 8] >> (pos_ % 8)) & 1u)
                v |= (1u << b);
            ++pos_;
        }
        return v;
    }

  private:
    std::span<const std::uint8_t> bytes_;
    size_t pos_ = 0;
};

template <typename T>
void append_pod(std::vector<std::uint8_t>& out, const T& v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T take_pod(std::span<const std::uint8_t>& in) {
    if (in.size() < sizeof(T))
        throw invalid_input("BffReport: truncated header");
    T v{};
    std::memcpy(&v, in.data(), sizeof(T));
    in = in.subspan(sizeof(T));
    return v;
}

} // namespace detail

inline std::vector<std::uint8_t> BffReport::serialize() const {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'B', 'F', 'F', '1'});
    detail::append_pod<std::uint16_t>(out, static_cast<std::uint16_t>(client_index));
    detail::append_pod<std::uint16_t>(out, static_cast<std::uint16_t>(n_a));
    detail::append_pod<std::uint16_t>(out, static_cast<std::uint16_t>(n_u));
    detail::append_pod<std::uint16_t>(out, 0);
    detail::append_pod<std::uint32_t>(out, static_cast<std::uint32_t>(angles.size()));
    detail::append_pod<std::uint8_t>(out, static_cast<std::uint8_t>(b_phi));
    detail::append_pod<std::uint8_t>(out, static_cast<std::uint8_t>(b_psi));
    detail::append_pod<std::uint8_t>(out, static_cast<std::uint8_t>(gain.avg_index));
    detail::append_pod<std::uint8_t>(out, 0);
    detail::append_pod<double>(out, gain.reference);

    detail::BitWriter bits;
    for (size_t q = 0; q < angles.size(); ++q) {
        bits.put(static_cast<std::uint32_t>(gain.delta_indices[q]), 4);
        for (int k : angles[q].phi)
            bits.put(static_cast<std::uint32_t>(k), b_phi);
        for (int k : angles[q].psi)
            bits.put(static_cast<std::uint32_t>(k), b_psi);
    }
    out.insert(out.end(), bits.bytes().begin(), bits.bytes().end());
    return out;
}

inline BffReport BffReport::deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "BFF1", 4) != 0)
        throw invalid_input("BffReport: bad magic");
    bytes = bytes.subspan(4);
    BffReport r;
    r.client_index = detail::take_pod<std::uint16_t>(bytes);
    r.n_a = detail::take_pod<std::uint16_t>(bytes);
    r.n_u = detail::take_pod<std::uint16_t>(bytes);
    detail::take_pod<std::uint16_t>(bytes);
    const auto q_count = detail::take_pod<std::uint32_t>(bytes);
    r.b_phi = detail::take_pod<std::uint8_t>(bytes);
    r.b_psi = detail::take_pod<std::uint8_t>(bytes);
    r.gain.avg_index = detail::take_pod<std::uint8_t>(bytes);
    detail::take_pod<std::uint8_t>(bytes);
    r.gain.reference = detail::take_pod<double>(bytes);
    if (r.n_a < 1 || r.b_phi <= 0 || r.b_psi <= 0)
        throw invalid_input("BffReport: malformed header");

    detail::BitReader bits(bytes);
    r.gain.delta_indices.resize(q_count);
    r.angles.resize(q_count);
    for (std::uint32_t q = 0; q < q_count; ++q) {
        r.gain.delta_indices[q] = static_cast<int>(bits.get(4));
        r.angles[q].phi.resize(r.n_a - 1);
        r.angles[q].psi.resize(r.n_a - 1);
        for (int& k : r.angles[q].phi)
            k = static_cast<int>(bits.get(r.b_phi));
        for (int& k : r.angles[q].psi)
            k = static_cast<int>(bits.get(r.b_psi));
    }
    return r;
}

inline std::string BffReport::debug_dump() const {
    std::ostringstream os;
    os << "bff client=" << client_index << " q=" << num_subcarriers()
       << " n_a=" << n_a << " n_u=" << n_u << " b_phi=" << b_phi
       << " b_psi=" << b_psi << " avg_index=" << gain.avg_index
       << " gain_reference=" << gain.reference << "\n";
    for (int q = 0; q < num_subcarriers(); ++q) {
        os << q << ": delta=" << (gain.delta_indices[q] + kDeltaSnrMinDb) << " phi=[";
        for (size_t i = 0; i < angles[q].phi.size(); ++i)
            os << (i ? " " : "") << angles[q].phi[i];
        os << "] psi=[";
        for (size_t i = 0; i < angles[q].psi.size(); ++i)
            os << (i ? " " : "") << angles[q].psi[i];
        os << "]\n";
    }
    return os.str();
}

} // namespace pwr

#endif
