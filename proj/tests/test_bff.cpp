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
#include "pwr/estimator.hpp"

using namespace pwr;
using Catch::Matchers::WithinAbs;

namespace {

std::mt19937_64 test_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

CVec random_unit_vector(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    CVec v(n);
    for (int i = 0; i < n; ++i)
        v(i) = Complex(g(rng), g(rng));
    v /= v.norm();
    // feedback phase convention: last entry real non-negative
    const Complex last = v(n - 1);
    if (std::abs(last) > 0.0)
        v *= std::conj(last) / std::abs(last);
    return v;
}

CMat random_complex_matrix(int r, int c, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    CMat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            m(i, j) = Complex(g(rng), g(rng));
    return m;
}

CsiTensor tensor_of(std::vector<CMat> slices, double nv = 0.0) {
    CsiTensor t;
    t.slices = std::move(slices);
    t.noise_variance = nv;
    return t;
}

} // namespace

TEST_CASE("svd of a normalized rank-one slice", "[bff]") {
    const CVec rx = steering_vector(0.3, 4);
    const CVec tx = steering_vector(-0.5, 4);
    const CMat h = rx * tx.adjoint() / std::sqrt(16.0);
    const auto svds = client_svd(tensor_of({h}));
    REQUIRE(svds.size() == 1);
    CHECK_THAT(svds[0].s(0), WithinAbs(1.0, 1e-12));
    CHECK(svds[0].s(1) <= 1e-12);
    CHECK(svds[0].s(2) <= 1e-12);
}

TEST_CASE("svd of the identity", "[bff]") {
    const auto svds = client_svd(tensor_of({CMat::Identity(4, 4)}));
    for (int i = 0; i < 4; ++i)
        CHECK_THAT(svds[0].s(i), WithinAbs(1.0, 1e-12));
}

TEST_CASE("svd reconstructs and respects the phase convention", "[bff]") {
    auto rng = test_rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const CMat h = random_complex_matrix(4, 4, rng);
        const auto svds = client_svd(tensor_of({h}));
        const SvdTriple& t = svds[0];
        const CMat rebuilt = t.u * t.s.asDiagonal() * t.v.adjoint();
        REQUIRE((rebuilt - h).norm() / h.norm() <= 1e-10);
        for (int j = 0; j < t.v.cols(); ++j) {
            CHECK(std::abs(std::imag(t.v(3, j))) < 1e-12);
            CHECK(std::real(t.v(3, j)) >= -1e-12);
        }
        REQUIRE(t.s(0) >= t.s(1));
        REQUIRE(t.s(1) >= t.s(2));
        REQUIRE(t.s(3) >= 0.0);
    }
}

TEST_CASE("compress maps basis vectors to the documented angles", "[bff]") {
    CVec e1 = CVec::Zero(4);
    e1(0) = 1.0;
    const GivensAngles a1 = compress_v(e1);
    for (double psi : a1.psi)
        CHECK_THAT(psi, WithinAbs(kPi / 2.0, 1e-12));
    for (double phi : a1.phi)
        CHECK_THAT(phi, WithinAbs(0.0, 1e-12));

    CVec e4 = CVec::Zero(4);
    e4(3) = 1.0;
    const GivensAngles a4 = compress_v(e4);
    for (double psi : a4.psi)
        CHECK_THAT(psi, WithinAbs(0.0, 1e-12));

    // round-trip oracle on both
    CHECK((decompress_v(a1) - e1).norm() < 1e-12);
    CHECK((decompress_v(a4) - e4).norm() < 1e-12);
}

TEST_CASE("unquantized compress/decompress is lossless", "[bff]") {
    auto rng = test_rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 5);
        const CVec v = random_unit_vector(n, rng);
        const CVec back = decompress_v(compress_v(v));
        const double fidelity = std::abs(back.dot(v));
        REQUIRE(1.0 - fidelity <= 1e-10);
    }
}

TEST_CASE("compress rejects bad vectors", "[bff]") {
    CHECK_THROWS_AS(compress_v(CVec::Zero(4)), invalid_input);
    CVec big = CVec::Zero(4);
    big(3) = 2.0;
    CHECK_THROWS_AS(compress_v(big), invalid_input);
    CVec bad_phase(2);
    bad_phase << Complex(0.0, 1.0) / std::sqrt(2.0), Complex(0.0, 1.0) / std::sqrt(2.0);
    CHECK_THROWS_AS(compress_v(bad_phase), invalid_input);
}

TEST_CASE("angle quantizer grids", "[bff]") {
    // phi = 0 snaps to the first mid-rise point pi/512 at 9 bits
    const int k = quantize_phi_index(0.0, 9);
    CHECK(k == 0);
    CHECK_THAT(dequantize_phi(k, 9), WithinAbs(kPi / 512.0, 1e-15));
    CHECK(std::abs(dequantize_phi(k, 9) - 0.0) <= kPi / 512.0 + 1e-15);

    // psi = pi/4 reconstructs within half a step at 7 bits
    const int kp = quantize_psi_index(kPi / 4.0, 7);
    CHECK(std::abs(dequantize_psi(kp, 7) - kPi / 4.0) <= kPi / 512.0 + 1e-15);

    CHECK_THROWS_AS(quantize_phi_index(0.1, 0), config_error);
    CHECK_THROWS_AS(quantize_psi_index(0.1, -1), config_error);
}

TEST_CASE("quantization is idempotent on grid points", "[bff]") {
    auto rng = test_rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const int b_phi = 5 + static_cast<int>(rng() % 5);
        const int b_psi = 4 + static_cast<int>(rng() % 5);
        const int ki = static_cast<int>(rng() % (1u << b_phi));
        const int kj = static_cast<int>(rng() % (1u << b_psi));
        REQUIRE(quantize_phi_index(dequantize_phi(ki, b_phi), b_phi) == ki);
        REQUIRE(quantize_psi_index(dequantize_psi(kj, b_psi), b_psi) == kj);
    }
}

TEST_CASE("quantization error shrinks with more bits", "[bff]") {
    auto rng = test_rng(4);
    double err_low = 0.0, err_high = 0.0;
    const int trials = 300;
    for (int trial = 0; trial < trials; ++trial) {
        const CVec v = random_unit_vector(4, rng);
        const GivensAngles g = compress_v(v);
        const CVec lo = decompress_v(dequantize_angles(quantize_angles(g, 5, 7), 5, 7));
        const CVec hi = decompress_v(dequantize_angles(quantize_angles(g, 7, 9), 7, 9));
        err_low += 1.0 - std::abs(lo.dot(v));
        err_high += 1.0 - std::abs(hi.dot(v));
    }
    CHECK(err_high < err_low);
}

TEST_CASE("gain quantizer handles a flat on-grid profile exactly", "[bff]") {
    // 12.25 dB is on the 0.25 dB grid; a flat profile has zero deltas
    const double sigma1 = std::pow(10.0, 12.25 / 20.0);
    const std::vector<double> flat(16, sigma1);
    const QuantizedGain g = quantize_gain(flat, 1.0);
    for (int d : g.delta_indices)
        CHECK(d == 8); // index 8 == 0 dB
    const auto back = dequantize_gain(g);
    for (double s : back)
        CHECK_THAT(s, WithinAbs(sigma1, 1e-12));
}

TEST_CASE("0.4 dB deviations round to a zero delta", "[bff]") {
    // profile {avg+0.4, avg-0.4} keeps the average at 10 dB
    const std::vector<double> s = {std::pow(10.0, 10.4 / 20.0),
                                   std::pow(10.0, 9.6 / 20.0)};
    const QuantizedGain g = quantize_gain(s, 1.0);
    CHECK(g.avg_index == static_cast<int>((10.0 + 10.0) / 0.25));
    CHECK(g.delta_indices[0] == 8);
    CHECK(g.delta_indices[1] == 8);
}

TEST_CASE("gain round trip stays within 0.625 dB inside the clamp ranges", "[bff]") {
    auto rng = test_rng(5);
    std::uniform_real_distribution<double> avg_db(-9.0, 52.0);
    std::uniform_real_distribution<double> delta_db(-7.4, 6.4);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const double avg = avg_db(rng);
        std::vector<double> snr(32);
        double mean = 0.0;
        for (double& v : snr) {
            v = avg + delta_db(rng);
            mean += v;
        }
        mean /= snr.size();
        // keep all deltas inside [-8, 7] relative to the realized mean
        bool ok = mean >= -9.9 && mean <= 53.7;
        for (double v : snr)
            ok = ok && (v - mean >= -7.9) && (v - mean <= 6.9);
        if (!ok)
            continue;
        ++checked;
        std::vector<double> sigma1(snr.size());
        for (size_t q = 0; q < snr.size(); ++q)
            sigma1[q] = std::pow(10.0, snr[q] / 20.0);
        const auto back = dequantize_gain(quantize_gain(sigma1, 1.0));
        for (size_t q = 0; q < snr.size(); ++q) {
            const double back_db = 20.0 * std::log10(back[q]);
            REQUIRE(std::abs(back_db - snr[q]) <= 0.625 + 1e-9);
        }
    }
    CHECK(checked > 50);
}

TEST_CASE("gain quantizer rejects non-positive singular values", "[bff]") {
    CHECK_THROWS_AS(quantize_gain({1.0, 0.0}, 1.0), invalid_input);
    CHECK_THROWS_AS(quantize_gain({}, 1.0), invalid_input);
}

TEST_CASE("bff report has one record per subcarrier and is deterministic", "[bff]") {
    auto rng = test_rng(6);
    std::vector<CMat> slices(512);
    for (auto& s : slices)
        s = random_complex_matrix(4, 4, rng);
    const CsiTensor csi = tensor_of(std::move(slices), 0.1);
    const BffReport a = build_bff(csi, csi.noise_variance, 1);
    const BffReport b = build_bff(csi, csi.noise_variance, 1);
    REQUIRE(a.num_subcarriers() == 512);
    REQUIRE(a.gain.delta_indices.size() == 512);
    for (int q = 0; q < 512; ++q) {
        REQUIRE(a.angles[q].phi.size() == 3);
        REQUIRE(a.angles[q].psi.size() == 3);
    }
    CHECK(a.serialize() == b.serialize());
}

TEST_CASE("feedback round trip on a noiseless rank-one channel", "[bff]") {
    auto rng = test_rng(7);
    std::uniform_real_distribution<double> angle(-1.2, 1.2);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<CMat> slices(64);
    std::vector<CVec> truth(64);
    for (int q = 0; q < 64; ++q) {
        const CVec rx = steering_vector(angle(rng), 4);
        const CVec tx = steering_vector(angle(rng), 4);
        const Complex c(g(rng), g(rng));
        slices[q] = c * rx * tx.adjoint();
        // the dominant right singular vector is the normalized, phase-fixed tx
        CVec v = tx / tx.norm();
        const Complex last = v(3);
        v *= std::conj(last) / std::abs(last);
        truth[q] = v;
    }
    const BffReport r = build_bff(tensor_of(std::move(slices), 0.0), 0.0, 0, 9, 7);
    for (int q = 0; q < 64; ++q) {
        const double fidelity = std::abs(r.reconstruct_v(q).dot(truth[q]));
        REQUIRE(fidelity >= 0.999);
    }
}

TEST_CASE("approximate covariance matches its defining sum", "[bff]") {
    auto rng = test_rng(8);
    std::vector<CMat> slices(16);
    for (auto& s : slices)
        s = random_complex_matrix(4, 4, rng);
    const CsiTensor csi = tensor_of(std::move(slices), 0.5);
    const BffReport r = build_bff(csi, csi.noise_variance, 0);

    // independent evaluation of the defining formula
    const auto sigma1 = r.reconstruct_sigma1();
    CMat expected = CMat::Zero(4, 4);
    for (int q = 0; q < 16; ++q) {
        const CVec v = r.reconstruct_v(q);
        expected += sigma1[q] * sigma1[q] * v * v.adjoint();
    }
    expected /= 16.0 * 4.0;

    const CMat approx = approx_covariance(r);
    CHECK((approx - expected).norm() <= 1e-12 * expected.norm());

    // Hermitian PSD contract
    CHECK((approx - approx.adjoint()).norm() == 0.0);
    Eigen::SelfAdjointEigenSolver<CMat> es(approx);
    CHECK(es.eigenvalues().minCoeff() >=
          -1e-12 * std::abs(std::real(approx.trace())));
}

TEST_CASE("single-subcarrier covariance normalization", "[bff]") {
    // with q = 1, n_u = 4 and sigma1^2 = q * n_u, the covariance is close to
    // the rank-one projector onto the feedback vector (quantization loss only)
    CVec e1 = CVec::Zero(4);
    e1(0) = 1.0;
    BffReport r;
    r.client_index = 0;
    r.n_a = 4;
    r.n_u = 4;
    r.b_phi = 16;
    r.b_psi = 14;
    r.angles = {quantize_angles(compress_v(e1), 16, 14)};
    r.gain = quantize_gain({2.0}, 1.0); // sigma1^2 = 4 = q * n_u
    const CMat cov = approx_covariance(r);
    CMat expected = CMat::Zero(4, 4);
    expected(0, 0) = 1.0;
    CHECK((cov - expected).norm() < 0.02);
}

TEST_CASE("covariance approximation approaches the full-CSI covariance", "[bff]") {
    // noiseless single-path channels at high quantizer resolution: a fixed
    // AoD/AoA pair with a per-subcarrier phase ramp and constant magnitude
    auto rng = test_rng(9);
    std::uniform_real_distribution<double> angle(-1.2, 1.2);
    std::uniform_real_distribution<double> uphase(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> gain(0.2, 3.0);
    for (int trial = 0; trial < 10; ++trial) {
        const CVec rx = steering_vector(angle(rng), 4);
        const CVec tx = steering_vector(angle(rng), 4);
        const double amp = gain(rng);
        std::vector<CMat> slices(32);
        for (auto& s : slices)
            s = amp * std::polar(1.0, uphase(rng)) * rx * tx.adjoint();
        const CsiTensor csi = tensor_of(std::move(slices), 0.0);
        const CMat reference = client_sample_cov(csi);
        const BffReport r = build_bff(csi, 0.0, 0, 12, 10);
        const CMat approx = approx_covariance(r);
        REQUIRE((approx - reference).norm() / reference.norm() <= 1e-3);
    }
}

TEST_CASE("dominant eigenvector aligns with the LoS direction", "[bff]") {
    // noiseless rank-one channel with a common transmit side across
    // subcarriers: the covariance's top eigenvector matches a(aod)
    auto rng = test_rng(10);
    std::normal_distribution<double> g(0.0, 1.0);
    const double aod = -0.4;
    const CVec tx = steering_vector(aod, 4);
    std::vector<CMat> slices(32);
    for (auto& s : slices) {
        const CVec rx = steering_vector(0.2, 4);
        s = Complex(g(rng), g(rng)) * rx * tx.adjoint();
    }
    const BffReport r = build_bff(tensor_of(std::move(slices), 0.0), 0.0, 0, 9, 7);
    const CMat cov = approx_covariance(r);
    Eigen::SelfAdjointEigenSolver<CMat> es(cov);
    const CVec top = es.eigenvectors().col(3);
    const double alignment = std::norm(top.dot(tx)) / 4.0;
    CHECK(alignment >= 0.99);
}

TEST_CASE("bff binary record round-trips", "[bff]") {
    auto rng = test_rng(11);
    std::vector<CMat> slices(32);
    for (auto& s : slices)
        s = random_complex_matrix(4, 4, rng);
    const CsiTensor csi = tensor_of(std::move(slices), 0.25);
    const BffReport r = build_bff(csi, csi.noise_variance, 2, 9, 7);
    const auto bytes = r.serialize();
    const BffReport back = BffReport::deserialize(bytes);
    CHECK(back.client_index == r.client_index);
    CHECK(back.n_a == r.n_a);
    CHECK(back.n_u == r.n_u);
    CHECK(back.b_phi == r.b_phi);
    CHECK(back.b_psi == r.b_psi);
    CHECK(back.gain.reference == r.gain.reference);
    CHECK(back.gain.avg_index == r.gain.avg_index);
    REQUIRE(back.angles.size() == r.angles.size());
    for (size_t q = 0; q < r.angles.size(); ++q) {
        REQUIRE(back.angles[q].phi == r.angles[q].phi);
        REQUIRE(back.angles[q].psi == r.angles[q].psi);
        REQUIRE(back.gain.delta_indices[q] == r.gain.delta_indices[q]);
    }
    CHECK(back.serialize() == bytes);

    const std::string dump = r.debug_dump();
    CHECK(dump.find("client=2") != std::string::npos);
}

TEST_CASE("bff binary layout is stable", "[bff]") {
    // hand-assembled single-subcarrier record: delta index 5 (4 bits), one
    // 2-bit phi index 3, one 2-bit psi index 1 -> payload byte 0x75
    BffReport r;
    r.client_index = 3;
    r.n_a = 2;
    r.n_u = 4;
    r.b_phi = 2;
    r.b_psi = 2;
    r.gain.reference = 1.0;
    r.gain.avg_index = 255;
    r.gain.delta_indices = {5};
    r.angles = {{{3}, {1}}};
    const std::vector<std::uint8_t> expected = {
        'B', 'F', 'F', '1',
        0x03, 0x00,             // client
        0x02, 0x00,             // n_a
        0x04, 0x00,             // n_u
        0x00, 0x00,             // reserved
        0x01, 0x00, 0x00, 0x00, // q
        0x02, 0x02,             // b_phi, b_psi
        0xff, 0x00,             // avg index, reserved
        0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xf0, 0x3f, // 1.0
        0x75,
    };
    CHECK(r.serialize() == expected);
    CHECK_THROWS_AS(
        BffReport::deserialize(std::vector<std::uint8_t>{'B', 'F', 'F', '1', 1}),
        invalid_input);
}
