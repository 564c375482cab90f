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

#ifndef pwr_scenario_H
#define pwr_scenario_H

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pwr/geometry.hpp"

namespace pwr {

/// A client user equipment. Client UEs are themselves radar targets; the
/// array boresight is oriented towards the AP when sampled.
struct ClientNode {
    Vec2 position = Vec2(0.0, 0.0);
    ArrayConfig array;         // N_u elements
    int num_multipath = 3;     // K_u - 1 clutter/reflection paths
    double ricean_k_db = 15.0; // LoS-to-multipath power ratio, >= 0 dB

    void validate() const {
        array.validate();
        if (num_multipath < 0)
            throw config_error("ClientNode: num_multipath must be >= 0");
        if (std::isnan(ricean_k_db) || ricean_k_db < 0.0)
            throw config_error("ClientNode: ricean_k_db must be >= 0 dB");
    }
};

/// Ground-truth angles of one scenario. All angles are radians relative to
/// the owning array's normal, clockwise-positive.
struct AngleSet {
    std::vector<double> aod;            // per target, at the AP array
    std::vector<double> aoa;            // per target, at the PWR array
    std::vector<double> client_los_aod; // per client, at the AP array
};

/// Full geometry of one Monte-Carlo draw. Targets with index < clients.size()
/// are the client targets, in the same order as `clients`.
struct Scenario {
    Vec2 ap_position = Vec2(0.0, 0.0);
    Vec2 pwr_position = Vec2(10.0, 0.0);
    ArrayConfig ap_array;
    ArrayConfig pwr_array;
    std::vector<ClientNode> clients;
    std::vector<Vec2> targets;
    int num_subcarriers = 512;
    double subcarrier_spacing = 78.125e3; // Hz

    int num_targets() const { return static_cast<int>(targets.size()); }
    int num_clients() const { return static_cast<int>(clients.size()); }
    bool is_client(int k) const { return k >= 0 && k < num_clients(); }

    /// Ground-truth AoD/AoA per target and LoS AoD per client.
    /// Throws out_of_field if any target is on/behind an array plane.
    AngleSet angles() const {
        AngleSet set;
        set.aod.reserve(targets.size());
        set.aoa.reserve(targets.size());
        for (const Vec2& t : targets) {
            set.aod.push_back(angle_of(ap_position, ap_array.boresight, t));
            set.aoa.push_back(angle_of(pwr_position, pwr_array.boresight, t));
        }
        for (const ClientNode& c : clients)
            set.client_los_aod.push_back(
                angle_of(ap_position, ap_array.boresight, c.position));
        return set;
    }

    void validate() const {
        ap_array.validate();
        pwr_array.validate();
        if (num_subcarriers < 1)
            throw config_error("Scenario: num_subcarriers must be >= 1");
        if (!(subcarrier_spacing > 0.0))
            throw config_error("Scenario: subcarrier_spacing must be positive");
        if (clients.size() > targets.size())
            throw config_error("Scenario: more clients than targets");
        for (const ClientNode& c : clients)
            c.validate();
    }

    /// Structured-text dump for reproducibility records.
    std::string dump() const {
        std::ostringstream os;
        os.precision(17);
        os << "ap_position = " << ap_position.x() << " " << ap_position.y() << "\n";
        os << "pwr_position = " << pwr_position.x() << " " << pwr_position.y() << "\n";
        os << "ap_boresight = " << ap_array.boresight.x() << " " << ap_array.boresight.y() << "\n";
        os << "pwr_boresight = " << pwr_array.boresight.x() << " " << pwr_array.boresight.y() << "\n";
        os << "n_ap = " << ap_array.num_elements << "\n";
        os << "n_pwr = " << pwr_array.num_elements << "\n";
        os << "q = " << num_subcarriers << "\n";
        os << "subcarrier_spacing = " << subcarrier_spacing << "\n";
        os << "k_targets = " << num_targets() << "\n";
        os << "c_clients = " << num_clients() << "\n";
        for (int k = 0; k < num_targets(); ++k)
            os << "target_" << k << " = " << targets[k].x() << " " << targets[k].y()
               << (is_client(k) ? " client" : " nonclient") << "\n";
        return os.str();
    }
};

/// Scenario sampling parameters, loadable from a key-value text file.
struct ScenarioConfig {
    Vec2 ap_position = Vec2(0.0, 0.0);
    Vec2 pwr_position = Vec2(10.0, 0.0);
    Vec2 ap_boresight = Vec2(0.0, 1.0);
    Vec2 pwr_boresight = Vec2(0.0, 1.0);
    int n_ap = 4;
    int n_pwr = 4;
    int n_ue = 4;
    int q = 512;
    std::array<double, 4> coverage = {0.0, 10.0, 5.0, 15.0}; // xmin xmax ymin ymax
    int k_targets = 3;
    int c_clients = 2;
    double min_separation = 1.0;
    std::uint64_t seed = 1;
    double subcarrier_spacing = 78.125e3;
    double spacing = 0.5;
    int num_multipath = 3;
    double ricean_k_db = 15.0;

    void validate() const {
        if (n_ap < 1 || n_pwr < 1 || n_ue < 1)
            throw config_error("ScenarioConfig: antenna counts must be >= 1");
        if (q < 1)
            throw config_error("ScenarioConfig: q must be >= 1");
        if (k_targets < 1)
            throw config_error("ScenarioConfig: k_targets must be >= 1");
        if (c_clients < 0 || c_clients > k_targets)
            throw config_error("ScenarioConfig: need 0 <= c_clients <= k_targets");
        if (coverage[1] < coverage[0] || coverage[3] < coverage[2])
            throw config_error("ScenarioConfig: coverage rectangle is empty");
        if (min_separation < 0.0)
            throw config_error("ScenarioConfig: min_separation must be >= 0");
        if (!(subcarrier_spacing > 0.0))
            throw config_error("ScenarioConfig: subcarrier_spacing must be positive");
        if (!(spacing > 0.0))
            throw config_error("ScenarioConfig: spacing must be positive");
        if (num_multipath < 0)
            throw config_error("ScenarioConfig: num_multipath must be >= 0");
        if (std::isnan(ricean_k_db) || ricean_k_db < 0.0)
            throw config_error("ScenarioConfig: ricean_k_db must be >= 0 dB");
    }

    std::string to_text() const {
        std::ostringstream os;
        os.precision(17);
        os << "ap_position = " << ap_position.x() << " " << ap_position.y() << "\n"
           << "pwr_position = " << pwr_position.x() << " " << pwr_position.y() << "\n"
           << "ap_boresight = " << ap_boresight.x() << " " << ap_boresight.y() << "\n"
           << "pwr_boresight = " << pwr_boresight.x() << " " << pwr_boresight.y() << "\n"
           << "n_ap = " << n_ap << "\n"
           << "n_pwr = " << n_pwr << "\n"
           << "n_ue = " << n_ue << "\n"
           << "q = " << q << "\n"
           << "coverage = " << coverage[0] << " " << coverage[1] << " "
           << coverage[2] << " " << coverage[3] << "\n"
           << "k_targets = " << k_targets << "\n"
           << "c_clients = " << c_clients << "\n"
           << "min_separation = " << min_separation << "\n"
           << "seed = " << seed << "\n"
           << "subcarrier_spacing = " << subcarrier_spacing << "\n"
           << "spacing = " << spacing << "\n"
           << "num_multipath = " << num_multipath << "\n"
           << "ricean_k_db = " << ricean_k_db << "\n";
        return os.str();
    }

    static ScenarioConfig parse(std::istream& in);
    static ScenarioConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in)
            throw config_error("ScenarioConfig: cannot open '" + path + "'");
        return parse(in);
    }
};

namespace detail {

inline std::vector<double> parse_numbers(const std::string& text,
                                         const std::string& key, size_t count) {
    std::istringstream is(text);
    std::vector<double> v;
    double x;
    while (is >> x)
        v.push_back(x);
    if (v.size() != count)
        throw config_error("ScenarioConfig: key '" + key + "' expects " +
                           std::to_string(count) + " value(s)");
    return v;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace detail

inline ScenarioConfig ScenarioConfig::parse(std::istream& in) {
    ScenarioConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error("ScenarioConfig: line " + std::to_string(lineno) +
                               " is not of the form 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        auto num = [&](size_t n) { return detail::parse_numbers(value, key, n); };
        if (key == "ap_position") {
            auto v = num(2);
            cfg.ap_position = Vec2(v[0], v[1]);
        } else if (key == "pwr_position") {
            auto v = num(2);
            cfg.pwr_position = Vec2(v[0], v[1]);
        } else if (key == "ap_boresight") {
            auto v = num(2);
            cfg.ap_boresight = Vec2(v[0], v[1]);
        } else if (key == "pwr_boresight") {
            auto v = num(2);
            cfg.pwr_boresight = Vec2(v[0], v[1]);
        } else if (key == "n_ap") {
            cfg.n_ap = static_cast<int>(num(1)[0]);
        } else if (key == "n_pwr") {
            cfg.n_pwr = static_cast<int>(num(1)[0]);
        } else if (key == "n_ue") {
            cfg.n_ue = static_cast<int>(num(1)[0]);
        } else if (key == "q") {
            cfg.q = static_cast<int>(num(1)[0]);
        } else if (key == "coverage") {
            auto v = num(4);
            cfg.coverage = {v[0], v[1], v[2], v[3]};
        } else if (key == "k_targets") {
            cfg.k_targets = static_cast<int>(num(1)[0]);
        } else if (key == "c_clients") {
            cfg.c_clients = static_cast<int>(num(1)[0]);
        } else if (key == "min_separation") {
            cfg.min_separation = num(1)[0];
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
        } else if (key == "subcarrier_spacing") {
            cfg.subcarrier_spacing = num(1)[0];
        } else if (key == "spacing") {
            cfg.spacing = num(1)[0];
        } else if (key == "num_multipath") {
            cfg.num_multipath = static_cast<int>(num(1)[0]);
        } else if (key == "ricean_k_db") {
            cfg.ricean_k_db = num(1)[0];
        } else {
            throw config_error("ScenarioConfig: unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

/// Draws target positions uniformly over the coverage rectangle, rejecting
/// draws until all pairwise separations meet the minimum and every target is
/// in-field of both arrays. Deterministic given the random source state.
inline Scenario sample_scenario(const ScenarioConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();

    Scenario sc;
    sc.ap_position = cfg.ap_position;
    sc.pwr_position = cfg.pwr_position;
    sc.ap_array = ArrayConfig{cfg.n_ap, cfg.spacing, cfg.ap_boresight.normalized()};
    sc.pwr_array = ArrayConfig{cfg.n_pwr, cfg.spacing, cfg.pwr_boresight.normalized()};
    sc.num_subcarriers = cfg.q;
    sc.subcarrier_spacing = cfg.subcarrier_spacing;

    std::uniform_real_distribution<double> ux(cfg.coverage[0], cfg.coverage[1]);
    std::uniform_real_distribution<double> uy(cfg.coverage[2], cfg.coverage[3]);

    constexpr int kBudget = 10000;
    for (int attempt = 0; attempt < kBudget; ++attempt) {
        std::vector<Vec2> pts(cfg.k_targets);
        for (auto& p : pts)
            p = Vec2(ux(rng), uy(rng));

        bool ok = true;
        for (size_t i = 0; i < pts.size() && ok; ++i) {
            for (size_t j = i + 1; j < pts.size() && ok; ++j)
                if ((pts[i] - pts[j]).norm() < cfg.min_separation)
                    ok = false;
            if (ok && (!try_angle_of(sc.ap_position, sc.ap_array.boresight, pts[i]) ||
                       !try_angle_of(sc.pwr_position, sc.pwr_array.boresight, pts[i])))
                ok = false;
        }
        if (!ok)
            continue;

        sc.targets = std::move(pts);
        sc.clients.resize(cfg.c_clients);
        for (int u = 0; u < cfg.c_clients; ++u) {
            ClientNode& c = sc.clients[u];
            c.position = sc.targets[u];
            c.array.num_elements = cfg.n_ue;
            c.array.spacing = cfg.spacing;
            c.array.boresight = (sc.ap_position - c.position).normalized();
            c.num_multipath = cfg.num_multipath;
            c.ricean_k_db = cfg.ricean_k_db;
        }
        sc.validate();
        return sc;
    }
    throw infeasible_geometry(
        "sample_scenario: could not satisfy separation/field constraints in 10000 attempts");
}

} // namespace pwr

#endif
