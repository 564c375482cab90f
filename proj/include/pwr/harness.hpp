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

#ifndef pwr_harness_H
#define pwr_harness_H

#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "pwr/bff.hpp"
#include "pwr/localize.hpp"

namespace pwr {

inline constexpr const char* kVersion = "0.1.0";

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Hierarchical seed derivation so any single trial reproduces in isolation.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    std::uint64_t h = splitmix64(a);
    h = splitmix64(h ^ splitmix64(b + 0x632be59bd9b4e019ULL));
    h = splitmix64(h ^ splitmix64(c + 0x9e6c63d0876a9a47ULL));
    return h;
}

inline const std::vector<std::string>& known_methods() {
    static const std::vector<std::string> m = {"hybrid_as", "music_bff",
                                               "music_ndp", "ndp_as"};
    return m;
}

/// Monte-Carlo experiment description.
struct ExperimentConfig {
    ScenarioConfig scenario;
    std::vector<double> snr_db = {-10, -5, 0, 5, 10, 15, 20, 25, 30};
    int trials = 1000;
    std::vector<std::string> methods = {"music_ndp", "music_bff", "ndp_as",
                                        "hybrid_as"};
    std::uint64_t master_seed = 1;
    double hit_radius = 2.0;
    bool noiseless = false;
    bool single_pass = false;
    int b_phi = 9;
    int b_psi = 7;
    double association_gate = deg2rad(10.0);
    int threads = 0; // 0 = hardware concurrency
    AngleGrid music_grid = default_music_grid();
    AngleGrid client_grid = default_client_grid();

    SearchConfig search() const {
        SearchConfig s;
        s.region = scenario.coverage;
        s.single_pass = single_pass;
        return s;
    }

    void validate() const {
        scenario.validate();
        if (snr_db.empty())
            throw config_error("ExperimentConfig: snr sweep must be non-empty");
        if (trials < 1)
            throw config_error("ExperimentConfig: trials must be >= 1");
        if (!(hit_radius > 0.0))
            throw config_error("ExperimentConfig: hit_radius must be positive");
        if (methods.empty())
            throw config_error("ExperimentConfig: methods list must be non-empty");
        for (const auto& m : methods)
            if (std::find(known_methods().begin(), known_methods().end(), m) ==
                known_methods().end())
                throw config_error("ExperimentConfig: unknown method '" + m + "'");
        if (b_phi <= 0 || b_psi <= 0)
            throw config_error("ExperimentConfig: quantizer bits must be positive");
        if (threads < 0)
            throw config_error("ExperimentConfig: threads must be >= 0");
        search().validate();
    }
};

/// One trial's raw outcome before scoring.
struct TrialOutput {
    Scenario scenario;
    PreEstimate pre;
    std::vector<LocalizationResult> results; // parallel to config.methods
    int resamples = 0;
};

/// Full channel-sounding pipeline on one scenario draw: radar and client
/// channels, CSI observation at PWR and clients, feedback interception and
/// covariance approximation, MUSIC pre-estimation, association, then every
/// configured method on the identical inputs. Deterministic per trial seed;
/// infeasible geometry re-draws with the next derived seed.
inline TrialOutput run_trial(const ExperimentConfig& cfg, double snr_db,
                             std::uint64_t trial_seed) {
    const double snr =
        cfg.noiseless ? std::numeric_limits<double>::infinity() : snr_db;

    constexpr int kResampleBudget = 100;
    for (int attempt = 0; attempt < kResampleBudget; ++attempt) {
        std::mt19937_64 rng(attempt == 0 ? trial_seed : mix_seed(trial_seed, attempt));
        Scenario sc;
        try {
            sc = sample_scenario(cfg.scenario, rng);
        } catch (const infeasible_geometry&) {
            continue;
        }

        const int c_count = sc.num_clients();
        const RadarChannel radar = synth_radar_channel(sc, rng);
        std::vector<CommChannel> comm(c_count);
        for (int u = 0; u < c_count; ++u)
            comm[u] = synth_comm_channel(sc, u, rng);

        const CsiTensor radar_csi = observe_csi(radar.slices, snr, rng);
        CovarianceSet covs;
        covs.radar_cov = radar_sample_cov(radar_csi);
        covs.sigma2_r = radar_csi.noise_variance;
        covs.sigma2_u = radar_csi.noise_variance;
        covs.num_subcarriers = sc.num_subcarriers;
        covs.n_a = sc.ap_array.num_elements;
        covs.n_p = sc.pwr_array.num_elements;
        covs.n_u = c_count > 0 ? sc.clients[0].array.num_elements : cfg.scenario.n_ue;
        covs.spacing = sc.ap_array.spacing;

        std::vector<ClientSpectrumResult> spectra(c_count);
        for (int u = 0; u < c_count; ++u) {
            const CsiTensor client_csi = observe_csi(comm[u].slices, snr, rng);
            const BffReport bff = build_bff(client_csi, client_csi.noise_variance,
                                            u, cfg.b_phi, cfg.b_psi);
            covs.client_covs.push_back(approx_covariance(bff));
            spectra[u] = music_client(covs.client_covs[u], cfg.client_grid,
                                      covs.spacing);
        }

        const Music2dResult peaks =
            music_2d(covs.radar_cov, sc.num_targets(), cfg.music_grid, covs.n_a,
                     covs.n_p, covs.spacing);

        TrialOutput out;
        out.scenario = sc;
        out.pre = make_pre_estimate(peaks, spectra, cfg.association_gate);
        out.resamples = attempt;

        const RadarGeometry geom = geometry_of(sc);
        const SearchConfig search = cfg.search();
        for (const std::string& m : cfg.methods) {
            if (m == "music_ndp")
                out.results.push_back(localize_music_ndp(out.pre, geom));
            else if (m == "music_bff")
                out.results.push_back(localize_music_bff(out.pre, geom));
            else if (m == "ndp_as")
                out.results.push_back(localize_ndp_as(out.pre, covs, geom, search));
            else if (m == "hybrid_as")
                out.results.push_back(localize_hybrid_as(out.pre, covs, geom, search));
            else
                throw config_error("run_trial: unknown method '" + m + "'");
        }
        return out;
    }
    throw infeasible_geometry("run_trial: resample budget exhausted");
}

/// Score of one truth target under one method.
struct TargetScore {
    bool client = false;
    Vec2 truth = Vec2(0.0, 0.0);
    Vec2 est = Vec2(std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN());
    bool est_valid = false;
    bool hit = false;
    double error = std::numeric_limits<double>::infinity();
    bool associated = false;
    double objective = 0.0;
    bool degenerate = false;
};

/// Matches estimates to truth positions by minimum-cost assignment on the
/// Euclidean distance; a matched distance within the hit radius is a hit.
inline std::vector<TargetScore> match_and_score(const std::vector<Vec2>& truth,
                                                const LocalizationResult& result,
                                                double hit_radius) {
    const int k = static_cast<int>(truth.size());
    if (static_cast<int>(result.targets.size()) != k)
        throw invalid_input("match_and_score: estimate count mismatch");
    constexpr double kInvalidCost = 1e9;
    Eigen::MatrixXd cost(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            cost(i, j) = result.targets[j].valid
                             ? (truth[i] - result.targets[j].position).norm()
                             : kInvalidCost;
    const std::vector<int> assigned = solve_assignment(cost);

    std::vector<TargetScore> scores(k);
    for (int i = 0; i < k; ++i) {
        const TargetEstimate& e = result.targets[assigned[i]];
        TargetScore& s = scores[i];
        s.truth = truth[i];
        s.est = e.position;
        s.est_valid = e.valid;
        s.associated = e.associated;
        s.objective = e.objective;
        s.degenerate = e.degenerate;
        s.error = e.valid ? (truth[i] - e.position).norm()
                          : std::numeric_limits<double>::infinity();
        s.hit = e.valid && s.error <= hit_radius;
    }
    return scores;
}

/// One fully scored trial.
struct TrialRecord {
    int snr_index = 0;
    int trial_index = 0;
    double snr_db = 0.0;
    std::uint64_t seed = 0;
    int resamples = 0;
    std::vector<std::vector<TargetScore>> scores; // [method][truth target]
};

inline TrialRecord score_trial(const ExperimentConfig& cfg, int snr_index,
                               int trial_index) {
    TrialRecord rec;
    rec.snr_index = snr_index;
    rec.trial_index = trial_index;
    rec.snr_db = cfg.snr_db[snr_index];
    rec.seed = mix_seed(cfg.master_seed, static_cast<std::uint64_t>(snr_index),
                        static_cast<std::uint64_t>(trial_index));
    const TrialOutput out = run_trial(cfg, rec.snr_db, rec.seed);
    rec.resamples = out.resamples;
    rec.scores.resize(cfg.methods.size());
    for (size_t m = 0; m < cfg.methods.size(); ++m) {
        rec.scores[m] = match_and_score(out.scenario.targets, out.results[m],
                                        cfg.hit_radius);
        for (int i = 0; i < out.scenario.num_targets(); ++i)
            rec.scores[m][i].client = out.scenario.is_client(i);
    }
    return rec;
}

/// Aggregated metrics per (method, snr, target class). RMSE follows the
/// common-hit rule: only targets hit by every configured method contribute.
struct MetricsRecord {
    std::string method;
    double snr_db = 0.0;
    std::string target_class; // "client" or "nonclient"
    double hit_rate = 0.0;
    double rmse = std::numeric_limits<double>::quiet_NaN();
    long hits = 0;
    long targets = 0;
    long common_hits = 0;
};

inline std::vector<MetricsRecord> aggregate(const std::vector<TrialRecord>& trials,
                                            const ExperimentConfig& cfg) {
    struct Bucket {
        long hits = 0, targets = 0, common = 0;
        double sq_err = 0.0;
    };
    // key: (method index, snr index, class index 0=client 1=nonclient)
    std::map<std::tuple<size_t, int, int>, Bucket> buckets;

    for (const TrialRecord& t : trials) {
        if (t.scores.empty())
            continue;
        const size_t k = t.scores[0].size();
        for (size_t i = 0; i < k; ++i) {
            bool common = true;
            for (const auto& per_method : t.scores)
                common = common && per_method[i].hit;
            const int cls = t.scores[0][i].client ? 0 : 1;
            for (size_t m = 0; m < t.scores.size(); ++m) {
                Bucket& b = buckets[{m, t.snr_index, cls}];
                b.targets += 1;
                b.hits += t.scores[m][i].hit ? 1 : 0;
                if (common) {
                    b.common += 1;
                    b.sq_err += t.scores[m][i].error * t.scores[m][i].error;
                }
            }
        }
    }

    // canonical order: method name, snr, class
    std::vector<size_t> method_order(cfg.methods.size());
    std::iota(method_order.begin(), method_order.end(), size_t{0});
    std::sort(method_order.begin(), method_order.end(), [&](size_t a, size_t b) {
        return cfg.methods[a] < cfg.methods[b];
    });

    std::vector<MetricsRecord> out;
    for (size_t m : method_order)
        for (size_t s = 0; s < cfg.snr_db.size(); ++s)
            for (int cls = 0; cls < 2; ++cls) {
                const auto it = buckets.find({m, static_cast<int>(s), cls});
                if (it == buckets.end() || it->second.targets == 0)
                    continue;
                const Bucket& b = it->second;
                MetricsRecord r;
                r.method = cfg.methods[m];
                r.snr_db = cfg.snr_db[s];
                r.target_class = cls == 0 ? "client" : "nonclient";
                r.hit_rate = static_cast<double>(b.hits) / b.targets;
                r.hits = b.hits;
                r.targets = b.targets;
                r.common_hits = b.common;
                r.rmse = b.common > 0 ? std::sqrt(b.sq_err / b.common)
                                      : std::numeric_limits<double>::quiet_NaN();
                out.push_back(std::move(r));
            }
    return out;
}

struct ExperimentResult {
    std::vector<TrialRecord> trials; // ordered by (snr index, trial index)
    std::vector<MetricsRecord> metrics;
    long total_resamples = 0;
};

/// Runs all trials, in parallel when threads allow. Results land in
/// task-indexed slots, so output is independent of scheduling.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const size_t per_snr = static_cast<size_t>(cfg.trials);
    const size_t tasks = cfg.snr_db.size() * per_snr;

    ExperimentResult res;
    res.trials.resize(tasks);

    unsigned thread_count = cfg.threads > 0
                                ? static_cast<unsigned>(cfg.threads)
                                : std::max(1u, std::thread::hardware_concurrency());
    thread_count = std::min<unsigned>(thread_count, tasks);

    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= tasks)
                return;
            try {
                res.trials[i] = score_trial(cfg, static_cast<int>(i / per_snr),
                                            static_cast<int>(i % per_snr));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error)
                    first_error = std::current_exception();
                return;
            }
        }
    };

    if (thread_count <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < thread_count; ++t)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    if (first_error)
        std::rethrow_exception(first_error);

    for (const auto& t : res.trials)
        res.total_resamples += t.resamples;
    res.metrics = aggregate(res.trials, cfg);
    return res;
}

// --- Canonical text emission -------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

} // namespace detail

inline void write_results_csv(std::ostream& os, const ExperimentResult& res,
                              const ExperimentConfig& cfg) {
    os << "method,snr_db,trial,target,truth_x,truth_y,est_x,est_y,"
          "associated,objective,degenerate,hit,error\n";
    std::vector<size_t> method_order(cfg.methods.size());
    std::iota(method_order.begin(), method_order.end(), size_t{0});
    std::sort(method_order.begin(), method_order.end(), [&](size_t a, size_t b) {
        return cfg.methods[a] < cfg.methods[b];
    });
    for (size_t m : method_order)
        for (const TrialRecord& t : res.trials)
            for (size_t i = 0; i < t.scores[m].size(); ++i) {
                const TargetScore& s = t.scores[m][i];
                os << cfg.methods[m] << ',' << detail::fmt_double(t.snr_db) << ','
                   << t.trial_index << ',' << i << ','
                   << detail::fmt_double(s.truth.x()) << ','
                   << detail::fmt_double(s.truth.y()) << ','
                   << detail::fmt_double(s.est.x()) << ','
                   << detail::fmt_double(s.est.y()) << ',' << (s.associated ? 1 : 0)
                   << ',' << detail::fmt_double(s.objective) << ','
                   << (s.degenerate ? 1 : 0) << ',' << (s.hit ? 1 : 0) << ','
                   << detail::fmt_double(s.error) << '\n';
            }
}

inline void write_aggregate_csv(std::ostream& os, const ExperimentResult& res) {
    os << "method,snr_db,class,hit_rate,rmse,hits,targets,common_hits\n";
    for (const MetricsRecord& r : res.metrics)
        os << r.method << ',' << detail::fmt_double(r.snr_db) << ','
           << r.target_class << ',' << detail::fmt_double(r.hit_rate) << ','
           << detail::fmt_double(r.rmse) << ',' << r.hits << ',' << r.targets
           << ',' << r.common_hits << '\n';
}

inline void write_manifest(std::ostream& os, const ExperimentConfig& cfg,
                           const ExperimentResult& res) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["master_seed"] = cfg.master_seed;
    j["snr_db"] = cfg.snr_db;
    j["trials"] = cfg.trials;
    j["methods"] = cfg.methods;
    j["hit_radius"] = cfg.hit_radius;
    j["noiseless"] = cfg.noiseless;
    j["single_pass"] = cfg.single_pass;
    j["b_phi"] = cfg.b_phi;
    j["b_psi"] = cfg.b_psi;
    j["association_gate_deg"] = rad2deg(cfg.association_gate);
    j["threads"] = cfg.threads;
    j["total_resamples"] = res.total_resamples;
    j["scenario"] = {
        {"ap_position", {cfg.scenario.ap_position.x(), cfg.scenario.ap_position.y()}},
        {"pwr_position", {cfg.scenario.pwr_position.x(), cfg.scenario.pwr_position.y()}},
        {"n_ap", cfg.scenario.n_ap},
        {"n_pwr", cfg.scenario.n_pwr},
        {"n_ue", cfg.scenario.n_ue},
        {"q", cfg.scenario.q},
        {"coverage", cfg.scenario.coverage},
        {"k_targets", cfg.scenario.k_targets},
        {"c_clients", cfg.scenario.c_clients},
        {"min_separation", cfg.scenario.min_separation},
        {"seed", cfg.scenario.seed},
        {"subcarrier_spacing", cfg.scenario.subcarrier_spacing},
        {"spacing", cfg.scenario.spacing},
        {"num_multipath", cfg.scenario.num_multipath},
        {"ricean_k_db", cfg.scenario.ricean_k_db},
    };
    os << j.dump(2) << '\n';
}

/// Runs the experiment and writes results.csv, aggregate.csv and
/// manifest.json into the output directory.
inline ExperimentResult run_and_write(const ExperimentConfig& cfg,
                                      const std::string& out_dir) {
    const ExperimentResult res = run_experiment(cfg);
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream os(out_dir + "/results.csv", std::ios::binary);
        if (!os)
            throw config_error("cannot write " + out_dir + "/results.csv");
        write_results_csv(os, res, cfg);
    }
    {
        std::ofstream os(out_dir + "/aggregate.csv", std::ios::binary);
        write_aggregate_csv(os, res);
    }
    {
        std::ofstream os(out_dir + "/manifest.json", std::ios::binary);
        write_manifest(os, cfg, res);
    }
    return res;
}

} // namespace pwr

#endif
