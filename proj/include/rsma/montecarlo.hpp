#pragma once

// Seeded Monte Carlo estimation of the mobility scheme's ergodic rates, plus
// speed x SNR x scheme sweep tables. Every draw is keyed by (base_seed, index),
// so estimates are bit-identical across runs and across worker counts: workers
// fill disjoint slices of per-draw arrays and the reduction always walks them
// in index order.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "rsma/channel.hpp"
#include "rsma/errors.hpp"
#include "rsma/mobility.hpp"
#include "rsma/rng.hpp"

namespace rsma {

// How the power split feeding the simulator is chosen per cell.
enum class McScheme {
    kRsmaTopt,    // closed-form split
    kRsmaGrid,    // exhaustive bound search at grid_granularity
    kRsmaFixedT,  // caller-supplied fixed_t
    kSdma,        // all power private (t = 1)
};

inline const char* scheme_name(McScheme s) {
    switch (s) {
        case McScheme::kRsmaTopt: return "rsma-topt";
        case McScheme::kRsmaGrid: return "rsma-grid";
        case McScheme::kRsmaFixedT: return "rsma-fixed-t";
        case McScheme::kSdma: return "sdma";
    }
    throw ContractViolation("scheme_name: unknown scheme value");
}

struct McConfig {
    long num_draws = 10000;
    std::uint64_t base_seed = 0;
    McScheme scheme = McScheme::kSdma;
    double fixed_t = 1.0;             // split used by kRsmaFixedT
    double grid_granularity = 0.001;  // grid used by kRsmaGrid
    int threads = 1;

    void validate() const {
        if (num_draws < 1)
            throw ContractViolation("McConfig: num_draws must be >= 1");
        if (threads < 1)
            throw ContractViolation("McConfig: threads must be >= 1");
        if (scheme == McScheme::kRsmaFixedT) PowerSplit{fixed_t}.validate();
        if (scheme == McScheme::kRsmaGrid &&
            (!(grid_granularity > 0.0) || !(grid_granularity < 1.0)))
            throw ContractViolation("McConfig: grid_granularity must lie in (0, 1)");
    }
};

struct McEstimate {
    double mean_sum_rate = 0.0;
    double std_error = 0.0;
    Eigen::VectorXd per_stream_means;  // [common, private 0 .. K-1]
    long num_draws = 0;
    // Order-independent hash of the channel realizations consumed, so paired
    // runs (common random numbers) can prove they saw identical draws.
    std::uint64_t draw_checksum = 0;
};

namespace detail {

inline std::uint64_t channel_checksum(const ChannelSet& ch) {
    std::uint64_t h = 0x9E3779B97F4A7C15ull;
    auto fold = [&h](const Eigen::MatrixXcd& m) {
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) {
                h = mix64(h ^ std::bit_cast<std::uint64_t>(m(r, c).real()));
                h = mix64(h ^ std::bit_cast<std::uint64_t>(m(r, c).imag()));
            }
    };
    fold(ch.csit_channels);
    fold(ch.true_channels);
    return h;
}

} // namespace detail

// The split a scheme prescribes for one parameter cell.
inline PowerSplit resolve_split(const MobilityParams& params, const McConfig& cfg) {
    switch (cfg.scheme) {
        case McScheme::kRsmaTopt: return t_opt_closed_form(params);
        case McScheme::kRsmaGrid: return t_opt_exhaustive(params, cfg.grid_granularity);
        case McScheme::kRsmaFixedT: return PowerSplit{cfg.fixed_t};
        case McScheme::kSdma: return PowerSplit{1.0};
    }
    throw ContractViolation("resolve_split: unknown scheme value");
}

inline McEstimate estimate_ergodic_rate(const MobilityParams& params, const PowerSplit& split,
                                        const McConfig& cfg) {
    params.validate();
    split.validate();
    cfg.validate();
    const long n = cfg.num_draws;
    const int K = params.K;

    std::vector<double> sums(static_cast<std::size_t>(n));
    Eigen::MatrixXd streams(n, K + 1);
    std::vector<std::uint64_t> checksums(static_cast<std::size_t>(n));

    auto run_slice = [&](long lo, long hi) {
        for (long i = lo; i < hi; ++i) {
            auto rng = Rng::for_draw(cfg.base_seed, static_cast<std::uint64_t>(i));
            const ChannelSet ch = draw_correlated_pair(params, rng);
            checksums[static_cast<std::size_t>(i)] = detail::channel_checksum(ch);
            const PrecoderSet pr = build_mobility_precoders(ch, split, params, rng);
            const RateAllocation ra = instantaneous_rates(ch, pr, split);
            sums[static_cast<std::size_t>(i)] = ra.sum_rate;
            streams(i, 0) = ra.common_rate;
            streams.row(i).tail(K) = ra.private_rates.transpose();
        }
    };

    const long workers = std::min<long>(std::max(cfg.threads, 1), n);
    if (workers <= 1) {
        run_slice(0, n);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        const long chunk = (n + workers - 1) / workers;
        for (long w = 0; w < workers; ++w)
            pool.emplace_back(run_slice, w * chunk, std::min(n, (w + 1) * chunk));
        for (auto& th : pool) th.join();
    }

    McEstimate est;
    est.num_draws = n;
    double total = 0.0;
    for (long i = 0; i < n; ++i) total += sums[static_cast<std::size_t>(i)];
    est.mean_sum_rate = total / n;

    double sq = 0.0;
    for (long i = 0; i < n; ++i) {
        const double d = sums[static_cast<std::size_t>(i)] - est.mean_sum_rate;
        sq += d * d;
    }
    est.std_error = n > 1 ? std::sqrt(sq / (n - 1) / n) : 0.0;

    est.per_stream_means = Eigen::VectorXd::Zero(K + 1);
    for (long i = 0; i < n; ++i) est.per_stream_means += streams.row(i).transpose();
    est.per_stream_means /= double(n);

    for (std::uint64_t c : checksums) est.draw_checksum ^= c;

    // The two decompositions (per-draw sums vs per-stream columns) must tell
    // the same story; a mismatch means a stream was dropped or double-counted.
    if (std::abs(est.per_stream_means.sum() - est.mean_sum_rate) >
        1e-9 * std::max(1.0, std::abs(est.mean_sum_rate)))
        throw ContractViolation("estimate_ergodic_rate: stream means do not add up to the mean sum rate");
    return est;
}

// One sweep cell per (speed, SNR, scheme), all schemes of a cell fed from the
// same seeds (common random numbers). Row order is speeds-major, then SNRs,
// then schemes, in the order given.
struct SweepGrid {
    MobilityParams base;  // v and P are overridden per cell
    std::vector<double> speeds_kmh;
    std::vector<double> snrs_db;
    std::vector<McScheme> schemes;

    void validate() const {
        if (speeds_kmh.empty() || snrs_db.empty() || schemes.empty())
            throw ContractViolation("SweepGrid: speeds, SNRs, and schemes must be nonempty");
        for (double v : speeds_kmh)
            if (!(v >= 0.0)) throw ContractViolation("SweepGrid: speeds must be >= 0 km/h");
    }
};

struct SweepRow {
    double speed_kmh = 0.0;
    double snr_db = 0.0;
    McScheme scheme = McScheme::kSdma;
    double split_t = 1.0;  // the split the scheme resolved to for this cell
    McEstimate estimate;
};

inline std::vector<SweepRow> sweep(const SweepGrid& grid, const McConfig& cfg) {
    grid.validate();
    std::vector<SweepRow> rows;
    rows.reserve(grid.speeds_kmh.size() * grid.snrs_db.size() * grid.schemes.size());
    for (double v_kmh : grid.speeds_kmh) {
        for (double snr_db : grid.snrs_db) {
            MobilityParams params = grid.base;
            params.v = v_kmh / 3.6;
            params.P = std::pow(10.0, snr_db / 10.0);
            for (McScheme scheme : grid.schemes) {
                McConfig cell_cfg = cfg;
                cell_cfg.scheme = scheme;
                SweepRow row;
                row.speed_kmh = v_kmh;
                row.snr_db = snr_db;
                row.scheme = scheme;
                const PowerSplit split = resolve_split(params, cell_cfg);
                row.split_t = split.t;
                row.estimate = estimate_ergodic_rate(params, split, cell_cfg);
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

} // namespace rsma
