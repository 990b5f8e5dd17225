#pragma once

// Low-complexity rate splitting under user mobility: zero-forcing private
// beams computed on outdated CSIT plus an isotropic random common beam, the
// closed-form ergodic sum-rate lower bound built from digamma/exponential-
// integral terms, and the closed-form / exhaustive-search power splits.

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "rsma/channel.hpp"
#include "rsma/errors.hpp"
#include "rsma/mathfn.hpp"
#include "rsma/rng.hpp"
#include "rsma/txmodel.hpp"

namespace rsma {

inline constexpr double kEulerGamma = 0.5772156649015328606;

// Fraction t of the power budget carried by the private streams; the common
// stream gets the remaining 1-t.
struct PowerSplit {
    double t = 1.0;

    void validate() const {
        if (!(t > 0.0) || t > 1.0)
            throw ContractViolation("PowerSplit: t must lie in (0, 1]");
    }
};

// Ingredients of the ergodic sum-rate lower bound. D and theta_param describe
// the effective-channel gamma approximation; mu and beta are the log-scale
// gains of the private and common streams; omega and rho feed the closed-form
// split. rho is NaN when the rounded D*K is <= 1 (its formula divides by
// nearest_int(D*K) - 1); t_opt_closed_form raises the diagnostic in that case.
struct LowerBoundTerms {
    double D = 0.0;
    double theta_param = 0.0;
    double mu = 0.0;
    double beta = 0.0;
    double omega = 0.0;
    double rho = 0.0;
};

namespace detail {

inline int rounded_dk(double D, int K) {
    return static_cast<int>(std::nearbyint(D * K));  // nearest integer, ties to even
}

// The closed-form split branch: all power to privates unless the guard says a
// common stream pays off.
inline double closed_form_split(double rho, double omega, double K) {
    if (rho * (omega + 1.0) / K > 1.0)
        return rho * (K - 1.0) / (rho * (omega + K) - K);
    return 1.0;
}

} // namespace detail

inline LowerBoundTerms lower_bound_terms(const PowerSplit& split,
                                         const MobilityParams& params) {
    split.validate();
    params.validate();
    const double eps = time_correlation(params);
    const double e2 = eps * eps;
    const double K = params.K;
    const double nt1 = params.n_t + 1;

    LowerBoundTerms lt;
    const double den = e2 * nt1 + (1.0 - 2.0 * e2) * K;
    const double num = e2 * e2 * nt1 + (1.0 - 2.0 * e2) * K;
    lt.D = den * den / num;
    lt.theta_param = num / den;
    lt.mu = std::log(lt.theta_param) + digamma(lt.D);

    const double x = K * K / (params.P * lt.theta_param * split.t);
    double scaled_sum = 0.0;  // e^x * sum_m E_m(x), summed in scaled form
    const int terms = detail::rounded_dk(lt.D, params.K);
    for (int m = 1; m <= terms; ++m) scaled_sum += expint_en_scaled(m, x);
    lt.beta = -kEulerGamma - std::log(K) - scaled_sum;

    lt.omega = (K - 1.0) * (1.0 - e2) * params.P / K;
    if (terms > 1) {
        lt.rho = K / (lt.theta_param * (terms - 1)) *
                 std::exp(-kEulerGamma - 0.5 / (terms - 1));
    } else {
        lt.rho = std::numeric_limits<double>::quiet_NaN();
    }
    return lt;
}

// Ergodic sum-rate lower bound at power split t.
inline double lower_bound(const PowerSplit& split, const MobilityParams& params) {
    const LowerBoundTerms lt = lower_bound_terms(split, params);
    const double P = params.P;
    const double K = params.K;
    return std::log2(1.0 + P * (1.0 - split.t) * std::exp(lt.beta)) +
           K * std::log2(1.0 + P / K * std::exp(lt.mu) * split.t) -
           K * std::log2(1.0 + lt.omega * split.t);
}

// Closed-form maximizer of the lower bound (derived under private power
// growing large); falls back to t = 1 when the guard says splitting never
// pays. Degenerate rounded D*K <= 1 has no defined rho — raise loudly instead
// of guessing a limit.
inline PowerSplit t_opt_closed_form(const MobilityParams& params) {
    const LowerBoundTerms lt = lower_bound_terms(PowerSplit{1.0}, params);
    const int terms = detail::rounded_dk(lt.D, params.K);
    if (terms <= 1)
        throw DomainError("t_opt_closed_form: rounded D*K = " + std::to_string(terms) +
                          " leaves rho's denominator empty; the closed form needs D*K > 1");
    PowerSplit split{detail::closed_form_split(lt.rho, lt.omega, params.K)};
    if (!(split.t > 0.0) || !(split.t <= 1.0))
        throw ContractViolation("t_opt_closed_form: computed split " +
                                std::to_string(split.t) + " fell outside (0, 1]");
    return split;
}

// Argmax of the lower bound over {g, 2g, ..., 1}; ties go to the larger t so
// the degenerate all-private split wins when the bound is flat.
inline PowerSplit t_opt_exhaustive(const MobilityParams& params, double granularity) {
    if (!(granularity > 0.0) || !(granularity < 1.0))
        throw DomainError("t_opt_exhaustive: granularity must lie in (0, 1)");
    params.validate();
    PowerSplit best{granularity};
    double best_val = -std::numeric_limits<double>::infinity();
    bool reached_one = false;
    for (long i = 1; i * granularity <= 1.0 + 1e-12; ++i) {
        const double t = std::min(i * granularity, 1.0);
        reached_one = reached_one || t == 1.0;
        const double val = lower_bound(PowerSplit{t}, params);
        if (val >= best_val) {
            best_val = val;
            best.t = t;
        }
    }
    if (!reached_one && lower_bound(PowerSplit{1.0}, params) >= best_val) best.t = 1.0;
    return best;
}

// ZF private beams from the outdated CSIT (right pseudo-inverse columns,
// normalized) plus an isotropic unit-norm common beam. The common direction is
// always drawn -- even at t = 1 where its power is zero -- so that schemes
// sharing a seed consume identical randomness.
inline PrecoderSet build_mobility_precoders(const ChannelSet& ch, const PowerSplit& split,
                                            const MobilityParams& params, Rng& rng) {
    split.validate();
    params.validate();
    ch.validate();
    const int nt = ch.antennas();
    const int K = ch.users();
    if (nt != params.n_t || K != params.K)
        throw ContractViolation("build_mobility_precoders: channel/params shape mismatch");

    const Eigen::MatrixXcd& H = ch.csit_channels;  // precoding must never peek at h[m]
    const Eigen::MatrixXcd gram = H.adjoint() * H;
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(gram);
    if (!lu.isInvertible())
        throw DegenerateChannelError(
            "build_mobility_precoders: CSIT matrix is rank-deficient; ZF directions undefined");
    Eigen::MatrixXcd F = H * lu.inverse();

    PrecoderSet pr;
    pr.power_budget = params.P;
    pr.privates.resize(nt, K);
    const double per_stream = params.P * split.t / K;
    for (int k = 0; k < K; ++k)
        pr.privates.col(k) = std::sqrt(per_stream) * F.col(k).normalized();

    Eigen::VectorXcd fc(nt);
    for (int a = 0; a < nt; ++a) fc(a) = rng.cn01();
    pr.common = std::sqrt(params.P * (1.0 - split.t)) * fc.normalized();
    return pr;
}

// One realization of the rates whose averages define the ergodic sum rate: the
// common stream's worst-user rate and each private stream's rate on the true
// channels. The common rate is recorded as equal shares so the allocation's
// totals and sum add up the usual way.
inline RateAllocation instantaneous_rates(const ChannelSet& ch, const PrecoderSet& pr,
                                          const PowerSplit& split) {
    split.validate();
    const int K = ch.users();
    RateAllocation ra;
    ra.private_rates.resize(K);
    double worst_common = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
        const Eigen::VectorXcd h = ch.true_channels.col(k);
        double all_priv = 0.0;
        for (int j = 0; j < K; ++j) all_priv += std::norm(h.dot(pr.privates.col(j)));
        const double own = std::norm(h.dot(pr.privates.col(k)));
        const double noise = ch.noise_vars(k);
        worst_common =
            std::min(worst_common, std::norm(h.dot(pr.common)) / (noise + all_priv));
        ra.private_rates(k) = std::log2(1.0 + own / (noise + all_priv - own));
    }
    ra.common_rate = std::log2(1.0 + worst_common);
    ra.common_shares = Eigen::VectorXd::Constant(K, ra.common_rate / K);
    ra.totals = ra.common_shares + ra.private_rates;
    ra.sum_rate = ra.totals.sum();
    return ra;
}

} // namespace rsma
