#pragma once

// Finite-blocklength rate adjustment: the normal approximation
// R = log2(1+gamma) - sqrt(V/N) * Qinv(xi) applied on top of the txmodel SINRs.

#include <cstdint>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "rsma/errors.hpp"
#include "rsma/mathfn.hpp"
#include "rsma/txmodel.hpp"

namespace rsma {

// Blocklength value meaning "no finite-blocklength penalty". Large enough that
// the sqrt(V/N) term is ~3e-10 — below every comparison tolerance in use.
inline constexpr std::int64_t kInfiniteBlocklength = std::numeric_limits<std::int64_t>::max();

using BlocklengthVec = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

// Blocklengths and target BLER driving the dispersion penalty. xi < 1/2 is a
// hard requirement: beyond it Qinv flips sign and the "penalty" would pay out.
struct FblConfig {
    std::int64_t common_blocklength = kInfiniteBlocklength;  // N_c, channel uses
    BlocklengthVec private_blocklengths;                     // N_k
    double target_bler = 1e-5;                               // xi

    static FblConfig uniform(int K, std::int64_t n, double xi) {
        FblConfig cfg;
        cfg.common_blocklength = n;
        cfg.private_blocklengths = BlocklengthVec::Constant(K, n);
        cfg.target_bler = xi;
        cfg.validate();
        return cfg;
    }

    static FblConfig infinite(int K) {
        return uniform(K, kInfiniteBlocklength, 1e-5);
    }

    void validate() const {
        if (common_blocklength < 1 || (private_blocklengths.array() < 1).any())
            throw ContractViolation("FblConfig: blocklengths must be >= 1");
        if (private_blocklengths.size() < 1)
            throw ContractViolation("FblConfig: needs at least one private blocklength");
        if (!(target_bler > 0.0) || !(target_bler < 0.5))
            throw ContractViolation("FblConfig: target BLER must lie in (0, 1/2), got " +
                                    std::to_string(target_bler));
    }
};

// Channel dispersion V = (log2 e)^2 * (1 - (1+gamma)^-2), in [0, (log2 e)^2).
inline double dispersion(double gamma) {
    if (!(gamma >= 0.0))
        throw DomainError("dispersion: requires gamma >= 0, got " + std::to_string(gamma));
    const double t = 1.0 + gamma;
    const double l2e = std::numbers::log2e;
    return l2e * l2e * (1.0 - 1.0 / (t * t));
}

// A finite-blocklength stream rate. `feasible` is false when the normal
// approximation went negative: the stream cannot meet xi at this blocklength,
// and the reported rate is clamped to 0.
struct StreamRate {
    double value = 0.0;
    bool feasible = true;
};

inline StreamRate fbl_rate(double gamma, std::int64_t n, double xi) {
    if (!(gamma >= 0.0))
        throw DomainError("fbl_rate: requires gamma >= 0, got " + std::to_string(gamma));
    if (n < 1) throw DomainError("fbl_rate: requires n >= 1");
    if (!(xi > 0.0) || !(xi < 1.0)) throw DomainError("fbl_rate: requires 0 < xi < 1");
    const double raw = std::log2(1.0 + gamma) -
                       std::sqrt(dispersion(gamma) / static_cast<double>(n)) * q_inv(xi);
    if (raw < 0.0) return {0.0, false};
    return {raw, true};
}

// FBL allocation: same structure as shannon_rates with the penalty applied,
// N_c for every user's common-stream decoding and N_k per private stream.
inline RateAllocation fbl_allocation(const ChannelSet& ch, const PrecoderSet& pr,
                                     const FblConfig& cfg, const Eigen::VectorXd& shares) {
    cfg.validate();
    const int K = ch.users();
    if (cfg.private_blocklengths.size() != K)
        throw ContractViolation("fbl_allocation: blocklength count != K");
    if (shares.size() != K)
        throw ContractViolation("fbl_allocation: shares size != K");
    if ((shares.array() < 0.0).any())
        throw ContractViolation("fbl_allocation: shares must be nonnegative");

    RateAllocation ra;
    ra.common_shares = shares;
    ra.private_rates.resize(K);
    ra.common_rate = std::numeric_limits<double>::infinity();
    int bound_user = 0;
    for (int k = 0; k < K; ++k) {
        const double rc_k =
            fbl_rate(common_sinr(ch, pr, k), cfg.common_blocklength, cfg.target_bler).value;
        if (rc_k < ra.common_rate) {
            ra.common_rate = rc_k;
            bound_user = k;
        }
        ra.private_rates(k) =
            fbl_rate(private_sinr(ch, pr, k), cfg.private_blocklengths(k), cfg.target_bler)
                .value;
    }
    if (shares.sum() > ra.common_rate + 1e-9)
        throw AllocationError("fbl_allocation: share sum " + std::to_string(shares.sum()) +
                                  " exceeds common rate " + std::to_string(ra.common_rate) +
                                  " bound by user " + std::to_string(bound_user),
                              bound_user);
    ra.totals = ra.common_shares + ra.private_rates;
    ra.sum_rate = ra.totals.sum();
    return ra;
}

// Two-user NOMA rates under the same FBL penalty. The weak user's message must
// be decodable both at the weak user and at the strong user (pre-SIC), so its
// rate is the min of the two; the strong user then decodes interference-free.
// Per-user entries land in private_rates (there is no common stream).
inline RateAllocation noma_fbl_allocation(const ChannelSet& ch, const PrecoderSet& pr,
                                          const FblConfig& cfg) {
    cfg.validate();
    if (ch.users() != 2)
        throw UnsupportedConfiguration("noma_fbl_allocation requires exactly 2 users");
    if (cfg.private_blocklengths.size() != 2)
        throw ContractViolation("noma_fbl_allocation: blocklength count != 2");
    const NomaSinrs s = noma_sinrs(ch, pr);
    const std::int64_t n_weak = cfg.private_blocklengths(s.weak);
    const std::int64_t n_strong = cfg.private_blocklengths(s.strong);
    const double xi = cfg.target_bler;

    RateAllocation ra;
    ra.common_shares = Eigen::VectorXd::Zero(2);
    ra.private_rates.resize(2);
    ra.private_rates(s.weak) = std::min(fbl_rate(s.weak_at_weak, n_weak, xi).value,
                                        fbl_rate(s.weak_at_strong, n_weak, xi).value);
    ra.private_rates(s.strong) = fbl_rate(s.strong_own, n_strong, xi).value;
    ra.common_rate = 0.0;
    ra.totals = ra.private_rates;
    ra.sum_rate = ra.totals.sum();
    return ra;
}

} // namespace rsma
