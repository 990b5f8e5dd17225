#pragma once

// The 1-layer RSMA signal model: precoder containers, common/private SINRs,
// Shannon rates with common-rate shares, and the SDMA/NOMA degenerate
// configurations. All SINRs are evaluated on the *true* channels.

#include <complex>
#include <string>

#include <Eigen/Dense>

#include "rsma/channel.hpp"
#include "rsma/errors.hpp"

namespace rsma {

// Common precoder p_c plus one private precoder per user, under a total power
// budget tr(PP^H) <= P.
struct PrecoderSet {
    Eigen::VectorXcd common;     // n_t, p_c
    Eigen::MatrixXcd privates;   // n_t x K, column k = p_k
    double power_budget = 0.0;   // P

    int antennas() const { return static_cast<int>(privates.rows()); }
    int users() const { return static_cast<int>(privates.cols()); }

    double total_power() const {
        return common.squaredNorm() + privates.squaredNorm();
    }

    void validate() const {
        if (privates.rows() < 1 || privates.cols() < 1)
            throw ContractViolation("PrecoderSet: needs n_t >= 1 and K >= 1");
        if (common.size() != privates.rows())
            throw ContractViolation("PrecoderSet: common/private length mismatch");
        if (!(power_budget > 0.0))
            throw ContractViolation("PrecoderSet: power budget must be positive");
        if (total_power() > power_budget + 1e-9)
            throw ContractViolation("PrecoderSet: total power " +
                                    std::to_string(total_power()) + " exceeds budget " +
                                    std::to_string(power_budget));
    }
};

// Rates of one configuration: the common rate R_c (min over users' decoding
// rates), its per-user shares C_k, private rates, per-user totals C_k + R_k,
// and the sum rate.
struct RateAllocation {
    Eigen::VectorXd common_shares;  // K, C_k >= 0
    Eigen::VectorXd private_rates;  // K
    Eigen::VectorXd totals;         // K, C_k + R_k
    double common_rate = 0.0;       // R_c
    double sum_rate = 0.0;

    void validate() const {
        const auto K = common_shares.size();
        if (private_rates.size() != K || totals.size() != K)
            throw ContractViolation("RateAllocation: field size mismatch");
        if ((common_shares.array() < -1e-12).any())
            throw ContractViolation("RateAllocation: common shares must be nonnegative");
        if (common_shares.sum() > common_rate + 1e-9)
            throw ContractViolation("RateAllocation: shares exceed the common rate");
    }
};

namespace detail {

inline void check_user_index(const ChannelSet& ch, const PrecoderSet& pr, int k) {
    if (ch.antennas() != pr.antennas() || ch.users() != pr.users())
        throw ContractViolation("channel/precoder dimension mismatch");
    if (k < 0 || k >= ch.users())
        throw ContractViolation("user index " + std::to_string(k) + " out of range");
}

} // namespace detail

// SINR of the common stream at user k: every private stream interferes.
inline double common_sinr(const ChannelSet& ch, const PrecoderSet& pr, int k) {
    detail::check_user_index(ch, pr, k);
    const Eigen::VectorXcd& h = ch.true_channels.col(k);
    double interference = ch.noise_vars(k);
    for (int i = 0; i < pr.users(); ++i) interference += std::norm(h.dot(pr.privates.col(i)));
    return std::norm(h.dot(pr.common)) / interference;
}

// SINR of user k's private stream after the common stream is decoded and
// cancelled: only the other private streams interfere (p_c must not appear).
inline double private_sinr(const ChannelSet& ch, const PrecoderSet& pr, int k) {
    detail::check_user_index(ch, pr, k);
    const Eigen::VectorXcd& h = ch.true_channels.col(k);
    double interference = ch.noise_vars(k);
    for (int i = 0; i < pr.users(); ++i)
        if (i != k) interference += std::norm(h.dot(pr.privates.col(i)));
    return std::norm(h.dot(pr.privates.col(k))) / interference;
}

// Shannon-rate allocation: R_c = min_k log2(1 + gamma_ck), private rates
// log2(1 + gamma_k). The requested shares must fit into R_c.
inline RateAllocation shannon_rates(const ChannelSet& ch, const PrecoderSet& pr,
                                    const Eigen::VectorXd& shares) {
    detail::check_user_index(ch, pr, 0);
    const int K = ch.users();
    if (shares.size() != K)
        throw ContractViolation("shannon_rates: shares size != K");
    if ((shares.array() < 0.0).any())
        throw ContractViolation("shannon_rates: shares must be nonnegative");

    RateAllocation ra;
    ra.common_shares = shares;
    ra.private_rates.resize(K);
    ra.common_rate = std::numeric_limits<double>::infinity();
    int bound_user = 0;
    for (int k = 0; k < K; ++k) {
        const double rc_k = std::log2(1.0 + common_sinr(ch, pr, k));
        if (rc_k < ra.common_rate) {
            ra.common_rate = rc_k;
            bound_user = k;
        }
        ra.private_rates(k) = std::log2(1.0 + private_sinr(ch, pr, k));
    }
    if (shares.sum() > ra.common_rate + 1e-9)
        throw AllocationError("shannon_rates: share sum " + std::to_string(shares.sum()) +
                                  " exceeds common rate " + std::to_string(ra.common_rate) +
                                  " bound by user " + std::to_string(bound_user),
                              bound_user);
    ra.totals = ra.common_shares + ra.private_rates;
    ra.sum_rate = ra.totals.sum();
    return ra;
}

// SDMA view of a precoder set: the common stream is switched off. The freed
// power is *not* redistributed here — that is the optimizer's job.
inline PrecoderSet sdma_config(PrecoderSet pr) {
    pr.common.setZero();
    return pr;
}

// NOMA decoding order (two users): the user with the larger channel norm
// decodes the other's stream first. Equal norms (the angle-channel construction
// gives exactly that) break deterministically toward user 0.
inline int noma_strong_user(const ChannelSet& ch) {
    if (ch.users() != 2)
        throw UnsupportedConfiguration("NOMA ordering requires exactly 2 users");
    const double n0 = ch.true_channels.col(0).norm();
    const double n1 = ch.true_channels.col(1).norm();
    return n1 > n0 ? 1 : 0;
}

// The three SINRs of the two-user NOMA SIC chain:
//   weak stream at the weak user (strong user's stream is noise),
//   weak stream at the strong user (before SIC, own stream is noise),
//   strong stream at the strong user (after cancelling the weak stream).
struct NomaSinrs {
    int strong = 0;
    int weak = 1;
    double weak_at_weak = 0.0;
    double weak_at_strong = 0.0;
    double strong_own = 0.0;
};

inline NomaSinrs noma_sinrs(const ChannelSet& ch, const PrecoderSet& pr) {
    detail::check_user_index(ch, pr, 0);
    if (ch.users() != 2)
        throw UnsupportedConfiguration("noma_sinrs requires exactly 2 users");
    NomaSinrs s;
    s.strong = noma_strong_user(ch);
    s.weak = 1 - s.strong;
    const Eigen::VectorXcd& hw = ch.true_channels.col(s.weak);
    const Eigen::VectorXcd& hs = ch.true_channels.col(s.strong);
    const Eigen::VectorXcd& pw = pr.privates.col(s.weak);
    const Eigen::VectorXcd& ps = pr.privates.col(s.strong);
    s.weak_at_weak = std::norm(hw.dot(pw)) / (std::norm(hw.dot(ps)) + ch.noise_vars(s.weak));
    s.weak_at_strong = std::norm(hs.dot(pw)) / (std::norm(hs.dot(ps)) + ch.noise_vars(s.strong));
    s.strong_own = std::norm(hs.dot(ps)) / ch.noise_vars(s.strong);
    return s;
}

} // namespace rsma
