#pragma once

// Channel containers and generators: the deterministic angle-parameterized
// two-user test channels, and time-correlated Rayleigh pairs (true channel +
// outdated CSIT copy) under the Jakes model.

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "rsma/errors.hpp"
#include "rsma/mathfn.hpp"
#include "rsma/rng.hpp"

namespace rsma {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

// Per-user channels at one time instant. Column k of each matrix is user k's
// channel vector; csit_channels holds the delayed copy the transmitter sees.
struct ChannelSet {
    Eigen::MatrixXcd true_channels;   // n_t x K, h_k[m]
    Eigen::MatrixXcd csit_channels;   // n_t x K, h_k[m-1]
    Eigen::VectorXd noise_vars;       // K, sigma_k^2

    int antennas() const { return static_cast<int>(true_channels.rows()); }
    int users() const { return static_cast<int>(true_channels.cols()); }

    void validate() const {
        if (true_channels.rows() < 1 || true_channels.cols() < 1)
            throw ContractViolation("ChannelSet: needs n_t >= 1 and K >= 1");
        if (csit_channels.rows() != true_channels.rows() ||
            csit_channels.cols() != true_channels.cols())
            throw ContractViolation("ChannelSet: csit/true dimension mismatch");
        if (noise_vars.size() != true_channels.cols())
            throw ContractViolation("ChannelSet: noise_vars size != K");
        if ((noise_vars.array() <= 0.0).any())
            throw ContractViolation("ChannelSet: noise variances must be positive");
    }
};

// Inputs of the mobility model. Speed is in m/s at this level; the CLI converts
// km/h so unit mistakes cannot creep into the math.
struct MobilityParams {
    int n_t = 1;      // transmit antennas
    int K = 1;        // users
    double P = 1.0;   // total transmit power, linear
    double v = 0.0;   // user speed, m/s
    double f_c = 1.0; // carrier frequency, Hz
    double T = 1.0;   // CSI report delay, s

    void validate() const {
        if (K < 1 || n_t < K)
            throw ContractViolation("MobilityParams: requires n_t >= K >= 1");
        if (!(P > 0.0) || !(f_c > 0.0) || !(T > 0.0) || v < 0.0)
            throw ContractViolation("MobilityParams: requires P, f_c, T > 0 and v >= 0");
    }
};

// Two-user, four-antenna channels parameterized by the inter-user angle theta:
// h_1 = [1,1,1,1]^H and h_2 = [1, e^{j*theta}, e^{j*2theta}, e^{j*3theta}]^H.
// The ^H convention means the stored column entries are the conjugates
// e^{-j*n*theta}. CSIT mirrors the true channels (this constructor serves the
// perfect-CSIT finite-blocklength experiment) and noise variances are 1.
inline ChannelSet make_angle_channels(double theta) {
    if (!std::isfinite(theta) || theta < 0.0 || theta > std::numbers::pi / 2.0)
        throw DomainError("make_angle_channels: theta must lie in [0, pi/2], got " +
                          std::to_string(theta));
    ChannelSet ch;
    ch.true_channels.resize(4, 2);
    for (int n = 0; n < 4; ++n) {
        ch.true_channels(n, 0) = 1.0;
        ch.true_channels(n, 1) = std::polar(1.0, -theta * n);
    }
    ch.csit_channels = ch.true_channels;
    ch.noise_vars = Eigen::VectorXd::Ones(2);
    ch.validate();
    return ch;
}

// Jakes time-correlation coefficient epsilon = J0(2 pi f_D T), f_D = v f_c / c.
inline double time_correlation(const MobilityParams& params) {
    params.validate();
    const double doppler = params.v * params.f_c / kSpeedOfLight;
    return bessel_j0(2.0 * std::numbers::pi * doppler * params.T);
}

// One correlated draw: CSIT entries i.i.d. CN(0,1), then
// h_k[m] = sqrt(eps^2) h_k[m-1] + sqrt(1-eps^2) e_k[m] with independent CN(0,1)
// innovations. Consumption order is pinned (all CSIT entries column-major, then
// all innovations column-major) — the Monte Carlo determinism contract and the
// common-random-numbers audit depend on it.
inline ChannelSet draw_correlated_pair(const MobilityParams& params, Rng& rng) {
    params.validate();
    const double eps = time_correlation(params);
    const double w_old = std::sqrt(eps * eps);
    const double w_new = std::sqrt(std::max(0.0, 1.0 - eps * eps));

    ChannelSet ch;
    ch.csit_channels.resize(params.n_t, params.K);
    ch.true_channels.resize(params.n_t, params.K);
    for (int k = 0; k < params.K; ++k)
        for (int a = 0; a < params.n_t; ++a) ch.csit_channels(a, k) = rng.cn01();
    for (int k = 0; k < params.K; ++k)
        for (int a = 0; a < params.n_t; ++a)
            ch.true_channels(a, k) = w_old * ch.csit_channels(a, k) + w_new * rng.cn01();
    ch.noise_vars = Eigen::VectorXd::Ones(params.K);
    return ch;
}

} // namespace rsma
