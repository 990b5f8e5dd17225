// Solver behavior: monotone improvement, feasible returned allocations,
// agreement with exhaustive quantized-precoder search at desk scale, and the
// expected orderings between the three transmission schemes.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include <rsma/optimizer.hpp>
#include <rsma/rng.hpp>

using namespace rsma;
using Catch::Matchers::WithinAbs;

namespace {

WsrProblem angle_problem(double theta, double snr_db, std::int64_t n, double xi) {
    WsrProblem pb;
    pb.channels = make_angle_channels(theta);
    pb.weights = Eigen::VectorXd::Ones(2);
    pb.power_budget = std::pow(10.0, snr_db / 10.0);
    pb.fbl = FblConfig::uniform(2, n, xi);
    pb.qos_rates = Eigen::VectorXd::Zero(2);
    return pb;
}

WsrProblem custom_problem(const Eigen::MatrixXcd& H, double P, std::int64_t n, double xi) {
    WsrProblem pb;
    pb.channels.csit_channels = H;
    pb.channels.true_channels = H;
    pb.channels.noise_vars = Eigen::VectorXd::Ones(H.cols());
    pb.weights = Eigen::VectorXd::Ones(H.cols());
    pb.power_budget = P;
    pb.fbl = FblConfig::uniform(static_cast<int>(H.cols()), n, xi);
    pb.qos_rates = Eigen::VectorXd::Zero(H.cols());
    return pb;
}

WsrProblem random_problem(Rng& rng, int nt, int K, double P, std::int64_t n, double xi) {
    Eigen::MatrixXcd H(nt, K);
    for (int k = 0; k < K; ++k)
        for (int a = 0; a < nt; ++a) H(a, k) = rng.cn01();
    WsrProblem pb = custom_problem(H, P, n, xi);
    for (int k = 0; k < K; ++k) pb.channels.noise_vars(k) = 0.5 + rng.uniform01();
    return pb;
}

// Checks every reported solution against the constraint set it claims to
// satisfy: power budget, share feasibility, QoS floors, monotone trace, and
// agreement with an independent recomputation of the rates.
void require_report_sound(const WsrProblem& pb, const SolveReport& rep, bool noma = false) {
    REQUIRE_FALSE(rep.infeasible);
    REQUIRE(rep.precoders.total_power() <= pb.power_budget + 1e-9);
    for (std::size_t i = 1; i < rep.objective_trace.size(); ++i)
        REQUIRE(rep.objective_trace[i] >= rep.objective_trace[i - 1] - 1e-7);
    REQUIRE((rep.allocation.common_shares.array() >= 0.0).all());
    for (int k = 0; k < pb.users(); ++k) {
        REQUIRE(rep.allocation.totals(k) ==
                Catch::Approx(rep.allocation.common_shares(k) + rep.allocation.private_rates(k))
                    .margin(1e-9));
        REQUIRE(rep.allocation.totals(k) >= pb.qos_rates(k) - 1e-6);
    }
    REQUIRE_THAT(rep.objective, WithinAbs(pb.weights.dot(rep.allocation.totals), 1e-9));

    if (noma) {
        const RateAllocation again = noma_fbl_allocation(pb.channels, rep.precoders, pb.fbl);
        for (int k = 0; k < pb.users(); ++k)
            REQUIRE_THAT(rep.allocation.private_rates(k),
                         WithinAbs(again.private_rates(k), 1e-8));
        REQUIRE(rep.allocation.common_shares.isZero(0.0));
        return;
    }
    // Must not throw: the share split fits the recomputed common rate.
    const RateAllocation again =
        fbl_allocation(pb.channels, rep.precoders, pb.fbl, rep.allocation.common_shares);
    for (int k = 0; k < pb.users(); ++k)
        REQUIRE_THAT(rep.allocation.private_rates(k), WithinAbs(again.private_rates(k), 1e-8));
    REQUIRE(rep.allocation.common_shares.sum() <= again.common_rate + 1e-6);
}

// Exhaustive search over precoders whose real coordinates are each drawn from
// {-q, 0, +q}. Rates are recomputed from scratch here (no library allocation
// helpers) so the solver is checked against independent arithmetic.
double penalty_coeff(std::int64_t n, double xi) {
    return std::numbers::log2e * q_inv(xi) / std::sqrt(static_cast<double>(n));
}

double clamped_rate(double gamma, double qv) {
    const double t = 1.0 + gamma;
    const double raw = std::log2(t) - qv * std::sqrt(1.0 - 1.0 / (t * t));
    return raw > 0.0 ? raw : 0.0;
}

// Best weighted sum rate over the quantized grid for the full three-stream
// layered scheme (common + two privates, 12 real coordinates).
double rsma_grid_best(const WsrProblem& pb, double q) {
    const Eigen::VectorXcd h0 = pb.channels.csit_channels.col(0);
    const Eigen::VectorXcd h1 = pb.channels.csit_channels.col(1);
    const double qc = penalty_coeff(pb.fbl.common_blocklength, pb.fbl.target_bler);
    const double qp0 = penalty_coeff(pb.fbl.private_blocklengths(0), pb.fbl.target_bler);
    const double qp1 = penalty_coeff(pb.fbl.private_blocklengths(1), pb.fbl.target_bler);
    const double levels[3] = {-q, 0.0, q};
    double best = 0.0;
    long total = 1;
    for (int i = 0; i < 12; ++i) total *= 3;
    for (long idx = 0; idx < total; ++idx) {
        long rem = idx;
        double v[12];
        double power = 0.0;
        for (int i = 0; i < 12; ++i) {
            v[i] = levels[rem % 3];
            rem /= 3;
            power += v[i] * v[i];
        }
        if (power > pb.power_budget + 1e-12) continue;
        const std::complex<double> pc[2] = {{v[0], v[1]}, {v[2], v[3]}};
        const std::complex<double> p0[2] = {{v[4], v[5]}, {v[6], v[7]}};
        const std::complex<double> p1[2] = {{v[8], v[9]}, {v[10], v[11]}};
        auto dot = [](const Eigen::VectorXcd& h, const std::complex<double>* p) {
            return std::conj(h(0)) * p[0] + std::conj(h(1)) * p[1];
        };
        const double i00 = std::norm(dot(h0, p0)), i01 = std::norm(dot(h0, p1));
        const double i10 = std::norm(dot(h1, p0)), i11 = std::norm(dot(h1, p1));
        const double n0 = pb.channels.noise_vars(0), n1 = pb.channels.noise_vars(1);
        const double rc = std::min(
            clamped_rate(std::norm(dot(h0, pc)) / (n0 + i00 + i01), qc),
            clamped_rate(std::norm(dot(h1, pc)) / (n1 + i10 + i11), qc));
        const double r0 = clamped_rate(i00 / (n0 + i01), qp0);
        const double r1 = clamped_rate(i11 / (n1 + i10), qp1);
        const double obj = pb.weights.maxCoeff() * rc + pb.weights(0) * r0 + pb.weights(1) * r1;
        best = std::max(best, obj);
    }
    return best;
}

// Same idea for two-user superposition with decode ordering fixed by channel
// norms (8 real coordinates: weak message stream, then strong).
double noma_grid_best(const WsrProblem& pb, double q) {
    const int strong = noma_strong_user(pb.channels);
    const int weak = 1 - strong;
    const Eigen::VectorXcd hw = pb.channels.csit_channels.col(weak);
    const Eigen::VectorXcd hs = pb.channels.csit_channels.col(strong);
    const double qw = penalty_coeff(pb.fbl.private_blocklengths(weak), pb.fbl.target_bler);
    const double qs = penalty_coeff(pb.fbl.private_blocklengths(strong), pb.fbl.target_bler);
    const double nw = pb.channels.noise_vars(weak), ns = pb.channels.noise_vars(strong);
    const double levels[3] = {-q, 0.0, q};
    double best = 0.0;
    long total = 1;
    for (int i = 0; i < 8; ++i) total *= 3;
    for (long idx = 0; idx < total; ++idx) {
        long rem = idx;
        double v[8];
        double power = 0.0;
        for (int i = 0; i < 8; ++i) {
            v[i] = levels[rem % 3];
            rem /= 3;
            power += v[i] * v[i];
        }
        if (power > pb.power_budget + 1e-12) continue;
        const std::complex<double> pw[2] = {{v[0], v[1]}, {v[2], v[3]}};
        const std::complex<double> ps[2] = {{v[4], v[5]}, {v[6], v[7]}};
        auto dot = [](const Eigen::VectorXcd& h, const std::complex<double>* p) {
            return std::conj(h(0)) * p[0] + std::conj(h(1)) * p[1];
        };
        const double rate_weak = std::min(
            clamped_rate(std::norm(dot(hw, pw)) / (nw + std::norm(dot(hw, ps))), qw),
            clamped_rate(std::norm(dot(hs, pw)) / (ns + std::norm(dot(hs, ps))), qw));
        const double rate_strong = clamped_rate(std::norm(dot(hs, ps)) / ns, qs);
        const double obj = pb.weights(weak) * rate_weak + pb.weights(strong) * rate_strong;
        best = std::max(best, obj);
    }
    return best;
}

} // namespace

TEST_CASE("single-user problems put all power on the matched filter") {
    Eigen::MatrixXcd H(4, 1);
    H.col(0) << std::complex<double>(1, 0.5), std::complex<double>(-0.3, 1),
        std::complex<double>(0.2, -0.7), std::complex<double>(0.9, 0.1);
    WsrProblem pb = custom_problem(H, 10.0, 200, 1e-5);
    const double ideal = fbl_rate(pb.power_budget * H.col(0).squaredNorm(), 200, 1e-5).value;

    const SolveReport r = solve_rsma(pb);
    const SolveReport s = solve_sdma(pb);
    require_report_sound(pb, r);
    require_report_sound(pb, s);
    REQUIRE_THAT(r.objective, WithinAbs(ideal, 1e-4));
    REQUIRE_THAT(s.objective, WithinAbs(ideal, 1e-4));
    REQUIRE_THAT(s.objective, WithinAbs(r.objective, 1e-4));
}

TEST_CASE("headline two-user instance reaches the reference operating point") {
    WsrProblem pb = angle_problem(std::numbers::pi / 9.0, 20.0, 100, 5e-6);
    const SolveReport r = solve_rsma(pb);
    require_report_sound(pb, r);
    REQUIRE(r.converged);
    REQUIRE_THAT(r.objective, WithinAbs(9.7, 0.5));
}

TEST_CASE("solver beats exhaustive quantized-precoder search") {
    Eigen::MatrixXcd H(2, 2);
    H.col(0) << std::complex<double>(1.0, 0.3), std::complex<double>(0.8, -0.1);
    H.col(1) << std::complex<double>(0.9, -0.2), std::complex<double>(-0.5, 0.7);
    WsrProblem pb = custom_problem(H, 12.0, 300, 1e-5);

    const double grid = rsma_grid_best(pb, 1.0);  // full-power corners hit P exactly
    const SolveReport r = solve_rsma(pb);
    require_report_sound(pb, r);
    INFO("grid best " << grid << ", solver " << r.objective);
    REQUIRE(r.objective >= grid - 1e-2);
}

TEST_CASE("monotone trace, feasibility, and sdma dominance on random instances") {
    const int shapes[][2] = {{2, 2}, {3, 2}, {4, 3}, {3, 3}};
    const double powers[] = {5.0, 50.0, 200.0, 20.0};
    const std::int64_t lengths[] = {150, 1000, kInfiniteBlocklength, 500};
    for (int i = 0; i < 4; ++i) {
        Rng rng(0x5EED0000u + i);
        WsrProblem pb = random_problem(rng, shapes[i][0], shapes[i][1], powers[i],
                                       lengths[i], 1e-5);
        INFO("instance " << i);
        const SolveReport r = solve_rsma(pb);
        const SolveReport s = solve_sdma(pb);
        require_report_sound(pb, r);
        require_report_sound(pb, s);
        REQUIRE(s.allocation.common_shares.isZero(0.0));
        REQUIRE(s.precoders.common.isZero(0.0));
        REQUIRE(r.objective >= s.objective - 1e-3);
        if (pb.users() == 2) {
            const SolveReport n = solve_noma(pb);
            require_report_sound(pb, n, /*noma=*/true);
        }
    }
}

TEST_CASE("qos floors bind without wrecking the objective") {
    WsrProblem pb = angle_problem(std::numbers::pi / 9.0, 20.0, 100, 5e-6);
    pb.weights << 1.0, 2.0;
    const SolveReport free_r = solve_rsma(pb);

    pb.qos_rates << 6.0, 0.0;
    const SolveReport r = solve_rsma(pb);
    require_report_sound(pb, r);
    REQUIRE(r.allocation.totals(0) >= 6.0 - 1e-6);
    REQUIRE(r.objective <= free_r.objective + 1e-6);
    // The common split is the cheap lever here: the sum rate should survive.
    REQUIRE(r.allocation.sum_rate >= 0.9 * free_r.allocation.sum_rate);
}

TEST_CASE("unreachable qos targets are reported, not silently dropped") {
    WsrProblem pb = angle_problem(std::numbers::pi / 9.0, 20.0, 100, 5e-6);
    pb.qos_rates << 50.0, 50.0;
    const SolveReport r = solve_rsma(pb);
    REQUIRE(r.infeasible);
    REQUIRE(r.infeasible_detail.find("user") != std::string::npos);
    REQUIRE(r.precoders.total_power() <= pb.power_budget + 1e-9);

    const SolveReport s = solve_sdma(pb);
    REQUIRE(s.infeasible);
}

TEST_CASE("superposition baseline orders as expected across channel angles") {
    // Nearly orthogonal users: superposition wastes the spatial separation.
    WsrProblem pb = angle_problem(4.0 * std::numbers::pi / 9.0, 20.0, 100, 5e-6);
    const SolveReport r = solve_rsma(pb);
    const SolveReport s = solve_sdma(pb);
    const SolveReport n = solve_noma(pb);
    require_report_sound(pb, n, /*noma=*/true);
    REQUIRE(n.objective < r.objective - 1.0);
    REQUIRE(n.objective < s.objective - 1.0);
}

TEST_CASE("aligned channels with asymmetric norms favor superposition") {
    Eigen::MatrixXcd H(2, 2);
    H.col(0) << std::complex<double>(0.35, 0.0), std::complex<double>(0.35, 0.0);
    H.col(1) << std::complex<double>(1.0, 0.0), std::complex<double>(1.0, 0.0);
    WsrProblem pb = custom_problem(H, 100.0, 100, 5e-6);
    pb.weights << 3.0, 1.0;  // make the weak user matter

    const SolveReport n = solve_noma(pb);
    const SolveReport s = solve_sdma(pb);
    require_report_sound(pb, n, /*noma=*/true);
    REQUIRE(n.objective >= s.objective - 1e-3);

    const double grid = noma_grid_best(pb, std::sqrt(100.0 / 8.0));
    INFO("grid best " << grid << ", solver " << n.objective);
    REQUIRE(n.objective >= grid - 1e-2);
}

TEST_CASE("zero-weight user reduces superposition to single-user beamforming") {
    Eigen::MatrixXcd H(4, 2);
    H.col(0) = Eigen::VectorXcd::Ones(4) * 0.5;
    H.col(1) = Eigen::VectorXcd::Ones(4) * 2.0;
    WsrProblem pb = custom_problem(H, 10.0, 300, 1e-5);
    pb.weights << 0.0, 1.0;  // only the strong user counts

    const double ideal = fbl_rate(pb.power_budget * H.col(1).squaredNorm(), 300, 1e-5).value;
    const SolveReport r = solve_noma(pb);
    REQUIRE_THAT(r.objective, WithinAbs(ideal, 1e-3));
}

TEST_CASE("superposition requires exactly two users") {
    Eigen::MatrixXcd H1(4, 1);
    H1.setOnes();
    REQUIRE_THROWS_AS(solve_noma(custom_problem(H1, 10.0, 100, 1e-5)),
                      UnsupportedConfiguration);
    Eigen::MatrixXcd H3 = Eigen::MatrixXcd::Identity(4, 3);
    REQUIRE_THROWS_AS(solve_noma(custom_problem(H3, 10.0, 100, 1e-5)),
                      UnsupportedConfiguration);
}

TEST_CASE("large blocklengths close in on the penalty-free solution") {
    // Single user at N=1e6: the residual penalty is ~6.4e-3, inside 1e-2.
    Eigen::MatrixXcd H(4, 1);
    H.col(0) << std::complex<double>(1, 0.5), std::complex<double>(-0.3, 1),
        std::complex<double>(0.2, -0.7), std::complex<double>(0.9, 0.1);
    WsrProblem one = custom_problem(H, 10.0, 1000000, 5e-6);
    WsrProblem one_inf = one;
    one_inf.fbl = FblConfig::infinite(1);
    one_inf.fbl.target_bler = 5e-6;
    REQUIRE_THAT(solve_rsma(one).objective,
                 WithinAbs(solve_rsma(one_inf).objective, 1e-2));

    // Two users, three active streams: each stream pays ~log2(e)Qinv/sqrt(N),
    // so N must be larger before the 1e-2 window closes around the limit.
    WsrProblem two = angle_problem(2.0 * std::numbers::pi / 9.0, 20.0, 100000000, 5e-6);
    WsrProblem two_inf = two;
    two_inf.fbl = FblConfig::infinite(2);
    two_inf.fbl.target_bler = 5e-6;
    const double at_1e8 = solve_rsma(two).objective;
    const double at_inf = solve_rsma(two_inf).objective;
    REQUIRE_THAT(at_1e8, WithinAbs(at_inf, 1e-2));

    // And the approach is monotone from the short-blocklength side.
    WsrProblem two_short = angle_problem(2.0 * std::numbers::pi / 9.0, 20.0, 100, 5e-6);
    WsrProblem two_mid = angle_problem(2.0 * std::numbers::pi / 9.0, 20.0, 1000000, 5e-6);
    const double at_100 = solve_rsma(two_short).objective;
    const double at_1e6 = solve_rsma(two_mid).objective;
    REQUIRE(at_100 < at_1e6);
    REQUIRE(at_1e6 < at_inf + 1e-7);
    REQUIRE(at_inf - at_1e6 < 0.05);
}

TEST_CASE("capped iterations return the best iterate unconverged") {
    WsrProblem pb = angle_problem(std::numbers::pi / 9.0, 20.0, 100, 5e-6);
    SolverOptions opt;
    opt.max_iterations = 1;
    const SolveReport r = solve_rsma(pb, opt);
    REQUIRE_FALSE(r.converged);
    require_report_sound(pb, r);
}

TEST_CASE("problem validation rejects malformed inputs") {
    WsrProblem pb = angle_problem(std::numbers::pi / 9.0, 20.0, 100, 5e-6);
    WsrProblem bad = pb;
    bad.weights(0) = -1.0;
    REQUIRE_THROWS_AS(bad.validate(), ContractViolation);
    bad = pb;
    bad.weights.setZero();
    REQUIRE_THROWS_AS(bad.validate(), ContractViolation);
    bad = pb;
    bad.power_budget = 0.0;
    REQUIRE_THROWS_AS(bad.validate(), ContractViolation);
    bad = pb;
    bad.qos_rates(1) = -0.1;
    REQUIRE_THROWS_AS(bad.validate(), ContractViolation);
    bad = pb;
    bad.weights = Eigen::VectorXd::Ones(3);
    REQUIRE_THROWS_AS(bad.validate(), ContractViolation);
}
