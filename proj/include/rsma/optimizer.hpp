#pragma once

// Weighted-sum-rate precoder optimization under finite-blocklength rates.
// solve_rsma / solve_sdma / solve_noma share one successive-convex-
// approximation engine. Each scheme is described by a small topology: a list
// of decode hypotheses (stream s evaluated at user k against a set of
// interfering streams), plus rate variables bounded by them — a nonnegative
// per-user split for a shared stream, a free epigraph for a dedicated one.
// Every SCA step linearizes the SINR and dispersion-penalty terms around the
// incumbent and hands the convex subproblem to the log-barrier solver; the
// incumbent only moves when the true (non-surrogate) objective improves.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rsma/channel.hpp"
#include "rsma/detail/barrier.hpp"
#include "rsma/errors.hpp"
#include "rsma/fbl.hpp"
#include "rsma/mathfn.hpp"
#include "rsma/txmodel.hpp"

namespace rsma {

struct WsrProblem {
    ChannelSet channels;
    Eigen::VectorXd weights;    // u_k, nonnegative, not all zero
    double power_budget = 0.0;  // transmit power P
    FblConfig fbl;
    Eigen::VectorXd qos_rates;  // per-user minimum totals, >= 0

    int users() const { return channels.users(); }

    void validate() const {
        channels.validate();
        fbl.validate();
        if (fbl.private_blocklengths.size() != channels.users())
            throw ContractViolation("WsrProblem: one private blocklength per user required");
        if (weights.size() != channels.users() || qos_rates.size() != channels.users())
            throw ContractViolation("WsrProblem: weights/qos_rates must have one entry per user");
        if (!(power_budget > 0.0))
            throw ContractViolation("WsrProblem: power_budget must be positive");
        if ((weights.array() < 0.0).any() || weights.sum() <= 0.0)
            throw ContractViolation("WsrProblem: weights must be nonnegative with a positive sum");
        if ((qos_rates.array() < 0.0).any())
            throw ContractViolation("WsrProblem: qos_rates must be nonnegative");
    }
};

struct SolverOptions {
    int max_iterations = 200;
    double tolerance = 1e-5;  // stop when the objective improves by less
    detail::BarrierOptions barrier{};
};

struct SolveReport {
    PrecoderSet precoders;
    RateAllocation allocation;
    std::vector<double> objective_trace;  // weighted sum rate per SCA iteration
    int iterations = 0;
    bool converged = false;
    bool infeasible = false;
    std::string infeasible_detail;  // maximally-violated constraint when infeasible
    double objective = 0.0;         // final weighted sum rate
};

namespace detail {

// One decode hypothesis: stream `stream` decoded at user `user` while the
// listed streams are still treated as noise.
struct StreamEval {
    int user = 0;
    int stream = 0;
    std::vector<int> interferers;
    std::int64_t blocklength = 1;
};

// A stream whose rate is split into nonnegative per-user shares, each bounded
// collectively by every listed hypothesis (the shared stream must be decodable
// by all its audience).
struct ShareGroup {
    std::vector<int> users;
    std::vector<int> evals;
};

// A dedicated rate: one free variable bounded above by each listed hypothesis.
struct RateEpigraph {
    int user = 0;
    std::vector<int> evals;
};

struct Topology {
    int nt = 0, K = 0, S = 0;       // antennas, users, stream count
    int common_stream = -1;          // column index of the shared stream, -1 if none
    std::vector<int> message_stream; // per user: column carrying its dedicated message
    std::vector<StreamEval> evals;
    std::vector<ShareGroup> groups;
    std::vector<RateEpigraph> epis;

    static Topology rsma(int nt, int K, const FblConfig& fbl) {
        Topology t;
        t.nt = nt; t.K = K; t.S = K + 1; t.common_stream = 0;
        t.message_stream.resize(K);
        ShareGroup g;
        for (int k = 0; k < K; ++k) {
            t.message_stream[k] = 1 + k;
            std::vector<int> all_priv(K);
            for (int i = 0; i < K; ++i) all_priv[i] = 1 + i;
            t.evals.push_back({k, 0, all_priv, fbl.common_blocklength});
            g.users.push_back(k);
            g.evals.push_back(static_cast<int>(t.evals.size()) - 1);
        }
        t.groups.push_back(std::move(g));
        for (int k = 0; k < K; ++k) {
            std::vector<int> others;
            for (int i = 0; i < K; ++i)
                if (i != k) others.push_back(1 + i);
            t.evals.push_back({k, 1 + k, others, fbl.private_blocklengths(k)});
            t.epis.push_back({k, {static_cast<int>(t.evals.size()) - 1}});
        }
        return t;
    }

    static Topology sdma(int nt, int K, const FblConfig& fbl) {
        Topology t;
        t.nt = nt; t.K = K; t.S = K;
        t.message_stream.resize(K);
        for (int k = 0; k < K; ++k) {
            t.message_stream[k] = k;
            std::vector<int> others;
            for (int i = 0; i < K; ++i)
                if (i != k) others.push_back(i);
            t.evals.push_back({k, k, others, fbl.private_blocklengths(k)});
            t.epis.push_back({k, {static_cast<int>(t.evals.size()) - 1}});
        }
        return t;
    }

    // Two-user superposition: the stronger-channel user decodes the weaker's
    // message first (so that message must survive at both receivers), then its
    // own interference-free.
    static Topology noma(int nt, const ChannelSet& channels, const FblConfig& fbl) {
        const int strong = noma_strong_user(channels);
        const int weak = 1 - strong;
        Topology t;
        t.nt = nt; t.K = 2; t.S = 2;
        t.message_stream.resize(2);
        t.message_stream[weak] = 0;
        t.message_stream[strong] = 1;
        t.evals.push_back({weak, 0, {1}, fbl.private_blocklengths(weak)});
        t.evals.push_back({strong, 0, {1}, fbl.private_blocklengths(weak)});
        t.evals.push_back({strong, 1, {}, fbl.private_blocklengths(strong)});
        t.epis.push_back({weak, {0, 1}});
        t.epis.push_back({strong, {2}});
        return t;
    }
};

// Incumbent SCA state: stacked stream precoders (one column per stream) and
// the current share values per group.
struct ScaState {
    Eigen::MatrixXcd cols;
    std::vector<Eigen::VectorXd> shares;
};

struct TruthResult {
    RateAllocation alloc;
    double objective = 0.0;              // weighted sum of totals
    Eigen::VectorXd eval_gamma;          // true SINR per hypothesis
    Eigen::VectorXd eval_rate;           // clamped rate per hypothesis
};

// Exact (non-surrogate) rates at a state, with shares projected back into the
// feasible split if numerics pushed their sum past the shared-stream rate.
inline TruthResult evaluate_truth(const Topology& topo, const WsrProblem& pb,
                                  ScaState& st) {
    const int E = static_cast<int>(topo.evals.size());
    TruthResult out;
    out.eval_gamma.resize(E);
    out.eval_rate.resize(E);
    const double xi = pb.fbl.target_bler;
    for (int e = 0; e < E; ++e) {
        const auto& ev = topo.evals[e];
        const Eigen::VectorXcd h = pb.channels.csit_channels.col(ev.user);
        double den = pb.channels.noise_vars(ev.user);
        for (int i : ev.interferers) den += std::norm(h.dot(st.cols.col(i)));
        const double num = std::norm(h.dot(st.cols.col(ev.stream)));
        out.eval_gamma(e) = num / den;
        out.eval_rate(e) = fbl_rate(out.eval_gamma(e), ev.blocklength, xi).value;
    }

    const int K = topo.K;
    RateAllocation alloc;
    alloc.common_shares = Eigen::VectorXd::Zero(K);
    alloc.private_rates = Eigen::VectorXd::Zero(K);
    alloc.common_rate = 0.0;

    for (std::size_t g = 0; g < topo.groups.size(); ++g) {
        const auto& grp = topo.groups[g];
        double bound = std::numeric_limits<double>::infinity();
        for (int e : grp.evals) bound = std::min(bound, out.eval_rate(e));
        alloc.common_rate = bound;
        Eigen::VectorXd& sh = st.shares[g];
        sh = sh.cwiseMax(0.0);
        const double total = sh.sum();
        if (total > bound) sh *= bound <= 0.0 ? 0.0 : bound * (1.0 - 1e-12) / total;
        for (std::size_t j = 0; j < grp.users.size(); ++j)
            alloc.common_shares(grp.users[j]) += sh(j);
    }
    for (const auto& epi : topo.epis) {
        double bound = std::numeric_limits<double>::infinity();
        for (int e : epi.evals) bound = std::min(bound, out.eval_rate(e));
        alloc.private_rates(epi.user) += bound;
    }
    alloc.totals = alloc.common_shares + alloc.private_rates;
    alloc.sum_rate = alloc.totals.sum();
    out.alloc = std::move(alloc);
    out.objective = pb.weights.dot(out.alloc.totals);
    return out;
}

// Dispersion-penalty shape f(g) = sqrt(1 - (1+g)^-2) and its derivative; the
// finite-blocklength rate is log2(1+g) - q*f(g) with q = log2(e)*Qinv(xi)/sqrt(n).
inline double penalty_shape(double g) {
    const double t = 1.0 + g;
    return std::sqrt(std::max(0.0, 1.0 - 1.0 / (t * t)));
}
inline double penalty_shape_slope(double g) {
    const double t = 1.0 + g;
    return 1.0 / (t * t * std::sqrt(std::max(t * t - 1.0, 1e-300)));
}

// One SCA run for a fixed topology from a given start. Handles the optional
// QoS feasibility pre-solve (maximize the minimum slack) before switching to
// the weighted-sum-rate objective.
class ScaEngine {
  public:
    ScaEngine(const WsrProblem& pb, Topology topo, const SolverOptions& opt)
        : pb_(pb), topo_(std::move(topo)), opt_(opt) {
        qinv_ = q_inv(pb_.fbl.target_bler);
        refresh_penalties();
    }

    struct Outcome {
        ScaState state;
        TruthResult truth;
        std::vector<double> trace;
        int iterations = 0;
        bool converged = false;
        bool qos_feasible = true;
        int worst_user = -1;       // argmin QoS slack when infeasible
        double worst_slack = 0.0;
    };

    Outcome run(ScaState start) {
        Outcome out;
        out.state = std::move(start);
        if ((pb_.qos_rates.array() > 0.0).any()) {
            if (!presolve_qos(out)) return out;  // infeasible: diagnostics filled
        }
        TruthResult truth = evaluate_truth(topo_, pb_, out.state);
        out.trace.push_back(truth.objective);
        for (int it = 0; it < opt_.max_iterations; ++it) {
            ScaState cand = out.state;
            if (!solve_subproblem(cand, truth, /*presolve=*/false, nullptr)) {
                if (!collapse_shared(cand)) break;
                out.state = cand;
                truth = evaluate_truth(topo_, pb_, out.state);
                out.trace.assign(1, truth.objective);  // fresh trace for the reduced problem
                continue;  // retry with the shared stream dropped
            }
            TruthResult tcand = evaluate_truth(topo_, pb_, cand);
            if (tcand.objective < truth.objective - 1e-9) break;  // solver noise floor
            const double gain = tcand.objective - truth.objective;
            out.state = std::move(cand);
            truth = std::move(tcand);
            out.trace.push_back(truth.objective);
            out.iterations = it + 1;
            if (gain < opt_.tolerance) {
                out.converged = true;
                break;
            }
        }
        out.truth = evaluate_truth(topo_, pb_, out.state);
        return out;
    }

    const Topology& topology() const { return topo_; }

  private:
    // --- variable layout -------------------------------------------------
    int nx() const { return 2 * topo_.nt * topo_.S; }
    int xoff(int stream) const { return 2 * topo_.nt * stream; }
    int alpha(int e) const { return nx() + 2 * e; }
    int beta(int e) const { return nx() + 2 * e + 1; }
    int share_base() const { return nx() + 2 * static_cast<int>(topo_.evals.size()); }
    int num_share_vars() const {
        int n = 0;
        for (const auto& g : topo_.groups) n += static_cast<int>(g.users.size());
        return n;
    }
    int share_index(int g, int j) const {
        int base = share_base();
        for (int i = 0; i < g; ++i) base += static_cast<int>(topo_.groups[i].users.size());
        return base + j;
    }
    int epi_index(int p) const { return share_base() + num_share_vars() + p; }
    int num_vars() const { return epi_index(0) + static_cast<int>(topo_.epis.size()); }

    // Real/imaginary coefficient vectors of h^H p over a stream block laid out
    // as [Re p; Im p]:  Re(h^H p) = [Re h; Im h]^T x,  Im(h^H p) = [-Im h; Re h]^T x.
    static void herm_forms(const Eigen::VectorXcd& h, Eigen::VectorXd& re,
                           Eigen::VectorXd& im) {
        const auto n = h.size();
        re.resize(2 * n);
        im.resize(2 * n);
        re.head(n) = h.real();
        re.tail(n) = h.imag();
        im.head(n) = -h.imag();
        im.tail(n) = h.real();
    }

    // Per-user rate-total variables (shares + epigraphs), used by QoS rows.
    std::vector<std::pair<int, double>> user_total_vars(int user) const {
        std::vector<std::pair<int, double>> v;
        for (std::size_t g = 0; g < topo_.groups.size(); ++g)
            for (std::size_t j = 0; j < topo_.groups[g].users.size(); ++j)
                if (topo_.groups[g].users[j] == user)
                    v.emplace_back(share_index(static_cast<int>(g), static_cast<int>(j)), 1.0);
        for (std::size_t p = 0; p < topo_.epis.size(); ++p)
            if (topo_.epis[p].user == user) v.emplace_back(epi_index(static_cast<int>(p)), 1.0);
        return v;
    }

    // Build and solve the convex subproblem linearized at `st`/`truth`.
    // presolve=true swaps the objective for max-min QoS slack (extra variable
    // tau appended after all others); tau_out receives its optimum.
    bool solve_subproblem(ScaState& st, const TruthResult& truth, bool presolve,
                          double* tau_out) {
        const int E = static_cast<int>(topo_.evals.size());
        const int n = num_vars() + (presolve ? 1 : 0);
        const int tau = num_vars();
        BarrierSolver solver(n);

        // Power ball: sum of all precoder coordinates squared <= P.
        {
            SmoothCon con;
            con.c0 = -pb_.power_budget;
            for (int i = 0; i < nx(); ++i) con.diag_quad.emplace_back(i, 1.0);
            con.scale = pb_.power_budget;
            solver.add(std::move(con));
        }

        Eigen::VectorXd z0 = Eigen::VectorXd::Zero(n);
        for (int s = 0; s < topo_.S; ++s) {
            z0.segment(xoff(s), topo_.nt) = st.cols.col(s).real();
            z0.segment(xoff(s) + topo_.nt, topo_.nt) = st.cols.col(s).imag();
        }

        Eigen::VectorXd vre, vim;
        for (int e = 0; e < E; ++e) {
            const auto& ev = topo_.evals[e];
            const Eigen::VectorXcd h = pb_.channels.csit_channels.col(ev.user);
            const double sigma2 = pb_.channels.noise_vars(ev.user);
            herm_forms(h, vre, vim);

            const std::complex<double> ahat = h.dot(st.cols.col(ev.stream));
            double bhat = sigma2;
            for (int i : ev.interferers) bhat += std::norm(h.dot(st.cols.col(i)));
            const double ghat = std::norm(ahat) / bhat;
            const double af = std::max(ghat, 1e-7);  // linearization floor

            // Interference budget: sigma^2 + sum |h^H p_i|^2 - beta <= 0.
            {
                SmoothCon con;
                con.c0 = sigma2;
                con.lin.emplace_back(beta(e), -1.0);
                for (int i : ev.interferers) {
                    con.sq_forms.push_back({xoff(i), vre});
                    con.sq_forms.push_back({xoff(i), vim});
                }
                con.scale = bhat;
                solver.add(std::move(con));
            }
            // SINR lower bound via |h^H p|^2 >= 2Re{ahat^* h^H p} - |ahat|^2 and
            // alpha*beta <= (bhat/2af) alpha^2 + (af/2bhat) beta^2.
            {
                SmoothCon con;
                con.c0 = std::norm(ahat);
                con.diag_quad.emplace_back(alpha(e), bhat / (2.0 * af));
                con.diag_quad.emplace_back(beta(e), af / (2.0 * bhat));
                BlockForm lf;
                lf.offset = xoff(ev.stream);
                lf.coef = -2.0 * (ahat.real() * vre + ahat.imag() * vim);
                con.lin_forms.push_back(std::move(lf));
                con.scale = std::max(af * bhat, 1e-10);
                solver.add(std::move(con));
            }
            // alpha >= 0.
            {
                SmoothCon con;
                con.lin.emplace_back(alpha(e), -1.0);
                solver.add(std::move(con));
            }

            z0(alpha(e)) = ghat;
            z0(beta(e)) = bhat;
        }

        // Rate bounds. Each bound owner (group share sum or epigraph) must stay
        // below log2(1+alpha) - q*(f(af) + f'(af)(alpha - af)) for its hypotheses.
        auto add_rate_con = [&](const std::vector<std::pair<int, double>>& owners, int e) {
            const auto& ahat_gamma = z0(alpha(e));
            const double af = std::max(ahat_gamma, 1e-7);
            const double q = eval_q_[e];
            const double slope = q * penalty_shape_slope(af);
            const double kappa = q * (penalty_shape(af) - penalty_shape_slope(af) * af);
            SmoothCon con;
            con.c0 = kappa;
            con.lin = owners;
            con.lin.emplace_back(alpha(e), slope);
            con.log2_terms.emplace_back(alpha(e), -1.0);
            con.scale = std::max(1.0, std::log2(1.0 + af));
            solver.add(std::move(con));
        };
        for (std::size_t g = 0; g < topo_.groups.size(); ++g) {
            std::vector<std::pair<int, double>> owners;
            for (std::size_t j = 0; j < topo_.groups[g].users.size(); ++j)
                owners.emplace_back(share_index(static_cast<int>(g), static_cast<int>(j)), 1.0);
            for (int e : topo_.groups[g].evals) add_rate_con(owners, e);
            for (const auto& [idx, c] : owners) {  // shares >= 0
                SmoothCon con;
                con.lin.emplace_back(idx, -c);
                solver.add(std::move(con));
            }
        }
        for (std::size_t p = 0; p < topo_.epis.size(); ++p) {
            const int rho = epi_index(static_cast<int>(p));
            for (int e : topo_.epis[p].evals) add_rate_con({{rho, 1.0}}, e);
            SmoothCon floor_con;  // rho >= -1 keeps the barrier coercive when a weight is 0
            floor_con.c0 = -1.0;
            floor_con.lin.emplace_back(rho, -1.0);
            solver.add(std::move(floor_con));
        }

        // QoS rows: r_k - totals_k <= 0 (plus tau in presolve mode, all users).
        for (int k = 0; k < topo_.K; ++k) {
            const double r = pb_.qos_rates(k);
            if (!presolve && r <= 0.0) continue;
            SmoothCon con;
            con.c0 = r;
            for (auto [idx, c] : user_total_vars(k)) con.lin.emplace_back(idx, -c);
            if (presolve) con.lin.emplace_back(tau, 1.0);
            con.scale = std::max(1.0, r);
            solver.add(std::move(con));
        }

        // Warm start for the rate variables straight from the incumbent truth.
        for (std::size_t g = 0; g < topo_.groups.size(); ++g)
            for (std::size_t j = 0; j < topo_.groups[g].users.size(); ++j)
                z0(share_index(static_cast<int>(g), static_cast<int>(j))) = st.shares[g](j);
        for (std::size_t p = 0; p < topo_.epis.size(); ++p) {
            double bound = std::numeric_limits<double>::infinity();
            for (int e : topo_.epis[p].evals) bound = std::min(bound, truth.eval_rate(e));
            z0(epi_index(static_cast<int>(p))) = std::max(bound - 1e-6, -0.5);
        }
        if (presolve) {
            double slack = std::numeric_limits<double>::infinity();
            for (int k = 0; k < topo_.K; ++k)
                slack = std::min(slack, truth.alloc.totals(k) - pb_.qos_rates(k));
            z0(tau) = slack - 1e-3;
        }

        Eigen::VectorXd cost = Eigen::VectorXd::Zero(n);
        if (presolve) {
            cost(tau) = -1.0;
        } else {
            for (std::size_t g = 0; g < topo_.groups.size(); ++g)
                for (std::size_t j = 0; j < topo_.groups[g].users.size(); ++j)
                    cost(share_index(static_cast<int>(g), static_cast<int>(j))) =
                        -pb_.weights(topo_.groups[g].users[j]);
            for (std::size_t p = 0; p < topo_.epis.size(); ++p)
                cost(epi_index(static_cast<int>(p))) = -pb_.weights(topo_.epis[p].user);
        }

        const BarrierResult res = solver.minimize(cost, z0, opt_.barrier);
        if (!res.feasible) return false;

        for (int s = 0; s < topo_.S; ++s) {
            st.cols.col(s).real() = res.z.segment(xoff(s), topo_.nt);
            st.cols.col(s).imag() = res.z.segment(xoff(s) + topo_.nt, topo_.nt);
        }
        for (std::size_t g = 0; g < topo_.groups.size(); ++g)
            for (std::size_t j = 0; j < topo_.groups[g].users.size(); ++j)
                st.shares[g](j) =
                    std::max(0.0, res.z(share_index(static_cast<int>(g), static_cast<int>(j))));
        if (tau_out) *tau_out = presolve ? res.z(tau) : 0.0;
        return true;
    }

    // Maximize the minimum QoS slack until it is safely positive. Returns
    // false (with diagnostics in `out`) when the target rates are unreachable.
    bool presolve_qos(Outcome& out) {
        TruthResult truth = evaluate_truth(topo_, pb_, out.state);
        auto min_slack = [&](const TruthResult& t, int* arg) {
            double s = std::numeric_limits<double>::infinity();
            for (int k = 0; k < topo_.K; ++k) {
                const double sk = t.alloc.totals(k) - pb_.qos_rates(k);
                if (sk < s) {
                    s = sk;
                    if (arg) *arg = k;
                }
            }
            return s;
        };
        int arg = 0;
        double slack = min_slack(truth, &arg);
        for (int it = 0; it < 60 && slack < 1e-4; ++it) {
            ScaState cand = out.state;
            double tau = 0.0;
            if (!solve_subproblem(cand, truth, /*presolve=*/true, &tau)) break;
            TruthResult tcand = evaluate_truth(topo_, pb_, cand);
            int carg = 0;
            const double cslack = min_slack(tcand, &carg);
            if (cslack < slack + 1e-9) break;  // stalled
            out.state = std::move(cand);
            truth = std::move(tcand);
            slack = cslack;
            arg = carg;
        }
        if (slack < 0.0) {
            out.qos_feasible = false;
            out.worst_user = arg;
            out.worst_slack = slack;
            out.truth = truth;
            return false;
        }
        return true;
    }

    // Drop the shared stream (RSMA -> SDMA structure) when its surrogate has
    // pinched the subproblem infeasible; keeps the dedicated streams going.
    bool collapse_shared(ScaState& st) {
        if (topo_.common_stream < 0) return false;
        Eigen::MatrixXcd priv(topo_.nt, topo_.K);
        for (int k = 0; k < topo_.K; ++k) priv.col(k) = st.cols.col(topo_.message_stream[k]);
        topo_ = Topology::sdma(topo_.nt, topo_.K, pb_.fbl);
        st.cols = priv;
        st.shares.clear();
        refresh_penalties();
        return true;
    }

    void refresh_penalties() {
        eval_q_.resize(topo_.evals.size());
        for (std::size_t e = 0; e < topo_.evals.size(); ++e)
            eval_q_[e] = std::numbers::log2e * qinv_ /
                         std::sqrt(static_cast<double>(topo_.evals[e].blocklength));
    }

    const WsrProblem& pb_;
    Topology topo_;
    SolverOptions opt_;
    double qinv_ = 0.0;
    std::vector<double> eval_q_;
};

// --- deterministic initial points ---------------------------------------

// Regularized zero-forcing directions H (H^H H + (K/P) diag(noise))^-1,
// columns normalized.
inline Eigen::MatrixXcd regularized_zf_directions(const ChannelSet& ch, double P) {
    const int K = ch.users();
    const Eigen::MatrixXcd H = ch.csit_channels;
    Eigen::MatrixXcd G = H.adjoint() * H;
    for (int k = 0; k < K; ++k) G(k, k) += static_cast<double>(K) / P * ch.noise_vars(k);
    Eigen::MatrixXcd W = H * G.inverse();
    for (int k = 0; k < K; ++k) {
        const double n = W.col(k).norm();
        W.col(k) = n > 1e-14 ? Eigen::VectorXcd(W.col(k) / n)
                             : Eigen::VectorXcd(H.col(k) / H.col(k).norm());
    }
    return W;
}

inline Eigen::MatrixXcd mrt_directions(const ChannelSet& ch) {
    Eigen::MatrixXcd W = ch.csit_channels;
    for (int k = 0; k < ch.users(); ++k) W.col(k) /= W.col(k).norm();
    return W;
}

// Dominant left singular direction of the stacked channels: the natural
// broadcast direction for a stream everyone must decode.
inline Eigen::VectorXcd broadcast_direction(const ChannelSet& ch) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(ch.csit_channels, Eigen::ComputeThinU);
    return svd.matrixU().col(0);
}

inline ScaState rsma_state(const Eigen::VectorXcd& common, const Eigen::MatrixXcd& priv) {
    ScaState st;
    st.cols.resize(priv.rows(), priv.cols() + 1);
    st.cols.col(0) = common;
    st.cols.rightCols(priv.cols()) = priv;
    st.shares = {Eigen::VectorXd::Zero(priv.cols())};
    return st;
}

// Spread the shared stream's current rate equally across the shares so the
// starting point already uses it.
inline void seed_shares_equally(const Topology& topo, const WsrProblem& pb, ScaState& st) {
    if (topo.groups.empty()) return;
    st.shares[0].setZero();
    TruthResult t = evaluate_truth(topo, pb, st);
    const int K = static_cast<int>(st.shares[0].size());
    st.shares[0].setConstant(std::max(0.0, t.alloc.common_rate) * (1.0 - 1e-9) / K);
}

} // namespace detail

namespace detail {

inline SolveReport finish_report(const WsrProblem& pb, const Topology& topo,
                                 ScaEngine::Outcome& best) {
    SolveReport rep;
    const int K = pb.users();
    rep.precoders.power_budget = pb.power_budget;
    rep.precoders.common = Eigen::VectorXcd::Zero(pb.channels.antennas());
    rep.precoders.privates.resize(pb.channels.antennas(), K);
    if (topo.common_stream >= 0)
        rep.precoders.common = best.state.cols.col(topo.common_stream);
    for (int k = 0; k < K; ++k)
        rep.precoders.privates.col(k) = best.state.cols.col(topo.message_stream[k]);
    rep.allocation = best.truth.alloc;
    rep.objective_trace = std::move(best.trace);
    rep.iterations = best.iterations;
    rep.converged = best.converged;
    rep.objective = best.truth.objective;
    if (!best.qos_feasible) {
        rep.infeasible = true;
        rep.infeasible_detail =
            "QoS rate target unreachable: user " + std::to_string(best.worst_user) +
            " short by " + std::to_string(-best.worst_slack) + " bits/s/Hz at best effort";
    }
    return rep;
}

// Run the engine from every start, keep the best feasible outcome (or the
// least-infeasible one when QoS cannot be met from any start).
inline SolveReport run_multistart(const WsrProblem& pb, const Topology& topo,
                                  const SolverOptions& opt,
                                  std::vector<ScaState> starts) {
    ScaEngine::Outcome best;
    Topology best_topo = topo;
    bool have = false;
    for (auto& st : starts) {
        ScaEngine engine(pb, topo, opt);
        ScaEngine::Outcome out = engine.run(std::move(st));
        const bool better =
            !have ||
            (out.qos_feasible && (!best.qos_feasible || out.truth.objective > best.truth.objective)) ||
            (!out.qos_feasible && !best.qos_feasible && out.worst_slack > best.worst_slack);
        if (better) {
            best = std::move(out);
            best_topo = engine.topology();
            have = true;
        }
    }
    return finish_report(pb, best_topo, best);
}

} // namespace detail

inline SolveReport solve_sdma(const WsrProblem& problem, const SolverOptions& options = {}) {
    problem.validate();
    const int nt = problem.channels.antennas();
    const int K = problem.users();
    const double P = problem.power_budget;
    const auto topo = detail::Topology::sdma(nt, K, problem.fbl);

    auto with_powers = [&](const Eigen::MatrixXcd& dirs, const Eigen::VectorXd& powers) {
        detail::ScaState st;
        st.cols = dirs;
        for (int k = 0; k < K; ++k) st.cols.col(k) *= std::sqrt(powers(k));
        return st;
    };
    const Eigen::VectorXd equal = Eigen::VectorXd::Constant(K, P / K);
    // Weight-tilted split, kept strictly positive so no stream starts dead.
    Eigen::VectorXd tilt = problem.weights.array() + 0.01 * problem.weights.mean();
    tilt *= P / tilt.sum();

    std::vector<detail::ScaState> starts;
    starts.push_back(with_powers(detail::regularized_zf_directions(problem.channels, P), equal));
    starts.push_back(with_powers(detail::mrt_directions(problem.channels), equal));
    starts.push_back(with_powers(detail::regularized_zf_directions(problem.channels, P), tilt));
    return detail::run_multistart(problem, topo, options, std::move(starts));
}

inline SolveReport solve_rsma(const WsrProblem& problem, const SolverOptions& options = {}) {
    problem.validate();
    const int nt = problem.channels.antennas();
    const int K = problem.users();
    const double P = problem.power_budget;
    const auto topo = detail::Topology::rsma(nt, K, problem.fbl);
    const Eigen::VectorXcd bc = detail::broadcast_direction(problem.channels);

    auto make_start = [&](double common_frac, const Eigen::MatrixXcd& dirs) {
        Eigen::MatrixXcd priv = dirs;
        for (int k = 0; k < K; ++k)
            priv.col(k) *= std::sqrt((1.0 - common_frac) * P / K);
        detail::ScaState st = detail::rsma_state(bc * std::sqrt(common_frac * P), priv);
        detail::seed_shares_equally(topo, problem, st);
        return st;
    };

    std::vector<detail::ScaState> starts;
    starts.push_back(make_start(0.2, detail::regularized_zf_directions(problem.channels, P)));
    starts.push_back(make_start(0.1, detail::mrt_directions(problem.channels)));
    starts.push_back(make_start(0.99, detail::regularized_zf_directions(problem.channels, P)));

    // Fourth start: the solved SDMA point with a whisper of common power, so
    // the returned objective can never fall meaningfully below SDMA's.
    SolveReport sdma = solve_sdma(problem, options);
    if (!sdma.infeasible) {
        const double delta = 1e-4;
        Eigen::MatrixXcd priv = sdma.precoders.privates * std::sqrt(1.0 - delta);
        detail::ScaState st = detail::rsma_state(bc * std::sqrt(delta * P), priv);
        detail::seed_shares_equally(topo, problem, st);
        starts.push_back(std::move(st));
    }
    return detail::run_multistart(problem, topo, options, std::move(starts));
}

inline SolveReport solve_noma(const WsrProblem& problem, const SolverOptions& options = {}) {
    problem.validate();
    if (problem.users() != 2)
        throw UnsupportedConfiguration("solve_noma: superposition baseline is two-user only");
    const int nt = problem.channels.antennas();
    const double P = problem.power_budget;
    const auto topo = detail::Topology::noma(nt, problem.channels, problem.fbl);
    const Eigen::MatrixXcd mrt = detail::mrt_directions(problem.channels);

    // Matched-filter directions per message, swept over power splits
    // (weak-message fraction first).
    auto make_start = [&](double weak_frac) {
        detail::ScaState st;
        st.cols.resize(nt, 2);
        for (int k = 0; k < 2; ++k) {
            const int col = topo.message_stream[k];
            const double frac = col == 0 ? weak_frac : 1.0 - weak_frac;
            st.cols.col(col) = mrt.col(k) * std::sqrt(frac * P);
        }
        return st;
    };
    std::vector<detail::ScaState> starts = {make_start(0.8), make_start(0.5),
                                            make_start(0.2)};
    return detail::run_multistart(problem, topo, options, std::move(starts));
}

} // namespace rsma
