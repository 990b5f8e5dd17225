#pragma once

// Self-contained two-phase log-barrier interior-point method for the small
// dense convex subproblems produced by the SCA linearization (tens of
// variables, tens of constraints). Minimizes a linear cost over smooth convex
// constraints g_i(z) <= 0. Phase I minimizes the max-violation slack s inside
// a trust ball; phase II follows the central path with Newton centering until
// the duality-gap bound m/t drops below tolerance.

#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rsma::detail {

// One dense linear form v^T x over a contiguous variable block [offset, offset+len).
struct BlockForm {
    int offset = 0;
    Eigen::VectorXd coef;
};

// General smooth convex constraint
//   c0 + sum lin c*z_i + sum diag c*z_i^2 + sum (v^T x_blk)^2
//      + sum lin_forms v^T x_blk + sum logc c*log2(1+z_i) <= 0
// Convexity requires diag coefficients >= 0 and log coefficients <= 0.
struct SmoothCon {
    double c0 = 0.0;
    std::vector<std::pair<int, double>> lin;
    std::vector<std::pair<int, double>> diag_quad;
    std::vector<BlockForm> sq_forms;
    std::vector<BlockForm> lin_forms;
    std::vector<std::pair<int, double>> log2_terms;  // c * log2(1 + z_i), c <= 0
    double scale = 1.0;  // characteristic magnitude; values are compared scaled

    double raw_value(const Eigen::VectorXd& z) const {
        double v = c0;
        for (const auto& [i, c] : lin) v += c * z(i);
        for (const auto& [i, c] : diag_quad) v += c * z(i) * z(i);
        for (const auto& f : sq_forms) {
            const double s = f.coef.dot(z.segment(f.offset, f.coef.size()));
            v += s * s;
        }
        for (const auto& f : lin_forms) v += f.coef.dot(z.segment(f.offset, f.coef.size()));
        for (const auto& [i, c] : log2_terms) {
            if (z(i) <= -1.0) return std::numeric_limits<double>::infinity();
            v += c * std::log2(1.0 + z(i));
        }
        return v;
    }

    void add_gradient(const Eigen::VectorXd& z, double w, Eigen::VectorXd& g) const {
        for (const auto& [i, c] : lin) g(i) += w * c;
        for (const auto& [i, c] : diag_quad) g(i) += w * 2.0 * c * z(i);
        for (const auto& f : sq_forms) {
            const double s = f.coef.dot(z.segment(f.offset, f.coef.size()));
            g.segment(f.offset, f.coef.size()) += (w * 2.0 * s) * f.coef;
        }
        for (const auto& f : lin_forms) g.segment(f.offset, f.coef.size()) += w * f.coef;
        for (const auto& [i, c] : log2_terms)
            g(i) += w * c / ((1.0 + z(i)) * std::numbers::ln2);
    }

    void add_hessian(const Eigen::VectorXd& z, double w, Eigen::MatrixXd& H) const {
        for (const auto& [i, c] : diag_quad) H(i, i) += w * 2.0 * c;
        for (const auto& f : sq_forms) {
            const auto n = f.coef.size();
            H.block(f.offset, f.offset, n, n) +=
                (w * 2.0) * (f.coef * f.coef.transpose());
        }
        for (const auto& [i, c] : log2_terms) {
            const double t = 1.0 + z(i);
            H(i, i) += -w * c / (t * t * std::numbers::ln2);
        }
    }
};

struct BarrierOptions {
    double mu = 10.0;        // outer path multiplier
    double t0 = 1.0;         // initial path parameter
    double gap_tol = 1e-7;   // stop when m/t < gap_tol
    double newton_tol = 1e-11;  // on half the squared Newton decrement
    int max_newton = 70;
    int max_centers = 60;
};

struct BarrierResult {
    Eigen::VectorXd z;
    bool feasible = false;
    double objective = std::numeric_limits<double>::quiet_NaN();
};

class BarrierSolver {
  public:
    explicit BarrierSolver(int n) : n_(n) {}

    void add(SmoothCon con) { cons_.push_back(std::move(con)); }
    int num_constraints() const { return static_cast<int>(cons_.size()); }

    // Minimize cost^T z over the constraint set, starting anywhere finite.
    BarrierResult minimize(const Eigen::VectorXd& cost, const Eigen::VectorXd& z0,
                           const BarrierOptions& opt) const {
        BarrierResult res;
        Eigen::VectorXd z = z0;
        if (!phase1(z, opt)) return res;  // infeasible: no strict interior found
        if (!descend(cons_, n_, cost, z, opt, /*early_exit_below=*/
                     -std::numeric_limits<double>::infinity(), -1))
            return res;
        res.z = std::move(z);
        res.feasible = true;
        res.objective = cost.dot(res.z);
        return res;
    }

  private:
    // Values scaled by each constraint's characteristic magnitude.
    static double max_scaled_value(const std::vector<SmoothCon>& cons,
                                   const Eigen::VectorXd& z) {
        double m = -std::numeric_limits<double>::infinity();
        for (const auto& c : cons) m = std::max(m, c.raw_value(z) / c.scale);
        return m;
    }

    // Phase I: minimize s subject to g_i/scale_i - s <= 0 inside a trust ball
    // around z0. Succeeds once s goes strictly negative. The ball is what keeps
    // the phase-I objective bounded below (free epigraph variables would
    // otherwise let the barrier term run to -inf).
    bool phase1(Eigen::VectorXd& z, const BarrierOptions& opt) const {
        const double margin = 1e-10;
        if (max_scaled_value(cons_, z) < -margin) return true;  // already interior

        const int ns = n_ + 1;  // slack index n_
        std::vector<SmoothCon> aug = cons_;
        for (auto& c : aug) c.lin.emplace_back(n_, -c.scale);  // g - s*scale <= 0 (scaled later)

        SmoothCon ball;  // sum (z_i - z0_i)^2 <= r^2, plus headroom for s
        const double r = 1e3 * (1.0 + z.norm());
        ball.c0 = -r * r;
        for (int i = 0; i < n_; ++i) {
            ball.diag_quad.emplace_back(i, 1.0);
            ball.lin.emplace_back(i, -2.0 * z(i));
            ball.c0 += z(i) * z(i);
        }
        ball.diag_quad.emplace_back(n_, 1e-6);  // mild bound on s itself
        ball.scale = r * r;
        aug.push_back(std::move(ball));

        Eigen::VectorXd zs(ns);
        zs.head(n_) = z;
        const double v0 = max_scaled_value(cons_, z);
        zs(n_) = v0 + std::max(0.1 * std::fabs(v0), 1e-3);

        Eigen::VectorXd cost = Eigen::VectorXd::Zero(ns);
        cost(n_) = 1.0;
        BarrierOptions p1 = opt;
        p1.gap_tol = 1e-9;  // gap on s, absolute; exit usually triggers earlier
        if (!descend(aug, ns, cost, zs, p1, /*early_exit_below=*/-1e-5, n_)) return false;
        if (zs(n_) >= -margin) return false;
        z = zs.head(n_);
        return true;
    }

    // Shared barrier descent: outer path loop + Newton centering with
    // feasibility-then-Armijo backtracking. When early_idx >= 0, returns as
    // soon as z(early_idx) < early_exit_below (phase-I shortcut).
    static bool descend(const std::vector<SmoothCon>& cons, int n,
                        const Eigen::VectorXd& cost, Eigen::VectorXd& z,
                        const BarrierOptions& opt, double early_exit_below, int early_idx) {
        const int m = static_cast<int>(cons.size());
        std::vector<double> vals(m);
        auto evaluate = [&](const Eigen::VectorXd& p) {
            for (int i = 0; i < m; ++i) {
                vals[i] = cons[i].raw_value(p) / cons[i].scale;
                if (!(vals[i] < 0.0)) return false;
            }
            return true;
        };
        auto phi = [&](const Eigen::VectorXd& p, double t) {
            if (!evaluate(p)) return std::numeric_limits<double>::infinity();
            double f = t * cost.dot(p);
            for (int i = 0; i < m; ++i) f -= std::log(-vals[i]);
            return f;
        };

        if (!evaluate(z)) return false;  // caller must hand over a strict interior point

        Eigen::VectorXd grad(n), d(n);
        Eigen::MatrixXd H(n, n);
        double t = opt.t0;
        for (int center = 0; center < opt.max_centers; ++center) {
            for (int it = 0; it < opt.max_newton; ++it) {
                if (!evaluate(z)) return false;
                // phi = t c^T z - sum ln(-g_i/s_i):
                //   grad += (-1/v_i) * (grad g_i)/s_i
                //   H    += gi gi^T / v_i^2 + (-1/v_i) * (hess g_i)/s_i
                grad = t * cost;
                H.setZero();
                for (int i = 0; i < m; ++i) {
                    Eigen::VectorXd gi = Eigen::VectorXd::Zero(n);
                    cons[i].add_gradient(z, 1.0 / cons[i].scale, gi);
                    grad += (-1.0 / vals[i]) * gi;
                    H += gi * gi.transpose() / (vals[i] * vals[i]);
                    cons[i].add_hessian(z, -1.0 / (vals[i] * cons[i].scale), H);
                }
                // Newton step with ridge escalation.
                double ridge = 0.0;
                for (int attempt = 0; attempt < 8; ++attempt) {
                    Eigen::MatrixXd Hr = H;
                    if (ridge > 0.0) Hr.diagonal().array() += ridge;
                    Eigen::LDLT<Eigen::MatrixXd> ldlt(Hr);
                    d = ldlt.solve(-grad);
                    if (ldlt.info() == Eigen::Success && d.allFinite() && grad.dot(d) < 0.0)
                        break;
                    ridge = ridge == 0.0 ? 1e-10 * (1.0 + H.diagonal().maxCoeff()) : ridge * 100.0;
                    d.setZero();
                }
                if (!(grad.dot(d) < 0.0)) break;  // no usable descent direction

                const double decrement2 = -grad.dot(d);
                if (0.5 * decrement2 < opt.newton_tol) break;

                // Backtrack to strict feasibility, then Armijo on phi.
                const double phi0 = phi(z, t);
                double step = 1.0;
                int halvings = 0;
                while (halvings < 80 && !evaluate(z + step * d)) {
                    step *= 0.5;
                    ++halvings;
                }
                if (halvings == 80) break;
                while (halvings < 80 &&
                       phi(z + step * d, t) > phi0 + 0.25 * step * grad.dot(d)) {
                    step *= 0.5;
                    ++halvings;
                }
                if (halvings == 80) break;
                z += step * d;
                if (early_idx >= 0 && z(early_idx) < early_exit_below) return true;
            }
            if (static_cast<double>(m) / t < opt.gap_tol) return true;
            t *= opt.mu;
        }
        return true;  // path ended at max_centers; z is the best centered point
    }

    int n_;
    std::vector<SmoothCon> cons_;
};

} // namespace rsma::detail
