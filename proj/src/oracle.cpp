#include "aoi/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>
#include <fmt/format.h>

namespace aoi::oracle {

CostFn lagrangian(const ModelParams& params, double lambda)
{
    return [params, lambda](const SystemState& s, Action a) { return lagrangian_cost(s, a, lambda, params); };
}

double average_cost(const Policy& policy, const ModelParams& params, const CostFn& cost)
{
    const StateSpace space(params.delta);
    if (policy.delta != params.delta) throw ContractError("policy and params disagree on delta");

    // Reachable set from the start state.
    std::vector<SystemState> states{{1, 1, false, false}};
    std::vector<int> local(space.size(), -1);
    local[space.index(states[0])] = 0;
    for (std::size_t head = 0; head < states.size(); ++head) {
        const auto s = states[head];
        for (const auto& t : transition(s, policy.at(s), params)) {
            auto& slot = local[space.index(t.next)];
            if (slot < 0) {
                slot = static_cast<int>(states.size());
                states.push_back(t.next);
            }
        }
    }
    const auto m = static_cast<Eigen::Index>(states.size());
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(m, m);
    Eigen::VectorXd c(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& s = states[static_cast<std::size_t>(i)];
        const Action a = policy.at(s);
        c[i] = cost(s, a);
        for (const auto& t : transition(s, a, params)) P(i, local[space.index(t.next)]) += t.prob;
    }

    // reach(i, j): j reachable from i (reflexive).
    Eigen::Matrix<char, Eigen::Dynamic, Eigen::Dynamic> reach =
        Eigen::Matrix<char, Eigen::Dynamic, Eigen::Dynamic>::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        std::vector<Eigen::Index> stack{i};
        reach(i, i) = 1;
        while (!stack.empty()) {
            const auto u = stack.back();
            stack.pop_back();
            for (Eigen::Index v = 0; v < m; ++v) {
                if (P(u, v) > 0.0 && !reach(i, v)) {
                    reach(i, v) = 1;
                    stack.push_back(v);
                }
            }
        }
    }
    std::vector<char> recurrent(static_cast<std::size_t>(m), 1);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            if (reach(i, j) && !reach(j, i)) recurrent[static_cast<std::size_t>(i)] = 0;

    // Gain of every recurrent state = stationary average of its class.
    Eigen::VectorXd gain = Eigen::VectorXd::Zero(m);
    std::vector<char> done(static_cast<std::size_t>(m), 0);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (!recurrent[static_cast<std::size_t>(i)] || done[static_cast<std::size_t>(i)]) continue;
        std::vector<Eigen::Index> cls;
        for (Eigen::Index j = 0; j < m; ++j)
            if (reach(i, j)) cls.push_back(j);
        const auto k = static_cast<Eigen::Index>(cls.size());
        Eigen::MatrixXd A(k, k);
        for (Eigen::Index r = 0; r < k; ++r)
            for (Eigen::Index q = 0; q < k; ++q) A(r, q) = (r == q ? 1.0 : 0.0) - P(cls[q], cls[r]);
        A.row(k - 1).setOnes();
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
        rhs[k - 1] = 1.0;
        const Eigen::VectorXd pi = A.fullPivLu().solve(rhs);
        double g = 0.0;
        for (Eigen::Index r = 0; r < k; ++r) g += pi[r] * c[cls[r]];
        for (auto j : cls) {
            gain[j] = g;
            done[static_cast<std::size_t>(j)] = 1;
        }
    }
    if (recurrent[0]) return gain[0];

    // Transient states: h = P_TT h + P_TR g_R.
    std::vector<Eigen::Index> tr;
    for (Eigen::Index i = 0; i < m; ++i)
        if (!recurrent[static_cast<std::size_t>(i)]) tr.push_back(i);
    const auto nt = static_cast<Eigen::Index>(tr.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(nt, nt);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(nt);
    for (Eigen::Index r = 0; r < nt; ++r) {
        for (Eigen::Index j = 0; j < m; ++j) {
            if (recurrent[static_cast<std::size_t>(j)]) {
                b[r] += P(tr[r], j) * gain[j];
            }
        }
        for (Eigen::Index q = 0; q < nt; ++q) A(r, q) -= P(tr[r], tr[q]);
    }
    const Eigen::VectorXd h = A.fullPivLu().solve(b);
    return h[0];  // the start state is tr[0]
}

namespace {

struct Enumerator {
    const ModelParams& params;
    double lambda;
    StateSpace space;
    CostFn cost;
    Policy current;
    std::vector<char> decided;
    BruteForceResult result;

    std::vector<std::size_t> successors(std::size_t s, Action a) const
    {
        std::vector<std::size_t> out;
        for (const auto& t : transition(space.state(s), a, params)) out.push_back(space.index(t.next));
        return out;
    }

    void leaf()
    {
        ++result.policies;
        const double g = average_cost(current, params, cost);
        if (result.policies == 1 || g < result.best_gain - 1e-12) {
            result.best_gain = g;
            result.best_policy = current;
        }
    }

    // `reach` marks states known to be reachable; `frontier` holds those whose
    // successors are not yet expanded.
    void run(std::vector<char> reach, std::vector<std::size_t> frontier)
    {
        while (!frontier.empty()) {
            const std::size_t s = frontier.back();
            const auto state = space.state(s);
            if (state.lam_s) {
                frontier.pop_back();
                for (auto n : successors(s, Action::Forced)) {
                    if (!reach[n]) {
                        reach[n] = 1;
                        frontier.push_back(n);
                    }
                }
                continue;
            }
            if (decided[s]) {
                frontier.pop_back();
                continue;
            }
            frontier.pop_back();
            for (Action a : {Action::Update, Action::Silent}) {
                auto r = reach;
                auto f = frontier;
                for (auto n : successors(s, a)) {
                    if (!r[n]) {
                        r[n] = 1;
                        f.push_back(n);
                    }
                }
                decided[s] = 1;
                current.actions[s] = a;
                run(std::move(r), std::move(f));
                decided[s] = 0;
                current.actions[s] = Action::Silent;
            }
            return;
        }
        leaf();
    }
};

Policy all_silent(const ModelParams& params)
{
    const StateSpace space(params.delta);
    Policy p{params.delta, 0.0, std::vector<Action>(space.size(), Action::Silent)};
    for (std::size_t i = 0; i < space.size(); ++i)
        if (space.state(i).lam_s) p.actions[i] = Action::Forced;
    return p;
}

}  // namespace

BruteForceResult brute_force_optimum(const ModelParams& params, double lambda)
{
    params.validate();
    Enumerator e{params, lambda, StateSpace(params.delta), lagrangian(params, lambda), all_silent(params), {}, {}};
    e.current.lambda = lambda;
    e.decided.assign(e.space.size(), 0);
    const auto start = e.space.index({1, 1, false, false});
    std::vector<char> reach(e.space.size(), 0);
    reach[start] = 1;
    e.run(std::move(reach), {start});
    return e.result;
}

BruteForceResult full_table_optimum(const ModelParams& params, double lambda)
{
    params.validate();
    if (params.delta > 3) throw ParameterError("full table enumeration is limited to delta <= 3");
    const StateSpace space(params.delta);
    std::vector<std::size_t> decision;
    for (std::size_t i = 0; i < space.size(); ++i)
        if (!space.state(i).lam_s) decision.push_back(i);
    const auto cost = lagrangian(params, lambda);
    Policy policy = all_silent(params);
    policy.lambda = lambda;
    BruteForceResult result;
    const std::uint64_t total = std::uint64_t{1} << decision.size();
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        for (std::size_t b = 0; b < decision.size(); ++b)
            policy.actions[decision[b]] = (mask >> b) & 1 ? Action::Update : Action::Silent;
        const double g = average_cost(policy, params, cost);
        ++result.policies;
        if (mask == 0 || g < result.best_gain - 1e-12) {
            result.best_gain = g;
            result.best_policy = policy;
        }
    }
    return result;
}

// --- occupation-measure LP -----------------------------------------------------------

namespace {

// Dense tableau simplex for  min cᵀx  s.t.  A x = b, x ≥ 0, b ≥ 0, using
// Bland's rule. Artificial variables occupy columns n..n+m−1.
class Simplex {
public:
    Simplex(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c)
        : m_(A.rows()), n_(A.cols()), c_(c)
    {
        T_ = Eigen::MatrixXd::Zero(m_ + 1, n_ + m_ + 1);
        T_.block(0, 0, m_, n_) = A;
        T_.block(0, n_, m_, m_).setIdentity();
        T_.col(n_ + m_).head(m_) = b;
        basis_.resize(static_cast<std::size_t>(m_));
        for (Eigen::Index r = 0; r < m_; ++r) basis_[static_cast<std::size_t>(r)] = n_ + r;
    }

    double solve()
    {
        // Phase 1: minimise the sum of artificials.
        Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n_ + m_);
        phase1.tail(m_).setOnes();
        set_objective(phase1);
        iterate(n_ + m_);
        if (-T_(m_, n_ + m_) > 1e-9) throw std::runtime_error("occupation LP is infeasible");
        drive_out_artificials();

        Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n_ + m_);
        phase2.head(n_) = c_;
        set_objective(phase2);
        iterate(n_);
        return -T_(m_, n_ + m_);
    }

private:
    static constexpr double kPivotTol = 1e-11;

    void set_objective(const Eigen::VectorXd& cost)
    {
        T_.row(m_).setZero();
        T_.row(m_).head(n_ + m_) = cost.transpose();
        for (Eigen::Index r = 0; r < m_; ++r) {
            const auto j = basis_[static_cast<std::size_t>(r)];
            if (j < 0) continue;
            T_.row(m_) -= cost[j] * T_.row(r);
        }
    }

    void pivot(Eigen::Index r, Eigen::Index j)
    {
        T_.row(r) /= T_(r, j);
        for (Eigen::Index i = 0; i <= m_; ++i)
            if (i != r && T_(i, j) != 0.0) T_.row(i) -= T_(i, j) * T_.row(r);
        basis_[static_cast<std::size_t>(r)] = j;
    }

    // Columns at or beyond `limit` may not enter.
    void iterate(Eigen::Index limit)
    {
        const auto rhs = n_ + m_;
        for (long guard = 0; guard < 1'000'000; ++guard) {
            Eigen::Index enter = -1;
            for (Eigen::Index j = 0; j < limit; ++j) {
                if (T_(m_, j) < -1e-12) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return;
            Eigen::Index leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index r = 0; r < m_; ++r) {
                if (basis_[static_cast<std::size_t>(r)] < 0 || T_(r, enter) <= kPivotTol) continue;
                const double ratio = T_(r, rhs) / T_(r, enter);
                if (ratio < best - 1e-15 ||
                    (std::abs(ratio - best) <= 1e-15 && basis_[static_cast<std::size_t>(r)] <
                                                             basis_[static_cast<std::size_t>(leave)])) {
                    best = ratio;
                    leave = r;
                }
            }
            if (leave < 0) throw std::runtime_error("occupation LP is unbounded");
            pivot(leave, enter);
        }
        throw std::runtime_error("simplex iteration limit reached");
    }

    void drive_out_artificials()
    {
        for (Eigen::Index r = 0; r < m_; ++r) {
            if (basis_[static_cast<std::size_t>(r)] < n_) continue;
            Eigen::Index j = 0;
            while (j < n_ && std::abs(T_(r, j)) <= 1e-9) ++j;
            if (j < n_) {
                pivot(r, j);
            } else {
                // Redundant equality: retire the row.
                T_.row(r).setZero();
                basis_[static_cast<std::size_t>(r)] = -1;
            }
        }
    }

    Eigen::Index m_;
    Eigen::Index n_;
    Eigen::VectorXd c_;
    Eigen::MatrixXd T_;
    std::vector<Eigen::Index> basis_;
};

}  // namespace

double lp_optimal_gain(const ModelParams& params, double lambda)
{
    params.validate();
    const StateSpace space(params.delta);
    const auto n_states = static_cast<Eigen::Index>(space.size());

    struct Column {
        std::size_t state;
        Action action;
    };
    std::vector<Column> cols;
    for (std::size_t i = 0; i < space.size(); ++i)
        for (Action a : available_actions(space.state(i))) cols.push_back({i, a});
    const auto n = static_cast<Eigen::Index>(cols.size());

    // Balance row per state, then the normalisation row.
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n_states + 1, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n_states + 1);
    Eigen::VectorXd c(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& col = cols[static_cast<std::size_t>(j)];
        const auto s = space.state(col.state);
        A(static_cast<Eigen::Index>(col.state), j) += 1.0;
        for (const auto& t : transition(s, col.action, params))
            A(static_cast<Eigen::Index>(space.index(t.next)), j) -= t.prob;
        A(n_states, j) = 1.0;
        c[j] = lagrangian_cost(s, col.action, lambda, params);
    }
    b[n_states] = 1.0;
    return Simplex(A, b, c).solve();
}

}  // namespace aoi::oracle
