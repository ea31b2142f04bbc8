#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <fmt/format.h>

#include "aoi/solver.hpp"

namespace aoi {

namespace {

constexpr double kResidualTol = 1e-12;

// Successor lists of the chain induced by a fixed policy.
struct InducedChain {
    std::vector<const CompiledModel::Branch*> branch;
};

// Iterative Tarjan; returns the component id of every visited vertex and the
// list of components that have no edge leaving them.
struct SccResult {
    std::vector<int> comp;
    std::vector<std::vector<std::uint32_t>> closed;
};

SccResult closed_classes(const InducedChain& chain, const std::vector<std::uint32_t>& vertices, std::size_t n)
{
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<char> on_stack(n, 0);
    std::vector<std::uint32_t> stack;
    struct Frame {
        std::uint32_t v;
        std::uint32_t next;
    };
    std::vector<Frame> call;
    int counter = 0;
    int n_comp = 0;
    std::vector<std::vector<std::uint32_t>> comps;

    for (std::uint32_t root : vertices) {
        if (index[root] >= 0) continue;
        call.push_back({root, 0});
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = 1;
        while (!call.empty()) {
            Frame& f = call.back();
            const auto* b = chain.branch[f.v];
            if (f.next < b->n_succ) {
                const std::uint32_t w = b->succ[f.next++];
                if (index[w] < 0) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    call.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
                continue;
            }
            const std::uint32_t v = f.v;
            call.pop_back();
            if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
            if (low[v] == index[v]) {
                comps.emplace_back();
                std::uint32_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    comp[w] = n_comp;
                    comps.back().push_back(w);
                } while (w != v);
                ++n_comp;
            }
        }
    }

    SccResult out{std::move(comp), {}};
    for (int c = 0; c < n_comp; ++c) {
        bool closed = true;
        for (auto v : comps[static_cast<std::size_t>(c)]) {
            const auto* b = chain.branch[v];
            for (std::uint32_t j = 0; j < b->n_succ; ++j)
                if (out.comp[b->succ[j]] != c) closed = false;
        }
        if (closed) out.closed.push_back(std::move(comps[static_cast<std::size_t>(c)]));
    }
    return out;
}

}  // namespace

EvalResult policy_evaluation(const Policy& policy, const CompiledModel& model)
{
    policy.validate();
    if (policy.delta != model.space().delta()) throw ContractError("policy and model use different delta");
    const std::size_t n = model.size();
    const StateSpace& space = model.space();

    InducedChain chain{std::vector<const CompiledModel::Branch*>(n)};
    for (std::size_t s = 0; s < n; ++s) chain.branch[s] = &model.branch_for(s, policy.actions[s]);

    // States reachable from the minimum-age start.
    const auto start = static_cast<std::uint32_t>(space.index({1, 1, false, false}));
    std::vector<char> seen(n, 0);
    std::vector<std::uint32_t> reach{start};
    seen[start] = 1;
    for (std::size_t head = 0; head < reach.size(); ++head) {
        const auto* b = chain.branch[reach[head]];
        for (std::uint32_t j = 0; j < b->n_succ; ++j) {
            if (b->prob[j] > 0.0 && !seen[b->succ[j]]) {
                seen[b->succ[j]] = 1;
                reach.push_back(b->succ[j]);
            }
        }
    }

    const auto scc = closed_classes(chain, reach, n);
    if (scc.closed.size() != 1) {
        std::string names;
        for (const auto& cls : scc.closed) {
            names += fmt::format(" [{} states incl. {}]", cls.size(), to_string(space.state(cls.front())));
        }
        throw EvaluationError(
            fmt::format("induced chain has {} closed classes reachable from (1,1,0,0):{}", scc.closed.size(), names));
    }

    // Balance equations π(I − P) = 0 on the reachable set, with the last
    // equation replaced by Σπ = 1.
    const auto m = reach.size();
    std::vector<int> local(n, -1);
    for (std::size_t i = 0; i < m; ++i) local[reach[i]] = static_cast<int>(i);
    const auto last = static_cast<int>(m - 1);

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(4 * m);
    for (std::size_t i = 0; i < m; ++i) {
        const int col = static_cast<int>(i);
        // Row r of A = column r of (I − P): A(r, i) = δ_ri − P(i, r).
        if (col != last) triplets.emplace_back(col, col, 1.0);
        const auto* b = chain.branch[reach[i]];
        for (std::uint32_t j = 0; j < b->n_succ; ++j) {
            const int row = local[b->succ[j]];
            if (row != last) triplets.emplace_back(row, col, -b->prob[j]);
        }
        triplets.emplace_back(last, col, 1.0);
    }
    Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    a.setFromTriplets(triplets.begin(), triplets.end());
    a.makeCompressed();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    rhs[last] = 1.0;

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw EvaluationError("balance equations are singular");
    Eigen::VectorXd pi = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw EvaluationError("failed to solve the balance equations");

    // Stationarity residual ‖πP − π‖₁.
    std::vector<double> flow(m, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const auto* b = chain.branch[reach[i]];
        for (std::uint32_t j = 0; j < b->n_succ; ++j)
            flow[static_cast<std::size_t>(local[b->succ[j]])] += pi[static_cast<Eigen::Index>(i)] * b->prob[j];
        total += pi[static_cast<Eigen::Index>(i)];
    }
    double residual = std::abs(total - 1.0);
    for (std::size_t i = 0; i < m; ++i) residual += std::abs(flow[i] - pi[static_cast<Eigen::Index>(i)]);
    if (!(residual <= kResidualTol * std::max<double>(1.0, static_cast<double>(m) * 1e-3)))
        throw EvaluationError(fmt::format("stationary distribution residual {:.3e} too large", residual));

    EvalResult out;
    out.stationary_dist.assign(n, 0.0);
    out.reachable_states = m;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t s = reach[i];
        const double w = std::max(0.0, pi[static_cast<Eigen::Index>(i)]);
        out.stationary_dist[s] = w;
        const auto* b = chain.branch[s];
        const auto& st = model.state(s);
        out.avg_cost += w * b->stage;
        out.avg_constraint += w * b->charge;
        out.avg_energy += w * b->energy;
        out.avg_aoi_su += w * st.a_s;
        out.avg_aoi_pu += w * st.a_p;
    }
    return out;
}

EvalResult policy_evaluation(const Policy& policy, const ModelParams& params)
{
    return policy_evaluation(policy, CompiledModel(params));
}

EvalResult policy_evaluation(const MixturePolicy& policy, const ModelParams& params)
{
    policy.validate();
    const CompiledModel model(params);
    const auto lo = policy_evaluation(policy.low, model);
    const auto hi = policy_evaluation(policy.high, model);
    const double a = policy.alpha;
    auto blend = [a](double x, double y) { return a * x + (1.0 - a) * y; };
    EvalResult out;
    out.stationary_dist.resize(lo.stationary_dist.size());
    for (std::size_t i = 0; i < out.stationary_dist.size(); ++i)
        out.stationary_dist[i] = blend(lo.stationary_dist[i], hi.stationary_dist[i]);
    out.avg_cost = blend(lo.avg_cost, hi.avg_cost);
    out.avg_constraint = blend(lo.avg_constraint, hi.avg_constraint);
    out.avg_aoi_su = blend(lo.avg_aoi_su, hi.avg_aoi_su);
    out.avg_aoi_pu = blend(lo.avg_aoi_pu, hi.avg_aoi_pu);
    out.avg_energy = blend(lo.avg_energy, hi.avg_energy);
    out.reachable_states = std::max(lo.reachable_states, hi.reachable_states);
    return out;
}

}  // namespace aoi
