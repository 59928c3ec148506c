#pragma once

#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nmfair/automata.hpp"
#include "nmfair/model.hpp"

namespace nmfair {

/// A state of the compiled product: base model state plus memory value.
struct ProductState {
    StateId base;
    std::size_t memory = 0;
    friend auto operator<=>(const ProductState&, const ProductState&) = default;
};

/// Product of a base model with a memory machine. The underlying
/// MultiStakeholderMdp ranges over the reachable product states; the fairness
/// function becomes Markovian via the per-transition table F'. F' is stored
/// per (s', a, s'') even though its value depends only on s'' — the full
/// signature mirrors the per-transition fairness form.
class ProductMdp {
public:
    MultiStakeholderMdp mdp;                    // over product states
    MultiStakeholderMdp base;                   // the model that was compiled
    MemoryMachine machine;                      // the compiled-in fairness machine
    std::vector<ProductState> product_states;   // product index -> (s, m)
    std::vector<double> markov_fairness;        // [(ps*|A|+a)*|S'|+ps'] -> F'

    std::size_t num_product_states() const { return product_states.size(); }

    /// Index of the materialized product state, if reachable.
    std::optional<std::size_t> product_index(StateId base_state, std::size_t memory) const {
        const std::size_t key = base_state.index * machine.memory_count + memory;
        if (key >= index_.size() || index_[key] == kUnreached) return std::nullopt;
        return index_[key];
    }

    double fairness(StateId from, ActionId a, StateId to) const {
        return markov_fairness.at(mdp.reward_index(from, a, to));
    }

    void set_index_map(std::vector<std::size_t> index) { index_ = std::move(index); }
    static constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();

private:
    std::vector<std::size_t> index_;   // [s*|M|+m] -> product index or kUnreached
};

/// Compiles (model, machine) into the product MDP over S x M. Only states
/// reachable from <s_init, m_init> under positive-probability transitions are
/// materialized. P'(<s2,m2> | <s1,m1>, a) = P(s2 | s1, a) when
/// m2 = g(m1, a, s2) and 0 otherwise; rewards are lifted unchanged;
/// F'(<s,m>, a, <s',m'>) = F(s', m').
inline ProductMdp build_product(const MultiStakeholderMdp& m, const MemoryMachine& mm) {
    {
        const ValidationReport model_report = validate_mdp(m);
        if (!model_report.ok())
            throw std::invalid_argument("build_product: invalid model: " +
                                        model_report.violations.front());
        const ValidationReport machine_report = validate_machine(mm);
        if (!machine_report.ok())
            throw std::invalid_argument("build_product: invalid machine: " +
                                        machine_report.violations.front());
        if (mm.num_states != m.num_states() || mm.num_actions != m.num_actions())
            throw std::invalid_argument(
                "build_product: machine tables sized for a different model (|S|=" +
                std::to_string(mm.num_states) + ", |A|=" + std::to_string(mm.num_actions) + ")");
    }

    ProductMdp p;
    p.base = m;
    p.machine = mm;

    std::vector<std::size_t> index(m.num_states() * mm.memory_count, ProductMdp::kUnreached);
    auto key = [&](std::size_t s, std::size_t mem) { return s * mm.memory_count + mem; };

    // Breadth-first reachability from the initial product state.
    p.product_states.push_back({m.init, mm.init_memory});
    index[key(m.init.index, mm.init_memory)] = 0;
    for (std::size_t i = 0; i < p.product_states.size(); ++i) {
        const ProductState ps = p.product_states[i];
        for (std::size_t a = 0; a < m.num_actions(); ++a) {
            for (const auto& [s2, prob] : m.successors(ps.base, ActionId{a})) {
                if (prob <= 0.0) continue;
                const std::size_t m2 = mm.step_memory(ps.memory, ActionId{a}, s2);
                if (index[key(s2.index, m2)] == ProductMdp::kUnreached) {
                    index[key(s2.index, m2)] = p.product_states.size();
                    p.product_states.push_back({s2, m2});
                }
            }
        }
    }

    // Assemble the product model.
    std::vector<std::string> labels;
    labels.reserve(p.product_states.size());
    for (const ProductState& ps : p.product_states)
        labels.push_back(m.state_labels[ps.base.index] + "|" + mm.memory_name(ps.memory));
    p.mdp = MultiStakeholderMdp(std::move(labels), m.action_labels, m.stakeholder_labels,
                                StateId{0}, m.gamma);

    const std::size_t np = p.product_states.size();
    p.markov_fairness.assign(np * m.num_actions() * np, 0.0);
    for (std::size_t i = 0; i < np; ++i) {
        const ProductState ps = p.product_states[i];
        for (std::size_t a = 0; a < m.num_actions(); ++a) {
            MultiStakeholderMdp::SuccessorList succ;
            for (const auto& [s2, prob] : m.successors(ps.base, ActionId{a})) {
                if (prob <= 0.0) continue;
                const std::size_t m2 = mm.step_memory(ps.memory, ActionId{a}, s2);
                const std::size_t j = index[key(s2.index, m2)];
                succ.emplace_back(StateId{j}, prob);
            }
            p.mdp.set_transition(StateId{i}, ActionId{a}, std::move(succ));
            for (std::size_t j = 0; j < np; ++j) {
                const ProductState pt = p.product_states[j];
                const std::size_t idx = p.mdp.reward_index(StateId{i}, ActionId{a}, StateId{j});
                for (std::size_t st = 0; st < m.num_stakeholders(); ++st)
                    p.mdp.reward_tables()[st][idx] = m.reward(st, ps.base, ActionId{a}, pt.base);
                p.markov_fairness[idx] = mm.out(pt.base, pt.memory);
            }
        }
    }
    p.set_index_map(std::move(index));
    return p;
}

/// Entry-wise invariant check: P'(<s2,m2> | <s1,m1>, a) agrees with the base
/// transition table and the memory update on every materialized entry, and
/// every row still sums to 1. Quantifies only over materialized states.
inline ValidationReport validate_product(const ProductMdp& p) {
    ValidationReport report;
    auto add = [&](std::string msg) { report.violations.push_back(std::move(msg)); };
    const MultiStakeholderMdp& m = p.base;
    for (std::size_t i = 0; i < p.num_product_states(); ++i) {
        const ProductState ps = p.product_states[i];
        for (std::size_t a = 0; a < m.num_actions(); ++a) {
            double sum = 0.0;
            for (const auto& [j, prob] : p.mdp.successors(StateId{i}, ActionId{a})) {
                const ProductState pt = p.product_states[j.index];
                sum += prob;
                const double base_prob = m.transition_prob(ps.base, ActionId{a}, pt.base);
                const std::size_t expected_memory =
                    p.machine.step_memory(ps.memory, ActionId{a}, pt.base);
                if (pt.memory != expected_memory) {
                    std::ostringstream os;
                    os << "memory component violates the update at product (" << i << ",a=" << a
                       << ") -> " << j.index;
                    add(os.str());
                } else if (std::abs(prob - base_prob) > kProbTolerance) {
                    std::ostringstream os;
                    os << "P' disagrees with P at product (" << i << ",a=" << a << ") -> "
                       << j.index;
                    add(os.str());
                }
            }
            if (std::abs(sum - 1.0) > kProbTolerance) {
                std::ostringstream os;
                os << "P' row sums to " << sum << " at product (" << i << ",a=" << a << ")";
                add(os.str());
            }
        }
    }
    return report;
}

/// Lifts a base-model trace onto the product: product states carry the
/// deterministic memory path. project_trace inverts this exactly.
inline BoundedTrace lift_trace(const ProductMdp& p, const BoundedTrace& tau) {
    const std::vector<std::size_t> path = memory_path(p.machine, tau);
    BoundedTrace out;
    out.start_time = tau.start_time;
    out.actions = tau.actions;
    out.states.reserve(tau.states.size());
    for (std::size_t i = 0; i < tau.states.size(); ++i) {
        const auto idx = p.product_index(tau.states[i], path[i]);
        if (!idx)
            throw std::invalid_argument(
                "lift_trace: trace visits an unmaterialized product state at position " +
                std::to_string(i) + " (is the trace positive-probability on the base model?)");
        out.states.push_back(StateId{*idx});
    }
    return out;
}

/// Drops the memory components; actions are preserved.
inline BoundedTrace project_trace(const ProductMdp& p, const BoundedTrace& tau_product) {
    BoundedTrace out;
    out.start_time = tau_product.start_time;
    out.actions = tau_product.actions;
    out.states.reserve(tau_product.states.size());
    for (StateId s : tau_product.states)
        out.states.push_back(p.product_states.at(s.index).base);
    return out;
}

/// Markovian fairness signal along a product trace:
/// values[t-1] = F'(s'_t, a_t, s'_{t+1}).
inline FairnessSignal markov_fairness_eval(const ProductMdp& p, const BoundedTrace& tau_product) {
    FairnessSignal out;
    out.values.reserve(tau_product.length());
    for (std::size_t t = 1; t <= tau_product.length(); ++t)
        out.values.push_back(
            p.fairness(tau_product.state_at(t), tau_product.action_at(t), tau_product.result_state(t)));
    return out;
}

} // namespace nmfair
