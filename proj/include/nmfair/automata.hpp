#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nmfair/fairness.hpp"
#include "nmfair/model.hpp"

namespace nmfair {

/// How a bounded trace is turned into a symbol string.
///  - interleaved: Sigma = S u A, trace encoded s1 a1 s2 a2 ... s_{T+1};
///  - paired:      Sigma = A x S, trace encoded <a1,s2> ... <a_T,s_{T+1}>.
/// Both appear in the finite-memory constructions; a lossless re-encoder
/// bridges them (see reencode_dfa).
enum class EncodingKind { interleaved, paired };

class EncodingError : public std::runtime_error {
public:
    EncodingError(std::string msg, std::size_t position)
        : std::runtime_error(std::move(msg)), position_(position) {}
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

/// Symbol space for a given model size and encoding. Symbols are dense ids:
/// interleaved puts the |S| state symbols first, then the |A| action symbols;
/// paired uses a.index * |S| + s.index.
struct Alphabet {
    EncodingKind kind = EncodingKind::interleaved;
    std::size_t num_states = 0;
    std::size_t num_actions = 0;

    static Alphabet interleaved(std::size_t states, std::size_t actions) {
        return {EncodingKind::interleaved, states, actions};
    }
    static Alphabet paired(std::size_t states, std::size_t actions) {
        return {EncodingKind::paired, states, actions};
    }
    static Alphabet for_model(const MultiStakeholderMdp& m, EncodingKind kind) {
        return {kind, m.num_states(), m.num_actions()};
    }

    std::size_t size() const {
        return kind == EncodingKind::interleaved ? num_states + num_actions
                                                 : num_states * num_actions;
    }

    std::size_t state_symbol(StateId s) const {
        require(kind == EncodingKind::interleaved, "state_symbol needs interleaved encoding");
        return s.index;
    }
    std::size_t action_symbol(ActionId a) const {
        require(kind == EncodingKind::interleaved, "action_symbol needs interleaved encoding");
        return num_states + a.index;
    }
    std::size_t pair_symbol(ActionId a, StateId next) const {
        require(kind == EncodingKind::paired, "pair_symbol needs paired encoding");
        return a.index * num_states + next.index;
    }

    bool is_state_symbol(std::size_t sym) const {
        return kind == EncodingKind::interleaved && sym < num_states;
    }

    std::string describe(std::size_t sym) const {
        if (kind == EncodingKind::interleaved) {
            if (sym < num_states) return "s" + std::to_string(sym);
            return "a" + std::to_string(sym - num_states);
        }
        return "<a" + std::to_string(sym / num_states) + ",s" + std::to_string(sym % num_states) + ">";
    }

    friend bool operator==(const Alphabet&, const Alphabet&) = default;

private:
    static void require(bool cond, const char* msg) {
        if (!cond) throw std::logic_error(msg);
    }
};

/// Encodes a trace as a symbol string under the alphabet. Throws
/// EncodingError naming the first out-of-range position.
inline std::vector<std::size_t> encode_trace(const BoundedTrace& tau, const Alphabet& alphabet) {
    std::vector<std::size_t> out;
    auto check_state = [&](StateId s, std::size_t pos) {
        if (s.index >= alphabet.num_states)
            throw EncodingError("state symbol outside alphabet at position " + std::to_string(pos), pos);
    };
    auto check_action = [&](ActionId a, std::size_t pos) {
        if (a.index >= alphabet.num_actions)
            throw EncodingError("action symbol outside alphabet at position " + std::to_string(pos), pos);
    };
    if (alphabet.kind == EncodingKind::interleaved) {
        out.reserve(2 * tau.length() + 1);
        check_state(tau.states[0], 0);
        out.push_back(alphabet.state_symbol(tau.states[0]));
        for (std::size_t t = 1; t <= tau.length(); ++t) {
            check_action(tau.action_at(t), out.size());
            out.push_back(alphabet.action_symbol(tau.action_at(t)));
            check_state(tau.result_state(t), out.size());
            out.push_back(alphabet.state_symbol(tau.result_state(t)));
        }
    } else {
        out.reserve(tau.length());
        for (std::size_t t = 1; t <= tau.length(); ++t) {
            check_action(tau.action_at(t), out.size());
            check_state(tau.result_state(t), out.size());
            out.push_back(alphabet.pair_symbol(tau.action_at(t), tau.result_state(t)));
        }
    }
    return out;
}

// --- memory machines ---------------------------------------------------------

/// Finite-memory fairness machine: memory set M with deterministic update
/// g(m, a, s') and output F(s, m). Running it over a trace yields the
/// per-step fairness signal f_t = F(s_{t+1}, m_{t+1}).
struct MemoryMachine {
    std::size_t memory_count = 0;
    std::size_t init_memory = 0;
    std::size_t num_states = 0;    // dimensions of the owning model
    std::size_t num_actions = 0;
    std::vector<std::string> memory_labels;   // optional; size memory_count or empty
    std::vector<std::size_t> update;          // [(m*|A|+a)*|S|+s'] -> m'
    std::vector<double> output;               // [s*|M|+m] -> F(s,m)

    std::size_t update_index(std::size_t m, ActionId a, StateId next) const {
        return (m * num_actions + a.index) * num_states + next.index;
    }

    std::size_t step_memory(std::size_t m, ActionId a, StateId next) const {
        return update.at(update_index(m, a, next));
    }

    double out(StateId s, std::size_t m) const {
        return output.at(s.index * memory_count + m);
    }

    bool binary_output() const {
        return std::all_of(output.begin(), output.end(),
                           [](double v) { return v == 0.0 || v == 1.0; });
    }

    std::string memory_name(std::size_t m) const {
        if (m < memory_labels.size()) return memory_labels[m];
        return "m" + std::to_string(m);
    }
};

/// Totality and range checks for the update/output tables.
inline ValidationReport validate_machine(const MemoryMachine& mm) {
    ValidationReport report;
    auto add = [&](std::string msg) { report.violations.push_back(std::move(msg)); };
    if (mm.memory_count == 0) add("machine has no memory states");
    if (mm.init_memory >= mm.memory_count) add("initial memory state out of range");
    if (mm.update.size() != mm.memory_count * mm.num_actions * mm.num_states)
        add("update table is not total over M x A x S");
    if (mm.output.size() != mm.num_states * mm.memory_count)
        add("output table is not total over S x M");
    for (std::size_t i = 0; i < mm.update.size(); ++i)
        if (mm.update[i] >= mm.memory_count) {
            add("update entry " + std::to_string(i) + " maps outside M");
            break;
        }
    return report;
}

/// Memory values m_1..m_{T+1} visited along the trace (m_1 = m_init).
inline std::vector<std::size_t> memory_path(const MemoryMachine& mm, const BoundedTrace& tau) {
    std::vector<std::size_t> path;
    path.reserve(tau.length() + 1);
    path.push_back(mm.init_memory);
    for (std::size_t t = 1; t <= tau.length(); ++t)
        path.push_back(mm.step_memory(path.back(), tau.action_at(t), tau.result_state(t)));
    return path;
}

/// Runs the machine over the trace: values[t-1] = F(s_{t+1}, m_{t+1}).
inline FairnessSignal memory_run(const MemoryMachine& mm, const BoundedTrace& tau) {
    FairnessSignal out;
    out.values.reserve(tau.length());
    std::size_t m = mm.init_memory;
    for (std::size_t t = 1; t <= tau.length(); ++t) {
        m = mm.step_memory(m, tau.action_at(t), tau.result_state(t));
        out.values.push_back(mm.out(tau.result_state(t), m));
    }
    return out;
}

/// Adapts a memory machine into a whole-history fairness value (the fairness
/// of tau is the machine's output after consuming tau). The machine is shared,
/// not copied, per evaluation.
inline TraceFairness trace_fairness_from_machine(MemoryMachine mm, ValueRange range = ValueRange::unit) {
    auto shared = std::make_shared<MemoryMachine>(std::move(mm));
    return TraceFairness::custom(
        [shared](const BoundedTrace& tau, const MultiStakeholderMdp&) {
            std::size_t m = shared->init_memory;
            for (std::size_t t = 1; t <= tau.length(); ++t)
                m = shared->step_memory(m, tau.action_at(t), tau.result_state(t));
            if (tau.length() == 0) return shared->out(tau.states.at(0), m);
            return shared->out(tau.result_state(tau.length()), m);
        },
        range, "memory-machine");
}

// --- deterministic finite automata --------------------------------------------

/// DFA over an encoded trace alphabet. `delta` is total (dense table of
/// state_count x alphabet.size() entries).
struct Dfa {
    Alphabet alphabet;
    std::size_t state_count = 0;
    std::size_t initial = 0;
    std::vector<std::size_t> delta;   // [q * |Sigma| + sym] -> q'
    std::vector<bool> accepting;

    std::size_t step(std::size_t q, std::size_t sym) const {
        return delta.at(q * alphabet.size() + sym);
    }

    bool accepts_symbols(const std::vector<std::size_t>& symbols) const {
        std::size_t q = initial;
        for (std::size_t sym : symbols) q = step(q, sym);
        return accepting.at(q);
    }
};

inline ValidationReport validate_dfa(const Dfa& d) {
    ValidationReport report;
    auto add = [&](std::string msg) { report.violations.push_back(std::move(msg)); };
    if (d.state_count == 0) add("automaton has no states");
    if (d.initial >= d.state_count) add("initial state out of range");
    if (d.delta.size() != d.state_count * d.alphabet.size()) add("delta is not total");
    if (d.accepting.size() != d.state_count) add("accepting set has wrong size");
    for (std::size_t q : d.delta)
        if (q >= d.state_count) {
            add("delta maps outside Q");
            break;
        }
    return report;
}

struct DfaRunResult {
    std::size_t final_state = 0;
    bool accepted = false;
};

/// Runs delta from the initial state over the encoded trace.
inline DfaRunResult dfa_run(const Dfa& d, const BoundedTrace& tau) {
    const auto symbols = encode_trace(tau, d.alphabet);
    std::size_t q = d.initial;
    for (std::size_t sym : symbols) q = d.step(q, sym);
    return {q, d.accepting.at(q)};
}

/// Prefix-acceptance semantics: values[t-1] = 1 if the DFA accepts the
/// encoding of tau_{1,t}, else 0. One pass over the full encoding.
inline FairnessSignal dfa_signal(const Dfa& d, const BoundedTrace& tau) {
    FairnessSignal out;
    out.values.reserve(tau.length());
    std::size_t q = d.initial;
    if (d.alphabet.kind == EncodingKind::interleaved) {
        q = d.step(q, d.alphabet.state_symbol(tau.states.at(0)));
        for (std::size_t t = 1; t <= tau.length(); ++t) {
            q = d.step(q, d.alphabet.action_symbol(tau.action_at(t)));
            q = d.step(q, d.alphabet.state_symbol(tau.result_state(t)));
            out.values.push_back(d.accepting.at(q) ? 1.0 : 0.0);
        }
    } else {
        for (std::size_t t = 1; t <= tau.length(); ++t) {
            q = d.step(q, d.alphabet.pair_symbol(tau.action_at(t), tau.result_state(t)));
            out.values.push_back(d.accepting.at(q) ? 1.0 : 0.0);
        }
    }
    return out;
}

// --- finite memory <-> DFA ----------------------------------------------------

/// Builds the paired-encoding DFA equivalent to a binary-output machine:
/// Q = S x M, q0 = <s_init, m_init>, delta(<s,m>, <a,s'>) = <s', g(m,a,s')>,
/// Acc = { <s,m> : F(s,m) = 1 }. The DFA accepts the encoding of a trace
/// exactly when the machine's final signal value is 1.
inline Dfa memory_to_dfa(const MemoryMachine& mm, const MultiStakeholderMdp& m) {
    if (!mm.binary_output())
        throw std::invalid_argument(
            "memory_to_dfa: machine output must be {0,1}-valued; threshold the output first");
    if (mm.num_states != m.num_states() || mm.num_actions != m.num_actions())
        throw std::invalid_argument("memory_to_dfa: machine tables do not match the model");

    Dfa d;
    d.alphabet = Alphabet::for_model(m, EncodingKind::paired);
    d.state_count = m.num_states() * mm.memory_count;
    auto pack = [&](std::size_t s, std::size_t mem) { return s * mm.memory_count + mem; };
    d.initial = pack(m.init.index, mm.init_memory);
    d.delta.assign(d.state_count * d.alphabet.size(), 0);
    d.accepting.assign(d.state_count, false);
    for (std::size_t s = 0; s < m.num_states(); ++s) {
        for (std::size_t mem = 0; mem < mm.memory_count; ++mem) {
            const std::size_t q = pack(s, mem);
            d.accepting[q] = mm.out(StateId{s}, mem) == 1.0;
            for (std::size_t a = 0; a < m.num_actions(); ++a) {
                for (std::size_t s2 = 0; s2 < m.num_states(); ++s2) {
                    const std::size_t sym = d.alphabet.pair_symbol(ActionId{a}, StateId{s2});
                    d.delta[q * d.alphabet.size() + sym] =
                        pack(s2, mm.step_memory(mem, ActionId{a}, StateId{s2}));
                }
            }
        }
    }
    return d;
}

/// Inverse direction: memory state := automaton state. The machine's binary
/// signal at step t equals acceptance of the encoded prefix tau_{1,t}.
inline MemoryMachine dfa_to_memory(const Dfa& d) {
    if (d.alphabet.kind != EncodingKind::paired)
        throw std::invalid_argument("dfa_to_memory: DFA must be over the paired encoding");
    MemoryMachine mm;
    mm.memory_count = d.state_count;
    mm.init_memory = d.initial;
    mm.num_states = d.alphabet.num_states;
    mm.num_actions = d.alphabet.num_actions;
    mm.update.assign(mm.memory_count * mm.num_actions * mm.num_states, 0);
    mm.output.assign(mm.num_states * mm.memory_count, 0.0);
    for (std::size_t q = 0; q < d.state_count; ++q) {
        for (std::size_t a = 0; a < mm.num_actions; ++a)
            for (std::size_t s2 = 0; s2 < mm.num_states; ++s2)
                mm.update[mm.update_index(q, ActionId{a}, StateId{s2})] =
                    d.step(q, d.alphabet.pair_symbol(ActionId{a}, StateId{s2}));
        for (std::size_t s = 0; s < mm.num_states; ++s)
            mm.output[s * mm.memory_count + q] = d.accepting[q] ? 1.0 : 0.0;
    }
    return mm;
}

/// Re-encodes a DFA between the interleaved and paired symbol alphabets,
/// preserving the verdict on every encoded trace of the model (the two
/// encodings are used interchangeably by the finite-memory results, so a
/// lossless bridge is needed).
///
/// Only trace encodings matter: strings that no trace produces may be
/// classified differently by the result.
inline Dfa reencode_dfa(const Dfa& d, EncodingKind target, const MultiStakeholderMdp& m) {
    if (d.alphabet.num_states != m.num_states() || d.alphabet.num_actions != m.num_actions())
        throw std::invalid_argument("reencode_dfa: alphabet does not match the model");
    if (d.alphabet.kind == target) return d;

    if (target == EncodingKind::paired) {
        // Interleaved -> paired: pre-consume s_init, then fold each (a, s') pair.
        Dfa out;
        out.alphabet = Alphabet::for_model(m, EncodingKind::paired);
        out.state_count = d.state_count;
        out.initial = d.step(d.initial, d.alphabet.state_symbol(m.init));
        out.accepting = d.accepting;
        out.delta.assign(out.state_count * out.alphabet.size(), 0);
        for (std::size_t q = 0; q < out.state_count; ++q)
            for (std::size_t a = 0; a < m.num_actions(); ++a)
                for (std::size_t s2 = 0; s2 < m.num_states(); ++s2) {
                    const std::size_t mid = d.step(q, d.alphabet.action_symbol(ActionId{a}));
                    const std::size_t to = d.step(mid, d.alphabet.state_symbol(StateId{s2}));
                    out.delta[q * out.alphabet.size() +
                              out.alphabet.pair_symbol(ActionId{a}, StateId{s2})] = to;
                }
        return out;
    }

    // Paired -> interleaved: track a pending action between symbols. States are
    // (q, none) and (q, pending a); state symbols with no pending action are
    // no-ops, which is only exercised by the leading s_init symbol on encoded
    // traces.
    Dfa out;
    out.alphabet = Alphabet::for_model(m, EncodingKind::interleaved);
    const std::size_t lanes = 1 + m.num_actions();   // none + one lane per pending action
    out.state_count = d.state_count * lanes;
    auto pack = [&](std::size_t q, std::size_t lane) { return q * lanes + lane; };
    out.initial = pack(d.initial, 0);
    out.delta.assign(out.state_count * out.alphabet.size(), 0);
    out.accepting.assign(out.state_count, false);
    for (std::size_t q = 0; q < d.state_count; ++q) {
        out.accepting[pack(q, 0)] = d.accepting[q];
        for (std::size_t lane = 0; lane < lanes; ++lane) {
            const std::size_t from = pack(q, lane);
            for (std::size_t a = 0; a < m.num_actions(); ++a)
                out.delta[from * out.alphabet.size() + out.alphabet.action_symbol(ActionId{a})] =
                    pack(q, 1 + a);
            for (std::size_t s2 = 0; s2 < m.num_states(); ++s2) {
                const std::size_t sym = out.alphabet.state_symbol(StateId{s2});
                if (lane == 0) {
                    out.delta[from * out.alphabet.size() + sym] = pack(q, 0);
                } else {
                    const ActionId a{lane - 1};
                    out.delta[from * out.alphabet.size() + sym] =
                        pack(d.step(q, d.alphabet.pair_symbol(a, StateId{s2})), 0);
                }
            }
        }
    }
    return out;
}

} // namespace nmfair
