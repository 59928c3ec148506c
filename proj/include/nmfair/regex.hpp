#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nmfair/automata.hpp"
#include "nmfair/fairness.hpp"
#include "nmfair/model.hpp"

namespace nmfair {

/// Regular-expression AST over named symbol classes. Classes resolve to sets
/// of alphabet symbols when the expression is compiled against a model.
class Regex;
using RegexPtr = std::shared_ptr<const Regex>;

class Regex {
public:
    enum class Op { epsilon, symbol_class, concat, alternate, star, optional };

    Op op = Op::epsilon;
    std::string class_name;            // symbol_class only
    std::vector<RegexPtr> children;    // concat/alternate: >=1; star/optional: exactly 1

    static RegexPtr epsilon() { return make(Op::epsilon); }
    static RegexPtr klass(std::string name) {
        auto r = make(Op::symbol_class);
        r->class_name = std::move(name);
        return r;
    }
    static RegexPtr concat(std::vector<RegexPtr> parts) {
        if (parts.empty()) throw std::invalid_argument("Regex::concat: empty");
        if (parts.size() == 1) return parts[0];
        auto r = make(Op::concat);
        r->children = std::move(parts);
        return r;
    }
    static RegexPtr alternate(std::vector<RegexPtr> parts) {
        if (parts.empty()) throw std::invalid_argument("Regex::alternate: empty");
        if (parts.size() == 1) return parts[0];
        auto r = make(Op::alternate);
        r->children = std::move(parts);
        return r;
    }
    static RegexPtr star(RegexPtr inner) {
        auto r = make(Op::star);
        r->children = {std::move(inner)};
        return r;
    }
    static RegexPtr optional(RegexPtr inner) {
        auto r = make(Op::optional);
        r->children = {std::move(inner)};
        return r;
    }

private:
    static std::shared_ptr<Regex> make(Op op) {
        auto r = std::make_shared<Regex>();
        r->op = op;
        return r;
    }
};

/// Concrete-syntax writer (class names, juxtaposition, |, *, ?, parentheses).
inline std::string regex_to_string(const RegexPtr& r) {
    // precedence: alternate (0) < concat (1) < postfix (2)
    struct Writer {
        static std::string write(const Regex& r, int parent_level) {
            std::string body;
            int level = 2;
            switch (r.op) {
            case Regex::Op::epsilon: body = "()"; break;
            case Regex::Op::symbol_class: body = r.class_name; break;
            case Regex::Op::concat: {
                level = 1;
                for (std::size_t i = 0; i < r.children.size(); ++i) {
                    if (i) body += ' ';
                    body += write(*r.children[i], 1);
                }
                break;
            }
            case Regex::Op::alternate: {
                level = 0;
                for (std::size_t i = 0; i < r.children.size(); ++i) {
                    if (i) body += " | ";
                    body += write(*r.children[i], 0);
                }
                break;
            }
            case Regex::Op::star: body = write(*r.children[0], 2) + "*"; break;
            case Regex::Op::optional: body = write(*r.children[0], 2) + "?"; break;
            }
            if (level < parent_level) return "(" + body + ")";
            return body;
        }
    };
    return Writer::write(*r, 0);
}

/// Recursive-descent parser for the concrete syntax.
inline RegexPtr parse_regex(std::string_view text) {
    struct Parser {
        std::string_view s;
        std::size_t pos = 0;

        void skip_ws() {
            while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        }
        bool at_end() {
            skip_ws();
            return pos >= s.size();
        }
        char peek() {
            skip_ws();
            return pos < s.size() ? s[pos] : '\0';
        }
        [[noreturn]] void fail(const std::string& what) {
            throw std::invalid_argument("regex parse error at offset " + std::to_string(pos) +
                                        ": " + what);
        }

        RegexPtr parse_alt() {
            std::vector<RegexPtr> branches{parse_concat()};
            while (peek() == '|') {
                ++pos;
                branches.push_back(parse_concat());
            }
            return Regex::alternate(std::move(branches));
        }

        RegexPtr parse_concat() {
            std::vector<RegexPtr> parts;
            while (true) {
                const char c = peek();
                if (c == '\0' || c == ')' || c == '|') break;
                parts.push_back(parse_postfix());
            }
            if (parts.empty()) fail("empty expression");
            return Regex::concat(std::move(parts));
        }

        RegexPtr parse_postfix() {
            RegexPtr r = parse_atom();
            while (true) {
                const char c = peek();
                if (c == '*') {
                    ++pos;
                    r = Regex::star(std::move(r));
                } else if (c == '?') {
                    ++pos;
                    r = Regex::optional(std::move(r));
                } else {
                    break;
                }
            }
            return r;
        }

        RegexPtr parse_atom() {
            const char c = peek();
            if (c == '(') {
                ++pos;
                RegexPtr inner = parse_alt();
                if (peek() != ')') fail("expected ')'");
                ++pos;
                return inner;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::size_t start = pos;
                while (pos < s.size() &&
                       (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
                    ++pos;
                return Regex::klass(std::string(s.substr(start, pos - start)));
            }
            fail("expected class name or '('");
        }
    };

    Parser p{text};
    RegexPtr r = p.parse_alt();
    if (!p.at_end()) p.fail("trailing input");
    return r;
}

/// Named symbol classes for a concrete alphabet. Built-ins for the
/// interleaved encoding: "S" (all states), "A" (all actions), "A1".."An"
/// (partition classes), plus each state/action label as a singleton.
class SymbolClasses {
public:
    void define(std::string name, std::vector<std::size_t> symbols) {
        classes_[std::move(name)] = std::move(symbols);
    }

    bool contains(const std::string& name) const { return classes_.count(name) > 0; }

    const std::vector<std::size_t>& resolve(const std::string& name) const {
        auto it = classes_.find(name);
        if (it == classes_.end())
            throw std::invalid_argument("unresolvable symbol class: " + name);
        if (it->second.empty())
            throw std::invalid_argument("symbol class resolves to the empty set: " + name);
        return it->second;
    }

    static SymbolClasses interleaved_defaults(const MultiStakeholderMdp& m,
                                              const ActionPartition* partition = nullptr) {
        const Alphabet ab = Alphabet::for_model(m, EncodingKind::interleaved);
        SymbolClasses sc;
        std::vector<std::size_t> all_states, all_actions;
        for (std::size_t s = 0; s < m.num_states(); ++s)
            all_states.push_back(ab.state_symbol(StateId{s}));
        for (std::size_t a = 0; a < m.num_actions(); ++a)
            all_actions.push_back(ab.action_symbol(ActionId{a}));
        sc.define("S", all_states);
        sc.define("A", all_actions);
        if (partition) {
            for (std::size_t c = 0; c < partition->num_classes(); ++c) {
                std::vector<std::size_t> syms;
                for (ActionId a : partition->classes()[c]) syms.push_back(ab.action_symbol(a));
                sc.define("A" + std::to_string(c + 1), std::move(syms));
            }
        }
        for (std::size_t s = 0; s < m.num_states(); ++s)
            if (!sc.contains(m.state_labels[s]))
                sc.define(m.state_labels[s], {ab.state_symbol(StateId{s})});
        for (std::size_t a = 0; a < m.num_actions(); ++a)
            if (!sc.contains(m.action_labels[a]))
                sc.define(m.action_labels[a], {ab.action_symbol(ActionId{a})});
        return sc;
    }

private:
    std::map<std::string, std::vector<std::size_t>> classes_;
};

namespace detail {

/// Thompson-style NFA with epsilon edges.
struct Nfa {
    struct State {
        std::vector<std::pair<std::size_t, std::size_t>> edges;   // (symbol, target)
        std::vector<std::size_t> eps;
    };
    std::vector<State> states;
    std::size_t start = 0;
    std::size_t accept = 0;
};

inline std::size_t nfa_new_state(Nfa& n) {
    n.states.emplace_back();
    return n.states.size() - 1;
}

struct NfaFragment {
    std::size_t start, accept;
};

inline NfaFragment thompson_build(Nfa& n, const Regex& r, const SymbolClasses& classes) {
    switch (r.op) {
    case Regex::Op::epsilon: {
        const std::size_t s = nfa_new_state(n), t = nfa_new_state(n);
        n.states[s].eps.push_back(t);
        return {s, t};
    }
    case Regex::Op::symbol_class: {
        const std::size_t s = nfa_new_state(n), t = nfa_new_state(n);
        for (std::size_t sym : classes.resolve(r.class_name))
            n.states[s].edges.emplace_back(sym, t);
        return {s, t};
    }
    case Regex::Op::concat: {
        NfaFragment acc = thompson_build(n, *r.children[0], classes);
        for (std::size_t i = 1; i < r.children.size(); ++i) {
            NfaFragment next = thompson_build(n, *r.children[i], classes);
            n.states[acc.accept].eps.push_back(next.start);
            acc.accept = next.accept;
        }
        return acc;
    }
    case Regex::Op::alternate: {
        const std::size_t s = nfa_new_state(n), t = nfa_new_state(n);
        for (const RegexPtr& child : r.children) {
            NfaFragment f = thompson_build(n, *child, classes);
            n.states[s].eps.push_back(f.start);
            n.states[f.accept].eps.push_back(t);
        }
        return {s, t};
    }
    case Regex::Op::star: {
        const std::size_t s = nfa_new_state(n), t = nfa_new_state(n);
        NfaFragment f = thompson_build(n, *r.children[0], classes);
        n.states[s].eps.push_back(f.start);
        n.states[s].eps.push_back(t);
        n.states[f.accept].eps.push_back(f.start);
        n.states[f.accept].eps.push_back(t);
        return {s, t};
    }
    case Regex::Op::optional: {
        const std::size_t s = nfa_new_state(n), t = nfa_new_state(n);
        NfaFragment f = thompson_build(n, *r.children[0], classes);
        n.states[s].eps.push_back(f.start);
        n.states[s].eps.push_back(t);
        n.states[f.accept].eps.push_back(t);
        return {s, t};
    }
    }
    throw std::logic_error("thompson_build: unknown op");
}

inline void eps_closure(const Nfa& n, std::vector<std::size_t>& set) {
    std::vector<std::size_t> stack(set.begin(), set.end());
    std::set<std::size_t> seen(set.begin(), set.end());
    while (!stack.empty()) {
        const std::size_t q = stack.back();
        stack.pop_back();
        for (std::size_t t : n.states[q].eps)
            if (seen.insert(t).second) stack.push_back(t);
    }
    set.assign(seen.begin(), seen.end());
}

/// Subset construction. The result is complete: transitions into the empty
/// subset go to an explicit rejecting sink.
inline Dfa determinize(const Nfa& n, const Alphabet& alphabet) {
    const std::size_t k = alphabet.size();
    std::map<std::vector<std::size_t>, std::size_t> subset_id;
    std::vector<std::vector<std::size_t>> subsets;
    std::vector<std::vector<std::size_t>> delta_rows;

    std::vector<std::size_t> start{n.start};
    eps_closure(n, start);
    subset_id[start] = 0;
    subsets.push_back(start);

    for (std::size_t q = 0; q < subsets.size(); ++q) {
        delta_rows.emplace_back(k, 0);
        for (std::size_t sym = 0; sym < k; ++sym) {
            std::vector<std::size_t> next;
            for (std::size_t st : subsets[q])
                for (const auto& [edge_sym, target] : n.states[st].edges)
                    if (edge_sym == sym) next.push_back(target);
            std::sort(next.begin(), next.end());
            next.erase(std::unique(next.begin(), next.end()), next.end());
            eps_closure(n, next);
            auto [it, inserted] = subset_id.try_emplace(next, subsets.size());
            if (inserted) subsets.push_back(next);
            delta_rows[q][sym] = it->second;
        }
    }

    Dfa d;
    d.alphabet = alphabet;
    d.state_count = subsets.size();
    d.initial = 0;
    d.delta.reserve(d.state_count * k);
    for (const auto& row : delta_rows)
        d.delta.insert(d.delta.end(), row.begin(), row.end());
    d.accepting.assign(d.state_count, false);
    for (std::size_t q = 0; q < subsets.size(); ++q)
        d.accepting[q] = std::binary_search(subsets[q].begin(), subsets[q].end(), n.accept);
    return d;
}

} // namespace detail

/// Hopcroft minimization over a complete DFA. Unreachable states are pruned
/// first; the result recognizes the same language.
inline Dfa minimize_dfa(const Dfa& d) {
    const std::size_t k = d.alphabet.size();

    // Reachability prune.
    std::vector<std::size_t> order;
    std::vector<std::size_t> remap(d.state_count, d.state_count);
    order.push_back(d.initial);
    remap[d.initial] = 0;
    for (std::size_t i = 0; i < order.size(); ++i)
        for (std::size_t sym = 0; sym < k; ++sym) {
            const std::size_t t = d.step(order[i], sym);
            if (remap[t] == d.state_count) {
                remap[t] = order.size();
                order.push_back(t);
            }
        }
    const std::size_t n = order.size();
    std::vector<std::size_t> delta(n * k);
    std::vector<bool> accepting(n);
    for (std::size_t q = 0; q < n; ++q) {
        accepting[q] = d.accepting[order[q]];
        for (std::size_t sym = 0; sym < k; ++sym)
            delta[q * k + sym] = remap[d.step(order[q], sym)];
    }

    // Inverse edges.
    std::vector<std::vector<std::vector<std::size_t>>> inv(
        k, std::vector<std::vector<std::size_t>>(n));
    for (std::size_t q = 0; q < n; ++q)
        for (std::size_t sym = 0; sym < k; ++sym)
            inv[sym][delta[q * k + sym]].push_back(q);

    std::vector<std::size_t> block_of(n, 0);
    std::vector<std::vector<std::size_t>> blocks;
    {
        std::vector<std::size_t> acc, rej;
        for (std::size_t q = 0; q < n; ++q)
            (accepting[q] ? acc : rej).push_back(q);
        if (!acc.empty()) blocks.push_back(std::move(acc));
        if (!rej.empty()) blocks.push_back(std::move(rej));
        for (std::size_t b = 0; b < blocks.size(); ++b)
            for (std::size_t q : blocks[b]) block_of[q] = b;
    }

    std::set<std::pair<std::size_t, std::size_t>> worklist;   // (block, symbol)
    for (std::size_t sym = 0; sym < k; ++sym)
        for (std::size_t b = 0; b < blocks.size(); ++b)
            worklist.insert({b, sym});

    std::vector<char> in_preimage(n, 0);
    while (!worklist.empty()) {
        const auto [splitter, sym] = *worklist.begin();
        worklist.erase(worklist.begin());

        std::vector<std::size_t> preimage;
        for (std::size_t target : blocks[splitter])
            for (std::size_t q : inv[sym][target]) {
                if (!in_preimage[q]) {
                    in_preimage[q] = 1;
                    preimage.push_back(q);
                }
            }
        if (preimage.empty()) continue;

        // Blocks intersected by the preimage.
        std::vector<std::size_t> touched;
        std::vector<std::vector<std::size_t>> hit(blocks.size());
        for (std::size_t q : preimage) {
            if (hit[block_of[q]].empty()) touched.push_back(block_of[q]);
            hit[block_of[q]].push_back(q);
        }
        for (std::size_t b : touched) {
            if (hit[b].size() == blocks[b].size()) continue;   // fully inside, no split
            std::vector<std::size_t> inside = std::move(hit[b]);
            std::vector<std::size_t> outside;
            outside.reserve(blocks[b].size() - inside.size());
            for (std::size_t q : blocks[b])
                if (!in_preimage[q]) outside.push_back(q);
            const std::size_t nb = blocks.size();
            blocks[b] = std::move(inside);
            blocks.push_back(std::move(outside));
            for (std::size_t q : blocks[nb]) block_of[q] = nb;
            for (std::size_t s2 = 0; s2 < k; ++s2) {
                if (worklist.count({b, s2})) {
                    worklist.insert({nb, s2});
                } else {
                    worklist.insert(blocks[b].size() <= blocks[nb].size() ? std::make_pair(b, s2)
                                                                          : std::make_pair(nb, s2));
                }
            }
        }
        for (std::size_t q : preimage) in_preimage[q] = 0;
    }

    Dfa out;
    out.alphabet = d.alphabet;
    out.state_count = blocks.size();
    out.initial = block_of[0];
    out.delta.assign(out.state_count * k, 0);
    out.accepting.assign(out.state_count, false);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const std::size_t rep = blocks[b].front();
        out.accepting[b] = accepting[rep];
        for (std::size_t sym = 0; sym < k; ++sym)
            out.delta[b * k + sym] = block_of[delta[rep * k + sym]];
    }
    return out;
}

/// Compiles a regular expression to the minimal complete DFA over `alphabet`
/// (symbol classes expanded to their member symbols; an explicit dead state
/// keeps delta total).
inline Dfa regex_to_dfa(const RegexPtr& r, const Alphabet& alphabet, const SymbolClasses& classes) {
    detail::Nfa nfa;
    detail::NfaFragment f = detail::thompson_build(nfa, *r, classes);
    nfa.start = f.start;
    nfa.accept = f.accept;
    return minimize_dfa(detail::determinize(nfa, alphabet));
}

/// Turn-taking in numerical order:
///   (S A1 S A2 ... S An)* ((S A1) | (S A1 S A2) | ... | (S A1 ... S An)) S
/// As written the expression requires at least one started round, so the
/// empty trace (bare "S") is rejected; `accept_empty` adds that branch for
/// callers who want the initial state to count as fair.
inline RegexPtr turn_taking_regex(std::size_t n, bool accept_empty = false) {
    if (n < 1) throw std::invalid_argument("turn_taking_regex: n >= 1 required");
    auto pair_up_to = [&](std::size_t last) {
        std::vector<RegexPtr> parts;
        for (std::size_t i = 1; i <= last; ++i) {
            parts.push_back(Regex::klass("S"));
            parts.push_back(Regex::klass("A" + std::to_string(i)));
        }
        return Regex::concat(std::move(parts));
    };
    std::vector<RegexPtr> branches;
    for (std::size_t i = 1; i <= n; ++i) branches.push_back(pair_up_to(i));
    RegexPtr core = Regex::concat(
        {Regex::star(pair_up_to(n)), Regex::alternate(std::move(branches)), Regex::klass("S")});
    if (accept_empty) return Regex::alternate({std::move(core), Regex::klass("S")});
    return core;
}

} // namespace nmfair
