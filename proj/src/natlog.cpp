#include "natver/natlog.hpp"

#include <stdexcept>

#include <json.hpp>

namespace natver {

namespace {

using json = nlohmann::json;

constexpr std::size_t state_index(DfaState s) { return static_cast<std::size_t>(s); }
constexpr std::size_t op_index(NatOp op) { return static_cast<std::size_t>(op); }

constexpr DfaState S = DfaState::Supported;
constexpr DfaState R = DfaState::Refuted;
constexpr DfaState N = DfaState::NotEnoughEvidence;

// Rows: Supported, Refuted, NotEnoughEvidence.
// Columns: ≡, ⊑, ⊒, ¬, alternation, #.
constexpr DfaState kTransitions[3][6] = {
    {S, S, N, R, R, N},
    {R, R, N, S, N, N},
    {N, N, N, N, N, N},
};

}  // namespace

std::string_view natop_name(NatOp op) {
    switch (op) {
        case NatOp::Equivalence: return "equivalence";
        case NatOp::ForwardEntailment: return "forward_entailment";
        case NatOp::ReverseEntailment: return "reverse_entailment";
        case NatOp::Negation: return "negation";
        case NatOp::Alternation: return "alternation";
        case NatOp::Independence: return "independence";
    }
    return "independence";
}

std::string_view natop_symbol(NatOp op) {
    switch (op) {
        case NatOp::Equivalence: return "≡";
        case NatOp::ForwardEntailment: return "⊑";
        case NatOp::ReverseEntailment: return "⊒";
        case NatOp::Negation: return "¬";
        case NatOp::Alternation: return "⇃↾";
        case NatOp::Independence: return "#";
    }
    return "#";
}

std::optional<NatOp> natop_from_name(std::string_view name) {
    for (NatOp op : kAllNatOps) {
        if (natop_name(op) == name) return op;
    }
    return std::nullopt;
}

std::string_view verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Supported: return "Supported";
        case Verdict::Refuted: return "Refuted";
        case Verdict::NotEnoughInfo: return "NotEnoughInfo";
    }
    return "NotEnoughInfo";
}

std::optional<Verdict> verdict_from_name(std::string_view name) {
    for (Verdict v : {Verdict::Supported, Verdict::Refuted, Verdict::NotEnoughInfo}) {
        if (verdict_name(v) == name) return v;
    }
    return std::nullopt;
}

std::string_view dfa_state_name(DfaState s) {
    switch (s) {
        case DfaState::Supported: return "Supported";
        case DfaState::Refuted: return "Refuted";
        case DfaState::NotEnoughEvidence: return "NotEnoughEvidence";
    }
    return "NotEnoughEvidence";
}

std::optional<DfaState> dfa_state_from_name(std::string_view name) {
    for (DfaState s : {DfaState::Supported, DfaState::Refuted, DfaState::NotEnoughEvidence}) {
        if (dfa_state_name(s) == name) return s;
    }
    return std::nullopt;
}

std::string_view signal_name(Signal s) {
    return s == Signal::Support ? "support" : "refute";
}

std::optional<Signal> signal_from_name(std::string_view name) {
    if (name == "support") return Signal::Support;
    if (name == "refute") return Signal::Refute;
    return std::nullopt;
}

DfaState transition(DfaState state, NatOp op) {
    return kTransitions[state_index(state)][op_index(op)];
}

Verdict verdict_of(DfaState state) {
    switch (state) {
        case DfaState::Supported: return Verdict::Supported;
        case DfaState::Refuted: return Verdict::Refuted;
        case DfaState::NotEnoughEvidence: return Verdict::NotEnoughInfo;
    }
    return Verdict::NotEnoughInfo;
}

VerdictTrace execute(std::span<const ProofTriple> proof) {
    VerdictTrace trace;
    trace.states.reserve(proof.size() + 1);
    DfaState state = DfaState::Supported;
    trace.states.push_back(state);
    for (const auto& triple : proof) {
        state = transition(state, triple.natop);
        trace.states.push_back(state);
    }
    trace.verdict = verdict_of(state);
    return trace;
}

namespace {

json triple_to_json(const ProofTriple& t) {
    json scores = json::object();
    for (const auto& [op, s] : t.scores) scores[std::string(natop_name(op))] = s;
    json out = {
        {"claim_span",
         {{"start", t.claim_span.start}, {"end", t.claim_span.end}, {"text", t.claim_span.text}}},
        {"evidence_text", t.evidence_text},
        {"natop", natop_name(t.natop)},
        {"scores", std::move(scores)},
    };
    if (t.signal) {
        out["signal"] = signal_name(*t.signal);
    } else {
        out["signal"] = nullptr;
    }
    return out;
}

ProofTriple triple_from_json(const json& j) {
    ProofTriple t;
    const auto& span = j.at("claim_span");
    t.claim_span.start = span.at("start").get<std::size_t>();
    t.claim_span.end = span.at("end").get<std::size_t>();
    t.claim_span.text = span.at("text").get<std::string>();
    t.evidence_text = j.at("evidence_text").get<std::string>();
    auto op = natop_from_name(j.at("natop").get<std::string>());
    if (!op) throw std::runtime_error("unknown natop in proof document");
    t.natop = *op;
    for (const auto& [key, value] : j.at("scores").items()) {
        auto score_op = natop_from_name(key);
        if (!score_op) throw std::runtime_error("unknown natop in score map: " + key);
        double s = value.get<double>();
        if (s < 0.0 || s > 1.0) throw std::runtime_error("score outside [0, 1]: " + key);
        t.scores[*score_op] = s;
    }
    if (j.contains("signal") && !j.at("signal").is_null()) {
        auto sig = signal_from_name(j.at("signal").get<std::string>());
        if (!sig) throw std::runtime_error("unknown signal in proof document");
        t.signal = *sig;
    }
    return t;
}

}  // namespace

std::string serialize_proof(const std::string& claim, std::span<const ProofTriple> proof,
                            const VerdictTrace& trace) {
    json triples = json::array();
    for (const auto& t : proof) triples.push_back(triple_to_json(t));
    json states = json::array();
    for (DfaState s : trace.states) states.push_back(dfa_state_name(s));
    json doc = {
        {"claim", claim},
        {"triples", std::move(triples)},
        {"states", std::move(states)},
        {"verdict", verdict_name(trace.verdict)},
    };
    return doc.dump();
}

ProofDocument parse_proof(std::string_view json_text) {
    json doc = json::parse(json_text);
    ProofDocument out;
    out.claim = doc.at("claim").get<std::string>();
    for (const auto& t : doc.at("triples")) out.proof.push_back(triple_from_json(t));
    for (const auto& s : doc.at("states")) {
        auto state = dfa_state_from_name(s.get<std::string>());
        if (!state) throw std::runtime_error("unknown state in proof document");
        out.trace.states.push_back(*state);
    }
    auto verdict = verdict_from_name(doc.at("verdict").get<std::string>());
    if (!verdict) throw std::runtime_error("unknown verdict in proof document");
    out.trace.verdict = *verdict;
    if (out.trace.states.size() != out.proof.size() + 1) {
        throw std::runtime_error("state sequence length does not match proof length");
    }
    return out;
}

}  // namespace natver
