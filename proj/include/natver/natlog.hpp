#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace natver {

// The six natural-logic operators. The first five can be assigned by the
// question-answering stage; Independence is the fallback when no candidate
// clears the threshold.
enum class NatOp {
    Equivalence,
    ForwardEntailment,
    ReverseEntailment,
    Negation,
    Alternation,
    Independence,
};

inline constexpr std::array<NatOp, 6> kAllNatOps = {
    NatOp::Equivalence,   NatOp::ForwardEntailment, NatOp::ReverseEntailment,
    NatOp::Negation,      NatOp::Alternation,       NatOp::Independence,
};

inline constexpr std::array<NatOp, 5> kAssignableNatOps = {
    NatOp::Equivalence, NatOp::ForwardEntailment, NatOp::ReverseEntailment,
    NatOp::Negation,    NatOp::Alternation,
};

std::string_view natop_name(NatOp op);    // "equivalence", ... (stable JSON names)
std::string_view natop_symbol(NatOp op);  // "≡", "⊑", "⊒", "¬", "⇃↾", "#"
std::optional<NatOp> natop_from_name(std::string_view name);

enum class Verdict { Supported, Refuted, NotEnoughInfo };

std::string_view verdict_name(Verdict v);  // "Supported", "Refuted", "NotEnoughInfo"
std::optional<Verdict> verdict_from_name(std::string_view name);

// Proof execution states. NotEnoughEvidence is absorbing.
enum class DfaState { Supported, Refuted, NotEnoughEvidence };

std::string_view dfa_state_name(DfaState s);
std::optional<DfaState> dfa_state_from_name(std::string_view name);

enum class Signal { Support, Refute };

std::string_view signal_name(Signal s);  // "support", "refute"
std::optional<Signal> signal_from_name(std::string_view name);

// A claim span with character offsets into the original claim text.
struct TextSpan {
    std::size_t start = 0;
    std::size_t end = 0;
    std::string text;

    bool operator==(const TextSpan&) const = default;
};

// One step of a proof: a claim span, the evidence text it was aligned to
// (possibly empty), the assigned operator, and the per-operator ensemble
// scores that led to the assignment.
struct ProofTriple {
    TextSpan claim_span;
    std::string evidence_text;
    NatOp natop = NatOp::Independence;
    std::map<NatOp, double> scores;
    std::optional<Signal> signal;

    bool operator==(const ProofTriple&) const = default;
};

struct VerdictTrace {
    std::vector<DfaState> states;  // length = proof length + 1, states[0] = Supported
    Verdict verdict = Verdict::Supported;

    bool operator==(const VerdictTrace&) const = default;
};

// Successor state for every (state, op) pair. The table is total; the
// NotEnoughEvidence row maps every operator back to NotEnoughEvidence.
DfaState transition(DfaState state, NatOp op);

Verdict verdict_of(DfaState state);

// Left fold of transition over the operator sequence, starting at Supported.
VerdictTrace execute(std::span<const ProofTriple> proof);

struct ProofDocument {
    std::string claim;
    std::vector<ProofTriple> proof;
    VerdictTrace trace;

    bool operator==(const ProofDocument&) const = default;
};

// JSON proof document: {claim, triples, states, verdict}. Round-trips
// losslessly through parse_proof.
std::string serialize_proof(const std::string& claim, std::span<const ProofTriple> proof,
                            const VerdictTrace& trace);
ProofDocument parse_proof(std::string_view json_text);

}  // namespace natver
