#include "natver/backend.hpp"

#include <algorithm>

namespace natver {

ConstraintMask ConstraintMask::allow_only(std::vector<TokenId> allowed) {
    if (allowed.empty()) throw InputError("allow-only mask must not be empty");
    return {Kind::AllowOnly, std::move(allowed)};
}

ConstraintMask ConstraintMask::block(std::vector<TokenId> blocked) {
    if (blocked.empty()) throw InputError("block mask must not be empty");
    return {Kind::Block, std::move(blocked)};
}

ConstraintMask ConstraintMask::none() {
    return {Kind::Unconstrained, {}};
}

bool ConstraintMask::permits(TokenId id) const {
    bool listed = std::find(tokens.begin(), tokens.end(), id) != tokens.end();
    switch (kind) {
        case Kind::AllowOnly: return listed;
        case Kind::Block: return !listed;
        case Kind::Unconstrained: return true;
    }
    return false;
}

YesNoScore YesNoScore::from_raw(double yes_mass, double no_mass) {
    YesNoScore s;
    double total = yes_mass + no_mass;
    if (total <= 0.0) {
        s.p_yes = 0.5;
        s.p_no = 0.5;
    } else {
        s.p_yes = yes_mass / total;
        s.p_no = no_mass / total;
    }
    s.favored_yes = s.p_yes > s.p_no;
    return s;
}

YesNoScore YesNoScore::from_sampled(bool yes) {
    YesNoScore s;
    s.p_yes = yes ? 1.0 : 0.0;
    s.p_no = yes ? 0.0 : 1.0;
    s.favored_yes = yes;
    s.degraded = true;
    return s;
}

GenerationParams GenerationParams::qa_defaults() {
    GenerationParams p;
    p.temperature = 1.0;
    p.top_p = 0.9;
    p.max_tokens = 8;
    return p;
}

GenerationParams GenerationParams::task_defaults() {
    GenerationParams p;
    p.temperature = 0.1;
    p.top_p = 0.9;
    p.max_tokens = 512;
    return p;
}

std::string Backend::token_text(TokenId id) {
    TokenId ids[1] = {id};
    return detokenize(std::span<const TokenId>(ids, 1));
}

}  // namespace natver
