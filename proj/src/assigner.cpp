#include "natver/assigner.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "natver/text.hpp"

namespace natver {

namespace {

using json = nlohmann::json;

constexpr double kWeightSumTolerance = 1e-9;

}  // namespace

TemplateBank TemplateBank::load(const std::filesystem::path& dir) {
    TemplateBank bank;
    for (NatOp op : kAssignableNatOps) {
        std::filesystem::path op_dir = dir / std::string(natop_name(op));
        std::vector<std::string> templates;
        for (std::size_t i = 0;; ++i) {
            std::filesystem::path file = op_dir / (std::to_string(i) + ".txt");
            if (!std::filesystem::exists(file)) break;
            templates.push_back(trim(read_text_file(file)));
        }
        bank.templates[op] = std::move(templates);
    }
    bank.validate();
    return bank;
}

void TemplateBank::validate() const {
    for (NatOp op : kAssignableNatOps) {
        auto it = templates.find(op);
        if (it == templates.end() || it->second.empty()) {
            throw InputError(std::string("no templates for ") + std::string(natop_name(op)));
        }
    }
}

std::size_t TemplateBank::min_size() const {
    std::size_t n = SIZE_MAX;
    for (const auto& [op, list] : templates) n = std::min(n, list.size());
    return n == SIZE_MAX ? 0 : n;
}

TemplateWeights TemplateWeights::uniform(const TemplateBank& bank) {
    TemplateWeights w;
    for (const auto& [op, list] : bank.templates) {
        w.weights[op] = std::vector<double>(list.size(), 1.0 / static_cast<double>(list.size()));
    }
    return w;
}

TemplateWeights TemplateWeights::load(const std::filesystem::path& path) {
    json doc = json::parse(read_text_file(path));
    TemplateWeights w;
    for (const auto& [key, value] : doc.items()) {
        auto op = natop_from_name(key);
        if (!op) throw InputError("unknown natop in weights file: " + key);
        w.weights[*op] = value.get<std::vector<double>>();
    }
    return w;
}

void TemplateWeights::save(const std::filesystem::path& path) const {
    json doc = json::object();
    for (const auto& [op, list] : weights) doc[std::string(natop_name(op))] = list;
    write_text_file(path, doc.dump(2));
}

void TemplateWeights::validate(const TemplateBank& bank) const {
    for (const auto& [op, list] : bank.templates) {
        auto it = weights.find(op);
        if (it == weights.end() || it->second.size() != list.size()) {
            throw InputError(std::string("weights misaligned for ") + std::string(natop_name(op)));
        }
        double sum = 0.0;
        for (double w : it->second) {
            if (w < 0.0) throw InputError("negative template weight");
            sum += w;
        }
        if (std::abs(sum - 1.0) > kWeightSumTolerance) {
            throw InputError(std::string("weights do not sum to 1 for ") +
                             std::string(natop_name(op)));
        }
    }
}

CandidateList candidate_list(std::optional<Signal> signal) {
    if (signal == Signal::Support) {
        return {{NatOp::Equivalence, NatOp::ForwardEntailment}};
    }
    if (signal == Signal::Refute) {
        return {{NatOp::Negation, NatOp::ReverseEntailment, NatOp::Alternation}};
    }
    return {{NatOp::Equivalence, NatOp::Negation, NatOp::ForwardEntailment,
             NatOp::ReverseEntailment, NatOp::Alternation}};
}

std::string instantiate_template(std::string_view question_template, std::string_view chunk,
                                 std::string_view evidence_span, std::string_view suffix) {
    std::string text = replace_word_placeholder(question_template, 'X', chunk);
    text = replace_word_placeholder(text, 'Y', evidence_span);
    if (!suffix.empty()) {
        text += ' ';
        text += suffix;
    }
    return text;
}

double score_natop(const AlignmentPair& pair, NatOp op, const TemplateBank& bank,
                   const TemplateWeights& weights, Backend& backend,
                   const GenerationParams& params, bool* degraded) {
    const auto& templates = bank.templates.at(op);
    const auto& w = weights.weights.at(op);
    if (templates.size() != w.size()) throw InputError("weights misaligned with template bank");

    double score = 0.0;
    double surviving_weight = 0.0;
    bool any_failed = false;
    for (std::size_t i = 0; i < templates.size(); ++i) {
        std::string prompt =
            instantiate_template(templates[i], pair.chunk.text, pair.alignment, bank.suffix);
        try {
            double p_yes = backend.score_yes_no(prompt, params).p_yes;
            score += w[i] * p_yes;
            surviving_weight += w[i];
        } catch (const TransportError&) {
            any_failed = true;
        }
    }
    if (any_failed) {
        if (degraded != nullptr) *degraded = true;
        if (surviving_weight <= 0.0) return 0.0;
        score /= surviving_weight;
    }
    return score;
}

NatOpScores assign_natop(const AlignmentPair& pair, const TemplateBank& bank,
                         const TemplateWeights& weights, Backend& backend, double alpha,
                         const GenerationParams& params, bool ignore_signal) {
    if (alpha <= 0.0 || alpha >= 1.0) throw InputError("alpha must lie in (0, 1)");

    NatOpScores result;
    // An empty evidence span makes every question ill-posed; such pairs map
    // straight to Independence.
    if (is_blank(pair.alignment)) return result;

    CandidateList candidates = candidate_list(ignore_signal ? std::nullopt : pair.signal);
    for (NatOp op : candidates.ops) {
        double s = score_natop(pair, op, bank, weights, backend, params);
        result.s[op] = s;
        if (s > alpha) result.passed.push_back(op);
    }
    for (NatOp op : kPriorityOrder) {
        if (std::find(result.passed.begin(), result.passed.end(), op) != result.passed.end()) {
            result.chosen = op;
            break;
        }
    }
    return result;
}

std::vector<ProofTriple> assign_all(std::span<const AlignmentPair> pairs, const TemplateBank& bank,
                                    const TemplateWeights& weights, Backend& backend, double alpha,
                                    const GenerationParams& params, bool ignore_signal) {
    std::vector<ProofTriple> proof;
    proof.reserve(pairs.size());
    for (const auto& pair : pairs) {
        NatOpScores scores = assign_natop(pair, bank, weights, backend, alpha, params, ignore_signal);
        ProofTriple triple;
        triple.claim_span = pair.chunk;
        triple.evidence_text = pair.alignment;
        triple.natop = scores.chosen;
        triple.scores = std::move(scores.s);
        triple.signal = pair.signal;
        proof.push_back(std::move(triple));
    }
    return proof;
}

TemplateWeights normalize_confidences(const TemplateBank& bank,
                                      const std::map<NatOp, std::vector<double>>& confidence) {
    TemplateWeights out;
    for (const auto& [op, templates] : bank.templates) {
        std::size_t n = templates.size();
        auto it = confidence.find(op);
        double sum = 0.0;
        if (it != confidence.end()) {
            if (it->second.size() != n) throw InputError("confidence vector misaligned with bank");
            for (double c : it->second) {
                if (c < 0.0) throw InputError("negative confidence");
                sum += c;
            }
        }
        if (sum <= 0.0) {
            out.weights[op] = std::vector<double>(n, 1.0 / static_cast<double>(n));
            continue;
        }
        std::vector<double> w;
        w.reserve(n);
        for (double c : it->second) w.push_back(c / sum);
        out.weights[op] = std::move(w);
    }
    return out;
}

TemplateWeights calibrate_weights(std::span<const AlignmentPair> pairs, const TemplateBank& bank,
                                  Backend& backend, const GenerationParams& params,
                                  bool* fell_back) {
    std::map<NatOp, std::vector<double>> sums;
    std::map<NatOp, std::vector<std::size_t>> counts;
    for (const auto& [op, templates] : bank.templates) {
        sums[op].assign(templates.size(), 0.0);
        counts[op].assign(templates.size(), 0);
    }

    for (const auto& pair : pairs) {
        if (is_blank(pair.alignment)) continue;
        for (NatOp op : candidate_list(pair.signal).ops) {
            const auto& templates = bank.templates.at(op);
            for (std::size_t i = 0; i < templates.size(); ++i) {
                std::string prompt = instantiate_template(templates[i], pair.chunk.text,
                                                          pair.alignment, bank.suffix);
                YesNoScore score = backend.score_yes_no(prompt, params);
                sums[op][i] += std::max(score.p_yes, score.p_no);
                counts[op][i] += 1;
            }
        }
    }

    bool any_fallback = false;
    std::map<NatOp, std::vector<double>> confidence;
    for (const auto& [op, sum] : sums) {
        std::vector<double> c(sum.size(), 0.0);
        bool has_observations = false;
        for (std::size_t i = 0; i < sum.size(); ++i) {
            if (counts[op][i] > 0) {
                c[i] = sum[i] / static_cast<double>(counts[op][i]);
                has_observations = true;
            }
        }
        if (!has_observations) any_fallback = true;
        confidence[op] = std::move(c);
    }
    if (fell_back != nullptr) *fell_back = any_fallback;
    return normalize_confidences(bank, confidence);
}

std::pair<TemplateBank, TemplateWeights> subsample_bank(const TemplateBank& bank,
                                                        const TemplateWeights& weights,
                                                        std::size_t k, std::uint64_t seed) {
    if (k == 0) throw InputError("ensemble size must be at least 1");
    if (k > bank.min_size()) throw InputError("ensemble size exceeds template bank size");

    std::mt19937_64 rng(seed);
    TemplateBank sampled_bank;
    sampled_bank.suffix = bank.suffix;
    TemplateWeights sampled_weights;
    for (const auto& [op, templates] : bank.templates) {
        std::vector<std::size_t> indices(templates.size());
        for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
        std::vector<std::size_t> chosen;
        std::sample(indices.begin(), indices.end(), std::back_inserter(chosen), k, rng);

        const auto& w = weights.weights.at(op);
        std::vector<std::string> sub_templates;
        std::vector<double> sub_weights;
        double sum = 0.0;
        for (std::size_t i : chosen) {
            sub_templates.push_back(templates[i]);
            sub_weights.push_back(w[i]);
            sum += w[i];
        }
        if (sum <= 0.0) {
            sub_weights.assign(chosen.size(), 1.0 / static_cast<double>(chosen.size()));
        } else {
            for (double& v : sub_weights) v /= sum;
        }
        sampled_bank.templates[op] = std::move(sub_templates);
        sampled_weights.weights[op] = std::move(sub_weights);
    }
    return {std::move(sampled_bank), std::move(sampled_weights)};
}

}  // namespace natver
