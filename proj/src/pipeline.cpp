#include "natver/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <thread>

#include <json.hpp>

#include "natver/text.hpp"

namespace natver {

namespace {

using json = nlohmann::json;
using clock_type = std::chrono::steady_clock;

double ms_since(clock_type::time_point start) {
    return std::chrono::duration<double, std::milli>(clock_type::now() - start).count();
}

// Counts calls on behalf of one verification so results can report them.
class CountingBackend final : public Backend {
  public:
    CountingBackend(Backend& inner, BackendCallCounts& counts) : inner_(inner), counts_(counts) {}

    std::size_t vocab_size() override { return inner_.vocab_size(); }
    std::vector<TokenId> tokenize(std::string_view text) override {
        ++counts_.tokenize;
        return inner_.tokenize(text);
    }
    std::string detokenize(std::span<const TokenId> tokens) override {
        return inner_.detokenize(tokens);
    }
    std::string token_text(TokenId id) override { return inner_.token_text(id); }
    std::vector<TokenId> generate_constrained(const std::string& prompt, const StepMaskFn& mask,
                                              const GenerationParams& params) override {
        ++counts_.constrained;
        return inner_.generate_constrained(prompt, mask, params);
    }
    FreeGeneration generate_free(const std::string& prompt,
                                 const GenerationParams& params) override {
        ++counts_.free;
        return inner_.generate_free(prompt, params);
    }
    YesNoScore score_yes_no(const std::string& prompt, const GenerationParams& params) override {
        ++counts_.yes_no;
        return inner_.score_yes_no(prompt, params);
    }

  private:
    Backend& inner_;
    BackendCallCounts& counts_;
};

struct StageError : std::runtime_error {
    StageError(const std::string& stage, const std::string& what)
        : std::runtime_error(stage + ": " + what) {}
};

std::string default_chunk_template() {
    return "Split the claim text into smaller chunks that can be individually "
           "fact-checked.\n\nClaim: {C}\n\nChunks:\n";
}

std::string default_alignment_template() {
    return "You are given a claim, supporting evidence, and the claim split into "
           "chunks. Align each claim chunk with the corresponding information from "
           "the evidence, and briefly explain how the evidence relates to the "
           "chunk.\n\nEvidence: {E}\n\nClaim: {C}\n\nClaim chunks:\n{i}. {CH-i}\n\n"
           "For each chunk output three lines: the chunk, its evidence alignment, "
           "and the explanation.\n";
}

std::string default_direct_qa_template() {
    return "Evidence: {E}\n\nClaim: {C}\n\nBased on the evidence, is the claim:\n"
           "A) Supported\nB) Refuted\nC) Not Enough Information\n\n"
           "Answer with A, B, or C.\n";
}

std::string load_template_or(const std::filesystem::path& path, std::string fallback) {
    if (!path.empty() && std::filesystem::exists(path)) return read_text_file(path);
    return fallback;
}

}  // namespace

DirectQaOutcome parse_direct_qa_answer(std::string_view completion) {
    struct Pattern {
        std::string_view needle;
        Verdict verdict;
    };
    static const Pattern patterns[] = {
        {"not enough information", Verdict::NotEnoughInfo},
        {"not enough info", Verdict::NotEnoughInfo},
        {"not supported", Verdict::Refuted},
        {"supported", Verdict::Supported},
        {"refuted", Verdict::Refuted},
        {"refutes", Verdict::Refuted},
        {"a", Verdict::Supported},
        {"b", Verdict::Refuted},
        {"c", Verdict::NotEnoughInfo},
    };

    DirectQaOutcome outcome;
    outcome.completion = std::string(completion);
    std::string lowered = lower_ascii(completion);

    std::size_t best_pos = std::string::npos;
    std::size_t best_len = 0;
    for (const auto& p : patterns) {
        std::size_t pos = 0;
        while ((pos = lowered.find(p.needle, pos)) != std::string::npos) {
            bool left_ok = pos == 0 || !std::isalpha(static_cast<unsigned char>(lowered[pos - 1]));
            std::size_t end = pos + p.needle.size();
            bool right_ok =
                end >= lowered.size() || !std::isalpha(static_cast<unsigned char>(lowered[end]));
            if (left_ok && right_ok) break;
            ++pos;
        }
        if (pos == std::string::npos) continue;
        if (pos < best_pos || (pos == best_pos && p.needle.size() > best_len)) {
            best_pos = pos;
            best_len = p.needle.size();
            outcome.verdict = p.verdict;
            outcome.parsed = true;
        }
    }
    return outcome;
}

Pipeline::Pipeline(std::shared_ptr<Backend> backend, PipelineConfig config)
    : backend_(std::move(backend)), config_(std::move(config)) {
    if (backend_ == nullptr) throw InputError("pipeline needs a backend");

    const auto& dir = config_.templates_dir;
    chunk_template_ = load_template_or(dir / "chunking.txt", default_chunk_template());
    alignment_template_ = load_template_or(dir / "alignment.txt", default_alignment_template());
    direct_qa_template_ = load_template_or(dir / "direct_qa.txt", default_direct_qa_template());

    lexicon_ = config_.signals_path.empty() ? SignalLexicon::defaults()
                                            : SignalLexicon::from_file(config_.signals_path);

    TemplateBank bank = TemplateBank::load(dir / "natops");
    TemplateWeights weights;
    if (config_.ablations.no_weighted_templates || config_.weights_path.empty()) {
        weights = TemplateWeights::uniform(bank);
        weights_uniform_ = true;
    } else {
        weights = TemplateWeights::load(config_.weights_path);
        weights.validate(bank);
        weights_uniform_ = false;
    }

    std::optional<std::size_t> sample_size = config_.ensemble_size;
    if (config_.ablations.no_qa_ensembles) sample_size = 1;
    if (sample_size) {
        auto [sub_bank, sub_weights] = subsample_bank(bank, weights, *sample_size, config_.seed);
        effective_bank_ = std::move(sub_bank);
        effective_weights_ = std::move(sub_weights);
    } else {
        effective_bank_ = std::move(bank);
        effective_weights_ = std::move(weights);
    }
}

std::vector<AlignmentPair> Pipeline::alignment_pairs(const std::string& claim,
                                                     const std::string& evidence) const {
    ClaimChunks chunks;
    if (config_.ablations.no_constrained_decoding) {
        chunks = chunk_unconstrained(claim, *backend_, chunk_template_);
        return align_unconstrained(claim, evidence, chunks, *backend_, alignment_template_,
                                   lexicon_, /*apply_post_filter=*/false);
    }
    try {
        chunks = chunk(claim, *backend_, chunk_template_);
        return align(claim, evidence, chunks, *backend_, alignment_template_, lexicon_);
    } catch (const CapabilityError&) {
        chunks = chunk_unconstrained(claim, *backend_, chunk_template_);
        return align_unconstrained(claim, evidence, chunks, *backend_, alignment_template_,
                                   lexicon_, /*apply_post_filter=*/true);
    }
}

VerificationResult Pipeline::verify(const std::string& claim, const std::string& evidence,
                                    const std::string& id) const {
    VerificationResult result;
    result.id = id;
    result.claim = claim;
    CountingBackend backend(*backend_, result.calls);
    auto start = clock_type::now();

    // Chunking.
    ClaimChunks chunks;
    auto stage_start = clock_type::now();
    try {
        if (config_.ablations.no_constrained_decoding) {
            chunks = chunk_unconstrained(claim, backend, chunk_template_);
        } else {
            try {
                chunks = chunk(claim, backend, chunk_template_);
            } catch (const CapabilityError&) {
                chunks = chunk_unconstrained(claim, backend, chunk_template_);
            }
        }
    } catch (const std::exception& e) {
        throw StageError("chunk", e.what());
    }
    result.chunk_ms = ms_since(stage_start);
    result.stages.chunk_constrained = chunks.constrained;
    for (const auto& c : chunks.chunks) result.stages.chunks.push_back(c.text);

    // Alignment.
    stage_start = clock_type::now();
    std::vector<AlignmentPair> pairs;
    bool align_constrained = true;
    bool align_filtered = true;
    try {
        if (config_.ablations.no_constrained_decoding) {
            align_constrained = false;
            align_filtered = false;
            pairs = align_unconstrained(claim, evidence, chunks, backend, alignment_template_,
                                        lexicon_, /*apply_post_filter=*/false);
        } else {
            try {
                pairs = align(claim, evidence, chunks, backend, alignment_template_, lexicon_);
            } catch (const CapabilityError&) {
                align_constrained = false;
                pairs = align_unconstrained(claim, evidence, chunks, backend, alignment_template_,
                                            lexicon_, /*apply_post_filter=*/true);
            }
        }
    } catch (const std::exception& e) {
        throw StageError("align", e.what());
    }
    result.align_ms = ms_since(stage_start);
    result.stages.align_constrained = align_constrained;
    result.stages.align_filtered = align_filtered;
    for (const auto& p : pairs) {
        result.stages.raw_alignments.push_back(p.raw_alignment);
        result.stages.alignments.push_back(p.alignment);
        result.stages.explanations.push_back(p.explanation);
        result.stages.signals.push_back(p.signal ? std::string(signal_name(*p.signal)) : "none");
    }

    // Assignment.
    stage_start = clock_type::now();
    bool ignore_signal = config_.ablations.no_alignment_signals;
    for (const auto& p : pairs) {
        std::vector<std::string> names;
        for (NatOp op : candidate_list(ignore_signal ? std::nullopt : p.signal).ops) {
            names.emplace_back(natop_name(op));
        }
        result.stages.candidate_lists.push_back(std::move(names));
    }
    result.stages.weights_uniform = weights_uniform_ || config_.ablations.no_weighted_templates;
    result.stages.ensemble_size_used = effective_bank_.min_size();
    try {
        result.proof = assign_all(pairs, effective_bank_, effective_weights_, backend,
                                  config_.alpha, GenerationParams::qa_defaults(), ignore_signal);
    } catch (const std::exception& e) {
        throw StageError("assign", e.what());
    }
    result.assign_ms = ms_since(stage_start);

    // Execution: the verdict is a pure function of the proof.
    result.trace = execute(result.proof);
    result.verdict = result.trace.verdict;
    result.total_ms = ms_since(start);
    return result;
}

DirectQaOutcome Pipeline::direct_qa(const std::string& claim, const std::string& evidence) const {
    std::string prompt = replace_marker(direct_qa_template_, "{E}", evidence);
    prompt = replace_marker(std::move(prompt), "{C}", claim);
    FreeGeneration gen = backend_->generate_free(prompt, GenerationParams::task_defaults());
    return parse_direct_qa_answer(gen.text);
}

std::vector<VerificationResult> Pipeline::verify_batch(
    std::span<const ClaimEvidence> instances) const {
    std::vector<VerificationResult> results(instances.size());
    if (instances.empty()) return results;

    int jobs = std::max(1, config_.jobs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= instances.size()) break;
            const auto& inst = instances[i];
            try {
                results[i] = verify(inst.claim, inst.evidence, inst.id);
            } catch (const std::exception& e) {
                results[i].id = inst.id;
                results[i].claim = inst.claim;
                results[i].error = e.what();
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(jobs));
        for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    return results;
}

std::string VerificationResult::to_json_line() const {
    json triples = json::array();
    for (const auto& t : proof) {
        json scores = json::object();
        for (const auto& [op, s] : t.scores) scores[std::string(natop_name(op))] = s;
        triples.push_back({
            {"claim_span",
             {{"start", t.claim_span.start}, {"end", t.claim_span.end}, {"text", t.claim_span.text}}},
            {"evidence_text", t.evidence_text},
            {"natop", natop_name(t.natop)},
            {"scores", std::move(scores)},
            {"signal", t.signal ? json(signal_name(*t.signal)) : json(nullptr)},
        });
    }
    json states = json::array();
    for (DfaState s : trace.states) states.push_back(dfa_state_name(s));

    json doc = {
        {"id", id},
        {"claim", claim},
        {"verdict", verdict_name(verdict)},
        {"triples", std::move(triples)},
        {"states", std::move(states)},
        {"stages",
         {{"chunk_constrained", stages.chunk_constrained},
          {"chunks", stages.chunks},
          {"align_constrained", stages.align_constrained},
          {"align_filtered", stages.align_filtered},
          {"raw_alignments", stages.raw_alignments},
          {"alignments", stages.alignments},
          {"explanations", stages.explanations},
          {"signals", stages.signals},
          {"candidate_lists", stages.candidate_lists},
          {"weights_uniform", stages.weights_uniform},
          {"ensemble_size", stages.ensemble_size_used}}},
        // Timings stay in memory; the persisted stream must be bit-reproducible.
        {"backend_calls",
         {{"tokenize", calls.tokenize},
          {"constrained", calls.constrained},
          {"free", calls.free},
          {"yes_no", calls.yes_no}}},
    };
    if (!error.empty()) doc["error"] = error;
    return doc.dump();
}

}  // namespace natver
