#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "natver/natlog.hpp"
#include "natver/pipeline.hpp"

namespace natver {

struct Instance {
    std::string id;
    std::string claim;
    std::vector<std::string> evidence;
    std::string gold_label;  // dataset-native label string
};

struct LoadStats {
    std::size_t loaded = 0;
    std::size_t dropped_excluded = 0;
};

// Dataset-native labels mapped onto three-way verdicts. Two-way datasets
// fold NotEnoughInfo predictions onto a configured negative class.
struct LabelMap {
    std::string dataset;
    bool two_way = false;
    std::map<std::string, Verdict> mapping;
    std::set<std::string> excluded;
    Verdict nei_fold = Verdict::Refuted;

    static LabelMap from_file(const std::filesystem::path& path);
    static LabelMap three_way_default();

    Verdict fold(Verdict prediction) const;
    Verdict gold_verdict(const std::string& label) const;  // throws on unknown labels
    std::vector<Verdict> classes() const;  // distinct mapped verdicts, canonical order
};

// JSON Lines with fields {id, claim, evidence, label}; evidence may be a
// string or an array of strings. Rows with excluded labels are dropped and
// counted; unknown labels raise an error naming the line.
std::vector<Instance> load_dataset(const std::filesystem::path& path, const LabelMap& labels,
                                   LoadStats* stats = nullptr);

// Multi-sentence evidence combined into one paragraph.
std::string join_evidence(const std::vector<std::string>& evidence);

ClaimEvidence to_claim_evidence(const Instance& instance);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

// Okapi BM25 over pre-tokenized documents with
// IDF = ln((N - df + 0.5) / (df + 0.5) + 1); ties break by ascending doc id.
class Bm25Index {
  public:
    explicit Bm25Index(const std::vector<std::string>& documents, Bm25Params params = {});

    struct Hit {
        std::size_t doc = 0;
        double score = 0.0;
    };

    std::vector<Hit> search(std::string_view query, std::size_t top_k,
                            bool* empty_query = nullptr) const;

    std::size_t size() const { return doc_terms_.size(); }
    static std::vector<std::string> text_terms(std::string_view text);

  private:
    Bm25Params params_;
    std::vector<std::map<std::string, std::size_t>> doc_terms_;
    std::vector<std::size_t> doc_lengths_;
    std::map<std::string, std::size_t> df_;
    double avgdl_ = 0.0;
};

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct EvalReport {
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    std::vector<Verdict> classes;
    std::map<Verdict, ClassMetrics> per_class;
    std::vector<std::vector<std::size_t>> confusion;  // [gold][pred]
    std::size_t n = 0;
    std::size_t failed = 0;  // results carrying an error

    std::string to_json() const;
    std::string to_table() const;
};

// Folds predictions through the label map and scores them against gold.
// Results and instances must align by id.
EvalReport evaluate(std::span<const VerificationResult> results,
                    std::span<const Instance> instances, const LabelMap& labels);

// Verdict-level variant used by tests and the bindings.
EvalReport evaluate_labels(std::span<const Verdict> predictions, std::span<const Verdict> gold,
                           const LabelMap& labels);

struct EnsemblePoint {
    std::size_t size = 0;
    double mean_macro_f1 = 0.0;
    double std_macro_f1 = 0.0;  // population standard deviation
    std::vector<double> runs;
};

// Fully seeded ensemble-size study: per size, `repeats` runs each with a
// freshly subsampled template bank, scored with macro-F1.
std::vector<EnsemblePoint> ensemble_study(std::span<const Instance> instances,
                                          const std::vector<std::size_t>& sizes,
                                          std::size_t repeats, std::uint64_t seed,
                                          std::shared_ptr<Backend> backend,
                                          const PipelineConfig& base_config,
                                          const LabelMap& labels);

}  // namespace natver
