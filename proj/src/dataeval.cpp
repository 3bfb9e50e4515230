#include "natver/dataeval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "natver/text.hpp"

namespace natver {

namespace {

using json = nlohmann::json;

constexpr Verdict kCanonicalOrder[] = {Verdict::Supported, Verdict::Refuted,
                                       Verdict::NotEnoughInfo};

}  // namespace

LabelMap LabelMap::from_file(const std::filesystem::path& path) {
    json doc = json::parse(read_text_file(path));
    LabelMap map;
    map.dataset = doc.value("dataset", "");
    map.two_way = doc.value("label_space", "three_way") == "two_way";
    for (const auto& [label, verdict] : doc.at("mapping").items()) {
        auto v = verdict_from_name(verdict.get<std::string>());
        if (!v) throw InputError("unknown verdict in label map: " + verdict.get<std::string>());
        map.mapping[label] = *v;
    }
    if (doc.contains("excluded")) {
        for (const auto& label : doc.at("excluded")) map.excluded.insert(label.get<std::string>());
    }
    if (doc.contains("nei_fold")) {
        auto v = verdict_from_name(doc.at("nei_fold").get<std::string>());
        if (!v) throw InputError("unknown nei_fold verdict");
        map.nei_fold = *v;
    }
    if (map.mapping.empty()) throw InputError("label map has no labels: " + path.string());
    return map;
}

LabelMap LabelMap::three_way_default() {
    LabelMap map;
    map.dataset = "default";
    map.mapping = {
        {"Supported", Verdict::Supported},
        {"Refuted", Verdict::Refuted},
        {"NotEnoughInfo", Verdict::NotEnoughInfo},
    };
    return map;
}

Verdict LabelMap::fold(Verdict prediction) const {
    if (two_way && prediction == Verdict::NotEnoughInfo) return nei_fold;
    return prediction;
}

Verdict LabelMap::gold_verdict(const std::string& label) const {
    auto it = mapping.find(label);
    if (it == mapping.end()) throw InputError("label not in label map: " + label);
    return it->second;
}

std::vector<Verdict> LabelMap::classes() const {
    std::vector<Verdict> out;
    for (Verdict v : kCanonicalOrder) {
        for (const auto& [label, mapped] : mapping) {
            if (mapped == v) {
                out.push_back(v);
                break;
            }
        }
    }
    return out;
}

std::vector<Instance> load_dataset(const std::filesystem::path& path, const LabelMap& labels,
                                   LoadStats* stats) {
    std::string content = read_text_file(path);
    std::vector<Instance> out;
    LoadStats local;
    std::size_t line_no = 0;
    std::size_t line_start = 0;
    while (line_start <= content.size()) {
        std::size_t line_end = content.find('\n', line_start);
        bool last = line_end == std::string::npos;
        if (last) line_end = content.size();
        std::string line = content.substr(line_start, line_end - line_start);
        ++line_no;
        line_start = line_end + 1;
        if (is_blank(line)) {
            if (last) break;
            continue;
        }

        json row;
        try {
            row = json::parse(line);
        } catch (const json::exception& e) {
            throw InputError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
        }
        Instance inst;
        try {
            inst.id = row.at("id").is_string() ? row.at("id").get<std::string>()
                                               : row.at("id").dump();
            inst.claim = row.at("claim").get<std::string>();
            const auto& ev = row.at("evidence");
            if (ev.is_string()) {
                inst.evidence.push_back(ev.get<std::string>());
            } else {
                for (const auto& e : ev) inst.evidence.push_back(e.get<std::string>());
            }
            inst.gold_label = row.at("label").get<std::string>();
        } catch (const json::exception& e) {
            throw InputError("line " + std::to_string(line_no) + ": missing field: " + e.what());
        }
        if (is_blank(inst.claim)) {
            throw InputError("line " + std::to_string(line_no) + ": empty claim");
        }
        if (labels.excluded.contains(inst.gold_label)) {
            ++local.dropped_excluded;
            if (last) break;
            continue;
        }
        if (!labels.mapping.contains(inst.gold_label)) {
            throw InputError("line " + std::to_string(line_no) + ": unknown label \"" +
                             inst.gold_label + "\"");
        }
        out.push_back(std::move(inst));
        ++local.loaded;
        if (last) break;
    }
    if (stats != nullptr) *stats = local;
    return out;
}

std::string join_evidence(const std::vector<std::string>& evidence) {
    std::string out;
    for (const auto& e : evidence) {
        std::string t = trim(e);
        if (t.empty()) continue;
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

ClaimEvidence to_claim_evidence(const Instance& instance) {
    return {instance.id, instance.claim, join_evidence(instance.evidence)};
}

std::vector<std::string> Bm25Index::text_terms(std::string_view text) {
    std::vector<std::string> terms;
    for (const auto& w : split_words(text)) {
        std::string n = normalize_word(w);
        if (!n.empty()) terms.push_back(std::move(n));
    }
    return terms;
}

Bm25Index::Bm25Index(const std::vector<std::string>& documents, Bm25Params params)
    : params_(params) {
    if (params_.k1 <= 0.0) throw InputError("k1 must be positive");
    if (params_.b < 0.0 || params_.b > 1.0) throw InputError("b must lie in [0, 1]");
    std::size_t total_length = 0;
    for (const auto& doc : documents) {
        std::map<std::string, std::size_t> counts;
        std::size_t length = 0;
        for (auto& term : text_terms(doc)) {
            ++counts[term];
            ++length;
        }
        for (const auto& [term, count] : counts) ++df_[term];
        doc_terms_.push_back(std::move(counts));
        doc_lengths_.push_back(length);
        total_length += length;
    }
    avgdl_ = doc_terms_.empty() ? 0.0
                                : static_cast<double>(total_length) /
                                      static_cast<double>(doc_terms_.size());
}

std::vector<Bm25Index::Hit> Bm25Index::search(std::string_view query, std::size_t top_k,
                                              bool* empty_query) const {
    if (top_k == 0) throw InputError("top_k must be at least 1");
    if (doc_terms_.empty()) throw InputError("index is empty");

    std::vector<std::string> terms = text_terms(query);
    if (empty_query != nullptr) *empty_query = terms.empty();
    if (terms.empty()) return {};

    double n_docs = static_cast<double>(doc_terms_.size());
    std::vector<Hit> hits(doc_terms_.size());
    for (std::size_t d = 0; d < doc_terms_.size(); ++d) {
        hits[d].doc = d;
        double dl = static_cast<double>(doc_lengths_[d]);
        double norm = params_.k1 * (1.0 - params_.b + params_.b * (avgdl_ > 0.0 ? dl / avgdl_ : 0.0));
        double score = 0.0;
        for (const auto& term : terms) {
            auto tf_it = doc_terms_[d].find(term);
            if (tf_it == doc_terms_[d].end()) continue;
            double tf = static_cast<double>(tf_it->second);
            double df = static_cast<double>(df_.at(term));
            double idf = std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
            score += idf * (tf * (params_.k1 + 1.0)) / (tf + norm);
        }
        hits[d].score = score;
    }
    std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc < b.doc;
    });
    if (hits.size() > top_k) hits.resize(top_k);
    return hits;
}

namespace {

EvalReport score_verdicts(const std::vector<Verdict>& preds, const std::vector<Verdict>& gold,
                          const LabelMap& labels) {
    EvalReport report;
    report.classes = labels.classes();
    report.n = gold.size();

    std::map<Verdict, std::size_t> index;
    for (std::size_t i = 0; i < report.classes.size(); ++i) index[report.classes[i]] = i;
    report.confusion.assign(report.classes.size(),
                            std::vector<std::size_t>(report.classes.size(), 0));

    std::size_t correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        Verdict p = labels.fold(preds[i]);
        if (!index.contains(p)) {
            // A prediction outside the dataset's classes still folds to one;
            // guard against maps whose fold target is unmapped.
            p = labels.nei_fold;
        }
        report.confusion[index.at(gold[i])][index.at(p)] += 1;
        if (p == gold[i]) ++correct;
    }
    report.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());

    double f1_sum = 0.0;
    std::size_t f1_classes = 0;
    for (std::size_t c = 0; c < report.classes.size(); ++c) {
        std::size_t tp = report.confusion[c][c];
        std::size_t gold_count = 0;
        std::size_t pred_count = 0;
        for (std::size_t k = 0; k < report.classes.size(); ++k) {
            gold_count += report.confusion[c][k];
            pred_count += report.confusion[k][c];
        }
        ClassMetrics m;
        m.support = gold_count;
        m.precision = pred_count > 0 ? static_cast<double>(tp) / static_cast<double>(pred_count) : 0.0;
        m.recall = gold_count > 0 ? static_cast<double>(tp) / static_cast<double>(gold_count) : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
        report.per_class[report.classes[c]] = m;
        if (gold_count > 0) {
            f1_sum += m.f1;
            ++f1_classes;
        }
    }
    report.macro_f1 = f1_classes > 0 ? f1_sum / static_cast<double>(f1_classes) : 0.0;
    return report;
}

}  // namespace

EvalReport evaluate(std::span<const VerificationResult> results,
                    std::span<const Instance> instances, const LabelMap& labels) {
    if (results.size() != instances.size()) {
        throw InputError("results and instances differ in length: " +
                         std::to_string(results.size()) + " vs " +
                         std::to_string(instances.size()));
    }
    std::string mismatches;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (results[i].id != instances[i].id) {
            mismatches += (mismatches.empty() ? "" : ", ") + results[i].id + "!=" + instances[i].id;
        }
    }
    if (!mismatches.empty()) throw InputError("id mismatch: " + mismatches);

    std::vector<Verdict> preds;
    std::vector<Verdict> gold;
    std::size_t failed = 0;
    preds.reserve(results.size());
    gold.reserve(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (!results[i].error.empty()) ++failed;
        preds.push_back(results[i].verdict);
        gold.push_back(labels.gold_verdict(instances[i].gold_label));
    }
    EvalReport report = score_verdicts(preds, gold, labels);
    report.failed = failed;
    return report;
}

EvalReport evaluate_labels(std::span<const Verdict> predictions, std::span<const Verdict> gold,
                           const LabelMap& labels) {
    if (predictions.size() != gold.size()) throw InputError("predictions and gold differ in length");
    return score_verdicts(std::vector<Verdict>(predictions.begin(), predictions.end()),
                          std::vector<Verdict>(gold.begin(), gold.end()), labels);
}

std::string EvalReport::to_json() const {
    json per = json::object();
    for (const auto& [v, m] : per_class) {
        per[std::string(verdict_name(v))] = {{"precision", m.precision},
                                             {"recall", m.recall},
                                             {"f1", m.f1},
                                             {"support", m.support}};
    }
    json class_names = json::array();
    for (Verdict v : classes) class_names.push_back(verdict_name(v));
    json doc = {
        {"macro_f1", macro_f1}, {"accuracy", accuracy},   {"classes", std::move(class_names)},
        {"per_class", std::move(per)}, {"confusion", confusion}, {"n", n},
        {"failed", failed},
    };
    return doc.dump(2);
}

std::string EvalReport::to_table() const {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(4);
    out << "n=" << n;
    if (failed > 0) out << " (failed: " << failed << ")";
    out << "  macro-F1=" << macro_f1 << "  accuracy=" << accuracy << "\n";
    out << "class            precision  recall     f1         support\n";
    for (Verdict v : classes) {
        const auto& m = per_class.at(v);
        std::string name(verdict_name(v));
        name.resize(16, ' ');
        out << name << " " << m.precision << "     " << m.recall << "     " << m.f1 << "     "
            << m.support << "\n";
    }
    return out.str();
}

std::vector<EnsemblePoint> ensemble_study(std::span<const Instance> instances,
                                          const std::vector<std::size_t>& sizes,
                                          std::size_t repeats, std::uint64_t seed,
                                          std::shared_ptr<Backend> backend,
                                          const PipelineConfig& base_config,
                                          const LabelMap& labels) {
    if (repeats < 2) throw InputError("repeats must be at least 2");
    if (instances.empty()) throw InputError("no instances for the ensemble study");

    std::vector<ClaimEvidence> batch;
    batch.reserve(instances.size());
    for (const auto& inst : instances) batch.push_back(to_claim_evidence(inst));

    std::vector<EnsemblePoint> points;
    for (std::size_t size : sizes) {
        EnsemblePoint point;
        point.size = size;
        for (std::size_t rep = 0; rep < repeats; ++rep) {
            PipelineConfig config = base_config;
            config.ensemble_size = size;
            config.seed = fnv1a64(std::to_string(seed) + ":" + std::to_string(size) + ":" +
                                  std::to_string(rep));
            Pipeline pipeline(backend, config);  // throws if size exceeds the bank
            auto results = pipeline.verify_batch(batch);
            EvalReport report = evaluate(results, instances, labels);
            point.runs.push_back(report.macro_f1);
        }
        double mean = 0.0;
        for (double r : point.runs) mean += r;
        mean /= static_cast<double>(point.runs.size());
        double var = 0.0;
        for (double r : point.runs) var += (r - mean) * (r - mean);
        var /= static_cast<double>(point.runs.size());
        point.mean_macro_f1 = mean;
        point.std_macro_f1 = std::sqrt(var);
        points.push_back(std::move(point));
    }
    return points;
}

}  // namespace natver
