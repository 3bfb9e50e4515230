#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "natver/dataeval.hpp"
#include "natver/http_backend.hpp"
#include "natver/natlog.hpp"
#include "natver/pipeline.hpp"
#include "natver/scripted_backend.hpp"
#include "natver/text.hpp"

namespace {

using json = nlohmann::json;
using namespace natver;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitBackend = 3;

struct CommonOptions {
    std::string backend_spec;
    std::string config_path;
    std::string templates_dir = "templates";
    std::string signals_path;
    std::string weights_path;
    double alpha = 0.5;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::optional<std::size_t> ensemble_size;
    std::vector<std::string> ablations;

    CLI::Option* backend_opt = nullptr;
    CLI::Option* templates_opt = nullptr;
    CLI::Option* signals_opt = nullptr;
    CLI::Option* weights_opt = nullptr;
    CLI::Option* alpha_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* jobs_opt = nullptr;
    CLI::Option* ensemble_opt = nullptr;
    CLI::Option* ablate_opt = nullptr;
};

void add_common_options(CLI::App& cmd, CommonOptions& opts) {
    opts.backend_opt =
        cmd.add_option("--backend", opts.backend_spec,
                       "Backend: scripted:<scenario.json> or http:<base-url>");
    cmd.add_option("--config", opts.config_path, "JSON config file (flags take precedence)");
    opts.templates_opt = cmd.add_option("--templates", opts.templates_dir, "Template directory");
    opts.signals_opt = cmd.add_option("--signals", opts.signals_path, "Signal lexicon JSON");
    opts.weights_opt = cmd.add_option("--weights", opts.weights_path, "Template weights JSON");
    opts.alpha_opt = cmd.add_option("--alpha", opts.alpha, "Score threshold in (0, 1)");
    opts.seed_opt = cmd.add_option("--seed", opts.seed, "Seed for template subsampling");
    opts.jobs_opt = cmd.add_option("--jobs", opts.jobs, "Parallel workers for batches");
    opts.ensemble_opt = cmd.add_option("--ensemble-size", opts.ensemble_size,
                                       "Subsample this many templates per operator");
    opts.ablate_opt =
        cmd.add_option("--ablate", opts.ablations, "Ablation switches")
            ->check(CLI::IsMember({"no-weighted-templates", "no-qa-ensembles",
                                   "no-constrained-decoding", "no-alignment-signals"}));
}

// Flags beat the config file, the config file beats built-in defaults.
void apply_config_file(CommonOptions& opts) {
    if (opts.config_path.empty()) return;
    json doc = json::parse(read_text_file(opts.config_path));
    auto take = [&](CLI::Option* opt, const char* key, auto& value) {
        if (opt != nullptr && opt->count() == 0 && doc.contains(key)) {
            value = doc.at(key).get<std::decay_t<decltype(value)>>();
        }
    };
    take(opts.backend_opt, "backend", opts.backend_spec);
    take(opts.templates_opt, "templates", opts.templates_dir);
    take(opts.signals_opt, "signals", opts.signals_path);
    take(opts.weights_opt, "weights", opts.weights_path);
    take(opts.alpha_opt, "alpha", opts.alpha);
    take(opts.seed_opt, "seed", opts.seed);
    take(opts.jobs_opt, "jobs", opts.jobs);
    if (opts.ensemble_opt->count() == 0 && doc.contains("ensemble_size")) {
        opts.ensemble_size = doc.at("ensemble_size").get<std::size_t>();
    }
    if (opts.ablate_opt->count() == 0 && doc.contains("ablate")) {
        opts.ablations = doc.at("ablate").get<std::vector<std::string>>();
    }
}

PipelineConfig make_pipeline_config(const CommonOptions& opts) {
    PipelineConfig config;
    config.alpha = opts.alpha;
    config.seed = opts.seed;
    config.jobs = opts.jobs;
    config.ensemble_size = opts.ensemble_size;
    config.templates_dir = opts.templates_dir;
    config.signals_path = opts.signals_path;
    config.weights_path = opts.weights_path;
    for (const auto& flag : opts.ablations) {
        if (flag == "no-weighted-templates") config.ablations.no_weighted_templates = true;
        if (flag == "no-qa-ensembles") config.ablations.no_qa_ensembles = true;
        if (flag == "no-constrained-decoding") config.ablations.no_constrained_decoding = true;
        if (flag == "no-alignment-signals") config.ablations.no_alignment_signals = true;
    }
    return config;
}

std::shared_ptr<Backend> make_backend(const std::string& spec) {
    if (spec.starts_with("scripted:")) {
        return std::make_shared<ScriptedBackend>(
            std::filesystem::path(spec.substr(std::string("scripted:").size())));
    }
    if (spec.starts_with("http:") || spec.starts_with("https:")) {
        HttpBackendConfig config;
        config.base_url = spec.starts_with("http:") && !spec.starts_with("http://")
                              ? spec.substr(std::string("http:").size())
                              : spec;
        return std::make_shared<HttpBackend>(std::move(config));
    }
    throw InputError("unknown backend spec: " + spec +
                     " (expected scripted:<path> or http:<url>)");
}

// Reproducibility: every run reports the configuration it actually used.
void echo_config(const std::string& command, const CommonOptions& opts) {
    json doc = {
        {"command", command},
        {"backend", opts.backend_spec},
        {"templates", opts.templates_dir},
        {"signals", opts.signals_path},
        {"weights", opts.weights_path},
        {"alpha", opts.alpha},
        {"seed", opts.seed},
        {"jobs", opts.jobs},
        {"ablate", opts.ablations},
    };
    if (opts.ensemble_size) doc["ensemble_size"] = *opts.ensemble_size;
    std::cerr << "config: " << doc.dump() << "\n";
}

void write_output(const std::string& out_path, const std::string& content) {
    if (out_path.empty() || out_path == "-") {
        std::cout << content << "\n";
        return;
    }
    write_text_file(out_path, content + "\n");
}

int run_verify(const CommonOptions& opts, const std::string& claim, const std::string& evidence,
               const std::string& evidence_file, const std::string& out_path) {
    std::string evidence_text = evidence;
    if (!evidence_file.empty()) evidence_text = read_text_file(evidence_file);
    if (is_blank(claim)) throw InputError("--claim must not be empty");
    if (is_blank(evidence_text)) throw InputError("evidence must not be empty");

    Pipeline pipeline(make_backend(opts.backend_spec), make_pipeline_config(opts));
    VerificationResult result = pipeline.verify(claim, evidence_text);
    json doc = json::parse(serialize_proof(result.claim, result.proof, result.trace));
    write_output(out_path, doc.dump(2));
    return kExitOk;
}

int run_evaluate(const CommonOptions& opts, const std::string& dataset_path,
                 const std::string& labelmap_path, const std::string& out_dir) {
    LabelMap labels = LabelMap::from_file(labelmap_path);
    LoadStats stats;
    std::vector<Instance> instances = load_dataset(dataset_path, labels, &stats);
    if (stats.dropped_excluded > 0) {
        std::cerr << "dropped " << stats.dropped_excluded << " rows with excluded labels\n";
    }

    Pipeline pipeline(make_backend(opts.backend_spec), make_pipeline_config(opts));
    std::vector<ClaimEvidence> batch;
    batch.reserve(instances.size());
    for (const auto& inst : instances) batch.push_back(to_claim_evidence(inst));
    std::vector<VerificationResult> results = pipeline.verify_batch(batch);

    EvalReport report = evaluate(results, instances, labels);
    std::cout << report.to_table();
    if (report.failed > 0) std::cerr << report.failed << " instances failed\n";

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::string lines;
        for (const auto& r : results) lines += r.to_json_line() + "\n";
        write_text_file(std::filesystem::path(out_dir) / "results.jsonl", lines);
        write_text_file(std::filesystem::path(out_dir) / "report.json", report.to_json());
    }
    return kExitOk;
}

int run_calibrate(const CommonOptions& opts, const std::string& dataset_path,
                  const std::string& labelmap_path, const std::string& out_path) {
    LabelMap labels =
        labelmap_path.empty() ? LabelMap::three_way_default() : LabelMap::from_file(labelmap_path);
    std::vector<Instance> instances;
    if (labelmap_path.empty()) {
        // Calibration ignores gold labels; accept any label by loading rows
        // through a permissive pass.
        std::string content = read_text_file(dataset_path);
        std::size_t line_start = 0;
        while (line_start <= content.size()) {
            std::size_t line_end = content.find('\n', line_start);
            bool last = line_end == std::string::npos;
            if (last) line_end = content.size();
            std::string line = content.substr(line_start, line_end - line_start);
            line_start = line_end + 1;
            if (!is_blank(line)) {
                json row = json::parse(line);
                Instance inst;
                inst.id = row.at("id").is_string() ? row.at("id").get<std::string>()
                                                   : row.at("id").dump();
                inst.claim = row.at("claim").get<std::string>();
                const auto& ev = row.at("evidence");
                if (ev.is_string()) {
                    inst.evidence.push_back(ev.get<std::string>());
                } else {
                    for (const auto& e : ev) inst.evidence.push_back(e.get<std::string>());
                }
                inst.gold_label = row.value("label", "");
                instances.push_back(std::move(inst));
            }
            if (last) break;
        }
    } else {
        instances = load_dataset(dataset_path, labels);
    }

    auto backend = make_backend(opts.backend_spec);
    CommonOptions base = opts;
    base.ensemble_size.reset();  // calibration always runs on the full bank
    Pipeline pipeline(backend, make_pipeline_config(base));

    std::vector<AlignmentPair> pairs;
    for (const auto& inst : instances) {
        auto ce = to_claim_evidence(inst);
        auto inst_pairs = pipeline.alignment_pairs(ce.claim, ce.evidence);
        pairs.insert(pairs.end(), inst_pairs.begin(), inst_pairs.end());
    }

    TemplateBank bank = TemplateBank::load(std::filesystem::path(opts.templates_dir) / "natops");
    bool fell_back = false;
    TemplateWeights weights = calibrate_weights(pairs, bank, *backend,
                                                GenerationParams::qa_defaults(), &fell_back);
    if (fell_back) {
        std::cerr << "warning: no usable pairs for at least one operator; uniform weights used\n";
    }
    weights.save(out_path);
    std::cerr << "wrote weights for " << weights.weights.size() << " operators to " << out_path
              << "\n";
    return kExitOk;
}

int run_ensemble_study(const CommonOptions& opts, const std::string& dataset_path,
                       const std::string& labelmap_path, const std::string& sizes_text,
                       std::size_t repeats, const std::string& out_path) {
    LabelMap labels = LabelMap::from_file(labelmap_path);
    std::vector<Instance> instances = load_dataset(dataset_path, labels);

    std::vector<std::size_t> sizes;
    std::stringstream ss(sizes_text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!is_blank(item)) sizes.push_back(std::stoul(trim(item)));
    }
    if (sizes.empty()) throw InputError("--sizes must list at least one ensemble size");

    auto points = ensemble_study(instances, sizes, repeats, opts.seed,
                                 make_backend(opts.backend_spec), make_pipeline_config(opts),
                                 labels);

    json doc = json::array();
    std::cout << "size  mean_macro_f1  std_macro_f1\n";
    for (const auto& p : points) {
        std::cout << p.size << "     " << p.mean_macro_f1 << "       " << p.std_macro_f1 << "\n";
        doc.push_back({{"size", p.size},
                       {"mean_macro_f1", p.mean_macro_f1},
                       {"std_macro_f1", p.std_macro_f1},
                       {"runs", p.runs}});
    }
    if (!out_path.empty()) write_text_file(out_path, doc.dump(2));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Natural-logic fact verification over claim/evidence pairs"};
    app.require_subcommand(1);

    CommonOptions verify_opts;
    std::string claim;
    std::string evidence;
    std::string evidence_file;
    std::string verify_out;
    CLI::App* verify_cmd =
        app.add_subcommand("verify", "Build and execute a proof for one claim/evidence pair");
    verify_cmd->add_option("--claim", claim, "Claim text")->required();
    verify_cmd->add_option("--evidence", evidence, "Evidence text");
    verify_cmd->add_option("--evidence-file", evidence_file, "File with evidence text");
    verify_cmd->add_option("--out", verify_out, "Output file (default: stdout)");
    add_common_options(*verify_cmd, verify_opts);

    CommonOptions eval_opts;
    std::string dataset_path;
    std::string labelmap_path;
    std::string eval_out;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "Verify a dataset and score the verdicts");
    eval_cmd->add_option("--dataset", dataset_path, "JSONL dataset")->required();
    eval_cmd->add_option("--labelmap", labelmap_path, "Label map JSON")->required();
    eval_cmd->add_option("--out", eval_out, "Directory for results.jsonl and report.json");
    add_common_options(*eval_cmd, eval_opts);

    CommonOptions cal_opts;
    std::string cal_dataset;
    std::string cal_labelmap;
    std::string cal_out = "weights.json";
    CLI::App* cal_cmd = app.add_subcommand("calibrate", "Calibrate template weights on a dataset");
    cal_cmd->add_option("--dataset", cal_dataset, "JSONL dataset")->required();
    cal_cmd->add_option("--labelmap", cal_labelmap, "Label map JSON (optional)");
    cal_cmd->add_option("--out", cal_out, "Weights output file");
    add_common_options(*cal_cmd, cal_opts);

    CommonOptions study_opts;
    std::string study_dataset;
    std::string study_labelmap;
    std::string study_sizes;
    std::size_t study_repeats = 20;
    std::string study_out;
    CLI::App* study_cmd =
        app.add_subcommand("ensemble-study", "Macro-F1 mean/std per ensemble size");
    study_cmd->add_option("--dataset", study_dataset, "JSONL dataset")->required();
    study_cmd->add_option("--labelmap", study_labelmap, "Label map JSON")->required();
    study_cmd->add_option("--sizes", study_sizes, "Comma-separated ensemble sizes")->required();
    study_cmd->add_option("--repeats", study_repeats, "Seeded repeats per size");
    study_cmd->add_option("--out", study_out, "JSON output file");
    add_common_options(*study_cmd, study_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (verify_cmd->parsed()) {
            apply_config_file(verify_opts);
            if (verify_opts.backend_spec.empty()) throw InputError("--backend is required");
            echo_config("verify", verify_opts);
            return run_verify(verify_opts, claim, evidence, evidence_file, verify_out);
        }
        if (eval_cmd->parsed()) {
            apply_config_file(eval_opts);
            if (eval_opts.backend_spec.empty()) throw InputError("--backend is required");
            echo_config("evaluate", eval_opts);
            return run_evaluate(eval_opts, dataset_path, labelmap_path, eval_out);
        }
        if (cal_cmd->parsed()) {
            apply_config_file(cal_opts);
            if (cal_opts.backend_spec.empty()) throw InputError("--backend is required");
            echo_config("calibrate", cal_opts);
            return run_calibrate(cal_opts, cal_dataset, cal_labelmap, cal_out);
        }
        if (study_cmd->parsed()) {
            apply_config_file(study_opts);
            if (study_opts.backend_spec.empty()) throw InputError("--backend is required");
            echo_config("ensemble-study", study_opts);
            return run_ensemble_study(study_opts, study_dataset, study_labelmap, study_sizes,
                                      study_repeats, study_out);
        }
    } catch (const TransportError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const CapabilityError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}
