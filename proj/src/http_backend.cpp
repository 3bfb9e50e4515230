#include "natver/http_backend.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "natver/text.hpp"

namespace natver {

namespace {

using json = nlohmann::json;

struct ParsedUrl {
    std::string host_port;  // scheme://host:port
    std::string prefix;     // path prefix, no trailing slash
};

ParsedUrl parse_base_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw InputError("backend URL missing scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl p;
    if (path_start == std::string::npos) {
        p.host_port = url;
    } else {
        p.host_port = url.substr(0, path_start);
        p.prefix = url.substr(path_start);
        while (!p.prefix.empty() && p.prefix.back() == '/') p.prefix.pop_back();
    }
    return p;
}

class Semaphore {
  public:
    explicit Semaphore(int count) : count_(count) {}
    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return count_ > 0; });
        --count_;
    }
    void release() {
        std::lock_guard lock(mu_);
        ++count_;
        cv_.notify_one();
    }

  private:
    std::mutex mu_;
    std::condition_variable cv_;
    int count_;
};

struct SemaphoreGuard {
    Semaphore& sem;
    explicit SemaphoreGuard(Semaphore& s) : sem(s) { sem.acquire(); }
    ~SemaphoreGuard() { sem.release(); }
};

bool is_yes_word(std::string_view w) {
    std::string n = normalize_word(w);
    return n == "yes" || n == "y";
}

bool is_no_word(std::string_view w) {
    std::string n = normalize_word(w);
    return n == "no" || n == "n";
}

}  // namespace

struct HttpBackend::Impl {
    HttpBackendConfig config;
    ParsedUrl url;
    httplib::Client client;
    Semaphore sem;
    std::string api_key;

    explicit Impl(HttpBackendConfig cfg)
        : config(std::move(cfg)), url(parse_base_url(config.base_url)),
          client(url.host_port), sem(std::max(1, config.max_in_flight)) {
        client.set_connection_timeout(config.timeout_s);
        client.set_read_timeout(config.timeout_s);
        const char* key = std::getenv(config.api_key_env.c_str());
        if (key == nullptr) key = std::getenv("OPENAI_API_KEY");
        if (key != nullptr) api_key = key;
    }

    httplib::Headers headers() const {
        httplib::Headers h;
        if (!api_key.empty()) h.emplace("Authorization", "Bearer " + api_key);
        return h;
    }

    // POST with bounded concurrency, retrying transport failures and 5xx
    // responses with exponential backoff.
    json post(const std::string& path, const json& body) {
        SemaphoreGuard guard(sem);
        std::string payload = body.dump();
        int attempts = 0;
        std::string last_error;
        for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
            ++attempts;
            auto res = client.Post(path, headers(), payload, "application/json");
            if (res && res->status >= 200 && res->status < 300) {
                try {
                    return json::parse(res->body);
                } catch (const json::exception& e) {
                    throw TransportError(std::string("malformed response body: ") + e.what(),
                                         attempts);
                }
            }
            if (res && res->status >= 400 && res->status < 500) {
                throw TransportError("HTTP " + std::to_string(res->status) + " from " + path +
                                         ": " + res->body,
                                     attempts);
            }
            last_error = res ? "HTTP " + std::to_string(res->status)
                             : "connection failed (" + httplib::to_string(res.error()) + ")";
            if (attempt < config.max_retries) {
                auto delay = std::chrono::milliseconds(config.retry_base_ms << attempt);
                std::this_thread::sleep_for(delay);
            }
        }
        throw TransportError("request to " + path + " failed: " + last_error, attempts);
    }

    // Some servers expose tokenize routes under the path prefix, some at the
    // root; remember whichever answers.
    std::string tokenize_prefix;
    bool probe_tokenize() {
        for (const std::string& prefix : {url.prefix, std::string()}) {
            auto res = client.Post(prefix + "/tokenize", headers(),
                                   json({{"content", "probe"}}).dump(), "application/json");
            if (res && res->status >= 200 && res->status < 300) {
                tokenize_prefix = prefix;
                return true;
            }
        }
        return false;
    }
};

HttpBackend::HttpBackend(HttpBackendConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
    if (impl_->config.probe) {
        caps_.tokenize = impl_->probe_tokenize();
    }
}

HttpBackend::~HttpBackend() = default;

TokenId HttpBackend::intern(const std::string& surface) {
    std::lock_guard lock(vocab_mu_);
    auto it = ids_.find(surface);
    if (it != ids_.end()) return it->second;
    TokenId id = static_cast<TokenId>(surfaces_.size());
    ids_.emplace(surface, id);
    surfaces_.push_back(surface);
    return id;
}

std::size_t HttpBackend::vocab_size() {
    if (!caps_.tokenize) {
        std::lock_guard lock(vocab_mu_);
        return surfaces_.size();
    }
    // Servers do not report vocabulary sizes uniformly; treat ids as opaque.
    return static_cast<std::size_t>(1) << 20;
}

std::vector<TokenId> HttpBackend::tokenize(std::string_view text) {
    if (text.empty()) return {};
    if (caps_.tokenize) {
        json body = {{"content", std::string(text)}};
        json res = impl_->post(impl_->tokenize_prefix + "/tokenize", body);
        std::vector<TokenId> out;
        for (const auto& t : res.at("tokens")) out.push_back(t.get<TokenId>());
        return out;
    }
    std::vector<TokenId> out;
    for (const auto& piece : split_pieces(text)) out.push_back(intern(piece.surface()));
    return out;
}

std::string HttpBackend::detokenize(std::span<const TokenId> tokens) {
    if (tokens.empty()) return "";
    if (caps_.tokenize) {
        json body = {{"tokens", std::vector<TokenId>(tokens.begin(), tokens.end())}};
        json res = impl_->post(impl_->tokenize_prefix + "/detokenize", body);
        return res.at("content").get<std::string>();
    }
    std::lock_guard lock(vocab_mu_);
    std::string out;
    for (TokenId id : tokens) {
        if (id < 0 || static_cast<std::size_t>(id) >= surfaces_.size()) {
            throw InputError("unknown token id");
        }
        out += surfaces_[static_cast<std::size_t>(id)];
    }
    return out;
}

std::string HttpBackend::token_text(TokenId id) {
    TokenId ids[1] = {id};
    return detokenize(std::span<const TokenId>(ids, 1));
}

namespace {

std::string with_system_prompt(const GenerationParams& params, const std::string& prompt) {
    if (params.system_prompt.empty()) return prompt;
    return params.system_prompt + "\n\n" + prompt;
}

}  // namespace

std::vector<TokenId> HttpBackend::generate_constrained(const std::string& prompt,
                                                       const StepMaskFn& step_mask,
                                                       const GenerationParams& params) {
    if (!caps_.tokenize || !caps_.logit_bias) {
        throw CapabilityError("backend cannot honor token masks");
    }
    std::vector<TokenId> emitted;
    std::string text = with_system_prompt(params, prompt);
    while (static_cast<int>(emitted.size()) < params.max_tokens) {
        auto mask = step_mask(emitted);
        if (!mask) break;

        json bias = json::object();
        if (mask->kind == ConstraintMask::Kind::AllowOnly) {
            for (TokenId id : mask->tokens) bias[std::to_string(id)] = 100;
        } else if (mask->kind == ConstraintMask::Kind::Block) {
            for (TokenId id : mask->tokens) bias[std::to_string(id)] = -100;
        }
        json body = {
            {"prompt", text},          {"max_tokens", 1},
            {"temperature", params.temperature}, {"top_p", params.top_p},
        };
        if (!impl_->config.model.empty()) body["model"] = impl_->config.model;
        if (!bias.empty()) body["logit_bias"] = std::move(bias);

        json res = impl_->post(impl_->url.prefix + "/completions", body);
        std::string step_text = res.at("choices").at(0).at("text").get<std::string>();
        if (step_text.empty()) break;

        std::vector<TokenId> step_ids = tokenize(step_text);
        TokenId chosen = -1;
        for (TokenId id : step_ids) {
            if (mask->permits(id)) {
                chosen = id;
                break;
            }
        }
        // Biasing is best-effort on some servers; enforce the mask locally.
        if (chosen < 0) {
            if (mask->kind != ConstraintMask::Kind::AllowOnly) break;
            chosen = mask->tokens.front();
        }
        emitted.push_back(chosen);
        text += token_text(chosen);
    }
    return emitted;
}

FreeGeneration HttpBackend::generate_free(const std::string& prompt,
                                          const GenerationParams& params) {
    json body = {
        {"prompt", with_system_prompt(params, prompt)},
        {"max_tokens", params.max_tokens},
        {"temperature", params.temperature},
        {"top_p", params.top_p},
    };
    if (!impl_->config.model.empty()) body["model"] = impl_->config.model;
    json res = impl_->post(impl_->url.prefix + "/completions", body);
    const auto& choice = res.at("choices").at(0);
    FreeGeneration g;
    g.text = choice.at("text").get<std::string>();
    g.truncated = choice.contains("finish_reason") && !choice.at("finish_reason").is_null() &&
                  choice.at("finish_reason").get<std::string>() == "length";
    return g;
}

YesNoScore HttpBackend::score_yes_no(const std::string& prompt, const GenerationParams& params) {
    json body = {
        {"prompt", with_system_prompt(params, prompt)},
        {"max_tokens", 4},
        {"temperature", params.temperature},
        {"top_p", params.top_p},
    };
    if (!impl_->config.model.empty()) body["model"] = impl_->config.model;
    if (caps_.logprobs) body["logprobs"] = 10;

    json res = impl_->post(impl_->url.prefix + "/completions", body);
    const auto& choice = res.at("choices").at(0);

    if (caps_.logprobs && choice.contains("logprobs") && !choice.at("logprobs").is_null()) {
        const auto& lp = choice.at("logprobs");
        if (lp.contains("top_logprobs") && lp.at("top_logprobs").is_array() &&
            !lp.at("top_logprobs").empty()) {
            double yes_mass = 0.0;
            double no_mass = 0.0;
            for (const auto& [tok, logprob] : lp.at("top_logprobs").at(0).items()) {
                double p = std::exp(logprob.get<double>());
                if (is_yes_word(tok)) yes_mass += p;
                if (is_no_word(tok)) no_mass += p;
            }
            if (yes_mass > 0.0 || no_mass > 0.0) {
                return YesNoScore::from_raw(yes_mass, no_mass);
            }
        }
    }

    // No usable log-likelihoods: sample the answer instead.
    std::string answer = choice.at("text").get<std::string>();
    auto words = split_words(answer);
    bool yes = !words.empty() && is_yes_word(words.front());
    return YesNoScore::from_sampled(yes);
}

}  // namespace natver
