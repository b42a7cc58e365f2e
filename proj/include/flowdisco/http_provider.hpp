#pragma once

#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "flowdisco/embedding.hpp"

namespace flowdisco {

struct HttpProviderOptions {
    std::size_t batch_size = 64;
    int max_retries = 3;
    int retry_delay_ms = 250; // doubled after each failed attempt
};

// Bridges to an external encoder process. Protocol: POST /embed with
// {"texts": [...]}, response {"dim": int, "vectors": [[...], ...]}.
// Any non-200 status is a provider failure.
class HttpProvider final : public EmbeddingProvider {
public:
    HttpProvider(std::string base_url, std::size_t dim, HttpProviderOptions options = {})
        : base_url_(std::move(base_url)), dim_(dim), options_(options) {
        if (dim_ == 0) throw Error("embedding: http provider requires a positive dim");
        if (options_.batch_size == 0) options_.batch_size = 1;
    }

    std::string kind() const override { return "http"; }
    std::size_t dim() const override { return dim_; }

    EmbeddingMatrix embed(const std::vector<std::string>& texts) const override {
        EmbeddingMatrix out(texts.size(), dim_);
        for (std::size_t start = 0; start < texts.size(); start += options_.batch_size) {
            const std::size_t end = std::min(texts.size(), start + options_.batch_size);
            const std::vector<std::string> batch(texts.begin() + start, texts.begin() + end);
            const nlohmann::json response = post_with_retry(batch);
            try {
                if (response.at("dim").get<std::size_t>() != dim_)
                    throw Error("embedding: http provider returned dim " +
                                std::to_string(response.at("dim").get<std::size_t>()) +
                                ", expected " + std::to_string(dim_));
                const auto& vectors = response.at("vectors");
                if (vectors.size() != batch.size())
                    throw Error("embedding: http provider returned " +
                                std::to_string(vectors.size()) + " vectors for " +
                                std::to_string(batch.size()) + " texts");
                for (std::size_t i = 0; i < batch.size(); ++i) {
                    const auto row = vectors[i].get<Vector>();
                    if (row.size() != dim_)
                        throw Error("embedding: http provider vector for text \"" + batch[i] +
                                    "\" has dim " + std::to_string(row.size()));
                    std::copy(row.begin(), row.end(), out.row(start + i).begin());
                }
            } catch (const nlohmann::json::exception& e) {
                throw Error("embedding: bad http provider response for text \"" + batch[0] +
                            "\": " + e.what());
            }
        }
        return out;
    }

private:
    nlohmann::json post_with_retry(const std::vector<std::string>& batch) const {
        const std::string body = nlohmann::json{{"texts", batch}}.dump();
        std::string last_error;
        int delay_ms = options_.retry_delay_ms;
        for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
                delay_ms *= 2;
            }
            httplib::Client client(base_url_);
            client.set_read_timeout(60, 0);
            auto res = client.Post("/embed", body, "application/json");
            if (!res) {
                last_error = "connection failed (" + httplib::to_string(res.error()) + ")";
                continue;
            }
            if (res->status != 200) {
                last_error = "status " + std::to_string(res->status);
                continue;
            }
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                last_error = std::string("unparseable body: ") + e.what();
            }
        }
        throw Error("embedding: http provider " + base_url_ + " failed after " +
                    std::to_string(options_.max_retries + 1) + " attempts (" + last_error +
                    "); first text: \"" + batch[0] + "\"");
    }

    std::string base_url_;
    std::size_t dim_;
    HttpProviderOptions options_;
};

} // namespace flowdisco
