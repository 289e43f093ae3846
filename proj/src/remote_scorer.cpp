#include <httplib.h>

#include <json.hpp>

#include "wikitox/toxicity.hpp"

namespace wikitox {

using nlohmann::json;

struct RemoteScorer::Endpoint {
    std::string scheme_host_port;  // "https://host:port"
    std::string path;              // "/v1alpha1/comments:analyze"
};

std::unique_ptr<RemoteScorer::Endpoint> RemoteScorer::parse_endpoint(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw DataError("endpoint URL needs a scheme: '" + url + "'");
    auto path_start = url.find('/', scheme_end + 3);
    auto e = std::make_unique<RemoteScorer::Endpoint>();
    e->scheme_host_port = url.substr(0, path_start);
    e->path = path_start == std::string::npos ? "/" : url.substr(path_start);
    return e;
}

RemoteScorer::RemoteScorer(RemoteScorerOptions options)
    : options_(std::move(options)), endpoint_(parse_endpoint(options_.endpoint)) {}

RemoteScorer::~RemoteScorer() = default;

std::string RemoteScorer::build_request(std::string_view text, Language lang) {
    json attrs = json::object();
    for (auto a : kAttributes) attrs[std::string(wire_name(a))] = json::object();
    json req = {
        {"comment", {{"text", std::string(text)}}},
        {"languages", json::array({std::string(language_code(lang))})},
        {"requestedAttributes", attrs},
        {"doNotStore", true},
    };
    return req.dump();
}

AttributeScores RemoteScorer::parse_response(std::string_view body) {
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw MalformedResponse("response is not a JSON object");
    if (!j.contains("attributeScores") || !j["attributeScores"].is_object()) {
        throw MalformedResponse("response lacks attributeScores");
    }
    const json& scores = j["attributeScores"];
    AttributeScores s;
    for (auto a : kAttributes) {
        std::string name(wire_name(a));
        if (!scores.contains(name)) throw MalformedResponse("response lacks attribute " + name);
        const json& attr = scores[name];
        if (!attr.is_object() || !attr.contains("summaryScore") || !attr["summaryScore"].is_object() ||
            !attr["summaryScore"].contains("value") || !attr["summaryScore"]["value"].is_number()) {
            throw MalformedResponse("attribute " + name + " has no summaryScore.value");
        }
        s[a] = attr["summaryScore"]["value"].get<double>();
    }
    try {
        s.validate();
    } catch (const DataError& e) {
        throw MalformedResponse(e.what());
    }
    return s;
}

AttributeScores RemoteScorer::analyze(std::string_view text, Language lang) {
    httplib::Client client(endpoint_->scheme_host_port);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    std::string path = endpoint_->path;
    if (!options_.api_key.empty()) path += "?key=" + options_.api_key;

    auto res = client.Post(path, build_request(text, lang), "application/json");
    if (!res) throw BackendUnavailable("request failed: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) {
        throw BackendUnavailable("backend returned HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) {
        throw MalformedResponse("backend returned HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    return parse_response(res->body);
}

}  // namespace wikitox
