#include "softcot/vocab.hpp"

#include <algorithm>
#include <set>

#include "softcot/errors.hpp"

namespace softcot {

const std::array<std::string, Vocab::kReservedCount>& Vocab::reserved_tokens() {
    static const std::array<std::string, kReservedCount> kTokens = {
        "<pad>", "<bos>", "<eos>", "[UNK]", "<thought>", "</thought>", "<oov>"};
    return kTokens;
}

std::vector<std::string> split_whitespace(std::string_view text) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) out.emplace_back(text.substr(start, i - start));
    }
    return out;
}

Vocab Vocab::build(const std::vector<std::string>& words) {
    std::set<std::string> unique;
    for (const auto& w : words) {
        if (w.empty()) continue;
        bool reserved = false;
        for (const auto& r : reserved_tokens()) {
            if (w == r) {
                reserved = true;
                break;
            }
        }
        if (!reserved) unique.insert(w);
    }
    std::vector<std::string> tokens(reserved_tokens().begin(), reserved_tokens().end());
    tokens.insert(tokens.end(), unique.begin(), unique.end());
    return from_token_list(tokens);
}

Vocab Vocab::from_token_list(const std::vector<std::string>& tokens) {
    if (tokens.size() < kReservedCount) {
        throw ConfigError("vocab: token list shorter than the reserved block");
    }
    for (int i = 0; i < kReservedCount; ++i) {
        if (tokens[i] != reserved_tokens()[i]) {
            throw ConfigError("vocab: reserved token mismatch at id " + std::to_string(i));
        }
    }
    Vocab v;
    v.tokens_ = tokens;
    for (size_t i = 0; i < tokens.size(); ++i) {
        auto [it, inserted] = v.index_.emplace(tokens[i], static_cast<int>(i));
        if (!inserted) throw ConfigError("vocab: duplicate token '" + tokens[i] + "'");
    }
    return v;
}

int Vocab::id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kOov : it->second;
}

bool Vocab::contains(std::string_view token) const {
    return index_.count(std::string(token)) > 0;
}

const std::string& Vocab::token(int id) const {
    if (id < 0 || id >= size()) throw ConfigError("vocab: id out of range");
    return tokens_[id];
}

std::vector<int> Vocab::encode(std::string_view text) const {
    std::vector<int> ids;
    for (const auto& w : split_whitespace(text)) ids.push_back(id(w));
    return ids;
}

std::string Vocab::decode(const std::vector<int>& ids) const {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ' ';
        out += token(ids[i]);
    }
    return out;
}

}  // namespace softcot
