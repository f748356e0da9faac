#pragma once

#include <array>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace softcot {

// Whitespace-word vocabulary with fixed reserved ids. Unknown words map to
// the dedicated OOV id, which is distinct from the [UNK] thought placeholder.
class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnkPlaceholder = 3;  // the paper-style [UNK] / pause token
    static constexpr int kThoughtBegin = 4;
    static constexpr int kThoughtEnd = 5;
    static constexpr int kOov = 6;
    static constexpr int kReservedCount = 7;

    static const std::array<std::string, kReservedCount>& reserved_tokens();

    Vocab() = default;

    // Reserved tokens first, then the unique words sorted for determinism.
    static Vocab build(const std::vector<std::string>& words);
    // Exact id-ordered token list (used by checkpoint round trips).
    static Vocab from_token_list(const std::vector<std::string>& tokens);

    int size() const { return static_cast<int>(tokens_.size()); }
    int id(std::string_view token) const;          // OOV id when unknown
    bool contains(std::string_view token) const;
    const std::string& token(int id) const;
    const std::vector<std::string>& tokens() const { return tokens_; }

    std::vector<int> encode(std::string_view text) const;  // "" -> {}
    std::string decode(const std::vector<int>& ids) const;

    bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

std::vector<std::string> split_whitespace(std::string_view text);

}  // namespace softcot
