#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "softcot/rng.hpp"

namespace softcot {

enum class AnswerType { kNumber, kOption, kYesNo };

std::string answer_type_name(AnswerType type);
AnswerType answer_type_from_name(const std::string& name);

struct ReasoningExample {
    std::string id;
    std::string question;
    std::string rationale;  // step-marked, e.g. "45 + 23 = 68 . 68 - 12 = 56 ."
    std::string answer;     // canonical form
    AnswerType answer_type = AnswerType::kNumber;
    std::string template_id;
    std::vector<long long> operands;

    bool operator==(const ReasoningExample&) const = default;
};

struct Difficulty {
    int steps = 2;        // arithmetic steps per problem, 1..3
    int operand_max = 99;

    void validate() const;
};

// Deterministic arithmetic word problems with gold step-by-step rationales.
// Operand sampling mixes small values and round tens so the fact table stays
// learnable at desk scale; every operand is <= operand_max.
std::vector<ReasoningExample> gen_synthetic(uint64_t seed, int count, const Difficulty& difficulty);

// Replicates each instance `replicas` times, replaces operand values within
// their magnitude class (1-digit stays 1-digit, 2-digit stays 2-digit) and
// recomputes rationale and answer from the template oracle. New ids get an
// -aug{k} suffix. Question text is mutated positionally, mirroring
// extract-and-replace augmentation.
std::vector<ReasoningExample> augment_numeric(const std::vector<ReasoningExample>& examples,
                                              int replicas, uint64_t seed);

// The template oracle: recomputes the answer for a template/operand pair.
long long oracle_answer(const std::string& template_id, const std::vector<long long>& operands);
// Gold rationale text for a template/operand pair (numbers only, no story words).
std::string oracle_rationale(const std::string& template_id,
                             const std::vector<long long>& operands);

struct AnswerBounds {
    long long min = 0;
    long long max = 0;
};
// Analytic answer range of the template set at a given difficulty.
AnswerBounds answer_bounds(const Difficulty& difficulty);

// Every token the template language can produce at this difficulty
// (story words, operators, numerals) plus the caller's extra words.
std::vector<std::string> vocabulary_closure(const Difficulty& difficulty,
                                            const std::vector<std::string>& extra_words = {});

// ---------------------------------------------------------------------------
// Answer extraction
// ---------------------------------------------------------------------------

struct ExtractionRule {
    std::string pattern;  // ECMAScript regex
    int group = 1;
    int priority = 0;  // lower runs earlier; all extras run before built-ins
};

// Ordered rule matching; first match wins. Returns nullopt (NoMatch) when
// nothing applies -- scored as incorrect, never a crash.
std::optional<std::string> extract_answer(const std::string& text, AnswerType type,
                                          const std::vector<ExtractionRule>& extra_rules = {});

std::string canonicalize_answer(const std::string& raw, AnswerType type);

std::vector<ExtractionRule> load_extraction_rules(const std::string& path);

// ---------------------------------------------------------------------------
// Dataset IO
// ---------------------------------------------------------------------------

std::vector<ReasoningExample> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<ReasoningExample>& examples);
std::string to_jsonl_line(const ReasoningExample& example);

// FNV-1a over the canonical JSONL serialization.
uint64_t dataset_hash(const std::vector<ReasoningExample>& examples);
std::string dataset_hash_hex(const std::vector<ReasoningExample>& examples);

}  // namespace softcot
