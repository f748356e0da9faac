#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "softcot/model.hpp"
#include "softcot/tensor.hpp"
#include "softcot/vocab.hpp"

namespace softcot {

// The only trainable tensors during soft-thought training.
struct ProjectionParams {
    TensorPtr weight;  // [d_assist x d_llm]
    TensorPtr bias;    // [d_llm]

    // weight ~ uniform(+-1/sqrt(d_assist)), bias = 0: initial soft tokens
    // stay at embedding-scale magnitude.
    static ProjectionParams init(int d_assist, int d_llm, Rng& rng);

    int d_assist() const { return weight->shape[0]; }
    int d_llm() const { return weight->shape[1]; }
    void zero_grads() const;
    std::vector<TensorPtr> trainable() const { return {weight, bias}; }
};

// Assistant hidden states at the placeholder positions (raw) and their
// projection into the backbone embedding space.
struct SoftThoughts {
    TensorPtr raw;        // [N x d_assist], detached from the assistant graph
    TensorPtr projected;  // [N x d_llm], set by project()
    int count = 0;
};

// Token spans for one training/eval instance. The assistant and backbone
// keep separate vocabularies, so instruction and question appear in both
// id spaces; the projection is the only bridge between the models.
struct PromptParts {
    std::vector<int> assist_instruction;
    std::vector<int> assist_question;
    std::vector<int> llm_instruction;
    std::vector<int> llm_question;
    std::vector<int> rationale;
    std::vector<int> answer;
};

enum class TrainInstruction { kLlm, kAssist };

// x_assist = instruction ++ question ++ N placeholder tokens.
std::vector<int> build_assistant_input(const std::vector<int>& instruction,
                                       const std::vector<int>& question, int n_thoughts,
                                       int max_seq_len);

// The last N hidden rows, i.e. the rows at the placeholder positions.
// Returned detached: the assistant is frozen and gradients never flow back
// through it.
TensorPtr extract_soft_thoughts(const TensorPtr& hidden, int len_instruction, int len_question,
                                int n_thoughts);

// T_soft = raw . W + b, row-wise; gradient flows into W and b only.
TensorPtr project(Graph& g, const ProjectionParams& theta, const TensorPtr& raw);

SoftThoughts make_soft_thoughts(Graph& g, const ProjectionParams& theta, const TensorPtr& raw);

// x_llm = instruction ++ question ++ [markers] soft block [markers].
MixedSequence assemble_backbone_input(const std::vector<int>& instruction,
                                      const std::vector<int>& question, const TensorPtr& t_soft,
                                      bool use_markers, int max_seq_len);

struct TrainingSequence {
    MixedSequence input;
    std::vector<int> targets;      // next-token ids; -1 where no target exists
    std::vector<uint8_t> loss_mask;  // true only at positions predicting R, A, EOS
};

// Training sequence: backbone input ++ rationale ++ answer ++ EOS with the
// loss masked to the rationale/answer/EOS span.
TrainingSequence build_training_sequence(const PromptParts& parts, const TensorPtr& t_soft,
                                         bool use_markers, int max_seq_len,
                                         TrainInstruction instruction = TrainInstruction::kLlm);

// Mean NLL over masked positions.
TensorPtr masked_nll(Graph& g, const TensorPtr& logits, const std::vector<int>& targets,
                     const std::vector<uint8_t>& mask);

// Greedy assistant continuation of [instruction ++ question], hard-truncated
// at `budget` tokens. Used as a textual prompt suffix for the backbone.
std::vector<int> assist_hard_tokens(const ModelBundle& assistant,
                                    const std::vector<int>& instruction,
                                    const std::vector<int>& question, int budget = 24);

// L hard placeholder tokens for the untrained-prompt baseline.
std::vector<int> unk_prompt(int count);

// ---------------------------------------------------------------------------
// Prompt configuration and convenience assembly over a model stack
// ---------------------------------------------------------------------------

struct PromptConfig {
    std::string instruction_llm = "solve the problem step by step :";
    std::string instruction_assist = "note the key numbers :";
    std::string answer_prefix = "The final answer is";
    bool use_markers = true;

    bool operator==(const PromptConfig&) const = default;
};

struct ReasoningExample;

// Frozen assistant + backbone with their vocabularies: everything evaluation
// and projection training need besides the trainable parameters.
struct Stack {
    ModelBundle assistant;
    Vocab assistant_vocab;
    ModelBundle backbone;
    Vocab backbone_vocab;
    PromptConfig prompts;
};

PromptParts make_prompt_parts(const Stack& stack, const ReasoningExample& example);

// Runs the frozen assistant over the placeholder input and returns the raw
// soft thoughts (detached).
TensorPtr assistant_soft_thoughts(const Stack& stack, const std::vector<int>& assist_instruction,
                                  const std::vector<int>& assist_question, int n_thoughts);

}  // namespace softcot
