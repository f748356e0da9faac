#include "softcot/pipeline.hpp"

#include <cmath>

#include "softcot/datagen.hpp"

namespace softcot {

ProjectionParams ProjectionParams::init(int d_assist, int d_llm, Rng& rng) {
    if (d_assist < 1 || d_llm < 1) throw ConfigError("projection: widths must be positive");
    ProjectionParams p;
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_assist));
    p.weight = Tensor::rand_uniform({d_assist, d_llm}, rng, -bound, bound,
                                    /*requires_grad=*/true);
    p.bias = Tensor::zeros({d_llm}, /*requires_grad=*/true);
    return p;
}

void ProjectionParams::zero_grads() const {
    weight->zero_grad();
    bias->zero_grad();
}

std::vector<int> build_assistant_input(const std::vector<int>& instruction,
                                       const std::vector<int>& question, int n_thoughts,
                                       int max_seq_len) {
    if (n_thoughts < 1) throw ZeroThoughts("assistant input: need at least one thought token");
    if (question.empty()) throw QuestionEmpty("assistant input: question is empty");
    const size_t total = instruction.size() + question.size() + static_cast<size_t>(n_thoughts);
    if (static_cast<int>(total) > max_seq_len) {
        throw SequenceTooLong("assistant input: length " + std::to_string(total) +
                              " exceeds max " + std::to_string(max_seq_len));
    }
    std::vector<int> ids;
    ids.reserve(total);
    ids.insert(ids.end(), instruction.begin(), instruction.end());
    ids.insert(ids.end(), question.begin(), question.end());
    ids.insert(ids.end(), static_cast<size_t>(n_thoughts), Vocab::kUnkPlaceholder);
    return ids;
}

TensorPtr extract_soft_thoughts(const TensorPtr& hidden, int len_instruction, int len_question,
                                int n_thoughts) {
    if (!hidden || !hidden->is_matrix()) {
        throw ShapeMismatch("extract: hidden states must be a matrix");
    }
    if (n_thoughts < 1) throw ZeroThoughts("extract: need at least one thought position");
    if (len_instruction < 1 || len_question < 1) {
        throw LengthMismatch("extract: instruction and question spans are required");
    }
    const int len = hidden->shape[0];
    if (len != len_instruction + len_question + n_thoughts) {
        throw LengthMismatch("extract: hidden length " + std::to_string(len) +
                             " != instruction " + std::to_string(len_instruction) +
                             " + question " + std::to_string(len_question) + " + thoughts " +
                             std::to_string(n_thoughts));
    }
    const int d = hidden->shape[1];
    const int start = len_instruction + len_question;
    std::vector<double> rows(static_cast<size_t>(n_thoughts) * d);
    std::copy_n(hidden->data.begin() + static_cast<size_t>(start) * d, rows.size(),
                rows.begin());
    return Tensor::from_data({n_thoughts, d}, std::move(rows));
}

TensorPtr project(Graph& g, const ProjectionParams& theta, const TensorPtr& raw) {
    if (!raw || !raw->is_matrix()) throw ShapeMismatch("project: raw thoughts must be a matrix");
    if (raw->shape[1] != theta.d_assist()) {
        throw WidthMismatch("project: raw width " + std::to_string(raw->shape[1]) +
                            " != d_assist " + std::to_string(theta.d_assist()));
    }
    return g.add(g.matmul(raw, theta.weight), theta.bias);
}

SoftThoughts make_soft_thoughts(Graph& g, const ProjectionParams& theta, const TensorPtr& raw) {
    SoftThoughts t;
    t.raw = raw;
    t.projected = project(g, theta, raw);
    t.count = raw->shape[0];
    return t;
}

MixedSequence assemble_backbone_input(const std::vector<int>& instruction,
                                      const std::vector<int>& question, const TensorPtr& t_soft,
                                      bool use_markers, int max_seq_len) {
    if (!t_soft || !t_soft->is_matrix() || t_soft->shape[0] < 1) {
        throw ZeroThoughts("backbone input: empty soft-thought block");
    }
    const int soft_len = t_soft->shape[0] + (use_markers ? 2 : 0);
    const int total = static_cast<int>(instruction.size() + question.size()) + soft_len;
    if (total > max_seq_len) {
        throw SequenceTooLong("backbone input: length " + std::to_string(total) +
                              " exceeds max " + std::to_string(max_seq_len));
    }
    MixedSequence seq;
    seq.append_ids(instruction);
    seq.append_ids(question);
    if (use_markers) seq.append_id(Vocab::kThoughtBegin);
    seq.append_soft(t_soft);
    if (use_markers) seq.append_id(Vocab::kThoughtEnd);
    return seq;
}

TrainingSequence build_training_sequence(const PromptParts& parts, const TensorPtr& t_soft,
                                         bool use_markers, int max_seq_len,
                                         TrainInstruction instruction) {
    if (parts.rationale.empty() || parts.answer.empty()) {
        throw EmptyTargetSpan("training sequence: rationale and answer must be non-empty");
    }
    const std::vector<int>& instr = instruction == TrainInstruction::kAssist
                                        ? parts.assist_instruction
                                        : parts.llm_instruction;

    TrainingSequence out;
    out.input = assemble_backbone_input(instr, parts.llm_question, t_soft, use_markers,
                                        max_seq_len);
    const int head_len = out.input.length();
    out.input.append_ids(parts.rationale);
    out.input.append_ids(parts.answer);
    out.input.append_id(Vocab::kEos);

    const int total = out.input.length();
    if (total > max_seq_len) {
        throw SequenceTooLong("training sequence: length " + std::to_string(total) +
                              " exceeds max " + std::to_string(max_seq_len));
    }

    // item view: hard ids, -1 at soft rows
    std::vector<int> item_ids;
    item_ids.reserve(total);
    for (const auto& seg : out.input.segments()) {
        if (seg.is_soft()) {
            item_ids.insert(item_ids.end(), static_cast<size_t>(seg.length()), -1);
        } else {
            item_ids.insert(item_ids.end(), seg.ids.begin(), seg.ids.end());
        }
    }

    // position i predicts item i+1; targets exist only over the R/A/EOS tail
    out.targets.assign(total, -1);
    out.loss_mask.assign(total, 0);
    for (int i = 0; i + 1 < total; ++i) {
        if (i + 1 >= head_len) {
            out.targets[i] = item_ids[i + 1];
            out.loss_mask[i] = 1;
        }
    }
    return out;
}

TensorPtr masked_nll(Graph& g, const TensorPtr& logits, const std::vector<int>& targets,
                     const std::vector<uint8_t>& mask) {
    return g.cross_entropy(logits, targets, mask);
}

std::vector<int> assist_hard_tokens(const ModelBundle& assistant,
                                    const std::vector<int>& instruction,
                                    const std::vector<int>& question, int budget) {
    if (budget < 1) throw ConfigError("assist tokens: budget must be >= 1");
    std::vector<int> prefix = instruction;
    prefix.insert(prefix.end(), question.begin(), question.end());
    if (prefix.empty()) throw QuestionEmpty("assist tokens: empty prompt");

    GenerateParams params;
    params.max_new = budget;
    params.temperature = 0.0;
    params.stop_ids = {Vocab::kEos};
    return model_generate(assistant, MixedSequence::from_ids(prefix), params).ids;
}

std::vector<int> unk_prompt(int count) {
    if (count < 1) throw ConfigError("unk prompt: count must be >= 1");
    return std::vector<int>(static_cast<size_t>(count), Vocab::kUnkPlaceholder);
}

PromptParts make_prompt_parts(const Stack& stack, const ReasoningExample& example) {
    PromptParts p;
    p.assist_instruction = {Vocab::kBos};
    for (int id : stack.assistant_vocab.encode(stack.prompts.instruction_assist)) {
        p.assist_instruction.push_back(id);
    }
    p.assist_question = stack.assistant_vocab.encode(example.question);
    p.llm_instruction = {Vocab::kBos};
    for (int id : stack.backbone_vocab.encode(stack.prompts.instruction_llm)) {
        p.llm_instruction.push_back(id);
    }
    p.llm_question = stack.backbone_vocab.encode(example.question);
    p.rationale = stack.backbone_vocab.encode(example.rationale);
    p.answer = stack.backbone_vocab.encode(stack.prompts.answer_prefix + " " + example.answer +
                                           " .");
    return p;
}

TensorPtr assistant_soft_thoughts(const Stack& stack, const std::vector<int>& assist_instruction,
                                  const std::vector<int>& assist_question, int n_thoughts) {
    const std::vector<int> ids = build_assistant_input(
        assist_instruction, assist_question, n_thoughts, stack.assistant.config.max_seq_len);
    Graph g(/*recording=*/false);
    ForwardResult fwd = model_forward(stack.assistant, g, MixedSequence::from_ids(ids));
    return extract_soft_thoughts(fwd.hidden, static_cast<int>(assist_instruction.size()),
                                 static_cast<int>(assist_question.size()), n_thoughts);
}

}  // namespace softcot
