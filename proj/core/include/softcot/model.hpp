#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "softcot/tensor.hpp"
#include "softcot/vocab.hpp"

namespace softcot {

struct LoraAdapters;

struct ModelConfig {
    int vocab_size = 0;
    int d_model = 0;
    int n_layers = 0;
    int n_heads = 0;
    int d_ffn = 0;
    int max_seq_len = 0;
    double rms_eps = 1e-6;
    // Soft items consume positions exactly like hard tokens. Turning this off
    // removes the position signal on soft rows only.
    bool soft_position_embedding = true;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

// Ordered sequence of hard token ids and soft embedding blocks. Stored as
// segments so a soft block keeps its identity as one graph tensor and
// gradients can flow back into it.
class MixedSequence {
public:
    struct Segment {
        std::vector<int> ids;  // hard segment when soft == nullptr
        TensorPtr soft;        // [n x d] block otherwise
        bool is_soft() const { return soft != nullptr; }
        int length() const {
            return is_soft() ? soft->shape[0] : static_cast<int>(ids.size());
        }
    };

    MixedSequence() = default;
    static MixedSequence from_ids(std::vector<int> ids);

    void append_id(int id);
    void append_ids(const std::vector<int>& ids);
    void append_soft(TensorPtr block);

    int length() const;
    bool has_soft() const;
    int soft_width() const;  // 0 when no soft segment
    const std::vector<Segment>& segments() const { return segments_; }
    // Flattened ids; throws if any soft segment is present.
    std::vector<int> hard_ids() const;

private:
    std::vector<Segment> segments_;
};

// One decoder-only transformer: tied-embedding GPT with RMS-norm pre-norm
// blocks, learned absolute positions, GELU feed-forward.
struct ModelBundle {
    std::string name;
    ModelConfig config;
    bool frozen = false;
    bool tied_head = true;

    struct Layer {
        TensorPtr attn_norm_gain;  // [d]
        TensorPtr wq, wk, wv, wo;  // [d x d]
        TensorPtr ffn_norm_gain;   // [d]
        TensorPtr w1;              // [d x d_ffn]
        TensorPtr w2;              // [d_ffn x d]
    };

    TensorPtr tok_emb;          // [V x d]
    TensorPtr pos_emb;          // [max_seq_len x d]
    TensorPtr final_norm_gain;  // [d]
    std::vector<Layer> layers;

    static ModelBundle init(std::string name, const ModelConfig& config, Rng& rng,
                            double init_std = 0.08);

    // Stable order; names like "layer0.attn.wq".
    std::vector<std::pair<std::string, TensorPtr>> named_tensors() const;
    void set_frozen(bool frozen);
    int64_t parameter_count() const;
    // Throws FrozenViolation if any weight carries gradient state.
    void assert_no_gradients(const std::string& context) const;
};

struct ForwardResult {
    TensorPtr logits;  // [len x vocab]
    TensorPtr hidden;  // [len x d], final-layer post-norm state
};

// Runs the model over a mixed sequence. Soft blocks are injected at
// embedding level; adapters, when given, add low-rank deltas to the
// attention q/v projections.
ForwardResult model_forward(const ModelBundle& model, Graph& g, const MixedSequence& input,
                            const LoraAdapters* adapters = nullptr);

struct GenerateParams {
    int max_new = 32;
    double temperature = 0.0;  // 0 => greedy argmax, ties to the lowest id
    uint64_t seed = 0;
    std::vector<int> stop_ids;
};

struct GenerateResult {
    std::vector<int> ids;    // newly generated tokens, including the stop id
    bool truncated = false;  // hit max_seq_len before max_new / stop
};

GenerateResult model_generate(const ModelBundle& model, const MixedSequence& prefix,
                              const GenerateParams& params,
                              const LoraAdapters* adapters = nullptr);

}  // namespace softcot
