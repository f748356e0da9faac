#include "softcot/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "softcot/lora.hpp"

namespace softcot {

void ModelConfig::validate() const {
    if (vocab_size < Vocab::kReservedCount) throw ConfigError("config: vocab_size too small");
    if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ffn <= 0 || max_seq_len <= 0) {
        throw ConfigError("config: all model dimensions must be positive");
    }
    if (d_model % n_heads != 0) {
        throw ConfigError("config: d_model must be divisible by n_heads");
    }
}

// ---------------------------------------------------------------------------
// MixedSequence
// ---------------------------------------------------------------------------

MixedSequence MixedSequence::from_ids(std::vector<int> ids) {
    MixedSequence s;
    if (!ids.empty()) s.segments_.push_back(Segment{std::move(ids), nullptr});
    return s;
}

void MixedSequence::append_id(int id) {
    if (segments_.empty() || segments_.back().is_soft()) {
        segments_.push_back(Segment{{id}, nullptr});
    } else {
        segments_.back().ids.push_back(id);
    }
}

void MixedSequence::append_ids(const std::vector<int>& ids) {
    for (int id : ids) append_id(id);
}

void MixedSequence::append_soft(TensorPtr block) {
    if (!block || !block->is_matrix()) {
        throw WidthMismatch("mixed sequence: soft block must be a matrix");
    }
    const int width = soft_width();
    if (width != 0 && block->shape[1] != width) {
        throw WidthMismatch("mixed sequence: soft blocks disagree on width");
    }
    segments_.push_back(Segment{{}, std::move(block)});
}

int MixedSequence::length() const {
    int n = 0;
    for (const auto& s : segments_) n += s.length();
    return n;
}

bool MixedSequence::has_soft() const {
    return std::any_of(segments_.begin(), segments_.end(),
                       [](const Segment& s) { return s.is_soft(); });
}

int MixedSequence::soft_width() const {
    for (const auto& s : segments_) {
        if (s.is_soft()) return s.soft->shape[1];
    }
    return 0;
}

std::vector<int> MixedSequence::hard_ids() const {
    std::vector<int> out;
    for (const auto& s : segments_) {
        if (s.is_soft()) throw ConfigError("mixed sequence: contains soft items");
        out.insert(out.end(), s.ids.begin(), s.ids.end());
    }
    return out;
}

// ---------------------------------------------------------------------------
// ModelBundle
// ---------------------------------------------------------------------------

ModelBundle ModelBundle::init(std::string name, const ModelConfig& config, Rng& rng,
                              double init_std) {
    config.validate();
    ModelBundle m;
    m.name = std::move(name);
    m.config = config;
    m.tok_emb = Tensor::randn({config.vocab_size, config.d_model}, rng, init_std);
    m.pos_emb = Tensor::randn({config.max_seq_len, config.d_model}, rng, init_std);
    m.final_norm_gain = Tensor::from_data({config.d_model},
                                          std::vector<double>(config.d_model, 1.0));
    for (int i = 0; i < config.n_layers; ++i) {
        Layer l;
        l.attn_norm_gain =
            Tensor::from_data({config.d_model}, std::vector<double>(config.d_model, 1.0));
        l.wq = Tensor::randn({config.d_model, config.d_model}, rng, init_std);
        l.wk = Tensor::randn({config.d_model, config.d_model}, rng, init_std);
        l.wv = Tensor::randn({config.d_model, config.d_model}, rng, init_std);
        l.wo = Tensor::randn({config.d_model, config.d_model}, rng, init_std);
        l.ffn_norm_gain =
            Tensor::from_data({config.d_model}, std::vector<double>(config.d_model, 1.0));
        l.w1 = Tensor::randn({config.d_model, config.d_ffn}, rng, init_std);
        l.w2 = Tensor::randn({config.d_ffn, config.d_model}, rng, init_std);
        m.layers.push_back(std::move(l));
    }
    return m;
}

std::vector<std::pair<std::string, TensorPtr>> ModelBundle::named_tensors() const {
    std::vector<std::pair<std::string, TensorPtr>> out;
    out.emplace_back("tok_emb", tok_emb);
    out.emplace_back("pos_emb", pos_emb);
    for (size_t i = 0; i < layers.size(); ++i) {
        const std::string p = "layer" + std::to_string(i) + ".";
        out.emplace_back(p + "attn_norm.gain", layers[i].attn_norm_gain);
        out.emplace_back(p + "attn.wq", layers[i].wq);
        out.emplace_back(p + "attn.wk", layers[i].wk);
        out.emplace_back(p + "attn.wv", layers[i].wv);
        out.emplace_back(p + "attn.wo", layers[i].wo);
        out.emplace_back(p + "ffn_norm.gain", layers[i].ffn_norm_gain);
        out.emplace_back(p + "ffn.w1", layers[i].w1);
        out.emplace_back(p + "ffn.w2", layers[i].w2);
    }
    out.emplace_back("final_norm.gain", final_norm_gain);
    return out;
}

void ModelBundle::set_frozen(bool value) {
    frozen = value;
    for (auto& [name, t] : named_tensors()) t->set_requires_grad(!value);
}

int64_t ModelBundle::parameter_count() const {
    int64_t n = 0;
    for (const auto& [name, t] : named_tensors()) n += t->size();
    return n;
}

void ModelBundle::assert_no_gradients(const std::string& context) const {
    for (const auto& [tname, t] : named_tensors()) {
        if (t->requires_grad || !t->grad.empty()) {
            throw FrozenViolation(context + ": gradient state on frozen tensor " + name + "." +
                                  tname);
        }
    }
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

ForwardResult model_forward(const ModelBundle& model, Graph& g, const MixedSequence& input,
                            const LoraAdapters* adapters) {
    const ModelConfig& cfg = model.config;
    const int len = input.length();
    if (len < 1) throw EmptyInput("forward: empty input sequence");
    if (len > cfg.max_seq_len) {
        throw SequenceTooLong("forward: sequence length " + std::to_string(len) +
                              " exceeds max " + std::to_string(cfg.max_seq_len));
    }
    if (adapters && adapters->d_model != cfg.d_model) {
        throw ConfigMismatch("forward: adapter width does not match the model");
    }

    // embedding-level assembly: token/pos rows for hard segments, the soft
    // block spliced in directly (plus its position rows unless disabled)
    std::vector<TensorPtr> parts;
    int pos = 0;
    for (const auto& seg : input.segments()) {
        if (seg.is_soft()) {
            if (seg.soft->shape[1] != cfg.d_model) {
                throw WidthMismatch("forward: soft item width " +
                                    std::to_string(seg.soft->shape[1]) + " != d_model " +
                                    std::to_string(cfg.d_model));
            }
            TensorPtr block = seg.soft;
            if (cfg.soft_position_embedding) {
                std::vector<int> positions(seg.length());
                std::iota(positions.begin(), positions.end(), pos);
                block = g.add(block, g.embedding(model.pos_emb, positions));
            }
            parts.push_back(block);
        } else if (!seg.ids.empty()) {
            std::vector<int> positions(seg.ids.size());
            std::iota(positions.begin(), positions.end(), pos);
            parts.push_back(g.add(g.embedding(model.tok_emb, seg.ids),
                                  g.embedding(model.pos_emb, positions)));
        }
        pos += seg.length();
    }
    TensorPtr x = parts.size() == 1 ? parts[0] : g.concat_rows(parts);

    for (size_t i = 0; i < model.layers.size(); ++i) {
        const auto& layer = model.layers[i];
        TensorPtr a = g.rms_norm(x, layer.attn_norm_gain, cfg.rms_eps);
        TensorPtr q = g.matmul(a, layer.wq);
        TensorPtr k = g.matmul(a, layer.wk);
        TensorPtr v = g.matmul(a, layer.wv);
        if (adapters) {
            const auto& ad = adapters->layers[i];
            q = g.add(q, g.scale(g.matmul(g.matmul(a, ad.a_q), ad.b_q), adapters->scaling()));
            v = g.add(v, g.scale(g.matmul(g.matmul(a, ad.a_v), ad.b_v), adapters->scaling()));
        }
        TensorPtr att = g.causal_attention(q, k, v, cfg.n_heads);
        x = g.add(x, g.matmul(att, layer.wo));
        TensorPtr f = g.rms_norm(x, layer.ffn_norm_gain, cfg.rms_eps);
        x = g.add(x, g.matmul(g.gelu(g.matmul(f, layer.w1)), layer.w2));
    }

    ForwardResult result;
    result.hidden = g.rms_norm(x, model.final_norm_gain, cfg.rms_eps);
    // tied output head
    result.logits = g.matmul(result.hidden, model.tok_emb, /*transpose_b=*/true);
    return result;
}

// ---------------------------------------------------------------------------
// Generate
// ---------------------------------------------------------------------------

namespace {

int pick_token(const double* row, int vocab, double temperature, Rng& rng) {
    if (temperature <= 0.0) {
        int best = 0;
        for (int i = 1; i < vocab; ++i) {
            if (row[i] > row[best]) best = i;  // ties keep the lowest id
        }
        return best;
    }
    double mx = -1e308;
    for (int i = 0; i < vocab; ++i) mx = std::max(mx, row[i] / temperature);
    std::vector<double> p(vocab);
    double sum = 0.0;
    for (int i = 0; i < vocab; ++i) {
        p[i] = std::exp(row[i] / temperature - mx);
        sum += p[i];
    }
    double u = rng.uniform() * sum;
    double acc = 0.0;
    for (int i = 0; i < vocab; ++i) {
        acc += p[i];
        if (u < acc) return i;
    }
    return vocab - 1;
}

}  // namespace

GenerateResult model_generate(const ModelBundle& model, const MixedSequence& prefix,
                              const GenerateParams& params, const LoraAdapters* adapters) {
    if (params.max_new < 1) throw ConfigError("generate: max_new must be >= 1");
    if (params.temperature < 0.0) throw ConfigError("generate: temperature must be >= 0");

    GenerateResult result;
    MixedSequence seq = prefix;
    Rng rng = Rng::derive(params.seed, "generate");

    for (int step = 0; step < params.max_new; ++step) {
        if (seq.length() >= model.config.max_seq_len) {
            result.truncated = true;  // cannot grow further; stop instead of crashing
            break;
        }
        Graph g(/*recording=*/false);
        ForwardResult fwd = model_forward(model, g, seq, adapters);
        const int vocab = model.config.vocab_size;
        const double* last_row =
            fwd.logits->data.data() + static_cast<size_t>(seq.length() - 1) * vocab;
        const int id = pick_token(last_row, vocab, params.temperature, rng);
        result.ids.push_back(id);
        seq.append_id(id);
        if (std::find(params.stop_ids.begin(), params.stop_ids.end(), id) !=
            params.stop_ids.end()) {
            break;
        }
    }
    return result;
}

}  // namespace softcot
