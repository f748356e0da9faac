#include "softcot/lora.hpp"

namespace softcot {

LoraAdapters LoraAdapters::init(const ModelConfig& config, int rank, double alpha, Rng& rng) {
    if (rank < 1) throw ConfigError("lora: rank must be >= 1");
    LoraAdapters a;
    a.rank = rank;
    a.alpha = alpha;
    a.d_model = config.d_model;
    const double std_a = 1.0 / std::sqrt(static_cast<double>(rank));
    for (int i = 0; i < config.n_layers; ++i) {
        LayerAdapters l;
        l.a_q = Tensor::randn({config.d_model, rank}, rng, std_a, /*requires_grad=*/true);
        l.b_q = Tensor::zeros({rank, config.d_model}, /*requires_grad=*/true);
        l.a_v = Tensor::randn({config.d_model, rank}, rng, std_a, /*requires_grad=*/true);
        l.b_v = Tensor::zeros({rank, config.d_model}, /*requires_grad=*/true);
        a.layers.push_back(std::move(l));
    }
    return a;
}

std::vector<TensorPtr> LoraAdapters::trainable() const {
    std::vector<TensorPtr> out;
    for (const auto& l : layers) {
        out.push_back(l.a_q);
        out.push_back(l.b_q);
        out.push_back(l.a_v);
        out.push_back(l.b_v);
    }
    return out;
}

std::vector<std::pair<std::string, TensorPtr>> LoraAdapters::named_tensors() const {
    std::vector<std::pair<std::string, TensorPtr>> out;
    for (size_t i = 0; i < layers.size(); ++i) {
        const std::string p = "layer" + std::to_string(i) + ".attn.";
        out.emplace_back(p + "wq.lora_a", layers[i].a_q);
        out.emplace_back(p + "wq.lora_b", layers[i].b_q);
        out.emplace_back(p + "wv.lora_a", layers[i].a_v);
        out.emplace_back(p + "wv.lora_b", layers[i].b_v);
    }
    return out;
}

void LoraAdapters::zero_grads() const {
    for (const auto& t : trainable()) t->zero_grad();
}

}  // namespace softcot
