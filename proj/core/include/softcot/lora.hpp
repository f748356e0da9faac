#pragma once

#include <string>
#include <utility>
#include <vector>

#include "softcot/model.hpp"
#include "softcot/tensor.hpp"

namespace softcot {

// Low-rank adapters over the frozen attention query/value projections.
// Effective weight is W + (alpha/r) * A * B; B starts at zero so the adapted
// model is exactly the base model before the first step.
struct LoraAdapters {
    struct LayerAdapters {
        TensorPtr a_q, b_q;  // [d x r], [r x d]
        TensorPtr a_v, b_v;
    };

    int rank = 16;
    double alpha = 16.0;
    int d_model = 0;
    std::vector<LayerAdapters> layers;

    static LoraAdapters init(const ModelConfig& config, int rank, double alpha, Rng& rng);

    double scaling() const { return alpha / static_cast<double>(rank); }
    std::vector<TensorPtr> trainable() const;
    std::vector<std::pair<std::string, TensorPtr>> named_tensors() const;
    void zero_grads() const;
};

}  // namespace softcot
