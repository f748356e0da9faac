#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "softcot/errors.hpp"
#include "softcot/rng.hpp"

namespace softcot {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major float64 tensor, rank 1 or 2. `grad` is allocated (zeroed)
// iff requires_grad; gradient accumulation is additive and the caller zeroes
// grads between optimizer steps.
class Tensor {
public:
    std::vector<int> shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;

    static TensorPtr zeros(std::vector<int> shape, bool requires_grad = false);
    static TensorPtr from_data(std::vector<int> shape, std::vector<double> values,
                               bool requires_grad = false);
    static TensorPtr scalar(double value);
    static TensorPtr randn(std::vector<int> shape, Rng& rng, double stddev,
                           bool requires_grad = false);
    static TensorPtr rand_uniform(std::vector<int> shape, Rng& rng, double lo, double hi,
                                  bool requires_grad = false);

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    bool is_scalar() const { return shape.size() == 1 && shape[0] == 1; }
    bool is_vector() const { return shape.size() == 1; }
    bool is_matrix() const { return shape.size() == 2; }
    int rows() const { return is_matrix() ? shape[0] : 1; }
    int cols() const { return is_matrix() ? shape[1] : shape[0]; }

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }

    void zero_grad();
    void set_requires_grad(bool value);
};

// Records one op per forward call; backward() replays the tape in reverse.
// A graph is single-use: one forward build, at most one backward. Construct
// with recording=false for inference-only forwards (generation loops) to
// skip tape bookkeeping.
class Graph {
public:
    explicit Graph(bool recording = true) : recording_(recording) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    bool recording() const { return recording_; }
    size_t node_count() const { return nodes_.size(); }

    // a [m x k] . b [k x n]  (transpose_b: b is [n x k])
    TensorPtr matmul(const TensorPtr& a, const TensorPtr& b, bool transpose_b = false);
    // same shape, or matrix + row-vector bias
    TensorPtr add(const TensorPtr& a, const TensorPtr& b);
    // elementwise, same shape
    TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
    TensorPtr scale(const TensorPtr& a, double factor);
    TensorPtr gelu(const TensorPtr& x);
    TensorPtr softmax_rows(const TensorPtr& x);
    TensorPtr rms_norm(const TensorPtr& x, const TensorPtr& gain, double eps = 1e-6);
    TensorPtr embedding(const TensorPtr& table, const std::vector<int>& ids);
    // q,k,v [T x d]; heads split internally, mask is causal (j <= i)
    TensorPtr causal_attention(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v,
                               int n_heads);
    // mean of -log softmax(logits[t])[targets[t]] over rows with mask[t] != 0
    TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& targets,
                            const std::vector<uint8_t>& mask);
    TensorPtr concat_rows(const std::vector<TensorPtr>& parts);
    TensorPtr sum(const TensorPtr& x);

    // Writes dLoss/dT into every requires_grad tensor reachable from loss.
    // Tensors without requires_grad are untouched.
    void backward(const TensorPtr& loss);

private:
    struct Node {
        TensorPtr output;
        std::function<void()> back;
    };

    TensorPtr record(TensorPtr out, std::vector<TensorPtr> inputs, std::function<void()> back);
    bool needs_grad(const Tensor* t) const;
    std::vector<double>* grad_buffer(const Tensor* t);
    const std::vector<double>* upstream(const Tensor* t) const;

    std::vector<Node> nodes_;
    std::unordered_set<const Tensor*> node_outputs_;
    std::unordered_map<const Tensor*, std::vector<double>> gbuf_;
    std::vector<Tensor*> grad_leaves_;
    std::unordered_set<const Tensor*> seen_leaves_;
    bool recording_;
    bool consumed_ = false;

    friend struct GraphOps;
};

}  // namespace softcot
