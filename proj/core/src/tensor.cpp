#include "softcot/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

namespace softcot {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<Mat>;
using CMapM = Eigen::Map<const Mat>;

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

int64_t shape_product(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

void validate_shape(const std::vector<int>& shape) {
    if (shape.empty() || shape.size() > 3) {
        throw ShapeMismatch("tensor rank must be 1..3, got rank " +
                            std::to_string(shape.size()));
    }
    for (int d : shape) {
        if (d <= 0) throw ShapeMismatch("tensor dimensions must be positive");
    }
}

void ensure_finite(const Tensor& t, const char* where) {
    for (double v : t.data) {
        if (!std::isfinite(v)) {
            throw NonFiniteValue(std::string(where) + ": non-finite value produced");
        }
    }
}

void require_matrix(const TensorPtr& t, const char* op, const char* arg) {
    if (!t || !t->is_matrix()) {
        throw ShapeMismatch(std::string(op) + ": " + arg + " must be a matrix");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

TensorPtr Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    validate_shape(shape);
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->data.assign(static_cast<size_t>(shape_product(t->shape)), 0.0);
    t->set_requires_grad(requires_grad);
    return t;
}

TensorPtr Tensor::from_data(std::vector<int> shape, std::vector<double> values,
                            bool requires_grad) {
    validate_shape(shape);
    if (static_cast<int64_t>(values.size()) != shape_product(shape)) {
        throw ShapeMismatch("from_data: value count does not match shape");
    }
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->data = std::move(values);
    ensure_finite(*t, "from_data");
    t->set_requires_grad(requires_grad);
    return t;
}

TensorPtr Tensor::scalar(double value) { return from_data({1}, {value}); }

TensorPtr Tensor::randn(std::vector<int> shape, Rng& rng, double stddev, bool requires_grad) {
    auto t = zeros(std::move(shape), requires_grad);
    for (double& v : t->data) v = rng.normal(0.0, stddev);
    return t;
}

TensorPtr Tensor::rand_uniform(std::vector<int> shape, Rng& rng, double lo, double hi,
                               bool requires_grad) {
    auto t = zeros(std::move(shape), requires_grad);
    for (double& v : t->data) v = rng.uniform(lo, hi);
    return t;
}

void Tensor::zero_grad() {
    if (requires_grad) grad.assign(data.size(), 0.0);
}

void Tensor::set_requires_grad(bool value) {
    requires_grad = value;
    if (requires_grad) {
        grad.assign(data.size(), 0.0);
    } else {
        grad.clear();
        grad.shrink_to_fit();
    }
}

// ---------------------------------------------------------------------------
// Graph internals
// ---------------------------------------------------------------------------

bool Graph::needs_grad(const Tensor* t) const {
    return t->requires_grad || node_outputs_.count(t) > 0;
}

std::vector<double>* Graph::grad_buffer(const Tensor* t) {
    if (!needs_grad(t)) return nullptr;
    auto [it, inserted] = gbuf_.try_emplace(t);
    if (inserted) {
        it->second.assign(t->data.size(), 0.0);
        if (t->requires_grad && node_outputs_.count(t) == 0 && seen_leaves_.count(t) == 0) {
            seen_leaves_.insert(t);
            grad_leaves_.push_back(const_cast<Tensor*>(t));
        }
    }
    return &it->second;
}

const std::vector<double>* Graph::upstream(const Tensor* t) const {
    auto it = gbuf_.find(t);
    return it == gbuf_.end() ? nullptr : &it->second;
}

TensorPtr Graph::record(TensorPtr out, std::vector<TensorPtr> inputs, std::function<void()> back) {
    (void)inputs;  // kept alive by the closure
    node_outputs_.insert(out.get());
    nodes_.push_back(Node{out, std::move(back)});
    return out;
}

void Graph::backward(const TensorPtr& loss) {
    if (!recording_) throw GraphConsumed("backward: graph was built in inference mode");
    if (consumed_) throw GraphConsumed("backward: called twice without a fresh forward");
    if (!loss || !loss->is_scalar()) throw ShapeMismatch("backward: loss must be a scalar");
    if (node_outputs_.count(loss.get()) == 0) {
        throw GraphConsumed("backward: loss was not produced by this graph");
    }
    consumed_ = true;
    gbuf_[loss.get()] = {1.0};
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (gbuf_.count(it->output.get())) it->back();
    }
    for (Tensor* leaf : grad_leaves_) {
        const auto& buf = gbuf_.at(leaf);
        for (size_t i = 0; i < buf.size(); ++i) leaf->grad[i] += buf[i];
    }
    gbuf_.clear();
    grad_leaves_.clear();
    seen_leaves_.clear();
}

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

TensorPtr Graph::matmul(const TensorPtr& a, const TensorPtr& b, bool transpose_b) {
    require_matrix(a, "matmul", "a");
    require_matrix(b, "matmul", "b");
    const int m = a->shape[0];
    const int k = a->shape[1];
    const int n = transpose_b ? b->shape[0] : b->shape[1];
    const int bk = transpose_b ? b->shape[1] : b->shape[0];
    if (bk != k) {
        throw ShapeMismatch("matmul: inner dimensions disagree (" + std::to_string(k) + " vs " +
                            std::to_string(bk) + ")");
    }
    auto out = Tensor::zeros({m, n});
    CMapM A(a->data.data(), m, k);
    MapM C(out->data.data(), m, n);
    if (transpose_b) {
        CMapM B(b->data.data(), n, k);
        C.noalias() = A * B.transpose();
    } else {
        CMapM B(b->data.data(), k, n);
        C.noalias() = A * B;
    }
    ensure_finite(*out, "matmul");
    if (!recording_) return out;

    return record(out, {a, b}, [this, a, b, out, transpose_b, m, n, k] {
        const auto* up = upstream(out.get());
        CMapM dC(up->data(), m, n);
        CMapM A(a->data.data(), m, k);
        if (transpose_b) {
            CMapM B(b->data.data(), n, k);
            if (auto* ga = grad_buffer(a.get())) {
                MapM dA(ga->data(), m, k);
                dA.noalias() += dC * B;
            }
            if (auto* gb = grad_buffer(b.get())) {
                MapM dB(gb->data(), n, k);
                dB.noalias() += dC.transpose() * A;
            }
        } else {
            CMapM B(b->data.data(), k, n);
            if (auto* ga = grad_buffer(a.get())) {
                MapM dA(ga->data(), m, k);
                dA.noalias() += dC * B.transpose();
            }
            if (auto* gb = grad_buffer(b.get())) {
                MapM dB(gb->data(), k, n);
                dB.noalias() += A.transpose() * dC;
            }
        }
    });
}

TensorPtr Graph::add(const TensorPtr& a, const TensorPtr& b) {
    const bool same_shape = a->shape == b->shape;
    const bool bias = !same_shape && a->is_matrix() && b->is_vector() && b->shape[0] == a->shape[1];
    if (!same_shape && !bias) throw ShapeMismatch("add: shapes not conformable");

    auto out = Tensor::zeros(a->shape);
    if (same_shape) {
        for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
    } else {
        const int m = a->shape[0], n = a->shape[1];
        for (int r = 0; r < m; ++r)
            for (int c = 0; c < n; ++c)
                out->at(r, c) = a->at(r, c) + b->data[c];
    }
    ensure_finite(*out, "add");
    if (!recording_) return out;

    return record(out, {a, b}, [this, a, b, out, same_shape] {
        const auto* up = upstream(out.get());
        if (auto* ga = grad_buffer(a.get())) {
            for (size_t i = 0; i < up->size(); ++i) (*ga)[i] += (*up)[i];
        }
        if (auto* gb = grad_buffer(b.get())) {
            if (same_shape) {
                for (size_t i = 0; i < up->size(); ++i) (*gb)[i] += (*up)[i];
            } else {
                const int m = a->shape[0], n = a->shape[1];
                for (int r = 0; r < m; ++r)
                    for (int c = 0; c < n; ++c)
                        (*gb)[c] += (*up)[static_cast<size_t>(r) * n + c];
            }
        }
    });
}

TensorPtr Graph::mul(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape != b->shape) throw ShapeMismatch("mul: shapes differ");
    auto out = Tensor::zeros(a->shape);
    for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] * b->data[i];
    ensure_finite(*out, "mul");
    if (!recording_) return out;

    return record(out, {a, b}, [this, a, b, out] {
        const auto* up = upstream(out.get());
        if (auto* ga = grad_buffer(a.get())) {
            for (size_t i = 0; i < up->size(); ++i) (*ga)[i] += (*up)[i] * b->data[i];
        }
        if (auto* gb = grad_buffer(b.get())) {
            for (size_t i = 0; i < up->size(); ++i) (*gb)[i] += (*up)[i] * a->data[i];
        }
    });
}

TensorPtr Graph::scale(const TensorPtr& a, double factor) {
    auto out = Tensor::zeros(a->shape);
    for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = factor * a->data[i];
    ensure_finite(*out, "scale");
    if (!recording_) return out;

    return record(out, {a}, [this, a, out, factor] {
        const auto* up = upstream(out.get());
        if (auto* ga = grad_buffer(a.get())) {
            for (size_t i = 0; i < up->size(); ++i) (*ga)[i] += factor * (*up)[i];
        }
    });
}

TensorPtr Graph::gelu(const TensorPtr& x) {
    auto out = Tensor::zeros(x->shape);
    for (size_t i = 0; i < out->data.size(); ++i) {
        double v = x->data[i];
        out->data[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    }
    ensure_finite(*out, "gelu");
    if (!recording_) return out;

    return record(out, {x}, [this, x, out] {
        const auto* up = upstream(out.get());
        if (auto* gx = grad_buffer(x.get())) {
            for (size_t i = 0; i < up->size(); ++i) {
                double v = x->data[i];
                double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
                double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
                (*gx)[i] += (*up)[i] * (cdf + v * pdf);
            }
        }
    });
}

TensorPtr Graph::softmax_rows(const TensorPtr& x) {
    const int m = x->rows(), n = x->cols();
    auto out = Tensor::zeros(x->shape);
    for (int r = 0; r < m; ++r) {
        double mx = -1e308;
        for (int c = 0; c < n; ++c) mx = std::max(mx, x->at(r, c));
        double s = 0.0;
        for (int c = 0; c < n; ++c) {
            double e = std::exp(x->at(r, c) - mx);
            out->at(r, c) = e;
            s += e;
        }
        for (int c = 0; c < n; ++c) out->at(r, c) /= s;
    }
    ensure_finite(*out, "softmax_rows");
    if (!recording_) return out;

    return record(out, {x}, [this, x, out, m, n] {
        const auto* up = upstream(out.get());
        if (auto* gx = grad_buffer(x.get())) {
            for (int r = 0; r < m; ++r) {
                double dot = 0.0;
                for (int c = 0; c < n; ++c) {
                    dot += (*up)[static_cast<size_t>(r) * n + c] * out->at(r, c);
                }
                for (int c = 0; c < n; ++c) {
                    size_t i = static_cast<size_t>(r) * n + c;
                    (*gx)[i] += out->at(r, c) * ((*up)[i] - dot);
                }
            }
        }
    });
}

TensorPtr Graph::rms_norm(const TensorPtr& x, const TensorPtr& gain, double eps) {
    const int m = x->rows(), n = x->cols();
    if (!gain->is_vector() || gain->shape[0] != n) {
        throw ShapeMismatch("rms_norm: gain must be a vector of the feature width");
    }
    auto out = Tensor::zeros(x->shape);
    std::vector<double> inv_rms(m);
    for (int r = 0; r < m; ++r) {
        double ms = 0.0;
        for (int c = 0; c < n; ++c) ms += x->at(r, c) * x->at(r, c);
        ms /= n;
        inv_rms[r] = 1.0 / std::sqrt(ms + eps);
        for (int c = 0; c < n; ++c) out->at(r, c) = x->at(r, c) * inv_rms[r] * gain->data[c];
    }
    ensure_finite(*out, "rms_norm");
    if (!recording_) return out;

    return record(out, {x, gain}, [this, x, gain, out, m, n, inv_rms = std::move(inv_rms)] {
        const auto* up = upstream(out.get());
        auto* gx = grad_buffer(x.get());
        auto* gg = grad_buffer(gain.get());
        for (int r = 0; r < m; ++r) {
            const double s = inv_rms[r];
            if (gg) {
                for (int c = 0; c < n; ++c) {
                    (*gg)[c] += (*up)[static_cast<size_t>(r) * n + c] * x->at(r, c) * s;
                }
            }
            if (gx) {
                double t = 0.0;
                for (int c = 0; c < n; ++c) {
                    t += (*up)[static_cast<size_t>(r) * n + c] * gain->data[c] * x->at(r, c);
                }
                const double coef = s * s * s * t / n;
                for (int c = 0; c < n; ++c) {
                    size_t i = static_cast<size_t>(r) * n + c;
                    (*gx)[i] += s * gain->data[c] * (*up)[i] - coef * x->at(r, c);
                }
            }
        }
    });
}

TensorPtr Graph::embedding(const TensorPtr& table, const std::vector<int>& ids) {
    require_matrix(table, "embedding", "table");
    if (ids.empty()) throw EmptyInput("embedding: empty id list");
    const int v = table->shape[0], d = table->shape[1];
    for (int id : ids) {
        if (id < 0 || id >= v) {
            throw ShapeMismatch("embedding: id " + std::to_string(id) + " out of range");
        }
    }
    auto out = Tensor::zeros({static_cast<int>(ids.size()), d});
    for (size_t r = 0; r < ids.size(); ++r) {
        std::copy_n(table->data.begin() + static_cast<size_t>(ids[r]) * d, d,
                    out->data.begin() + r * d);
    }
    if (!recording_) return out;

    return record(out, {table}, [this, table, out, ids, d] {
        const auto* up = upstream(out.get());
        if (auto* gt = grad_buffer(table.get())) {
            for (size_t r = 0; r < ids.size(); ++r) {
                for (int c = 0; c < d; ++c) {
                    (*gt)[static_cast<size_t>(ids[r]) * d + c] += (*up)[r * d + c];
                }
            }
        }
    });
}

TensorPtr Graph::causal_attention(const TensorPtr& q, const TensorPtr& k, const TensorPtr& v,
                                  int n_heads) {
    require_matrix(q, "attention", "q");
    require_matrix(k, "attention", "k");
    require_matrix(v, "attention", "v");
    if (q->shape != k->shape || q->shape != v->shape) {
        throw ShapeMismatch("attention: q, k, v must share one shape");
    }
    const int t_len = q->shape[0], d = q->shape[1];
    if (n_heads < 1 || d % n_heads != 0) {
        throw ShapeMismatch("attention: head count must divide the width");
    }
    const int dh = d / n_heads;
    const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

    auto out = Tensor::zeros({t_len, d});
    // per-head attention probabilities, kept for backward
    auto probs = std::make_shared<std::vector<double>>(
        static_cast<size_t>(n_heads) * t_len * t_len, 0.0);

    for (int h = 0; h < n_heads; ++h) {
        const int off = h * dh;
        double* P = probs->data() + static_cast<size_t>(h) * t_len * t_len;
        for (int i = 0; i < t_len; ++i) {
            double* row = P + static_cast<size_t>(i) * t_len;
            double mx = -1e308;
            for (int j = 0; j <= i; ++j) {
                double s = 0.0;
                for (int c = 0; c < dh; ++c) s += q->at(i, off + c) * k->at(j, off + c);
                row[j] = s * sc;
                mx = std::max(mx, row[j]);
            }
            double sum = 0.0;
            for (int j = 0; j <= i; ++j) {
                row[j] = std::exp(row[j] - mx);
                sum += row[j];
            }
            for (int j = 0; j <= i; ++j) {
                row[j] /= sum;
                for (int c = 0; c < dh; ++c) out->at(i, off + c) += row[j] * v->at(j, off + c);
            }
        }
    }
    ensure_finite(*out, "attention");
    if (!recording_) return out;

    return record(out, {q, k, v}, [this, q, k, v, out, probs, n_heads, t_len, dh, sc] {
        const auto* up = upstream(out.get());
        auto* gq = grad_buffer(q.get());
        auto* gk = grad_buffer(k.get());
        auto* gv = grad_buffer(v.get());
        const int d = dh * n_heads;
        std::vector<double> dp(t_len), ds(t_len);
        for (int h = 0; h < n_heads; ++h) {
            const int off = h * dh;
            const double* P = probs->data() + static_cast<size_t>(h) * t_len * t_len;
            for (int i = 0; i < t_len; ++i) {
                const double* prow = P + static_cast<size_t>(i) * t_len;
                const double* dout = up->data() + static_cast<size_t>(i) * d + off;
                double dot = 0.0;
                for (int j = 0; j <= i; ++j) {
                    double s = 0.0;
                    for (int c = 0; c < dh; ++c) s += dout[c] * v->at(j, off + c);
                    dp[j] = s;
                    dot += s * prow[j];
                }
                for (int j = 0; j <= i; ++j) ds[j] = prow[j] * (dp[j] - dot);
                if (gq) {
                    for (int j = 0; j <= i; ++j) {
                        for (int c = 0; c < dh; ++c) {
                            (*gq)[static_cast<size_t>(i) * d + off + c] +=
                                sc * ds[j] * k->at(j, off + c);
                        }
                    }
                }
                if (gk) {
                    for (int j = 0; j <= i; ++j) {
                        for (int c = 0; c < dh; ++c) {
                            (*gk)[static_cast<size_t>(j) * d + off + c] +=
                                sc * ds[j] * q->at(i, off + c);
                        }
                    }
                }
                if (gv) {
                    for (int j = 0; j <= i; ++j) {
                        for (int c = 0; c < dh; ++c) {
                            (*gv)[static_cast<size_t>(j) * d + off + c] += prow[j] * dout[c];
                        }
                    }
                }
            }
        }
    });
}

TensorPtr Graph::cross_entropy(const TensorPtr& logits, const std::vector<int>& targets,
                               const std::vector<uint8_t>& mask) {
    require_matrix(logits, "cross_entropy", "logits");
    const int t_len = logits->shape[0], vocab = logits->shape[1];
    if (static_cast<int>(targets.size()) != t_len || static_cast<int>(mask.size()) != t_len) {
        throw ShapeMismatch("cross_entropy: targets/mask length must equal logit rows");
    }
    std::vector<int> rows;
    for (int t = 0; t < t_len; ++t) {
        if (!mask[t]) continue;
        if (targets[t] < 0 || targets[t] >= vocab) {
            throw ShapeMismatch("cross_entropy: target id out of range at row " +
                                std::to_string(t));
        }
        rows.push_back(t);
    }
    if (rows.empty()) throw EmptyTargetSpan("cross_entropy: no masked positions");
    const double inv_m = 1.0 / static_cast<double>(rows.size());

    // softmax per masked row, kept for backward
    auto probs = std::make_shared<std::vector<double>>(rows.size() * static_cast<size_t>(vocab));
    double loss = 0.0;
    for (size_t r = 0; r < rows.size(); ++r) {
        const int t = rows[r];
        double mx = -1e308;
        for (int c = 0; c < vocab; ++c) mx = std::max(mx, logits->at(t, c));
        double sum = 0.0;
        double* prow = probs->data() + r * vocab;
        for (int c = 0; c < vocab; ++c) {
            prow[c] = std::exp(logits->at(t, c) - mx);
            sum += prow[c];
        }
        for (int c = 0; c < vocab; ++c) prow[c] /= sum;
        loss -= std::log(prow[targets[t]]);
    }
    loss *= inv_m;
    auto out = Tensor::scalar(loss);
    ensure_finite(*out, "cross_entropy");
    if (!recording_) return out;

    return record(out, {logits},
                  [this, logits, out, probs, rows = std::move(rows), targets, vocab, inv_m] {
                      const auto* up = upstream(out.get());
                      if (auto* gl = grad_buffer(logits.get())) {
                          const double g = (*up)[0] * inv_m;
                          for (size_t r = 0; r < rows.size(); ++r) {
                              const int t = rows[r];
                              const double* prow = probs->data() + r * vocab;
                              double* grow = gl->data() + static_cast<size_t>(t) * vocab;
                              for (int c = 0; c < vocab; ++c) grow[c] += g * prow[c];
                              grow[targets[t]] -= g;
                          }
                      }
                  });
}

TensorPtr Graph::concat_rows(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw EmptyInput("concat_rows: no parts");
    int n = -1, total = 0;
    for (const auto& p : parts) {
        require_matrix(p, "concat_rows", "part");
        if (n < 0) n = p->shape[1];
        if (p->shape[1] != n) throw ShapeMismatch("concat_rows: column widths differ");
        total += p->shape[0];
    }
    auto out = Tensor::zeros({total, n});
    size_t at = 0;
    for (const auto& p : parts) {
        std::copy(p->data.begin(), p->data.end(), out->data.begin() + at);
        at += p->data.size();
    }
    if (!recording_) return out;

    std::vector<TensorPtr> inputs = parts;
    return record(out, inputs, [this, parts, out] {
        const auto* up = upstream(out.get());
        size_t at = 0;
        for (const auto& p : parts) {
            if (auto* gp = grad_buffer(p.get())) {
                for (size_t i = 0; i < p->data.size(); ++i) (*gp)[i] += (*up)[at + i];
            }
            at += p->data.size();
        }
    });
}

TensorPtr Graph::sum(const TensorPtr& x) {
    double s = 0.0;
    for (double v : x->data) s += v;
    auto out = Tensor::scalar(s);
    ensure_finite(*out, "sum");
    if (!recording_) return out;

    return record(out, {x}, [this, x, out] {
        const auto* up = upstream(out.get());
        if (auto* gx = grad_buffer(x.get())) {
            for (double& g : *gx) g += (*up)[0];
        }
    });
}

}  // namespace softcot
