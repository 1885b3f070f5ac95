#include "admp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

#include "admp/errors.hpp"

namespace admp {

using detail::TensorNode;

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

std::shared_ptr<TensorNode> make_leaf(std::vector<std::size_t> shape, std::vector<double> data,
                                      bool requires_grad) {
    if (shape_numel(shape) != data.size())
        throw DimensionError("tensor data length does not match shape " + shape_str(shape));
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    n->leaf = true;
    return n;
}

std::shared_ptr<TensorNode> make_op(std::vector<std::size_t> shape,
                                    std::vector<std::shared_ptr<TensorNode>> parents,
                                    std::function<void(TensorNode&)> backprop) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->value.resize(shape_numel(n->shape));
    n->leaf = false;
    for (const auto& p : parents)
        if (p->requires_grad) n->requires_grad = true;
    n->parents = std::move(parents);
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return Tensor(make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return Tensor(make_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data,
                         bool requires_grad) {
    return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor(make_leaf({1}, {value}, requires_grad));
}

Tensor Tensor::from_vector(const std::vector<double>& v, bool requires_grad) {
    return Tensor(make_leaf({v.size()}, v, requires_grad));
}

const std::vector<std::size_t>& Tensor::shape() const {
    if (!node_) throw StateError("use of undefined tensor");
    return node_->shape;
}

std::size_t Tensor::size() const { return node_ ? node_->size() : 0; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

const std::vector<double>& Tensor::data() const {
    if (!node_) throw StateError("use of undefined tensor");
    return node_->value;
}

std::vector<double>& Tensor::data() {
    if (!node_) throw StateError("use of undefined tensor");
    return node_->value;
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }

const std::vector<double>& Tensor::grad() const {
    if (!has_grad()) throw StateError("tensor has no gradient; run backward first");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_) node_->grad.assign(node_->value.size(), 0.0);
}

double Tensor::item() const {
    if (size() != 1) throw DimensionError("item() requires a scalar tensor");
    return data()[0];
}

Tensor Tensor::clone(bool requires_grad) const {
    if (!node_) return Tensor();
    return Tensor(make_leaf(node_->shape, node_->value, requires_grad));
}

// ---------------------------------------------------------------------------
// elementwise ops

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    auto pa = a.node(), pb = b.node();
    auto n = make_op(a.shape(), {pa, pb}, [pa, pb](TensorNode& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) pa->grad[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) pb->grad[i] += self.grad[i];
        }
    });
    for (std::size_t i = 0; i < n->size(); ++i) n->value[i] = pa->value[i] + pb->value[i];
    return Tensor(n);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    auto pa = a.node(), pb = b.node();
    auto n = make_op(a.shape(), {pa, pb}, [pa, pb](TensorNode& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) pa->grad[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) pb->grad[i] -= self.grad[i];
        }
    });
    for (std::size_t i = 0; i < n->size(); ++i) n->value[i] = pa->value[i] - pb->value[i];
    return Tensor(n);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    auto pa = a.node(), pb = b.node();
    auto n = make_op(a.shape(), {pa, pb}, [pa, pb](TensorNode& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i)
                pa->grad[i] += self.grad[i] * pb->value[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i)
                pb->grad[i] += self.grad[i] * pa->value[i];
        }
    });
    for (std::size_t i = 0; i < n->size(); ++i) n->value[i] = pa->value[i] * pb->value[i];
    return Tensor(n);
}

Tensor affine(const Tensor& x, double scale, double shift) {
    auto px = x.node();
    auto n = make_op(x.shape(), {px}, [px, scale](TensorNode& self) {
        px->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i) px->grad[i] += scale * self.grad[i];
    });
    for (std::size_t i = 0; i < n->size(); ++i) n->value[i] = scale * px->value[i] + shift;
    return Tensor(n);
}

Tensor relu(const Tensor& x) {
    auto px = x.node();
    auto n = make_op(x.shape(), {px}, [px](TensorNode& self) {
        px->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i)
            if (px->value[i] > 0.0) px->grad[i] += self.grad[i];
    });
    for (std::size_t i = 0; i < n->size(); ++i) n->value[i] = std::max(0.0, px->value[i]);
    return Tensor(n);
}

Tensor abs_val(const Tensor& x) {
    auto px = x.node();
    auto n = make_op(x.shape(), {px}, [px](TensorNode& self) {
        px->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i) {
            if (px->value[i] > 0.0)
                px->grad[i] += self.grad[i];
            else if (px->value[i] < 0.0)
                px->grad[i] -= self.grad[i];
        }
    });
    for (std::size_t i = 0; i < n->size(); ++i) n->value[i] = std::abs(px->value[i]);
    return Tensor(n);
}

Tensor exp_val(const Tensor& x) {
    auto px = x.node();
    auto n = make_op(x.shape(), {px}, [px](TensorNode& self) {
        px->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i)
            px->grad[i] += self.grad[i] * self.value[i];
    });
    for (std::size_t i = 0; i < n->size(); ++i) n->value[i] = std::exp(px->value[i]);
    return Tensor(n);
}

Tensor log_clamped(const Tensor& x, double floor) {
    auto px = x.node();
    auto n = make_op(x.shape(), {px}, [px, floor](TensorNode& self) {
        px->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i)
            if (px->value[i] > floor) px->grad[i] += self.grad[i] / px->value[i];
    });
    for (std::size_t i = 0; i < n->size(); ++i)
        n->value[i] = std::log(std::max(px->value[i], floor));
    return Tensor(n);
}

// ---------------------------------------------------------------------------
// linear algebra / structure

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    const std::size_t m = a.shape()[0], k = a.shape()[1], p = b.shape()[1];
    auto pa = a.node(), pb = b.node();
    auto n = make_op({m, p}, {pa, pb}, [pa, pb, m, k, p](TensorNode& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < p; ++j) {
                    const double g = self.grad[i * p + j];
                    if (g == 0.0) continue;
                    for (std::size_t t = 0; t < k; ++t)
                        pa->grad[i * k + t] += g * pb->value[t * p + j];
                }
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t t = 0; t < k; ++t) {
                    const double av = pa->value[i * k + t];
                    if (av == 0.0) continue;
                    for (std::size_t j = 0; j < p; ++j)
                        pb->grad[t * p + j] += av * self.grad[i * p + j];
                }
        }
    });
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < k; ++t) {
            const double av = pa->value[i * k + t];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < p; ++j) n->value[i * p + j] += av * pb->value[t * p + j];
        }
    return Tensor(n);
}

Tensor add_rowvec(const Tensor& mat, const Tensor& vec) {
    if (mat.rank() != 2 || vec.rank() != 1 || mat.shape()[1] != vec.shape()[0])
        throw DimensionError("add_rowvec: shapes " + shape_str(mat.shape()) + " + " +
                             shape_str(vec.shape()));
    const std::size_t rows = mat.shape()[0], cols = mat.shape()[1];
    auto pm = mat.node(), pv = vec.node();
    auto n = make_op(mat.shape(), {pm, pv}, [pm, pv, rows, cols](TensorNode& self) {
        if (pm->requires_grad) {
            pm->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) pm->grad[i] += self.grad[i];
        }
        if (pv->requires_grad) {
            pv->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) pv->grad[c] += self.grad[r * cols + c];
        }
    });
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            n->value[r * cols + c] = pm->value[r * cols + c] + pv->value[c];
    return Tensor(n);
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    if (input.rank() != 4 || weight.rank() != 4)
        throw DimensionError("conv2d expects input [B,C,H,W] and weight [O,C,k,k]");
    const std::size_t B = input.shape()[0], C = input.shape()[1], H = input.shape()[2],
                      W = input.shape()[3];
    const std::size_t O = weight.shape()[0], kc = weight.shape()[1], kh = weight.shape()[2],
                      kw = weight.shape()[3];
    if (kc != C || kh != kw)
        throw DimensionError("conv2d: weight " + shape_str(weight.shape()) +
                             " incompatible with input " + shape_str(input.shape()));
    if (bias.rank() != 1 || bias.shape()[0] != O)
        throw DimensionError("conv2d: bias length must equal output channels");
    if (H < kh || W < kw) throw DimensionError("conv2d: kernel larger than input");
    const std::size_t OH = H - kh + 1, OW = W - kw + 1;
    const std::size_t k = kh;

    auto pi = input.node(), pw = weight.node(), pb = bias.node();
    auto n = make_op({B, O, OH, OW}, {pi, pw, pb},
                     [pi, pw, pb, B, C, H, W, O, OH, OW, k](TensorNode& self) {
        const auto in_at = [&](std::size_t b, std::size_t c, std::size_t y, std::size_t x) {
            return ((b * C + c) * H + y) * W + x;
        };
        const auto w_at = [&](std::size_t o, std::size_t c, std::size_t y, std::size_t x) {
            return ((o * C + c) * k + y) * k + x;
        };
        const auto out_at = [&](std::size_t b, std::size_t o, std::size_t y, std::size_t x) {
            return ((b * O + o) * OH + y) * OW + x;
        };
        if (pi->requires_grad) pi->ensure_grad();
        if (pw->requires_grad) pw->ensure_grad();
        if (pb->requires_grad) pb->ensure_grad();
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t o = 0; o < O; ++o)
                for (std::size_t y = 0; y < OH; ++y)
                    for (std::size_t x = 0; x < OW; ++x) {
                        const double g = self.grad[out_at(b, o, y, x)];
                        if (g == 0.0) continue;
                        if (pb->requires_grad) pb->grad[o] += g;
                        for (std::size_t c = 0; c < C; ++c)
                            for (std::size_t dy = 0; dy < k; ++dy)
                                for (std::size_t dx = 0; dx < k; ++dx) {
                                    if (pw->requires_grad)
                                        pw->grad[w_at(o, c, dy, dx)] +=
                                            g * pi->value[in_at(b, c, y + dy, x + dx)];
                                    if (pi->requires_grad)
                                        pi->grad[in_at(b, c, y + dy, x + dx)] +=
                                            g * pw->value[w_at(o, c, dy, dx)];
                                }
                    }
    });
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t o = 0; o < O; ++o)
            for (std::size_t y = 0; y < OH; ++y)
                for (std::size_t x = 0; x < OW; ++x) {
                    double acc = pb->value[o];
                    for (std::size_t c = 0; c < C; ++c)
                        for (std::size_t dy = 0; dy < k; ++dy)
                            for (std::size_t dx = 0; dx < k; ++dx)
                                acc += pi->value[((b * C + c) * H + y + dy) * W + x + dx] *
                                       pw->value[((o * C + c) * k + dy) * k + dx];
                    n->value[((b * O + o) * OH + y) * OW + x] = acc;
                }
    return Tensor(n);
}

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape) {
    if (shape_numel(shape) != x.size())
        throw DimensionError("reshape: element count mismatch for " + shape_str(shape));
    auto px = x.node();
    auto n = make_op(std::move(shape), {px}, [px](TensorNode& self) {
        px->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i) px->grad[i] += self.grad[i];
    });
    n->value = px->value;
    return Tensor(n);
}

Tensor softmax_rows(const Tensor& x) {
    if (x.rank() != 2) throw DimensionError("softmax_rows expects a matrix");
    const std::size_t rows = x.shape()[0], cols = x.shape()[1];
    auto px = x.node();
    auto n = make_op(x.shape(), {px}, [px, rows, cols](TensorNode& self) {
        px->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* p = self.value.data() + r * cols;
            const double* g = self.grad.data() + r * cols;
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c) dot += p[c] * g[c];
            for (std::size_t c = 0; c < cols; ++c)
                px->grad[r * cols + c] += p[c] * (g[c] - dot);
        }
    });
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = px->value.data() + r * cols;
        double* out = n->value.data() + r * cols;
        double mx = in[0];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, in[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            out[c] = std::exp(in[c] - mx);
            sum += out[c];
        }
        for (std::size_t c = 0; c < cols; ++c) out[c] /= sum;
    }
    return Tensor(n);
}

Tensor scale_axis(const Tensor& x, const Tensor& gate, std::size_t axis) {
    if (gate.rank() != 1) throw DimensionError("scale_axis: gate must be a vector");
    if (axis >= x.rank() || x.shape()[axis] != gate.shape()[0])
        throw DimensionError("scale_axis: gate length " + std::to_string(gate.size()) +
                             " does not match axis " + std::to_string(axis) + " of " +
                             shape_str(x.shape()));
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= x.shape()[i];
    for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.shape()[i];
    const std::size_t mid = x.shape()[axis];

    auto px = x.node(), pg = gate.node();
    auto n = make_op(x.shape(), {px, pg}, [px, pg, outer, mid, inner](TensorNode& self) {
        if (px->requires_grad) px->ensure_grad();
        if (pg->requires_grad) pg->ensure_grad();
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t m = 0; m < mid; ++m) {
                const std::size_t base = (o * mid + m) * inner;
                for (std::size_t i = 0; i < inner; ++i) {
                    const double g = self.grad[base + i];
                    if (g == 0.0) continue;
                    if (px->requires_grad) px->grad[base + i] += g * pg->value[m];
                    if (pg->requires_grad) pg->grad[m] += g * px->value[base + i];
                }
            }
    });
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t m = 0; m < mid; ++m) {
            const std::size_t base = (o * mid + m) * inner;
            for (std::size_t i = 0; i < inner; ++i)
                n->value[base + i] = px->value[base + i] * pg->value[m];
        }
    return Tensor(n);
}

Tensor gather_rows(const Tensor& probs, const std::vector<int>& labels) {
    if (probs.rank() != 2) throw DimensionError("gather_rows expects a matrix");
    const std::size_t rows = probs.shape()[0], cols = probs.shape()[1];
    if (labels.size() != rows) throw DimensionError("gather_rows: one label per row required");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= cols)
            throw LabelError("label " + std::to_string(y) + " out of range [0," +
                             std::to_string(cols) + ")");
    auto pp = probs.node();
    auto labels_copy = labels;
    auto n = make_op({rows}, {pp}, [pp, labels_copy, cols](TensorNode& self) {
        pp->ensure_grad();
        for (std::size_t r = 0; r < self.size(); ++r)
            pp->grad[r * cols + static_cast<std::size_t>(labels_copy[r])] += self.grad[r];
    });
    for (std::size_t r = 0; r < rows; ++r)
        n->value[r] = pp->value[r * cols + static_cast<std::size_t>(labels[r])];
    return Tensor(n);
}

Tensor sum_all(const Tensor& x) {
    auto px = x.node();
    auto n = make_op({1}, {px}, [px](TensorNode& self) {
        px->ensure_grad();
        for (std::size_t i = 0; i < px->size(); ++i) px->grad[i] += self.grad[0];
    });
    double acc = 0.0;
    for (double v : px->value) acc += v;
    n->value[0] = acc;
    return Tensor(n);
}

Tensor mean_all(const Tensor& x) {
    if (x.size() == 0) throw DimensionError("mean_all of empty tensor");
    auto px = x.node();
    const double inv = 1.0 / static_cast<double>(x.size());
    auto n = make_op({1}, {px}, [px, inv](TensorNode& self) {
        px->ensure_grad();
        for (std::size_t i = 0; i < px->size(); ++i) px->grad[i] += inv * self.grad[0];
    });
    double acc = 0.0;
    for (double v : px->value) acc += v;
    n->value[0] = acc * inv;
    return Tensor(n);
}

Tensor pairwise_euclidean(const Tensor& x) {
    if (x.rank() != 2) throw DimensionError("pairwise_euclidean expects a matrix");
    const std::size_t n_rows = x.shape()[0], d = x.shape()[1];
    auto px = x.node();
    auto n = make_op({n_rows, n_rows}, {px}, [px, n_rows, d](TensorNode& self) {
        px->ensure_grad();
        for (std::size_t i = 0; i < n_rows; ++i)
            for (std::size_t j = 0; j < n_rows; ++j) {
                const double g = self.grad[i * n_rows + j];
                const double dist = self.value[i * n_rows + j];
                if (g == 0.0 || dist == 0.0) continue;  // subgradient 0 at coincident rows
                for (std::size_t c = 0; c < d; ++c) {
                    const double diff = (px->value[i * d + c] - px->value[j * d + c]) / dist;
                    px->grad[i * d + c] += g * diff;
                    px->grad[j * d + c] -= g * diff;
                }
            }
    });
    for (std::size_t i = 0; i < n_rows; ++i) {
        n->value[i * n_rows + i] = 0.0;
        for (std::size_t j = i + 1; j < n_rows; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = px->value[i * d + c] - px->value[j * d + c];
                acc += diff * diff;
            }
            const double dist = std::sqrt(acc);
            n->value[i * n_rows + j] = dist;
            n->value[j * n_rows + i] = dist;
        }
    }
    return Tensor(n);
}

Tensor pairwise_sqdist(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[1])
        throw DimensionError("pairwise_sqdist: feature dimensions differ");
    const std::size_t n_a = a.shape()[0], n_b = b.shape()[0], d = a.shape()[1];
    auto pa = a.node(), pb = b.node();
    auto n = make_op({n_a, n_b}, {pa, pb}, [pa, pb, n_a, n_b, d](TensorNode& self) {
        if (pa->requires_grad) pa->ensure_grad();
        if (pb->requires_grad) pb->ensure_grad();
        for (std::size_t i = 0; i < n_a; ++i)
            for (std::size_t j = 0; j < n_b; ++j) {
                const double g = self.grad[i * n_b + j];
                if (g == 0.0) continue;
                for (std::size_t c = 0; c < d; ++c) {
                    const double diff = 2.0 * (pa->value[i * d + c] - pb->value[j * d + c]);
                    if (pa->requires_grad) pa->grad[i * d + c] += g * diff;
                    if (pb->requires_grad) pb->grad[j * d + c] -= g * diff;
                }
            }
    });
    for (std::size_t i = 0; i < n_a; ++i)
        for (std::size_t j = 0; j < n_b; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = pa->value[i * d + c] - pb->value[j * d + c];
                acc += diff * diff;
            }
            n->value[i * n_b + j] = acc;
        }
    return Tensor(n);
}

// ---------------------------------------------------------------------------

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw StateError("backward requires a defined scalar loss");
    auto root = loss.node();
    if (root->backward_done)
        throw StateError("backward already ran for this loss; re-run the forward pass");
    root->backward_done = true;
    if (!root->requires_grad) return;  // nothing reachable wants gradients

    // post-order over grad-requiring subgraph
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<TensorNode*, std::size_t>> stack{{root.get(), 0}};
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TensorNode* p = node->parents[idx++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // interior grads are scratch; leaf grads accumulate across calls
    for (TensorNode* node : order) {
        if (!node->leaf)
            node->grad.assign(node->value.size(), 0.0);
        else
            node->ensure_grad();
    }
    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        if (node->backprop) node->backprop(*node);
    }
}

}  // namespace admp
