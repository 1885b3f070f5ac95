#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace admp {

namespace detail {

struct TensorNode {
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated lazily on first backward
    bool requires_grad = false;
    bool leaf = true;
    bool backward_done = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backprop;

    std::size_t size() const { return value.size(); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

// Value-semantics handle to a node of a dynamically recorded computation
// graph. Leaf tensors (parameters, masks, inputs) persist across forward
// passes; op results hold the recorded graph alive until dropped.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double value, bool requires_grad = false);
    static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor from_vector(const std::vector<double>& v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::size_t>& shape() const;
    std::size_t size() const;
    std::size_t rank() const { return shape().size(); }
    bool requires_grad() const;

    const std::vector<double>& data() const;
    std::vector<double>& data();  // leaves only; use for in-place parameter updates
    bool has_grad() const;
    const std::vector<double>& grad() const;
    void zero_grad();

    double item() const;  // scalar tensors

    // Detached deep copy: fresh leaf carrying the same values, no history.
    Tensor clone(bool requires_grad) const;

    std::shared_ptr<detail::TensorNode> node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<detail::TensorNode> node_;
};

// elementwise
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor affine(const Tensor& x, double scale, double shift);  // scale * x + shift
Tensor relu(const Tensor& x);
Tensor abs_val(const Tensor& x);
Tensor exp_val(const Tensor& x);
// log with probability floor: values below `floor` clamp to log(floor) and
// stop gradient, matching the cross-entropy clamping contract.
Tensor log_clamped(const Tensor& x, double floor);

// linear algebra / structure
Tensor matmul(const Tensor& a, const Tensor& b);         // [m,k] x [k,n]
Tensor add_rowvec(const Tensor& mat, const Tensor& vec); // broadcast vec over rows
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias);
Tensor reshape(const Tensor& x, std::vector<std::size_t> shape);
Tensor softmax_rows(const Tensor& x);  // max-subtracted, rows sum to 1

// multiply slices along `axis` by gate[axis index]; used for channel gating
// of activations and for scaling weight filters by a soft mask
Tensor scale_axis(const Tensor& x, const Tensor& gate, std::size_t axis);

// pick probs[i, labels[i]] -> vector of length batch
Tensor gather_rows(const Tensor& probs, const std::vector<int>& labels);

// reductions
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// pairwise row geometry
Tensor pairwise_euclidean(const Tensor& x);                    // [n,n] distances
Tensor pairwise_sqdist(const Tensor& a, const Tensor& b);      // [n,m] squared distances

// Reverse-mode sweep from a scalar loss. Accumulates into leaf grads;
// interior grads are scratch and reset per call. A second sweep from the
// same root without re-recording the graph is a StateError.
void backward(const Tensor& loss);

}  // namespace admp
