#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "himoe/errors.hpp"

namespace himoe {

namespace detail {

struct Node {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized lazily during backward
    bool requires_grad = false;
    bool is_leaf = true;
    bool backward_run = false;  // set on the root once consumed
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    // Accumulates d(loss)/d(parent) into each parent's grad buffer,
    // reading d(loss)/d(self) from this->grad.
    std::function<void(Node&)> backward_fn;

    std::size_t numel() const { return value.size(); }
};

}  // namespace detail

// Dense row-major float64 tensor participating in a reverse-mode gradient
// tape. The tape is the implicit DAG of nodes reachable from a loss value;
// it lives exactly as long as the tensors of one forward pass. Leaves
// (parameters, constants) are the only mutable tensors, and only through
// mutable_data().
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor from_data(std::vector<int> shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node()->shape; }
    int rank() const { return static_cast<int>(node()->shape.size()); }
    int dim(int i) const { return node()->shape[static_cast<std::size_t>(i)]; }
    std::size_t numel() const { return node()->numel(); }
    int rows() const;
    int cols() const;

    std::span<const double> data() const { return node()->value; }
    // Leaf-only mutation (parameter updates, finite-difference probes).
    std::span<double> mutable_data();

    bool requires_grad() const { return node()->requires_grad; }
    bool has_grad() const { return !node()->grad.empty(); }
    std::span<const double> grad() const;
    void zero_grad();

    double item() const;
    double at(int r, int c) const;  // 2-D convenience accessor

    // Deep copy of values into a fresh leaf (drops graph history).
    Tensor detached_copy(bool requires_grad = false) const;

    friend void backward(const Tensor& loss);
    friend Tensor make_op(std::vector<int> shape, std::vector<double> value,
                          std::vector<Tensor> parents,
                          std::function<void(detail::Node&)> backward_fn, const char* op);
    friend std::span<double> grad_buffer(const Tensor& t);
    detail::Node* raw_node() const { return node_.get(); }

private:
    std::shared_ptr<detail::Node> node_;
    detail::Node* node() const {
        if (!node_) throw ContractError("use of undefined tensor");
        return node_.get();
    }
};

// ---- autograd entry points -------------------------------------------------

// Reverse pass from a scalar loss. Populates grad on every requires_grad
// leaf reachable from it. A given forward result can be consumed once.
void backward(const Tensor& loss);

// ---- op set -----------------------------------------------------------------
// All binary elementwise ops require identical shapes; shape violations throw
// DimensionError with both shapes in the message.

Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k]x[k,n] -> [m,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k]x[n,k]^T -> [m,n]
// x:[B,in], w:[out,in], b:[out] -> [B,out]
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);

Tensor tanh_op(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp_op(const Tensor& x);
Tensor log_op(const Tensor& x);  // caller guards positivity (see kLogEps users)

// Broadcast helpers over 2-D tensors.
Tensor add_rowvec(const Tensor& x, const Tensor& v);                 // x:[B,n] + v:[n]
Tensor add_scaled_rowvec(const Tensor& x, const Tensor& v,
                         const std::vector<double>& row_coeff);      // x + coeff[b]*v
Tensor mul_colvec(const Tensor& x, const Tensor& c);                 // x:[B,n] * c:[B,1]
Tensor col(const Tensor& x, int j);                                  // -> [B,1]
Tensor hstack(const std::vector<Tensor>& columns);                   // M x [B,1] -> [B,M]
Tensor concat_rows(const Tensor& a, const Tensor& b);                // [A,n];[B,n] -> [A+B,n]
Tensor reshape(const Tensor& x, std::vector<int> new_shape);         // same numel, row-major view
Tensor gather_rows(const Tensor& x, const std::vector<int>& rows);   // -> [R,n]
// Rows where keep[b]==0 become exactly 0.0 (bitwise), regardless of input
// contents; their gradient is likewise zeroed.
Tensor mask_rows(const Tensor& x, const std::vector<std::uint8_t>& keep);

// Reductions.
Tensor sum_all(const Tensor& x);   // -> [1]
Tensor mean_all(const Tensor& x);  // -> [1]
Tensor sum_rows(const Tensor& x);  // [B,n] -> [B,1]

// Row-wise softmax with max-subtraction; 1-D input treated as a single row.
Tensor softmax(const Tensor& x);
Tensor softmax_axis(const Tensor& x, int axis);  // 2-D: axis 0 = down columns, 1 = along rows
// Row-wise l2 normalization; rows with norm <= kL2Eps map to exact zero.
Tensor l2_normalize(const Tensor& x);
// Row-wise log(sum(exp(x))) stabilized with the detached row max. Entries
// <= -1e30 underflow to exact zero weight, which is how masked cells are
// excluded from NT-Xent denominators.
Tensor logsumexp_rows(const Tensor& x);

// Generic elementwise op for composition and for test fixtures that need a
// deliberately wrong derivative. df receives (x, f(x)).
Tensor apply_unary(const Tensor& x, const std::function<double(double)>& f,
                   const std::function<double(double, double)>& df, const char* name = "unary");

inline constexpr double kL2Eps = 1e-12;
inline constexpr double kLogEps = 1e-12;

// ---- finite-difference oracle ------------------------------------------------

struct NamedParam {
    std::string name;
    Tensor tensor;
};

struct FiniteDiffReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_coord = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// Central-difference gradient check of a deterministic scalar function.
// relative error = |analytic - numeric| / max(1, |analytic|), maximized over
// every coordinate of every parameter. Throws ContractError if two forward
// evaluations differ bitwise (non-deterministic f).
FiniteDiffReport finite_diff_check(const std::function<Tensor()>& loss_fn,
                                   const std::vector<NamedParam>& params, double h = 1e-5);

// Low-level node constructor, exposed so modules can define fused ops.
Tensor make_op(std::vector<int> shape, std::vector<double> value, std::vector<Tensor> parents,
               std::function<void(detail::Node&)> backward_fn, const char* op);

std::string shape_str(const std::vector<int>& shape);

}  // namespace himoe
