#include "himoe/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace himoe {

namespace {

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (const int d : shape) {
        if (d < 0) throw DimensionError("negative dimension in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

void ensure_grad(detail::Node& n) {
    if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
}

void check_2d(const Tensor& x, const char* op) {
    if (x.rank() != 2) {
        throw DimensionError(std::string(op) + ": expected 2-D tensor, got shape " + shape_str(x.shape()));
    }
}

// Rows/cols view: 1-D [n] is treated as a single row where allowed.
std::pair<int, int> as_rows_cols(const Tensor& x, const char* op) {
    if (x.rank() == 1) return {1, x.dim(0)};
    if (x.rank() == 2) return {x.dim(0), x.dim(1)};
    throw DimensionError(std::string(op) + ": expected 1-D or 2-D tensor, got shape " + shape_str(x.shape()));
}

}  // namespace

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

// ---- Tensor -------------------------------------------------------------

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    return from_data(shape, std::vector<double>(shape_numel(shape), 0.0), requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    return from_data(shape, std::vector<double>(shape_numel(shape), value), requires_grad);
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw DimensionError("from_data: shape " + shape_str(shape) + " wants " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(data.size()));
    }
    Tensor t;
    t.node_ = std::make_shared<detail::Node>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(data);
    t.node_->requires_grad = requires_grad;
    t.node_->is_leaf = true;
    return t;
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

int Tensor::rows() const {
    check_2d(*this, "rows");
    return dim(0);
}

int Tensor::cols() const {
    check_2d(*this, "cols");
    return dim(1);
}

std::span<double> Tensor::mutable_data() {
    detail::Node* n = node();
    if (!n->is_leaf) throw ContractError("mutable_data: only leaf tensors may be mutated");
    return n->value;
}

std::span<const double> Tensor::grad() const {
    const detail::Node* n = node();
    if (n->grad.empty()) throw ContractError("grad: no gradient present (backward not run?)");
    return n->grad;
}

void Tensor::zero_grad() { node()->grad.assign(node()->value.size(), 0.0); }

double Tensor::item() const {
    if (numel() != 1) throw ContractError("item: tensor has " + std::to_string(numel()) + " elements");
    return node()->value[0];
}

double Tensor::at(int r, int c) const {
    check_2d(*this, "at");
    return node()->value[static_cast<std::size_t>(r) * static_cast<std::size_t>(dim(1)) +
                         static_cast<std::size_t>(c)];
}

Tensor Tensor::detached_copy(bool requires_grad) const {
    return Tensor::from_data(shape(), std::vector<double>(data().begin(), data().end()), requires_grad);
}

Tensor make_op(std::vector<int> shape, std::vector<double> value, std::vector<Tensor> parents,
               std::function<void(detail::Node&)> backward_fn, const char* op) {
    Tensor t;
    t.node_ = std::make_shared<detail::Node>();
    t.node_->shape = std::move(shape);
    t.node_->value = std::move(value);
    t.node_->is_leaf = false;
    t.node_->op = op;
    bool needs = false;
    t.node_->parents.reserve(parents.size());
    for (const Tensor& p : parents) {
        needs = needs || p.requires_grad();
        t.node_->parents.push_back(p.node_);
    }
    t.node_->requires_grad = needs;
    if (needs) t.node_->backward_fn = std::move(backward_fn);
    return t;
}

void backward(const Tensor& loss) {
    detail::Node* root = loss.raw_node();
    if (!root) throw ContractError("backward: undefined tensor");
    if (root->numel() != 1) {
        throw ContractError("backward: loss must be scalar, got shape " + shape_str(root->shape));
    }
    if (root->backward_run) throw ContractError("backward: this forward result was already consumed");
    root->backward_run = true;
    if (!root->requires_grad) return;  // nothing reachable requires grad

    // Iterative post-order DFS: topological order with every parent before
    // its consumer, then traversed in reverse.
    std::vector<detail::Node*> topo;
    std::unordered_set<detail::Node*> visited;
    struct Frame {
        detail::Node* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root, 0});
    visited.insert(root);
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            detail::Node* p = f.node->parents[f.next_parent++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            topo.push_back(f.node);
            stack.pop_back();
        }
    }

    ensure_grad(*root);
    root->grad[0] = 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        detail::Node* n = *it;
        if (!n->is_leaf && n->backward_fn) n->backward_fn(*n);
    }
}

// ---- matrix ops -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul");
    check_2d(b, "matmul");
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) {
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    std::vector<double> out(static_cast<std::size_t>(m) * static_cast<std::size_t>(n), 0.0);
    const auto av = a.data();
    const auto bv = b.data();
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double aip = av[static_cast<std::size_t>(i) * k + p];
            if (aip == 0.0) continue;
            const std::size_t brow = static_cast<std::size_t>(p) * n;
            const std::size_t orow = static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) out[orow + j] += aip * bv[brow + j];
        }
    }
    return make_op(
        {m, n}, std::move(out), {a, b},
        [m, k, n](detail::Node& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            const auto& g = self.grad;
            if (pa.requires_grad) {
                ensure_grad(pa);  // ga += g . b^T
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        double acc = 0.0;
                        const std::size_t grow = static_cast<std::size_t>(i) * n;
                        const std::size_t brow = static_cast<std::size_t>(p) * n;
                        for (int j = 0; j < n; ++j) acc += g[grow + j] * pb.value[brow + j];
                        pa.grad[static_cast<std::size_t>(i) * k + p] += acc;
                    }
            }
            if (pb.requires_grad) {
                ensure_grad(pb);  // gb += a^T . g
                for (int p = 0; p < k; ++p)
                    for (int i = 0; i < m; ++i) {
                        const double aip = pa.value[static_cast<std::size_t>(i) * k + p];
                        if (aip == 0.0) continue;
                        const std::size_t grow = static_cast<std::size_t>(i) * n;
                        const std::size_t brow = static_cast<std::size_t>(p) * n;
                        for (int j = 0; j < n; ++j) pb.grad[brow + j] += aip * g[grow + j];
                    }
            }
        },
        "matmul");
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul_nt");
    check_2d(b, "matmul_nt");
    const int m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (k != b.dim(1)) {
        throw DimensionError("matmul_nt: inner dimensions disagree, " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()) + "^T");
    }
    std::vector<double> out(static_cast<std::size_t>(m) * static_cast<std::size_t>(n));
    const auto av = a.data();
    const auto bv = b.data();
    for (int i = 0; i < m; ++i) {
        const std::size_t arow = static_cast<std::size_t>(i) * k;
        for (int j = 0; j < n; ++j) {
            const std::size_t brow = static_cast<std::size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += av[arow + p] * bv[brow + p];
            out[static_cast<std::size_t>(i) * n + j] = acc;
        }
    }
    return make_op(
        {m, n}, std::move(out), {a, b},
        [m, k, n](detail::Node& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            const auto& g = self.grad;
            if (pa.requires_grad) {
                ensure_grad(pa);  // ga += g . b
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) {
                        const double gij = g[static_cast<std::size_t>(i) * n + j];
                        if (gij == 0.0) continue;
                        const std::size_t arow = static_cast<std::size_t>(i) * k;
                        const std::size_t brow = static_cast<std::size_t>(j) * k;
                        for (int p = 0; p < k; ++p) pa.grad[arow + p] += gij * pb.value[brow + p];
                    }
            }
            if (pb.requires_grad) {
                ensure_grad(pb);  // gb += g^T . a
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) {
                        const double gij = g[static_cast<std::size_t>(i) * n + j];
                        if (gij == 0.0) continue;
                        const std::size_t arow = static_cast<std::size_t>(i) * k;
                        const std::size_t brow = static_cast<std::size_t>(j) * k;
                        for (int p = 0; p < k; ++p) pb.grad[brow + p] += gij * pa.value[arow + p];
                    }
            }
        },
        "matmul_nt");
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    check_2d(x, "affine");
    check_2d(w, "affine");
    if (b.rank() != 1) throw DimensionError("affine: bias must be 1-D, got " + shape_str(b.shape()));
    const int batch = x.dim(0), in = x.dim(1), out_dim = w.dim(0);
    if (w.dim(1) != in || b.dim(0) != out_dim) {
        throw DimensionError("affine: incompatible shapes x" + shape_str(x.shape()) + " w" +
                             shape_str(w.shape()) + " b" + shape_str(b.shape()));
    }
    std::vector<double> out(static_cast<std::size_t>(batch) * out_dim);
    const auto xv = x.data();
    const auto wv = w.data();
    const auto bv = b.data();
    for (int i = 0; i < batch; ++i) {
        const std::size_t xrow = static_cast<std::size_t>(i) * in;
        for (int o = 0; o < out_dim; ++o) {
            const std::size_t wrow = static_cast<std::size_t>(o) * in;
            double acc = bv[o];
            for (int p = 0; p < in; ++p) acc += xv[xrow + p] * wv[wrow + p];
            out[static_cast<std::size_t>(i) * out_dim + o] = acc;
        }
    }
    return make_op(
        {batch, out_dim}, std::move(out), {x, w, b},
        [batch, in, out_dim](detail::Node& self) {
            auto& px = *self.parents[0];
            auto& pw = *self.parents[1];
            auto& pb = *self.parents[2];
            const auto& g = self.grad;
            if (px.requires_grad) {
                ensure_grad(px);
                for (int i = 0; i < batch; ++i)
                    for (int o = 0; o < out_dim; ++o) {
                        const double gio = g[static_cast<std::size_t>(i) * out_dim + o];
                        if (gio == 0.0) continue;
                        const std::size_t xrow = static_cast<std::size_t>(i) * in;
                        const std::size_t wrow = static_cast<std::size_t>(o) * in;
                        for (int p = 0; p < in; ++p) px.grad[xrow + p] += gio * pw.value[wrow + p];
                    }
            }
            if (pw.requires_grad) {
                ensure_grad(pw);
                for (int i = 0; i < batch; ++i)
                    for (int o = 0; o < out_dim; ++o) {
                        const double gio = g[static_cast<std::size_t>(i) * out_dim + o];
                        if (gio == 0.0) continue;
                        const std::size_t xrow = static_cast<std::size_t>(i) * in;
                        const std::size_t wrow = static_cast<std::size_t>(o) * in;
                        for (int p = 0; p < in; ++p) pw.grad[wrow + p] += gio * px.value[xrow + p];
                    }
            }
            if (pb.requires_grad) {
                ensure_grad(pb);
                for (int i = 0; i < batch; ++i)
                    for (int o = 0; o < out_dim; ++o)
                        pb.grad[o] += g[static_cast<std::size_t>(i) * out_dim + o];
            }
        },
        "affine");
}

// ---- elementwise ------------------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Tensor binary_elementwise(const Tensor& a, const Tensor& b, Fwd fwd, Bwd bwd, const char* name) {
    check_same_shape(a, b, name);
    std::vector<double> out(a.numel());
    const auto av = a.data();
    const auto bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
    return make_op(
        a.shape(), std::move(out), {a, b},
        [bwd](detail::Node& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            const bool ga = pa.requires_grad, gb = pb.requires_grad;
            if (ga) ensure_grad(pa);
            if (gb) ensure_grad(pb);
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                bwd(self.grad[i], pa.value[i], pb.value[i], ga ? &pa.grad[i] : nullptr,
                    gb ? &pb.grad[i] : nullptr);
            }
        },
        name);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, [](double x, double y) { return x + y; },
        [](double g, double, double, double* ga, double* gb) {
            if (ga) *ga += g;
            if (gb) *gb += g;
        },
        "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, [](double x, double y) { return x - y; },
        [](double g, double, double, double* ga, double* gb) {
            if (ga) *ga += g;
            if (gb) *gb -= g;
        },
        "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        a, b, [](double x, double y) { return x * y; },
        [](double g, double x, double y, double* ga, double* gb) {
            if (ga) *ga += g * y;
            if (gb) *gb += g * x;
        },
        "mul");
}

Tensor apply_unary(const Tensor& x, const std::function<double(double)>& f,
                   const std::function<double(double, double)>& df, const char* name) {
    std::vector<double> out(x.numel());
    const auto xv = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
    return make_op(
        x.shape(), std::move(out), {x},
        [df](detail::Node& self) {
            auto& px = *self.parents[0];
            ensure_grad(px);
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                px.grad[i] += self.grad[i] * df(px.value[i], self.value[i]);
            }
        },
        name);
}

Tensor scale(const Tensor& x, double c) {
    return apply_unary(
        x, [c](double v) { return v * c; }, [c](double, double) { return c; }, "scale");
}

Tensor add_scalar(const Tensor& x, double c) {
    return apply_unary(
        x, [c](double v) { return v + c; }, [](double, double) { return 1.0; }, "add_scalar");
}

Tensor tanh_op(const Tensor& x) {
    return apply_unary(
        x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; }, "tanh");
}

Tensor sigmoid(const Tensor& x) {
    return apply_unary(
        x,
        [](double v) {
            // Split on sign so exp never overflows.
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); }, "sigmoid");
}

Tensor exp_op(const Tensor& x) {
    return apply_unary(
        x, [](double v) { return std::exp(v); }, [](double, double y) { return y; }, "exp");
}

Tensor log_op(const Tensor& x) {
    return apply_unary(
        x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; }, "log");
}

// ---- broadcast helpers --------------------------------------------------------

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    check_2d(x, "add_rowvec");
    if (v.rank() != 1 || v.dim(0) != x.dim(1)) {
        throw DimensionError("add_rowvec: x" + shape_str(x.shape()) + " vs v" + shape_str(v.shape()));
    }
    const int b = x.dim(0), n = x.dim(1);
    std::vector<double> out(x.numel());
    const auto xv = x.data();
    const auto vv = v.data();
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(i) * n + j] = xv[static_cast<std::size_t>(i) * n + j] + vv[j];
    return make_op(
        {b, n}, std::move(out), {x, v},
        [b, n](detail::Node& self) {
            auto& px = *self.parents[0];
            auto& pv = *self.parents[1];
            if (px.requires_grad) {
                ensure_grad(px);
                for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
            }
            if (pv.requires_grad) {
                ensure_grad(pv);
                for (int i = 0; i < b; ++i)
                    for (int j = 0; j < n; ++j) pv.grad[j] += self.grad[static_cast<std::size_t>(i) * n + j];
            }
        },
        "add_rowvec");
}

Tensor add_scaled_rowvec(const Tensor& x, const Tensor& v, const std::vector<double>& row_coeff) {
    check_2d(x, "add_scaled_rowvec");
    const int b = x.dim(0), n = x.dim(1);
    if (v.rank() != 1 || v.dim(0) != n) {
        throw DimensionError("add_scaled_rowvec: x" + shape_str(x.shape()) + " vs v" + shape_str(v.shape()));
    }
    if (static_cast<int>(row_coeff.size()) != b) {
        throw DimensionError("add_scaled_rowvec: coeff size " + std::to_string(row_coeff.size()) +
                             " vs rows " + std::to_string(b));
    }
    std::vector<double> out(x.numel());
    const auto xv = x.data();
    const auto vv = v.data();
    for (int i = 0; i < b; ++i) {
        const double c = row_coeff[static_cast<std::size_t>(i)];
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(i) * n + j] = xv[static_cast<std::size_t>(i) * n + j] + c * vv[j];
    }
    return make_op(
        {b, n}, std::move(out), {x, v},
        [b, n, row_coeff](detail::Node& self) {
            auto& px = *self.parents[0];
            auto& pv = *self.parents[1];
            if (px.requires_grad) {
                ensure_grad(px);
                for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
            }
            if (pv.requires_grad) {
                ensure_grad(pv);
                for (int i = 0; i < b; ++i) {
                    const double c = row_coeff[static_cast<std::size_t>(i)];
                    if (c == 0.0) continue;
                    for (int j = 0; j < n; ++j)
                        pv.grad[j] += c * self.grad[static_cast<std::size_t>(i) * n + j];
                }
            }
        },
        "add_scaled_rowvec");
}

Tensor mul_colvec(const Tensor& x, const Tensor& c) {
    check_2d(x, "mul_colvec");
    check_2d(c, "mul_colvec");
    const int b = x.dim(0), n = x.dim(1);
    if (c.dim(0) != b || c.dim(1) != 1) {
        throw DimensionError("mul_colvec: x" + shape_str(x.shape()) + " vs c" + shape_str(c.shape()));
    }
    std::vector<double> out(x.numel());
    const auto xv = x.data();
    const auto cv = c.data();
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(i) * n + j] = xv[static_cast<std::size_t>(i) * n + j] * cv[i];
    return make_op(
        {b, n}, std::move(out), {x, c},
        [b, n](detail::Node& self) {
            auto& px = *self.parents[0];
            auto& pc = *self.parents[1];
            if (px.requires_grad) {
                ensure_grad(px);
                for (int i = 0; i < b; ++i)
                    for (int j = 0; j < n; ++j)
                        px.grad[static_cast<std::size_t>(i) * n + j] +=
                            self.grad[static_cast<std::size_t>(i) * n + j] * pc.value[i];
            }
            if (pc.requires_grad) {
                ensure_grad(pc);
                for (int i = 0; i < b; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j)
                        acc += self.grad[static_cast<std::size_t>(i) * n + j] *
                               px.value[static_cast<std::size_t>(i) * n + j];
                    pc.grad[i] += acc;
                }
            }
        },
        "mul_colvec");
}

Tensor col(const Tensor& x, int j) {
    check_2d(x, "col");
    const int b = x.dim(0), n = x.dim(1);
    if (j < 0 || j >= n) throw DimensionError("col: index " + std::to_string(j) + " out of " + std::to_string(n));
    std::vector<double> out(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i) out[static_cast<std::size_t>(i)] = x.data()[static_cast<std::size_t>(i) * n + j];
    return make_op(
        {b, 1}, std::move(out), {x},
        [n, j, b](detail::Node& self) {
            auto& px = *self.parents[0];
            ensure_grad(px);
            for (int i = 0; i < b; ++i) px.grad[static_cast<std::size_t>(i) * n + j] += self.grad[i];
        },
        "col");
}

Tensor hstack(const std::vector<Tensor>& columns) {
    if (columns.empty()) throw DimensionError("hstack: no columns");
    const int b = columns[0].dim(0);
    const int m = static_cast<int>(columns.size());
    for (const Tensor& c : columns) {
        check_2d(c, "hstack");
        if (c.dim(0) != b || c.dim(1) != 1) {
            throw DimensionError("hstack: every column must be [" + std::to_string(b) + ",1], got " +
                                 shape_str(c.shape()));
        }
    }
    std::vector<double> out(static_cast<std::size_t>(b) * m);
    for (int j = 0; j < m; ++j) {
        const auto cv = columns[static_cast<std::size_t>(j)].data();
        for (int i = 0; i < b; ++i) out[static_cast<std::size_t>(i) * m + j] = cv[i];
    }
    return make_op(
        {b, m}, std::move(out), columns,
        [b, m](detail::Node& self) {
            for (int j = 0; j < m; ++j) {
                auto& p = *self.parents[static_cast<std::size_t>(j)];
                if (!p.requires_grad) continue;
                ensure_grad(p);
                for (int i = 0; i < b; ++i) p.grad[i] += self.grad[static_cast<std::size_t>(i) * m + j];
            }
        },
        "hstack");
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    check_2d(a, "concat_rows");
    check_2d(b, "concat_rows");
    if (a.dim(1) != b.dim(1)) {
        throw DimensionError("concat_rows: column mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
    const int ra = a.dim(0), rb = b.dim(0), n = a.dim(1);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(ra + rb) * n);
    out.insert(out.end(), a.data().begin(), a.data().end());
    out.insert(out.end(), b.data().begin(), b.data().end());
    return make_op(
        {ra + rb, n}, std::move(out), {a, b},
        [ra, rb, n](detail::Node& self) {
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                ensure_grad(pa);
                for (std::size_t i = 0; i < static_cast<std::size_t>(ra) * n; ++i) pa.grad[i] += self.grad[i];
            }
            if (pb.requires_grad) {
                ensure_grad(pb);
                const std::size_t off = static_cast<std::size_t>(ra) * n;
                for (std::size_t i = 0; i < static_cast<std::size_t>(rb) * n; ++i)
                    pb.grad[i] += self.grad[off + i];
            }
        },
        "concat_rows");
}

Tensor reshape(const Tensor& x, std::vector<int> new_shape) {
    if (shape_numel(new_shape) != x.numel()) {
        throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(new_shape) +
                             " changes element count");
    }
    return make_op(
        std::move(new_shape), std::vector<double>(x.data().begin(), x.data().end()), {x},
        [](detail::Node& self) {
            auto& px = *self.parents[0];
            ensure_grad(px);
            for (std::size_t i = 0; i < self.grad.size(); ++i) px.grad[i] += self.grad[i];
        },
        "reshape");
}

Tensor gather_rows(const Tensor& x, const std::vector<int>& rows) {
    check_2d(x, "gather_rows");
    const int b = x.dim(0), n = x.dim(1);
    for (const int r : rows) {
        if (r < 0 || r >= b) throw DimensionError("gather_rows: row " + std::to_string(r) + " out of " + std::to_string(b));
    }
    std::vector<double> out(rows.size() * static_cast<std::size_t>(n));
    const auto xv = x.data();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t src = static_cast<std::size_t>(rows[i]) * n;
        for (int j = 0; j < n; ++j) out[i * n + j] = xv[src + j];
    }
    return make_op(
        {static_cast<int>(rows.size()), n}, std::move(out), {x},
        [rows, n](detail::Node& self) {
            auto& px = *self.parents[0];
            ensure_grad(px);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const std::size_t dst = static_cast<std::size_t>(rows[i]) * n;
                for (int j = 0; j < n; ++j) px.grad[dst + j] += self.grad[i * n + j];
            }
        },
        "gather_rows");
}

Tensor mask_rows(const Tensor& x, const std::vector<std::uint8_t>& keep) {
    check_2d(x, "mask_rows");
    const int b = x.dim(0), n = x.dim(1);
    if (static_cast<int>(keep.size()) != b) {
        throw DimensionError("mask_rows: mask size " + std::to_string(keep.size()) + " vs rows " +
                             std::to_string(b));
    }
    std::vector<double> out(x.numel(), 0.0);
    const auto xv = x.data();
    for (int i = 0; i < b; ++i) {
        if (!keep[static_cast<std::size_t>(i)]) continue;  // row stays exactly 0.0
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(i) * n + j] = xv[static_cast<std::size_t>(i) * n + j];
    }
    return make_op(
        {b, n}, std::move(out), {x},
        [keep, n, b](detail::Node& self) {
            auto& px = *self.parents[0];
            ensure_grad(px);
            for (int i = 0; i < b; ++i) {
                if (!keep[static_cast<std::size_t>(i)]) continue;
                for (int j = 0; j < n; ++j)
                    px.grad[static_cast<std::size_t>(i) * n + j] += self.grad[static_cast<std::size_t>(i) * n + j];
            }
        },
        "mask_rows");
}

// ---- reductions ---------------------------------------------------------------

Tensor sum_all(const Tensor& x) {
    double acc = 0.0;
    for (const double v : x.data()) acc += v;
    return make_op(
        {1}, {acc}, {x},
        [](detail::Node& self) {
            auto& px = *self.parents[0];
            ensure_grad(px);
            const double g = self.grad[0];
            for (double& gi : px.grad) gi += g;
        },
        "sum_all");
}

Tensor mean_all(const Tensor& x) {
    if (x.numel() == 0) throw DimensionError("mean_all: empty tensor");
    double acc = 0.0;
    for (const double v : x.data()) acc += v;
    const double inv = 1.0 / static_cast<double>(x.numel());
    return make_op(
        {1}, {acc * inv}, {x},
        [inv](detail::Node& self) {
            auto& px = *self.parents[0];
            ensure_grad(px);
            const double g = self.grad[0] * inv;
            for (double& gi : px.grad) gi += g;
        },
        "mean_all");
}

Tensor sum_rows(const Tensor& x) {
    check_2d(x, "sum_rows");
    const int b = x.dim(0), n = x.dim(1);
    std::vector<double> out(static_cast<std::size_t>(b), 0.0);
    const auto xv = x.data();
    for (int i = 0; i < b; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += xv[static_cast<std::size_t>(i) * n + j];
        out[static_cast<std::size_t>(i)] = acc;
    }
    return make_op(
        {b, 1}, std::move(out), {x},
        [b, n](detail::Node& self) {
            auto& px = *self.parents[0];
            ensure_grad(px);
            for (int i = 0; i < b; ++i) {
                const double g = self.grad[i];
                for (int j = 0; j < n; ++j) px.grad[static_cast<std::size_t>(i) * n + j] += g;
            }
        },
        "sum_rows");
}

// ---- softmax / normalization ----------------------------------------------------

namespace {

// Softmax over contiguous strided slices. For rows: count=b, len=n, stride 1,
// slice offset i*n. For columns: count=n, len=b, stride n, offset j.
Tensor softmax_strided(const Tensor& x, int count, int len, std::size_t slice_step, std::size_t elem_stride) {
    std::vector<double> out(x.numel());
    const auto xv = x.data();
    for (int s = 0; s < count; ++s) {
        const std::size_t base = static_cast<std::size_t>(s) * slice_step;
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < len; ++j) mx = std::max(mx, xv[base + static_cast<std::size_t>(j) * elem_stride]);
        double denom = 0.0;
        for (int j = 0; j < len; ++j) {
            const std::size_t idx = base + static_cast<std::size_t>(j) * elem_stride;
            out[idx] = std::exp(xv[idx] - mx);
            denom += out[idx];
        }
        const double inv = 1.0 / denom;
        for (int j = 0; j < len; ++j) out[base + static_cast<std::size_t>(j) * elem_stride] *= inv;
    }
    return make_op(
        x.shape(), std::move(out), {x},
        [count, len, slice_step, elem_stride](detail::Node& self) {
            auto& px = *self.parents[0];
            ensure_grad(px);
            for (int s = 0; s < count; ++s) {
                const std::size_t base = static_cast<std::size_t>(s) * slice_step;
                double dot = 0.0;
                for (int j = 0; j < len; ++j) {
                    const std::size_t idx = base + static_cast<std::size_t>(j) * elem_stride;
                    dot += self.grad[idx] * self.value[idx];
                }
                for (int j = 0; j < len; ++j) {
                    const std::size_t idx = base + static_cast<std::size_t>(j) * elem_stride;
                    px.grad[idx] += self.value[idx] * (self.grad[idx] - dot);
                }
            }
        },
        "softmax");
}

}  // namespace

Tensor softmax(const Tensor& x) {
    const auto [b, n] = as_rows_cols(x, "softmax");
    if (n < 1) throw DimensionError("softmax: empty axis");
    return softmax_strided(x, b, n, static_cast<std::size_t>(n), 1);
}

Tensor softmax_axis(const Tensor& x, int axis) {
    if (x.rank() == 1) {
        if (axis != 0) throw DimensionError("softmax_axis: 1-D tensor only has axis 0");
        return softmax(x);
    }
    check_2d(x, "softmax_axis");
    const int b = x.dim(0), n = x.dim(1);
    if (axis == 1) return softmax(x);
    if (axis == 0) return softmax_strided(x, n, b, 1, static_cast<std::size_t>(n));
    throw DimensionError("softmax_axis: axis must be 0 or 1");
}

Tensor l2_normalize(const Tensor& x) {
    const auto [b, n] = as_rows_cols(x, "l2_normalize");
    std::vector<double> out(x.numel(), 0.0);
    std::vector<double> norms(static_cast<std::size_t>(b), 0.0);
    const auto xv = x.data();
    for (int i = 0; i < b; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * n;
        double sq = 0.0;
        for (int j = 0; j < n; ++j) sq += xv[base + j] * xv[base + j];
        const double norm = std::sqrt(sq);
        norms[static_cast<std::size_t>(i)] = norm;
        if (norm > kL2Eps) {
            const double inv = 1.0 / norm;
            for (int j = 0; j < n; ++j) out[base + j] = xv[base + j] * inv;
        }
        // else: degenerate row maps to exact zero
    }
    return make_op(
        x.shape(), std::move(out), {x},
        [b, n, norms](detail::Node& self) {
            auto& px = *self.parents[0];
            ensure_grad(px);
            for (int i = 0; i < b; ++i) {
                const double norm = norms[static_cast<std::size_t>(i)];
                if (norm <= kL2Eps) continue;
                const std::size_t base = static_cast<std::size_t>(i) * n;
                double dot = 0.0;
                for (int j = 0; j < n; ++j) dot += self.grad[base + j] * self.value[base + j];
                const double inv = 1.0 / norm;
                for (int j = 0; j < n; ++j)
                    px.grad[base + j] += (self.grad[base + j] - self.value[base + j] * dot) * inv;
            }
        },
        "l2_normalize");
}

Tensor logsumexp_rows(const Tensor& x) {
    check_2d(x, "logsumexp_rows");
    const int b = x.dim(0), n = x.dim(1);
    std::vector<double> out(static_cast<std::size_t>(b));
    const auto xv = x.data();
    for (int i = 0; i < b; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * n;
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) mx = std::max(mx, xv[base + j]);
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += std::exp(xv[base + j] - mx);
        out[static_cast<std::size_t>(i)] = mx + std::log(acc);
    }
    return make_op(
        {b, 1}, std::move(out), {x},
        [b, n](detail::Node& self) {
            auto& px = *self.parents[0];
            ensure_grad(px);
            for (int i = 0; i < b; ++i) {
                const double g = self.grad[i];
                if (g == 0.0) continue;
                const std::size_t base = static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j)
                    px.grad[base + j] += g * std::exp(px.value[base + j] - self.value[i]);
            }
        },
        "logsumexp_rows");
}

// ---- finite-difference oracle -----------------------------------------------

FiniteDiffReport finite_diff_check(const std::function<Tensor()>& loss_fn,
                                   const std::vector<NamedParam>& params, double h) {
    if (h <= 0.0) throw ContractError("finite_diff_check: h must be positive");

    const double v1 = loss_fn().item();
    const double v2 = loss_fn().item();
    if (std::memcmp(&v1, &v2, sizeof(double)) != 0) {
        throw ContractError("finite_diff_check: two forward passes disagree; f is non-deterministic");
    }

    for (const NamedParam& p : params) {
        Tensor t = p.tensor;
        t.zero_grad();
    }
    Tensor loss = loss_fn();
    backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const NamedParam& p : params) {
        if (p.tensor.has_grad()) {
            analytic.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
        } else {
            analytic.emplace_back(p.tensor.numel(), 0.0);
        }
    }

    FiniteDiffReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor t = params[pi].tensor;
        auto values = t.mutable_data();
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + h;
            const double fp = loss_fn().item();
            values[i] = saved - h;
            const double fm = loss_fn().item();
            values[i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[pi][i];
            const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a));
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = params[pi].name;
                report.worst_coord = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    for (const NamedParam& p : params) {
        Tensor t = p.tensor;
        t.zero_grad();
    }
    return report;
}

}  // namespace himoe
