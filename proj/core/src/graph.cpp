#include "texim/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "texim/error.hpp"

namespace texim::nn {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        fail(ErrorCode::kShapeMismatch, std::string(op) + ": shape " + a.shape_string() + " vs " + b.shape_string());
}

Tensor like(const Tensor& t) { return Tensor(t.shape(), 0.0); }

// c += a * b for row-major a: m x k, b: k x n.
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// c += a * b^T for a: m x k, b: n x k. Transposing b first keeps the inner
// loop a contiguous axpy.
void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                 std::size_t n) {
    thread_local std::vector<double> bt;
    bt.resize(k * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
    gemm_acc(a, bt.data(), c, m, k, n);
}

// c += a^T * b for a: k x m, b: k x n.
void gemm_tn_acc(const double* a, const double* b, double* c, std::size_t k, std::size_t m,
                 std::size_t n) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * m;
        const double* brow = b + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

Tensor matrix_of(std::size_t rows, std::size_t cols) { return Tensor::matrix(rows, cols, 0.0); }

}  // namespace

// ---- Graph ---------------------------------------------------------------

Var Graph::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}});
    return Var{nodes_.size() - 1};
}

Var Graph::param(const Parameter& p) {
    for (const auto& [bound, id] : bound_) {
        if (bound == &p) return Var{id};
    }
    nodes_.push_back(Node{{}, {}, p.trainable, &p.value, {}});
    const std::size_t id = nodes_.size() - 1;
    bound_.emplace_back(&p, id);
    return Var{id};
}

Tensor& Graph::grad(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = like(n.view ? *n.view : n.value);
    return n.grad;
}

Var Graph::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
    bool needs = false;
    for (Var v : inputs) needs = needs || nodes_[v.id].needs_grad;
    nodes_.push_back(Node{std::move(value), {}, needs, nullptr, {}});
    if (needs) nodes_.back().backward = std::move(backward);
    return Var{nodes_.size() - 1};
}

void Graph::backward(Var loss, double scale) {
    require(nodes_[loss.id].value.size() == 1, ErrorCode::kShapeMismatch,
            "backward: loss must be a scalar");
    if (!nodes_[loss.id].needs_grad) return;
    grad(loss.id)[0] += scale;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.needs_grad || n.grad.empty()) continue;
        if (n.backward) n.backward(*this, i);
    }
    for (const auto& [p, id] : bound_) {
        const Node& n = nodes_[id];
        if (!p->trainable || n.grad.empty()) continue;
        auto dst = p->grad.values();
        auto src = n.grad.values();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
}

// ---- linear algebra ----------------------------------------------------

Var matmul(Graph& g, Var a, Var b) {
    const Tensor& A = g.value(a);
    const Tensor& B = g.value(b);
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    if (B.rows() != k) fail(ErrorCode::kShapeMismatch, "matmul: " + A.shape_string() + " x " + B.shape_string());
    Tensor C = matrix_of(m, n);
    gemm_acc(A.data(), B.data(), C.data(), m, k, n);
    const Var in[] = {a, b};
    return g.record(std::move(C), in, [a, b, m, k, n](Graph& g, std::size_t self) {
        const Tensor& dC = g.grad(self);
        if (g.needs_grad(a)) gemm_nt_acc(dC.data(), g.value(b).data(), g.grad(a.id).data(), m, n, k);
        if (g.needs_grad(b)) gemm_tn_acc(g.value(a).data(), dC.data(), g.grad(b.id).data(), m, k, n);
    });
}

Var add(Graph& g, Var a, Var b) {
    check_same_shape(g.value(a), g.value(b), "add");
    Tensor out = g.value(a);
    const auto bv = g.value(b).values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    const Var in[] = {a, b};
    return g.record(std::move(out), in, [a, b](Graph& g, std::size_t self) {
        const Tensor& d = g.grad(self);
        for (Var v : {a, b}) {
            if (!g.needs_grad(v)) continue;
            Tensor& gv = g.grad(v.id);
            for (std::size_t i = 0; i < d.size(); ++i) gv[i] += d[i];
        }
    });
}

Var sub(Graph& g, Var a, Var b) { return add(g, a, scale(g, b, -1.0)); }

Var mul(Graph& g, Var a, Var b) {
    check_same_shape(g.value(a), g.value(b), "mul");
    Tensor out = g.value(a);
    const auto bv = g.value(b).values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    const Var in[] = {a, b};
    return g.record(std::move(out), in, [a, b](Graph& g, std::size_t self) {
        const Tensor& d = g.grad(self);
        if (g.needs_grad(a)) {
            Tensor& ga = g.grad(a.id);
            const Tensor& B = g.value(b);
            for (std::size_t i = 0; i < d.size(); ++i) ga[i] += d[i] * B[i];
        }
        if (g.needs_grad(b)) {
            Tensor& gb = g.grad(b.id);
            const Tensor& A = g.value(a);
            for (std::size_t i = 0; i < d.size(); ++i) gb[i] += d[i] * A[i];
        }
    });
}

Var scale(Graph& g, Var a, double s) {
    Tensor out = g.value(a);
    for (double& v : out.values()) v *= s;
    const Var in[] = {a};
    return g.record(std::move(out), in, [a, s](Graph& g, std::size_t self) {
        const Tensor& d = g.grad(self);
        Tensor& ga = g.grad(a.id);
        for (std::size_t i = 0; i < d.size(); ++i) ga[i] += s * d[i];
    });
}

Var add_scalar(Graph& g, Var a, double s) {
    Tensor out = g.value(a);
    for (double& v : out.values()) v += s;
    const Var in[] = {a};
    return g.record(std::move(out), in, [a](Graph& g, std::size_t self) {
        const Tensor& d = g.grad(self);
        Tensor& ga = g.grad(a.id);
        for (std::size_t i = 0; i < d.size(); ++i) ga[i] += d[i];
    });
}

Var add_row(Graph& g, Var a, Var row) {
    const Tensor& A = g.value(a);
    const Tensor& R = g.value(row);
    const std::size_t rows = A.rows(), cols = A.cols();
    if (R.size() != cols)
        fail(ErrorCode::kShapeMismatch, "add_row: " + A.shape_string() + " + " + R.shape_string());
    Tensor out = A;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out(r, c) += R[c];
    const Var in[] = {a, row};
    return g.record(std::move(out), in, [a, row, rows, cols](Graph& g, std::size_t self) {
        const Tensor& d = g.grad(self);
        if (g.needs_grad(a)) {
            Tensor& ga = g.grad(a.id);
            for (std::size_t i = 0; i < d.size(); ++i) ga[i] += d[i];
        }
        if (g.needs_grad(row)) {
            Tensor& gr = g.grad(row.id);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) gr[c] += d(r, c);
        }
    });
}

Var transpose(Graph& g, Var a) {
    const Tensor& A = g.value(a);
    const std::size_t m = A.rows(), n = A.cols();
    Tensor out = matrix_of(n, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out(j, i) = A(i, j);
    const Var in[] = {a};
    return g.record(std::move(out), in, [a, m, n](Graph& g, std::size_t self) {
        const Tensor& d = g.grad(self);
        Tensor& ga = g.grad(a.id);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) ga(i, j) += d(j, i);
    });
}

Var reshape(Graph& g, Var a, std::size_t rows, std::size_t cols) {
    const Tensor& A = g.value(a);
    if (rows * cols != A.size())
        fail(ErrorCode::kShapeMismatch,
             "reshape: " + A.shape_string() + " to " + std::to_string(rows) + "x" + std::to_string(cols));
    const std::array<std::size_t, 2> shape{rows, cols};
    Tensor out = A.reshaped(shape);
    const Var in[] = {a};
    return g.record(std::move(out), in, [a](Graph& g, std::size_t self) {
        const Tensor& d = g.grad(self);
        Tensor& ga = g.grad(a.id);
        for (std::size_t i = 0; i < d.size(); ++i) ga[i] += d[i];
    });
}

// ---- activations ---------------------------------------------------------

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;
}  // namespace

double activate(double x, Activation kind) {
    switch (kind) {
        case Activation::kGelu:
            return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
        case Activation::kLeakyRelu:
            return x >= 0.0 ? x : kLeakySlope * x;
        case Activation::kSigmoid:
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            else {
                const double e = std::exp(x);
                return e / (1.0 + e);
            }
        case Activation::kTanh:
            return std::tanh(x);
        case Activation::kIdentity:
            return x;
    }
    return x;
}

double activate_grad(double x, Activation kind) {
    switch (kind) {
        case Activation::kGelu: {
            const double u = kGeluC * (x + kGeluA * x * x * x);
            const double t = std::tanh(u);
            const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
            return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
        }
        case Activation::kLeakyRelu:
            return x >= 0.0 ? 1.0 : kLeakySlope;
        case Activation::kSigmoid: {
            const double s = activate(x, Activation::kSigmoid);
            return s * (1.0 - s);
        }
        case Activation::kTanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case Activation::kIdentity:
            return 1.0;
    }
    return 1.0;
}

Var activation(Graph& g, Var a, Activation kind) {
    Tensor out = g.value(a);
    for (double& v : out.values()) v = activate(v, kind);
    const Var in[] = {a};
    return g.record(std::move(out), in, [a, kind](Graph& g, std::size_t self) {
        const Tensor& d = g.grad(self);
        const Tensor& x = g.value(a);
        const Tensor& y = g.value(Var{self});
        Tensor& ga = g.grad(a.id);
        switch (kind) {
            case Activation::kSigmoid:
                for (std::size_t i = 0; i < d.size(); ++i) ga[i] += d[i] * y[i] * (1.0 - y[i]);
                break;
            case Activation::kTanh:
                for (std::size_t i = 0; i < d.size(); ++i) ga[i] += d[i] * (1.0 - y[i] * y[i]);
                break;
            default:
                for (std::size_t i = 0; i < d.size(); ++i) ga[i] += d[i] * activate_grad(x[i], kind);
        }
    });
}

Var exp(Graph& g, Var a) {
    Tensor out = g.value(a);
    for (double& v : out.values()) v = std::exp(v);
    const Var in[] = {a};
    return g.record(std::move(out), in, [a](Graph& g, std::size_t self) {
        const Tensor& d = g.grad(self);
        const Tensor& y = g.value(Var{self});
        Tensor& ga = g.grad(a.id);
        for (std::size_t i = 0; i < d.size(); ++i) ga[i] += d[i] * y[i];
    });
}

// ---- structure -----------------------------------------------------------

Var concat_cols(Graph& g, std::span<const Var> parts) {
    require(!parts.empty(), ErrorCode::kInvalidArgument, "concat_cols: no inputs");
    const std::size_t rows = g.value(parts[0]).rows();
    std::vector<std::size_t> offsets;
    std::size_t total = 0;
    for (Var p : parts) {
        require(g.value(p).rows() == rows, ErrorCode::kShapeMismatch, "concat_cols: row mismatch");
        offsets.push_back(total);
        total += g.value(p).cols();
    }
    Tensor out = matrix_of(rows, total);
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& P = g.value(parts[k]);
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(P.row_span(r).data(), P.cols(), out.row_span(r).data() + offsets[k]);
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return g.record(std::move(out), parts,
                    [inputs, offsets, rows](Graph& g, std::size_t self) {
                        const Tensor& d = g.grad(self);
                        for (std::size_t k = 0; k < inputs.size(); ++k) {
                            if (!g.needs_grad(inputs[k])) continue;
                            Tensor& gp = g.grad(inputs[k].id);
                            const std::size_t c = gp.cols();
                            for (std::size_t r = 0; r < rows; ++r) {
                                const double* src = d.row_span(r).data() + offsets[k];
                                double* dst = gp.row_span(r).data();
                                for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
                            }
                        }
                    });
}

Var concat_rows(Graph& g, std::span<const Var> parts) {
    require(!parts.empty(), ErrorCode::kInvalidArgument, "concat_rows: no inputs");
    const std::size_t cols = g.value(parts[0]).cols();
    std::vector<std::size_t> offsets;
    std::size_t total = 0;
    for (Var p : parts) {
        require(g.value(p).cols() == cols, ErrorCode::kShapeMismatch, "concat_rows: col mismatch");
        offsets.push_back(total);
        total += g.value(p).size();
    }
    std::vector<double> values;
    values.reserve(total);
    for (Var p : parts) {
        const auto v = g.value(p).values();
        values.insert(values.end(), v.begin(), v.end());
    }
    Tensor out = Tensor::matrix(total / cols, cols, std::move(values));
    std::vector<Var> inputs(parts.begin(), parts.end());
    return g.record(std::move(out), parts, [inputs, offsets](Graph& g, std::size_t self) {
        const Tensor& d = g.grad(self);
        for (std::size_t k = 0; k < inputs.size(); ++k) {
            if (!g.needs_grad(inputs[k])) continue;
            Tensor& gp = g.grad(inputs[k].id);
            for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += d[offsets[k] + i];
        }
    });
}

Var slice_cols(Graph& g, Var a, std::size_t begin, std::size_t count) {
    const Tensor& A = g.value(a);
    require(begin + count <= A.cols(), ErrorCode::kShapeMismatch, "slice_cols: out of range");
    const std::size_t rows = A.rows();
    Tensor out = matrix_of(rows, count);
    for (std::size_t r = 0; r < rows; ++r)
        std::copy_n(A.row_span(r).data() + begin, count, out.row_span(r).data());
    const Var in[] = {a};
    return g.record(std::move(out), in, [a, begin, count, rows](Graph& g, std::size_t self) {
        const Tensor& d = g.grad(self);
        Tensor& ga = g.grad(a.id);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < count; ++j) ga(r, begin + j) += d(r, j);
    });
}

Var slice_rows(Graph& g, Var a, std::size_t begin, std::size_t count) {
    const Tensor& A = g.value(a);
    require(begin + count <= A.rows(), ErrorCode::kShapeMismatch, "slice_rows: out of range");
    const std::size_t cols = A.cols();
    std::vector<double> values(A.data() + begin * cols, A.data() + (begin + count) * cols);
    Tensor out = Tensor::matrix(count, cols, std::move(values));
    const Var in[] = {a};
    return g.record(std::move(out), in, [a, begin, cols](Graph& g, std::size_t self) {
        const Tensor& d = g.grad(self);
        double* dst = g.grad(a.id).data() + begin * cols;
        for (std::size_t i = 0; i < d.size(); ++i) dst[i] += d[i];
    });
}

Var pad_rows(Graph& g, Var a, std::size_t count) {
    if (count == 0) return a;
    const Tensor& A = g.value(a);
    std::vector<double> values(A.values().begin(), A.values().end());
    values.resize(values.size() + count * A.cols(), 0.0);
    Tensor out = Tensor::matrix(A.rows() + count, A.cols(), std::move(values));
    const Var in[] = {a};
    return g.record(std::move(out), in, [a](Graph& g, std::size_t self) {
        const Tensor& d = g.grad(self);
        Tensor& ga = g.grad(a.id);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += d[i];
    });
}

Var mask_rows(Graph& g, Var a, MaskView keep) {
    const Tensor& A = g.value(a);
    require(keep.size() == A.rows(), ErrorCode::kShapeMismatch, "mask_rows: mask length");
    Tensor out = A;
    for (std::size_t r = 0; r < A.rows(); ++r)
        if (!keep[r]) std::fill(out.row_span(r).begin(), out.row_span(r).end(), 0.0);
    std::vector<bool> k(keep.begin(), keep.end());
    const Var in[] = {a};
    return g.record(std::move(out), in, [a, k](Graph& g, std::size_t self) {
        const Tensor& d = g.grad(self);
        Tensor& ga = g.grad(a.id);
        for (std::size_t r = 0; r < k.size(); ++r) {
            if (!k[r]) continue;
            for (std::size_t c = 0; c < d.cols(); ++c) ga(r, c) += d(r, c);
        }
    });
}

Var masked_mean_rows(Graph& g, Var a, MaskView keep) {
    const Tensor& A = g.value(a);
    require(keep.size() == A.rows(), ErrorCode::kShapeMismatch, "masked_mean_rows: mask length");
    const auto count = static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
    require(count > 0, ErrorCode::kInvalidArgument, "masked_mean_rows: every row is masked");
    const std::size_t cols = A.cols();
    Tensor out = matrix_of(1, cols);
    for (std::size_t r = 0; r < A.rows(); ++r) {
        if (!keep[r]) continue;
        for (std::size_t c = 0; c < cols; ++c) out[c] += A(r, c);
    }
    const double inv = 1.0 / static_cast<double>(count);
    for (double& v : out.values()) v *= inv;
    std::vector<bool> k(keep.begin(), keep.end());
    const Var in[] = {a};
    return g.record(std::move(out), in, [a, k, inv, cols](Graph& g, std::size_t self) {
        const Tensor& d = g.grad(self);
        Tensor& ga = g.grad(a.id);
        for (std::size_t r = 0; r < k.size(); ++r) {
            if (!k[r]) continue;
            for (std::size_t c = 0; c < cols; ++c) ga(r, c) += d[c] * inv;
        }
    });
}

Var gather_rows(Graph& g, Var table, std::span<const long> indices, long frozen_row) {
    const Tensor& T = g.value(table);
    const std::size_t cols = T.cols();
    Tensor out = matrix_of(indices.size(), cols);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const long idx = indices[i];
        if (idx < 0 || idx == frozen_row) continue;
        if (static_cast<std::size_t>(idx) >= T.rows())
            fail(ErrorCode::kInvalidArgument, "gather_rows: index " + std::to_string(idx) + " outside table of " +
                                                  std::to_string(T.rows()) + " rows");
        std::copy_n(T.row_span(static_cast<std::size_t>(idx)).data(), cols, out.row_span(i).data());
    }
    std::vector<long> idx(indices.begin(), indices.end());
    const Var in[] = {table};
    return g.record(std::move(out), in, [table, idx, cols, frozen_row](Graph& g, std::size_t self) {
        const Tensor& d = g.grad(self);
        Tensor& gt = g.grad(table.id);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (idx[i] < 0 || idx[i] == frozen_row) continue;
            double* dst = gt.row_span(static_cast<std::size_t>(idx[i])).data();
            for (std::size_t c = 0; c < cols; ++c) dst[c] += d(i, c);
        }
    });
}

Var sum(Graph& g, Var a) {
    double s = 0.0;
    for (double v : g.value(a).values()) s += v;
    const Var in[] = {a};
    return g.record(Tensor::scalar(s), in, [a](Graph& g, std::size_t self) {
        const double d = g.grad(self)[0];
        for (double& v : g.grad(a.id).values()) v += d;
    });
}

Var mean(Graph& g, Var a) {
    const double n = static_cast<double>(g.value(a).size());
    return scale(g, sum(g, a), 1.0 / n);
}

Var slfn_scan(Graph& g, Var xs, Var xt, Var us, Var ut) {
    const Tensor& XS = g.value(xs);
    const Tensor& XT = g.value(xt);
    const std::size_t L = XS.rows(), D = XS.cols();
    check_same_shape(XS, XT, "slfn_scan");
    const Tensor& US = g.value(us);
    const Tensor& UT = g.value(ut);
    if (US.rows() != D || US.cols() != D || !US.same_shape(UT))
        fail(ErrorCode::kShapeMismatch, "slfn_scan: recurrent weights " + US.shape_string() + ", " +
                                            UT.shape_string() + " for width " + std::to_string(D));
    Tensor H = matrix_of(L, D);
    Tensor S = matrix_of(L, D);
    Tensor T = matrix_of(L, D);
    std::vector<double> a(D), b(D);
    for (std::size_t i = 0; i < L; ++i) {
        std::copy_n(XS.row_span(i).data(), D, a.data());
        std::copy_n(XT.row_span(i).data(), D, b.data());
        if (i > 0) {
            gemm_acc(H.row_span(i - 1).data(), US.data(), a.data(), 1, D, D);
            gemm_acc(H.row_span(i - 1).data(), UT.data(), b.data(), 1, D, D);
        }
        for (std::size_t j = 0; j < D; ++j) {
            const double s = activate(a[j], Activation::kSigmoid);
            const double t = std::tanh(b[j]);
            S(i, j) = s;
            T(i, j) = t;
            H(i, j) = s + s * t;
        }
    }
    const Var in[] = {xs, xt, us, ut};
    return g.record(std::move(H), in,
                    [xs, xt, us, ut, L, D, S = std::move(S), T = std::move(T)](Graph& g, std::size_t self) {
        const Tensor& dH = g.grad(self);
        const Tensor& Hv = g.value(Var{self});
        const Tensor& USv = g.value(us);
        const Tensor& UTv = g.value(ut);
        const bool gxs = g.needs_grad(xs), gxt = g.needs_grad(xt);
        const bool gus = g.needs_grad(us), gut = g.needs_grad(ut);
        std::vector<double> carry(D, 0.0), dh(D), da(D), db(D);
        for (std::size_t i = L; i-- > 0;) {
            for (std::size_t j = 0; j < D; ++j) {
                dh[j] = dH(i, j) + carry[j];
                const double s = S(i, j), t = T(i, j);
                da[j] = dh[j] * (1.0 + t) * s * (1.0 - s);
                db[j] = dh[j] * s * (1.0 - t * t);
            }
            if (gxs) {
                double* row = g.grad(xs.id).row_span(i).data();
                for (std::size_t j = 0; j < D; ++j) row[j] += da[j];
            }
            if (gxt) {
                double* row = g.grad(xt.id).row_span(i).data();
                for (std::size_t j = 0; j < D; ++j) row[j] += db[j];
            }
            std::fill(carry.begin(), carry.end(), 0.0);
            if (i == 0) continue;
            const double* hp = Hv.row_span(i - 1).data();
            if (gus) gemm_tn_acc(hp, da.data(), g.grad(us.id).data(), 1, D, D);
            if (gut) gemm_tn_acc(hp, db.data(), g.grad(ut.id).data(), 1, D, D);
            gemm_nt_acc(da.data(), USv.data(), carry.data(), 1, D, D);
            gemm_nt_acc(db.data(), UTv.data(), carry.data(), 1, D, D);
        }
    });
}

// ---- attention, convolution, regularization ---------------------------

Var masked_softmax_rows(Graph& g, Var a, MaskView valid) {
    const Tensor& A = g.value(a);
    const std::size_t rows = A.rows(), cols = A.cols();
    require(valid.size() == cols, ErrorCode::kShapeMismatch, "masked_softmax_rows: mask length");
    require(std::find(valid.begin(), valid.end(), true) != valid.end(), ErrorCode::kInvalidArgument,
            "masked_softmax_rows: every column is masked");
    Tensor out = matrix_of(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cols; ++c)
            if (valid[c]) mx = std::max(mx, A(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            if (!valid[c]) continue;
            const double e = std::exp(A(r, c) - mx);
            out(r, c) = e;
            z += e;
        }
        for (std::size_t c = 0; c < cols; ++c) out(r, c) /= z;
    }
    const Var in[] = {a};
    return g.record(std::move(out), in, [a, rows, cols](Graph& g, std::size_t self) {
        const Tensor& d = g.grad(self);
        const Tensor& y = g.value(Var{self});
        Tensor& ga = g.grad(a.id);
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c) dot += y(r, c) * d(r, c);
            for (std::size_t c = 0; c < cols; ++c) ga(r, c) += y(r, c) * (d(r, c) - dot);
        }
    });
}

Var conv1d(Graph& g, Var x, Var filters, std::size_t width) {
    const Tensor& X = g.value(x);
    const Tensor& W = g.value(filters);
    const std::size_t L = X.rows(), D = X.cols(), K = W.rows();
    require(width >= 1, ErrorCode::kInvalidArgument, "conv1d: filter width must be >= 1");
    if (width > L)
        fail(ErrorCode::kInvalidArgument, "conv1d: filter width " + std::to_string(width) +
                                              " exceeds sequence length " + std::to_string(L));
    if (W.cols() != width * D)
        fail(ErrorCode::kShapeMismatch, "conv1d: filters " + W.shape_string() + " do not match width " +
                                            std::to_string(width) + " x " + std::to_string(D));
    const std::size_t out_len = L - width + 1;
    const std::size_t span = width * D;
    // Rows i..i+F-1 of X are contiguous, so each window is a flat span.
    Tensor out = matrix_of(out_len, K);
    for (std::size_t i = 0; i < out_len; ++i) {
        const double* win = X.data() + i * D;
        for (std::size_t k = 0; k < K; ++k) {
            const double* w = W.data() + k * span;
            double s = 0.0;
            for (std::size_t j = 0; j < span; ++j) s += w[j] * win[j];
            out(i, k) = s;
        }
    }
    const Var in[] = {x, filters};
    return g.record(std::move(out), in, [x, filters, out_len, K, D, span](Graph& g, std::size_t self) {
        const Tensor& d = g.grad(self);
        const bool gx = g.needs_grad(x), gw = g.needs_grad(filters);
        const Tensor& X = g.value(x);
        const Tensor& W = g.value(filters);
        double* dX = gx ? g.grad(x.id).data() : nullptr;
        double* dW = gw ? g.grad(filters.id).data() : nullptr;
        for (std::size_t i = 0; i < out_len; ++i) {
            for (std::size_t k = 0; k < K; ++k) {
                const double dv = d(i, k);
                if (dv == 0.0) continue;
                if (gw) {
                    const double* win = X.data() + i * D;
                    double* dw = dW + k * span;
                    for (std::size_t j = 0; j < span; ++j) dw[j] += dv * win[j];
                }
                if (gx) {
                    const double* w = W.data() + k * span;
                    double* dwin = dX + i * D;
                    for (std::size_t j = 0; j < span; ++j) dwin[j] += dv * w[j];
                }
            }
        }
    });
}

Var dropout(Graph& g, Var a, double rate) {
    require(rate >= 0.0 && rate < 1.0, ErrorCode::kInvalidArgument, "dropout: rate must be in [0, 1)");
    if (!g.training() || rate == 0.0) return a;
    const Tensor& A = g.value(a);
    Tensor mask(A.shape(), 0.0);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (double& m : mask.values()) m = g.rng().uniform() < rate ? 0.0 : keep_scale;
    return mul(g, a, g.constant(std::move(mask)));
}

// ---- losses ----------------------------------------------------------------

Var softmax_cross_entropy(Graph& g, Var logits, std::span<const long> targets,
                          MaskView keep) {
    const Tensor& Z = g.value(logits);
    const std::size_t rows = Z.rows(), cols = Z.cols();
    require(targets.size() == rows && keep.size() == rows, ErrorCode::kShapeMismatch,
            "softmax_cross_entropy: targets/mask length");
    const auto count = static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
    require(count > 0, ErrorCode::kInvalidArgument, "softmax_cross_entropy: no kept rows");
    Tensor probs = matrix_of(rows, cols);
    double loss = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (!keep[r]) continue;
        require(targets[r] >= 0 && static_cast<std::size_t>(targets[r]) < cols,
                ErrorCode::kInvalidArgument, "softmax_cross_entropy: target out of range");
        double mx = Z(r, 0);
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, Z(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            probs(r, c) = std::exp(Z(r, c) - mx);
            z += probs(r, c);
        }
        for (std::size_t c = 0; c < cols; ++c) probs(r, c) /= z;
        loss += (std::log(z) + mx) - Z(r, static_cast<std::size_t>(targets[r]));
    }
    const double inv = 1.0 / static_cast<double>(count);
    std::vector<long> t(targets.begin(), targets.end());
    std::vector<bool> k(keep.begin(), keep.end());
    const Var in[] = {logits};
    return g.record(Tensor::scalar(loss * inv), in,
                    [logits, probs = std::move(probs), t, k, inv, cols](Graph& g, std::size_t self) {
                        const double d = g.grad(self)[0] * inv;
                        Tensor& gz = g.grad(logits.id);
                        for (std::size_t r = 0; r < k.size(); ++r) {
                            if (!k[r]) continue;
                            for (std::size_t c = 0; c < cols; ++c) gz(r, c) += d * probs(r, c);
                            gz(r, static_cast<std::size_t>(t[r])) -= d;
                        }
                    });
}

Var masked_mse(Graph& g, Var a, const Tensor& target, MaskView keep) {
    const Tensor& A = g.value(a);
    check_same_shape(A, target, "masked_mse");
    require(keep.size() == A.rows(), ErrorCode::kShapeMismatch, "masked_mse: mask length");
    const auto count = static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
    require(count > 0, ErrorCode::kInvalidArgument, "masked_mse: no kept rows");
    const double inv = 1.0 / static_cast<double>(count * A.cols());
    double loss = 0.0;
    for (std::size_t r = 0; r < A.rows(); ++r) {
        if (!keep[r]) continue;
        for (std::size_t c = 0; c < A.cols(); ++c) {
            const double e = A(r, c) - target(r, c);
            loss += e * e;
        }
    }
    std::vector<bool> k(keep.begin(), keep.end());
    const Var in[] = {a};
    return g.record(Tensor::scalar(loss * inv), in, [a, target, k, inv](Graph& g, std::size_t self) {
        const double d = g.grad(self)[0] * inv;
        const Tensor& A = g.value(a);
        Tensor& ga = g.grad(a.id);
        for (std::size_t r = 0; r < k.size(); ++r) {
            if (!k[r]) continue;
            for (std::size_t c = 0; c < A.cols(); ++c) ga(r, c) += d * 2.0 * (A(r, c) - target(r, c));
        }
    });
}

Var bce_with_logits(Graph& g, Var logit, double label) {
    const Tensor& X = g.value(logit);
    require(X.size() == 1, ErrorCode::kShapeMismatch, "bce_with_logits: logit must be scalar");
    const double x = X[0];
    const double loss = std::max(x, 0.0) - x * label + std::log1p(std::exp(-std::abs(x)));
    const Var in[] = {logit};
    return g.record(Tensor::scalar(loss), in, [logit, x, label](Graph& g, std::size_t self) {
        g.grad(logit.id)[0] += g.grad(self)[0] * (activate(x, Activation::kSigmoid) - label);
    });
}

Var kl_divergence(Graph& g, Var mu, Var logvar) {
    const Tensor& M = g.value(mu);
    const Tensor& V = g.value(logvar);
    check_same_shape(M, V, "kl_divergence");
    double kl = 0.0;
    for (std::size_t i = 0; i < M.size(); ++i) kl += M[i] * M[i] + std::exp(V[i]) - 1.0 - V[i];
    const Var in[] = {mu, logvar};
    return g.record(Tensor::scalar(0.5 * kl), in, [mu, logvar](Graph& g, std::size_t self) {
        const double d = g.grad(self)[0];
        if (g.needs_grad(mu)) {
            Tensor& gm = g.grad(mu.id);
            const Tensor& M = g.value(mu);
            for (std::size_t i = 0; i < M.size(); ++i) gm[i] += d * M[i];
        }
        if (g.needs_grad(logvar)) {
            Tensor& gv = g.grad(logvar.id);
            const Tensor& V = g.value(logvar);
            for (std::size_t i = 0; i < V.size(); ++i) gv[i] += d * 0.5 * (std::exp(V[i]) - 1.0);
        }
    });
}

}  // namespace texim::nn
