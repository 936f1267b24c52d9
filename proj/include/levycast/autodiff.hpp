#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace levycast::ad {

// Dense row-major 2-D real tensor. Scalars are (1,1); vectors are (1,n) or
// (n,1). Double precision throughout: the loss path touches magnitudes near
// e^-50 that would underflow single precision.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}
    Tensor(int r, int c, std::vector<double> data) : rows(r), cols(c), v(std::move(data)) {
        if (v.size() != static_cast<std::size_t>(rows) * cols)
            throw std::invalid_argument("tensor data length does not match shape");
    }

    std::size_t size() const { return v.size(); }
    double& at(int i, int j) { return v[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return v[static_cast<std::size_t>(i) * cols + j]; }
};

// Reverse-mode tape. Nodes are appended in topological order during the
// forward pass; backward() walks them in reverse, each node accumulating
// into its parents' gradients through a recorded pullback. A tape is
// single-writer; independent tapes may run concurrently.
//
// With recording disabled the same forward code runs without storing
// pullbacks (inference mode); backward() is then unavailable.
class Tape {
public:
    using Ref = int;

    explicit Tape(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }

    // Leaf holding externally owned data. requires_grad marks parameters.
    Ref input(const Tensor& t, bool requires_grad = false) {
        return push(Tensor(t), requires_grad, nullptr);
    }
    Ref input(int rows, int cols, std::vector<double> data, bool requires_grad = false) {
        return push(Tensor(rows, cols, std::move(data)), requires_grad, nullptr);
    }
    Ref constant(int rows, int cols, double fill = 0.0) {
        return push(Tensor(rows, cols, fill), false, nullptr);
    }
    Ref scalar(double x) { return push(Tensor(1, 1, {x}), false, nullptr); }

    const Tensor& val(Ref r) const { return nodes_[r].val; }
    const Tensor& grad(Ref r) const { return nodes_[r].grad; }
    double scalar_val(Ref r) const { return nodes_[r].val.v[0]; }

    // ---- elementwise binaries with broadcasting (each dim equal or 1) ----

    Ref add(Ref a, Ref b) {
        return binary(a, b, [](double x, double y) { return x + y; },
                      [](double, double, double) { return 1.0; },
                      [](double, double, double) { return 1.0; });
    }
    Ref sub(Ref a, Ref b) {
        return binary(a, b, [](double x, double y) { return x - y; },
                      [](double, double, double) { return 1.0; },
                      [](double, double, double) { return -1.0; });
    }
    Ref mul(Ref a, Ref b) {
        return binary(a, b, [](double x, double y) { return x * y; },
                      [](double, double y, double) { return y; },
                      [](double x, double, double) { return x; });
    }
    Ref div(Ref a, Ref b) {
        return binary(a, b, [](double x, double y) { return x / y; },
                      [](double, double y, double) { return 1.0 / y; },
                      [](double x, double y, double) { return -x / (y * y); });
    }
    // out = base^expo elementwise; base must be positive wherever evaluated.
    Ref powv(Ref base, Ref expo) {
        return binary(base, expo, [](double x, double y) { return std::pow(x, y); },
                      [](double x, double y, double o) { return y * o / x; },
                      [](double x, double, double o) { return o * std::log(x); });
    }

    // ---- elementwise unaries ----

    Ref neg(Ref a) { return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; }); }
    Ref exp_(Ref a) { return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; }); }
    Ref expm1_(Ref a) { return unary(a, [](double x) { return std::expm1(x); }, [](double, double y) { return y + 1.0; }); }
    Ref log_(Ref a) { return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; }); }
    Ref sin_(Ref a) { return unary(a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); }); }
    Ref cos_(Ref a) { return unary(a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); }); }
    Ref sigmoid(Ref a) {
        return unary(a, [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
                     [](double, double y) { return y * (1.0 - y); });
    }
    Ref tanh_(Ref a) { return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; }); }
    Ref softplus(Ref a) {
        return unary(a, [](double x) { return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::fabs(x))); },
                     [](double x, double) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); });
    }
    Ref abs_(Ref a) {
        return unary(a, [](double x) { return std::fabs(x); },
                     [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
    }
    Ref lgamma_(Ref a) {
        return unary(a, [](double x) { return std::lgamma(x); },
                     [](double x, double) { return digamma(x); });
    }
    Ref scale(Ref a, double c) {
        return unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
    }
    Ref add_const(Ref a, double c) {
        return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
    }
    Ref pow_const(Ref a, double e) {
        return unary(a, [e](double x) { return std::pow(x, e); },
                     [e](double x, double) { return e * std::pow(x, e - 1.0); });
    }
    // max(a, c): values below the floor are clipped and contribute zero
    // gradient (hard clip, not a smooth saturation).
    Ref clip_min(Ref a, double c) {
        return unary(a, [c](double x) { return x > c ? x : c; },
                     [c](double x, double) { return x > c ? 1.0 : 0.0; });
    }
    Ref clip_max(Ref a, double c) {
        return unary(a, [c](double x) { return x < c ? x : c; },
                     [c](double x, double) { return x < c ? 1.0 : 0.0; });
    }

    // Identity forward; blocks all gradient flow.
    Ref stop_gradient(Ref a) {
        return push(Tensor(nodes_[a].val), false, nullptr);
    }

    // ---- structural ops ----

    Ref matmul(Ref a, Ref b) {
        const Tensor& A = nodes_[a].val;
        const Tensor& B = nodes_[b].val;
        if (A.cols != B.rows) throw std::invalid_argument("matmul shape mismatch");
        Tensor out(A.rows, B.cols);
        mm(A, B, out);
        bool rg = needs_grad(a) || needs_grad(b);
        Ref r = push(std::move(out), rg, nullptr);
        if (recording_ && rg) {
            nodes_[r].pullback = [this, a, b, r]() {
                const Tensor& G = nodes_[r].grad;
                const Tensor& A2 = nodes_[a].val;
                const Tensor& B2 = nodes_[b].val;
                if (needs_grad(a)) mm_nt_acc(G, B2, nodes_[a].grad);  // dA += G B^T
                if (needs_grad(b)) mm_tn_acc(A2, G, nodes_[b].grad);  // dB += A^T G
            };
        }
        return r;
    }

    Ref concat_cols(Ref a, Ref b) {
        const Tensor& A = nodes_[a].val;
        const Tensor& B = nodes_[b].val;
        if (A.rows != B.rows) throw std::invalid_argument("concat_cols row mismatch");
        Tensor out(A.rows, A.cols + B.cols);
        for (int i = 0; i < A.rows; ++i) {
            for (int j = 0; j < A.cols; ++j) out.at(i, j) = A.at(i, j);
            for (int j = 0; j < B.cols; ++j) out.at(i, A.cols + j) = B.at(i, j);
        }
        bool rg = needs_grad(a) || needs_grad(b);
        Ref r = push(std::move(out), rg, nullptr);
        if (recording_ && rg) {
            int ac = A.cols;
            nodes_[r].pullback = [this, a, b, r, ac]() {
                const Tensor& G = nodes_[r].grad;
                if (needs_grad(a)) {
                    Tensor& GA = nodes_[a].grad;
                    for (int i = 0; i < GA.rows; ++i)
                        for (int j = 0; j < GA.cols; ++j) GA.at(i, j) += G.at(i, j);
                }
                if (needs_grad(b)) {
                    Tensor& GB = nodes_[b].grad;
                    for (int i = 0; i < GB.rows; ++i)
                        for (int j = 0; j < GB.cols; ++j) GB.at(i, j) += G.at(i, ac + j);
                }
            };
        }
        return r;
    }

    Ref slice_cols(Ref a, int from, int to) {
        const Tensor& A = nodes_[a].val;
        if (from < 0 || to > A.cols || from >= to) throw std::invalid_argument("slice_cols range");
        Tensor out(A.rows, to - from);
        for (int i = 0; i < A.rows; ++i)
            for (int j = from; j < to; ++j) out.at(i, j - from) = A.at(i, j);
        bool rg = needs_grad(a);
        Ref r = push(std::move(out), rg, nullptr);
        if (recording_ && rg) {
            nodes_[r].pullback = [this, a, r, from]() {
                const Tensor& G = nodes_[r].grad;
                Tensor& GA = nodes_[a].grad;
                for (int i = 0; i < G.rows; ++i)
                    for (int j = 0; j < G.cols; ++j) GA.at(i, from + j) += G.at(i, j);
            };
        }
        return r;
    }

    // Row-wise softmax with the standard max-shift for stability.
    Ref softmax_rows(Ref a) {
        const Tensor& A = nodes_[a].val;
        Tensor out(A.rows, A.cols);
        for (int i = 0; i < A.rows; ++i) {
            double m = A.at(i, 0);
            for (int j = 1; j < A.cols; ++j) m = std::max(m, A.at(i, j));
            double s = 0.0;
            for (int j = 0; j < A.cols; ++j) {
                double e = std::exp(A.at(i, j) - m);
                out.at(i, j) = e;
                s += e;
            }
            for (int j = 0; j < A.cols; ++j) out.at(i, j) /= s;
        }
        bool rg = needs_grad(a);
        Ref r = push(std::move(out), rg, nullptr);
        if (recording_ && rg) {
            nodes_[r].pullback = [this, a, r]() {
                const Tensor& Y = nodes_[r].val;
                const Tensor& G = nodes_[r].grad;
                Tensor& GA = nodes_[a].grad;
                for (int i = 0; i < Y.rows; ++i) {
                    double dot = 0.0;
                    for (int j = 0; j < Y.cols; ++j) dot += G.at(i, j) * Y.at(i, j);
                    for (int j = 0; j < Y.cols; ++j)
                        GA.at(i, j) += Y.at(i, j) * (G.at(i, j) - dot);
                }
            };
        }
        return r;
    }

    // ---- reductions ----

    Ref sum_all(Ref a) {
        const Tensor& A = nodes_[a].val;
        double s = 0.0;
        for (double x : A.v) s += x;
        bool rg = needs_grad(a);
        Ref r = push(Tensor(1, 1, {s}), rg, nullptr);
        if (recording_ && rg) {
            nodes_[r].pullback = [this, a, r]() {
                double g = nodes_[r].grad.v[0];
                for (double& x : nodes_[a].grad.v) x += g;
            };
        }
        return r;
    }

    Ref mean_all(Ref a) {
        const Tensor& A = nodes_[a].val;
        double s = 0.0;
        for (double x : A.v) s += x;
        double inv = 1.0 / static_cast<double>(A.size());
        bool rg = needs_grad(a);
        Ref r = push(Tensor(1, 1, {s * inv}), rg, nullptr);
        if (recording_ && rg) {
            nodes_[r].pullback = [this, a, r, inv]() {
                double g = nodes_[r].grad.v[0] * inv;
                for (double& x : nodes_[a].grad.v) x += g;
            };
        }
        return r;
    }

    // (R,C) -> (R,1), summing across columns.
    Ref sum_cols(Ref a) {
        const Tensor& A = nodes_[a].val;
        Tensor out(A.rows, 1);
        for (int i = 0; i < A.rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < A.cols; ++j) s += A.at(i, j);
            out.at(i, 0) = s;
        }
        bool rg = needs_grad(a);
        Ref r = push(std::move(out), rg, nullptr);
        if (recording_ && rg) {
            nodes_[r].pullback = [this, a, r]() {
                const Tensor& G = nodes_[r].grad;
                Tensor& GA = nodes_[a].grad;
                for (int i = 0; i < GA.rows; ++i)
                    for (int j = 0; j < GA.cols; ++j) GA.at(i, j) += G.at(i, 0);
            };
        }
        return r;
    }

    // Row-wise max as a constant (no gradient); exact for the logsumexp
    // shift, whose gradient is unaffected by treating the shift as constant.
    Ref rowmax_nograd(Ref a) {
        const Tensor& A = nodes_[a].val;
        Tensor out(A.rows, 1);
        for (int i = 0; i < A.rows; ++i) {
            double m = A.at(i, 0);
            for (int j = 1; j < A.cols; ++j) m = std::max(m, A.at(i, j));
            out.at(i, 0) = m;
        }
        return push(std::move(out), false, nullptr);
    }

    // ---- backward ----

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse topological
    // order. Only nodes flagged requires-grad participate.
    void backward(Ref loss) {
        if (!recording_) throw std::logic_error("backward on a non-recording tape");
        if (nodes_[loss].val.size() != 1) throw std::invalid_argument("loss must be scalar");
        for (auto& n : nodes_) {
            if (n.requires_grad) std::fill(n.grad.v.begin(), n.grad.v.end(), 0.0);
        }
        if (!nodes_[loss].requires_grad) return;  // loss independent of parameters
        nodes_[loss].grad.v[0] = 1.0;
        for (int i = loss; i >= 0; --i) {
            if (nodes_[i].pullback && nodes_[i].requires_grad) nodes_[i].pullback();
        }
    }

    std::size_t node_count() const { return nodes_.size(); }

    static double digamma(double x) {
        // Recurrence up to x >= 6, then the asymptotic series.
        double r = 0.0;
        while (x < 6.0) {
            r -= 1.0 / x;
            x += 1.0;
        }
        double f = 1.0 / (x * x);
        return r + std::log(x) - 0.5 / x -
               f * (1.0 / 12.0 - f * (1.0 / 120.0 - f * (1.0 / 252.0 - f / 240.0)));
    }

private:
    struct Node {
        Tensor val;
        Tensor grad;
        bool requires_grad = false;
        std::function<void()> pullback;
    };

    std::vector<Node> nodes_;
    bool recording_;

    bool needs_grad(Ref r) const { return nodes_[r].requires_grad; }

    Ref push(Tensor&& t, bool requires_grad, std::function<void()> pb) {
        Node n;
        n.val = std::move(t);
        n.requires_grad = recording_ && requires_grad;
        if (n.requires_grad) n.grad = Tensor(n.val.rows, n.val.cols, 0.0);
        n.pullback = std::move(pb);
        nodes_.push_back(std::move(n));
        return static_cast<Ref>(nodes_.size() - 1);
    }

    static int bdim(int a, int b, const char* what) {
        if (a == b || a == 1 || b == 1) return std::max(a, b);
        throw std::invalid_argument(std::string("broadcast mismatch in ") + what);
    }

    static double bread(const Tensor& t, int i, int j) {
        return t.v[static_cast<std::size_t>(t.rows == 1 ? 0 : i) * t.cols + (t.cols == 1 ? 0 : j)];
    }

    static void bacc(Tensor& t, int i, int j, double g) {
        t.v[static_cast<std::size_t>(t.rows == 1 ? 0 : i) * t.cols + (t.cols == 1 ? 0 : j)] += g;
    }

    // Generic broadcast binary: f(x, y), with local partials da(x, y, out)
    // and db(x, y, out).
    template <class F, class DA, class DB>
    Ref binary(Ref a, Ref b, F f, DA da, DB db) {
        const Tensor& A = nodes_[a].val;
        const Tensor& B = nodes_[b].val;
        int R = bdim(A.rows, B.rows, "rows");
        int C = bdim(A.cols, B.cols, "cols");
        Tensor out(R, C);
        for (int i = 0; i < R; ++i)
            for (int j = 0; j < C; ++j) out.at(i, j) = f(bread(A, i, j), bread(B, i, j));
        bool rg = needs_grad(a) || needs_grad(b);
        Ref r = push(std::move(out), rg, nullptr);
        if (recording_ && rg) {
            nodes_[r].pullback = [this, a, b, r, da, db]() {
                const Tensor& A2 = nodes_[a].val;
                const Tensor& B2 = nodes_[b].val;
                const Tensor& O = nodes_[r].val;
                const Tensor& G = nodes_[r].grad;
                bool ga = needs_grad(a), gb = needs_grad(b);
                for (int i = 0; i < O.rows; ++i) {
                    for (int j = 0; j < O.cols; ++j) {
                        double g = G.at(i, j);
                        if (g == 0.0) continue;
                        double x = bread(A2, i, j), y = bread(B2, i, j), o = O.at(i, j);
                        if (ga) bacc(nodes_[a].grad, i, j, g * da(x, y, o));
                        if (gb) bacc(nodes_[b].grad, i, j, g * db(x, y, o));
                    }
                }
            };
        }
        return r;
    }

    template <class F, class D>
    Ref unary(Ref a, F f, D d) {
        const Tensor& A = nodes_[a].val;
        Tensor out(A.rows, A.cols);
        for (std::size_t k = 0; k < A.size(); ++k) out.v[k] = f(A.v[k]);
        bool rg = needs_grad(a);
        Ref r = push(std::move(out), rg, nullptr);
        if (recording_ && rg) {
            nodes_[r].pullback = [this, a, r, d]() {
                const Tensor& A2 = nodes_[a].val;
                const Tensor& O = nodes_[r].val;
                const Tensor& G = nodes_[r].grad;
                Tensor& GA = nodes_[a].grad;
                for (std::size_t k = 0; k < A2.size(); ++k)
                    GA.v[k] += G.v[k] * d(A2.v[k], O.v[k]);
            };
        }
        return r;
    }

    static void mm(const Tensor& A, const Tensor& B, Tensor& out) {
        for (int i = 0; i < A.rows; ++i) {
            double* orow = &out.v[static_cast<std::size_t>(i) * out.cols];
            for (int k = 0; k < A.cols; ++k) {
                double aik = A.at(i, k);
                if (aik == 0.0) continue;
                const double* brow = &B.v[static_cast<std::size_t>(k) * B.cols];
                for (int j = 0; j < B.cols; ++j) orow[j] += aik * brow[j];
            }
        }
    }

    // acc += G B^T, used for dA in matmul's pullback.
    static void mm_nt_acc(const Tensor& G, const Tensor& B, Tensor& acc) {
        for (int i = 0; i < G.rows; ++i) {
            const double* grow = &G.v[static_cast<std::size_t>(i) * G.cols];
            double* arow = &acc.v[static_cast<std::size_t>(i) * acc.cols];
            for (int k = 0; k < B.rows; ++k) {
                const double* brow = &B.v[static_cast<std::size_t>(k) * B.cols];
                double s = 0.0;
                for (int j = 0; j < G.cols; ++j) s += grow[j] * brow[j];
                arow[k] += s;
            }
        }
    }

    // acc += A^T G, used for dB in matmul's pullback.
    static void mm_tn_acc(const Tensor& A, const Tensor& G, Tensor& acc) {
        for (int i = 0; i < A.rows; ++i) {
            const double* arow = &A.v[static_cast<std::size_t>(i) * A.cols];
            const double* grow = &G.v[static_cast<std::size_t>(i) * G.cols];
            for (int k = 0; k < A.cols; ++k) {
                double aik = arow[k];
                if (aik == 0.0) continue;
                double* crow = &acc.v[static_cast<std::size_t>(k) * acc.cols];
                for (int j = 0; j < G.cols; ++j) crow[j] += aik * grow[j];
            }
        }
    }
};

}  // namespace levycast::ad
