#pragma once

#include <cmath>
#include <cstring>
#include <initializer_list>

#include "tensor.hpp"

// Forward/backward primitives. Shapes must match exactly; the only implicit
// mixing allowed is tensor-with-scalar (scale, add_scalar). Every op either
// records its backward closure on the graph or, under NoGradGuard, computes
// the value alone.
namespace stdrive::ag::ops {

template <class T>
std::shared_ptr<Node<T>> make_op(Shape shape, const char* op,
                                 std::initializer_list<std::shared_ptr<Node<T>>> parents) {
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value.resize(shape_numel(n->shape));
    n->is_leaf = false;
    n->op = op;
    n->id = Node<T>::fresh_id();
    if (grad_mode()) {
        for (auto& p : parents)
            if (p->requires_grad) {
                n->requires_grad = true;
                break;
            }
        if (n->requires_grad) n->parents.assign(parents.begin(), parents.end());
    }
    return n;
}

template <class T>
void check_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape())
        shape_error(op, "operand shapes differ: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape("add", a, b);
    auto out = make_op<T>(a.shape(), "add", {a.node(), b.node()});
    const T* av = a.data().data();
    const T* bv = b.data().data();
    T* ov = out->value.data();
    const std::size_t n = out->value.size();
    for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] + bv[i];
    if (out->requires_grad) {
        Node<T>* o = out.get();
        Node<T>* pa = a.node().get();
        Node<T>* pb = b.node().get();
        out->backprop = [o, pa, pb, n] {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) pa->grad[i] += o->grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) pb->grad[i] += o->grad[i];
            }
        };
    }
    return Tensor<T>(out);
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape("sub", a, b);
    auto out = make_op<T>(a.shape(), "sub", {a.node(), b.node()});
    const T* av = a.data().data();
    const T* bv = b.data().data();
    T* ov = out->value.data();
    const std::size_t n = out->value.size();
    for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] - bv[i];
    if (out->requires_grad) {
        Node<T>* o = out.get();
        Node<T>* pa = a.node().get();
        Node<T>* pb = b.node().get();
        out->backprop = [o, pa, pb, n] {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) pa->grad[i] += o->grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) pb->grad[i] -= o->grad[i];
            }
        };
    }
    return Tensor<T>(out);
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape("mul", a, b);
    auto out = make_op<T>(a.shape(), "mul", {a.node(), b.node()});
    const T* av = a.data().data();
    const T* bv = b.data().data();
    T* ov = out->value.data();
    const std::size_t n = out->value.size();
    for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] * bv[i];
    if (out->requires_grad) {
        Node<T>* o = out.get();
        Node<T>* pa = a.node().get();
        Node<T>* pb = b.node().get();
        out->backprop = [o, pa, pb, n] {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) pa->grad[i] += o->grad[i] * pb->value[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) pb->grad[i] += o->grad[i] * pa->value[i];
            }
        };
    }
    return Tensor<T>(out);
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    auto out = make_op<T>(a.shape(), "scale", {a.node()});
    const T* av = a.data().data();
    T* ov = out->value.data();
    const std::size_t n = out->value.size();
    for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] * c;
    if (out->requires_grad) {
        Node<T>* o = out.get();
        Node<T>* pa = a.node().get();
        out->backprop = [o, pa, c, n] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) pa->grad[i] += o->grad[i] * c;
        };
    }
    return Tensor<T>(out);
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
    auto out = make_op<T>(a.shape(), "add_scalar", {a.node()});
    const T* av = a.data().data();
    T* ov = out->value.data();
    const std::size_t n = out->value.size();
    for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] + c;
    if (out->requires_grad) {
        Node<T>* o = out.get();
        Node<T>* pa = a.node().get();
        out->backprop = [o, pa, n] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) pa->grad[i] += o->grad[i];
        };
    }
    return Tensor<T>(out);
}

// a:[M,K] x b:[K,N] -> [M,N]
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.ndim() != 2 || b.ndim() != 2)
        shape_error("matmul", "expects 2-D operands, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    const int M = a.dim(0), K = a.dim(1), K2 = b.dim(0), N = b.dim(1);
    if (K != K2)
        shape_error("matmul", "inner dimensions differ: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    auto out = make_op<T>({M, N}, "matmul", {a.node(), b.node()});
    const T* av = a.data().data();
    const T* bv = b.data().data();
    T* ov = out->value.data();
    for (int i = 0; i < M; ++i) {
        T* orow = ov + static_cast<std::size_t>(i) * N;
        for (int k = 0; k < K; ++k) {
            const T aik = av[static_cast<std::size_t>(i) * K + k];
            const T* brow = bv + static_cast<std::size_t>(k) * N;
            for (int j = 0; j < N; ++j) orow[j] += aik * brow[j];
        }
    }
    if (out->requires_grad) {
        Node<T>* o = out.get();
        Node<T>* pa = a.node().get();
        Node<T>* pb = b.node().get();
        out->backprop = [o, pa, pb, M, K, N] {
            const T* go = o->grad.data();
            if (pa->requires_grad) {
                pa->ensure_grad();
                // dA[i,k] = sum_j go[i,j] * B[k,j]
                for (int i = 0; i < M; ++i) {
                    const T* grow = go + static_cast<std::size_t>(i) * N;
                    T* darow = pa->grad.data() + static_cast<std::size_t>(i) * K;
                    for (int k = 0; k < K; ++k) {
                        const T* brow = pb->value.data() + static_cast<std::size_t>(k) * N;
                        T acc = T(0);
                        for (int j = 0; j < N; ++j) acc += grow[j] * brow[j];
                        darow[k] += acc;
                    }
                }
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                // dB[k,j] = sum_i A[i,k] * go[i,j]
                for (int i = 0; i < M; ++i) {
                    const T* grow = go + static_cast<std::size_t>(i) * N;
                    const T* arow = pa->value.data() + static_cast<std::size_t>(i) * K;
                    for (int k = 0; k < K; ++k) {
                        const T aik = arow[k];
                        if (aik == T(0)) continue;
                        T* dbrow = pb->grad.data() + static_cast<std::size_t>(k) * N;
                        for (int j = 0; j < N; ++j) dbrow[j] += aik * grow[j];
                    }
                }
            }
        };
    }
    return Tensor<T>(out);
}

template <class T>
Tensor<T> relu(const Tensor<T>& a) {
    auto out = make_op<T>(a.shape(), "relu", {a.node()});
    const T* av = a.data().data();
    T* ov = out->value.data();
    const std::size_t n = out->value.size();
    for (std::size_t i = 0; i < n; ++i) ov[i] = av[i] > T(0) ? av[i] : T(0);
    if (out->requires_grad) {
        Node<T>* o = out.get();
        Node<T>* pa = a.node().get();
        out->backprop = [o, pa, n] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                if (pa->value[i] > T(0)) pa->grad[i] += o->grad[i];
        };
    }
    return Tensor<T>(out);
}

template <class T>
T stable_sigmoid(T x) {
    if (x >= T(0)) {
        const T e = std::exp(-x);
        return T(1) / (T(1) + e);
    }
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    auto out = make_op<T>(a.shape(), "sigmoid", {a.node()});
    const T* av = a.data().data();
    T* ov = out->value.data();
    const std::size_t n = out->value.size();
    for (std::size_t i = 0; i < n; ++i) ov[i] = stable_sigmoid(av[i]);
    if (out->requires_grad) {
        Node<T>* o = out.get();
        Node<T>* pa = a.node().get();
        out->backprop = [o, pa, n] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                const T s = o->value[i];
                pa->grad[i] += o->grad[i] * s * (T(1) - s);
            }
        };
    }
    return Tensor<T>(out);
}

template <class T>
Tensor<T> tanh_(const Tensor<T>& a) {
    auto out = make_op<T>(a.shape(), "tanh", {a.node()});
    const T* av = a.data().data();
    T* ov = out->value.data();
    const std::size_t n = out->value.size();
    for (std::size_t i = 0; i < n; ++i) ov[i] = std::tanh(av[i]);
    if (out->requires_grad) {
        Node<T>* o = out.get();
        Node<T>* pa = a.node().get();
        out->backprop = [o, pa, n] {
            pa->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                const T t = o->value[i];
                pa->grad[i] += o->grad[i] * (T(1) - t * t);
            }
        };
    }
    return Tensor<T>(out);
}

// Softmax over the last axis of a 1-D or 2-D tensor, computed with
// max-subtraction so pre-activations anywhere in [-50,50] stay finite.
template <class T>
Tensor<T> softmax(const Tensor<T>& a) {
    if (a.ndim() < 1 || a.ndim() > 2)
        shape_error("softmax", "expects 1-D or 2-D input, got " + shape_str(a.shape()));
    const int K = a.dim(a.ndim() - 1);
    const int R = a.ndim() == 2 ? a.dim(0) : 1;
    auto out = make_op<T>(a.shape(), "softmax", {a.node()});
    const T* av = a.data().data();
    T* ov = out->value.data();
    for (int r = 0; r < R; ++r) {
        const T* row = av + static_cast<std::size_t>(r) * K;
        T* orow = ov + static_cast<std::size_t>(r) * K;
        T m = row[0];
        for (int k = 1; k < K; ++k) m = std::max(m, row[k]);
        T z = T(0);
        for (int k = 0; k < K; ++k) {
            orow[k] = std::exp(row[k] - m);
            z += orow[k];
        }
        for (int k = 0; k < K; ++k) orow[k] /= z;
    }
    if (out->requires_grad) {
        Node<T>* o = out.get();
        Node<T>* pa = a.node().get();
        out->backprop = [o, pa, R, K] {
            pa->ensure_grad();
            for (int r = 0; r < R; ++r) {
                const T* s = o->value.data() + static_cast<std::size_t>(r) * K;
                const T* g = o->grad.data() + static_cast<std::size_t>(r) * K;
                T* d = pa->grad.data() + static_cast<std::size_t>(r) * K;
                T dot = T(0);
                for (int k = 0; k < K; ++k) dot += g[k] * s[k];
                for (int k = 0; k < K; ++k) d[k] += s[k] * (g[k] - dot);
            }
        };
    }
    return Tensor<T>(out);
}

namespace detail {

template <class T>
void im2col(const T* x, int C, int H, int W, int kh, int kw, int stride, int padding,
            int OH, int OW, T* cols) {
    const int K = C * kh * kw;
    for (int oh = 0; oh < OH; ++oh) {
        for (int ow = 0; ow < OW; ++ow) {
            T* row = cols + static_cast<std::size_t>(oh * OW + ow) * K;
            const int ih0 = oh * stride - padding;
            const int iw0 = ow * stride - padding;
            int idx = 0;
            for (int c = 0; c < C; ++c) {
                const T* xc = x + static_cast<std::size_t>(c) * H * W;
                for (int i = 0; i < kh; ++i) {
                    const int ih = ih0 + i;
                    for (int j = 0; j < kw; ++j, ++idx) {
                        const int iw = iw0 + j;
                        row[idx] = (ih >= 0 && ih < H && iw >= 0 && iw < W)
                                       ? xc[static_cast<std::size_t>(ih) * W + iw]
                                       : T(0);
                    }
                }
            }
        }
    }
}

inline int conv_out_dim(int in, int k, int stride, int padding) {
    return (in + 2 * padding - k) / stride + 1;
}

}  // namespace detail

// x:[N,Cin,H,W], k:[Cout,Cin,kh,kw], bias:[Cout] -> [N,Cout,OH,OW]
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& bias,
                 int stride, int padding) {
    if (x.ndim() != 4) shape_error("conv2d", "input must be [N,C,H,W], got " + shape_str(x.shape()));
    if (k.ndim() != 4) shape_error("conv2d", "kernel must be [Cout,Cin,kh,kw], got " + shape_str(k.shape()));
    if (bias.ndim() != 1 || bias.dim(0) != k.dim(0))
        shape_error("conv2d", "bias must be [Cout]=" + std::to_string(k.dim(0)) + ", got " + shape_str(bias.shape()));
    if (x.dim(1) != k.dim(1))
        shape_error("conv2d", "input channels " + std::to_string(x.dim(1)) + " do not match kernel channels " + std::to_string(k.dim(1)));
    if (stride < 1) shape_error("conv2d", "stride must be positive");
    if (padding < 0) shape_error("conv2d", "padding must be non-negative");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = k.dim(0), kh = k.dim(2), kw = k.dim(3);
    if (kh > H + 2 * padding || kw > W + 2 * padding)
        shape_error("conv2d", "kernel " + shape_str(k.shape()) + " larger than padded input " + shape_str(x.shape()));
    const int OH = detail::conv_out_dim(H, kh, stride, padding);
    const int OW = detail::conv_out_dim(W, kw, stride, padding);
    const int POS = OH * OW;
    const int K = C * kh * kw;

    auto out = make_op<T>({N, Co, OH, OW}, "conv2d", {x.node(), k.node(), bias.node()});
    auto cols = std::make_shared<std::vector<T>>(static_cast<std::size_t>(N) * POS * K);
    const T* xv = x.data().data();
    const T* kv = k.data().data();
    const T* bv = bias.data().data();
    T* ov = out->value.data();
    for (int n = 0; n < N; ++n) {
        T* ncols = cols->data() + static_cast<std::size_t>(n) * POS * K;
        detail::im2col(xv + static_cast<std::size_t>(n) * C * H * W, C, H, W, kh, kw, stride, padding, OH, OW, ncols);
        for (int co = 0; co < Co; ++co) {
            const T* krow = kv + static_cast<std::size_t>(co) * K;
            const T b = bv[co];
            T* orow = ov + (static_cast<std::size_t>(n) * Co + co) * POS;
            for (int p = 0; p < POS; ++p) {
                const T* crow = ncols + static_cast<std::size_t>(p) * K;
                T acc = b;
                for (int q = 0; q < K; ++q) acc += krow[q] * crow[q];
                orow[p] = acc;
            }
        }
    }
    if (out->requires_grad) {
        Node<T>* o = out.get();
        Node<T>* px = x.node().get();
        Node<T>* pk = k.node().get();
        Node<T>* pb = bias.node().get();
        out->backprop = [o, px, pk, pb, cols, N, C, H, W, Co, kh, kw, stride, padding, OH, OW, POS, K] {
            const T* go = o->grad.data();
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (int n = 0; n < N; ++n)
                    for (int co = 0; co < Co; ++co) {
                        const T* grow = go + (static_cast<std::size_t>(n) * Co + co) * POS;
                        T acc = T(0);
                        for (int p = 0; p < POS; ++p) acc += grow[p];
                        pb->grad[co] += acc;
                    }
            }
            if (pk->requires_grad) {
                pk->ensure_grad();
                for (int n = 0; n < N; ++n) {
                    const T* ncols = cols->data() + static_cast<std::size_t>(n) * POS * K;
                    for (int co = 0; co < Co; ++co) {
                        const T* grow = go + (static_cast<std::size_t>(n) * Co + co) * POS;
                        T* dk = pk->grad.data() + static_cast<std::size_t>(co) * K;
                        for (int p = 0; p < POS; ++p) {
                            const T g = grow[p];
                            if (g == T(0)) continue;
                            const T* crow = ncols + static_cast<std::size_t>(p) * K;
                            for (int q = 0; q < K; ++q) dk[q] += g * crow[q];
                        }
                    }
                }
            }
            if (px->requires_grad) {
                px->ensure_grad();
                std::vector<T> drow(static_cast<std::size_t>(K));
                for (int n = 0; n < N; ++n) {
                    T* dx = px->grad.data() + static_cast<std::size_t>(n) * C * H * W;
                    for (int oh = 0; oh < OH; ++oh)
                        for (int ow = 0; ow < OW; ++ow) {
                            const int p = oh * OW + ow;
                            std::fill(drow.begin(), drow.end(), T(0));
                            for (int co = 0; co < Co; ++co) {
                                const T g = go[(static_cast<std::size_t>(n) * Co + co) * POS + p];
                                if (g == T(0)) continue;
                                const T* krow = pk->value.data() + static_cast<std::size_t>(co) * K;
                                for (int q = 0; q < K; ++q) drow[q] += g * krow[q];
                            }
                            const int ih0 = oh * stride - padding;
                            const int iw0 = ow * stride - padding;
                            int idx = 0;
                            for (int c = 0; c < C; ++c) {
                                T* dxc = dx + static_cast<std::size_t>(c) * H * W;
                                for (int i = 0; i < kh; ++i) {
                                    const int ih = ih0 + i;
                                    for (int j = 0; j < kw; ++j, ++idx) {
                                        const int iw = iw0 + j;
                                        if (ih >= 0 && ih < H && iw >= 0 && iw < W)
                                            dxc[static_cast<std::size_t>(ih) * W + iw] += drow[idx];
                                    }
                                }
                            }
                        }
                }
            }
        };
    }
    return Tensor<T>(out);
}

// Max pool with explicit window/stride/padding. Padded cells never win the
// max; every window is guaranteed at least one real cell when padding < k.
template <class T>
Tensor<T> max_pool2d(const Tensor<T>& x, int k, int stride, int padding) {
    if (x.ndim() != 4) shape_error("max_pool2d", "input must be [N,C,H,W], got " + shape_str(x.shape()));
    if (k < 1 || stride < 1 || padding < 0 || padding >= k)
        shape_error("max_pool2d", "invalid window/stride/padding");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (k > H + 2 * padding || k > W + 2 * padding)
        shape_error("max_pool2d", "window larger than padded input " + shape_str(x.shape()));
    const int OH = detail::conv_out_dim(H, k, stride, padding);
    const int OW = detail::conv_out_dim(W, k, stride, padding);
    auto out = make_op<T>({N, C, OH, OW}, "max_pool2d", {x.node()});
    auto argmax = std::make_shared<std::vector<int>>(out->value.size());
    const T* xv = x.data().data();
    T* ov = out->value.data();
    std::size_t oi = 0;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const T* plane = xv + (static_cast<std::size_t>(n) * C + c) * H * W;
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow, ++oi) {
                    const int ih0 = oh * stride - padding;
                    const int iw0 = ow * stride - padding;
                    T best = T(0);
                    int bestIdx = -1;
                    for (int i = 0; i < k; ++i) {
                        const int ih = ih0 + i;
                        if (ih < 0 || ih >= H) continue;
                        for (int j = 0; j < k; ++j) {
                            const int iw = iw0 + j;
                            if (iw < 0 || iw >= W) continue;
                            const int idx = ih * W + iw;
                            if (bestIdx < 0 || plane[idx] > best) {
                                best = plane[idx];
                                bestIdx = idx;
                            }
                        }
                    }
                    ov[oi] = best;
                    (*argmax)[oi] = bestIdx + static_cast<int>((static_cast<std::size_t>(n) * C + c) * H * W);
                }
        }
    if (out->requires_grad) {
        Node<T>* o = out.get();
        Node<T>* px = x.node().get();
        out->backprop = [o, px, argmax] {
            px->ensure_grad();
            const std::size_t n = o->value.size();
            for (std::size_t i = 0; i < n; ++i) px->grad[(*argmax)[i]] += o->grad[i];
        };
    }
    return Tensor<T>(out);
}

// [N,C,H,W] -> [N,C], mean over the spatial axes
template <class T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
    if (x.ndim() != 4) shape_error("global_avg_pool", "input must be [N,C,H,W], got " + shape_str(x.shape()));
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int A = H * W;
    auto out = make_op<T>({N, C}, "global_avg_pool", {x.node()});
    const T* xv = x.data().data();
    T* ov = out->value.data();
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const T* plane = xv + (static_cast<std::size_t>(n) * C + c) * A;
            T acc = T(0);
            for (int i = 0; i < A; ++i) acc += plane[i];
            ov[static_cast<std::size_t>(n) * C + c] = acc / static_cast<T>(A);
        }
    if (out->requires_grad) {
        Node<T>* o = out.get();
        Node<T>* px = x.node().get();
        out->backprop = [o, px, N, C, A] {
            px->ensure_grad();
            for (int n = 0; n < N; ++n)
                for (int c = 0; c < C; ++c) {
                    const T g = o->grad[static_cast<std::size_t>(n) * C + c] / static_cast<T>(A);
                    T* plane = px->grad.data() + (static_cast<std::size_t>(n) * C + c) * A;
                    for (int i = 0; i < A; ++i) plane[i] += g;
                }
        };
    }
    return Tensor<T>(out);
}

// Concatenation along an axis; all other dimensions must agree.
template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
    if (parts.empty()) shape_error("concat", "no operands");
    const int nd = parts[0].ndim();
    if (axis < 0 || axis >= nd) shape_error("concat", "axis out of range");
    Shape oshape = parts[0].shape();
    for (std::size_t p = 1; p < parts.size(); ++p) {
        if (parts[p].ndim() != nd) shape_error("concat", "rank mismatch");
        for (int d = 0; d < nd; ++d)
            if (d != axis && parts[p].dim(d) != oshape[d])
                shape_error("concat", "shape mismatch at axis " + std::to_string(d) + ": " +
                                          shape_str(parts[p].shape()) + " vs " + shape_str(parts[0].shape()));
        oshape[axis] += parts[p].dim(axis);
    }
    std::size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= static_cast<std::size_t>(oshape[d]);
    for (int d = axis + 1; d < nd; ++d) inner *= static_cast<std::size_t>(oshape[d]);

    auto node = std::make_shared<Node<T>>();
    node->shape = oshape;
    node->value.resize(shape_numel(oshape));
    node->is_leaf = false;
    node->op = "concat";
    node->id = Node<T>::fresh_id();
    if (grad_mode())
        for (const auto& p : parts)
            if (p.requires_grad()) {
                node->requires_grad = true;
                break;
            }
    if (node->requires_grad)
        for (const auto& p : parts) node->parents.push_back(p.node());

    const std::size_t ostride = static_cast<std::size_t>(oshape[axis]) * inner;
    std::size_t off = 0;
    std::vector<std::size_t> offsets;
    for (const auto& part : parts) {
        offsets.push_back(off);
        const std::size_t pstride = static_cast<std::size_t>(part.dim(axis)) * inner;
        const T* pv = part.data().data();
        for (std::size_t u = 0; u < outer; ++u)
            std::memcpy(node->value.data() + u * ostride + off, pv + u * pstride, pstride * sizeof(T));
        off += pstride;
    }
    if (node->requires_grad) {
        Node<T>* o = node.get();
        std::vector<Node<T>*> ps;
        for (const auto& p : parts) ps.push_back(p.node().get());
        node->backprop = [o, ps, offsets, outer, ostride] {
            for (std::size_t pi = 0; pi < ps.size(); ++pi) {
                Node<T>* p = ps[pi];
                if (!p->requires_grad) continue;
                p->ensure_grad();
                const std::size_t pstride = p->value.size() / outer;
                for (std::size_t u = 0; u < outer; ++u) {
                    const T* g = o->grad.data() + u * ostride + offsets[pi];
                    T* d = p->grad.data() + u * pstride;
                    for (std::size_t i = 0; i < pstride; ++i) d[i] += g[i];
                }
            }
        };
    }
    return Tensor<T>(node);
}

template <class T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
    if (shape_numel(shape) != a.size())
        shape_error("reshape", "cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
    auto out = make_op<T>(std::move(shape), "reshape", {a.node()});
    std::memcpy(out->value.data(), a.data().data(), a.size() * sizeof(T));
    if (out->requires_grad) {
        Node<T>* o = out.get();
        Node<T>* pa = a.node().get();
        out->backprop = [o, pa] {
            pa->ensure_grad();
            const std::size_t n = o->value.size();
            for (std::size_t i = 0; i < n; ++i) pa->grad[i] += o->grad[i];
        };
    }
    return Tensor<T>(out);
}

template <class T>
Tensor<T> flatten(const Tensor<T>& a) {
    return reshape(a, {static_cast<int>(a.size())});
}

// Contiguous slice [start, start+len) along one axis.
template <class T>
Tensor<T> narrow(const Tensor<T>& a, int axis, int start, int len) {
    const int nd = a.ndim();
    if (axis < 0 || axis >= nd) shape_error("narrow", "axis out of range");
    if (start < 0 || len <= 0 || start + len > a.dim(axis))
        shape_error("narrow", "slice [" + std::to_string(start) + "," + std::to_string(start + len) +
                                  ") out of range for " + shape_str(a.shape()));
    Shape oshape = a.shape();
    oshape[axis] = len;
    std::size_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= static_cast<std::size_t>(oshape[d]);
    for (int d = axis + 1; d < nd; ++d) inner *= static_cast<std::size_t>(oshape[d]);
    const std::size_t astride = static_cast<std::size_t>(a.dim(axis)) * inner;
    const std::size_t ostride = static_cast<std::size_t>(len) * inner;
    const std::size_t off = static_cast<std::size_t>(start) * inner;

    auto out = make_op<T>(oshape, "narrow", {a.node()});
    const T* av = a.data().data();
    for (std::size_t u = 0; u < outer; ++u)
        std::memcpy(out->value.data() + u * ostride, av + u * astride + off, ostride * sizeof(T));
    if (out->requires_grad) {
        Node<T>* o = out.get();
        Node<T>* pa = a.node().get();
        out->backprop = [o, pa, outer, astride, ostride, off] {
            pa->ensure_grad();
            for (std::size_t u = 0; u < outer; ++u) {
                const T* g = o->grad.data() + u * ostride;
                T* d = pa->grad.data() + u * astride + off;
                for (std::size_t i = 0; i < ostride; ++i) d[i] += g[i];
            }
        };
    }
    return Tensor<T>(out);
}

template <class T>
Tensor<T> sum(const Tensor<T>& a) {
    auto out = make_op<T>({1}, "sum", {a.node()});
    const T* av = a.data().data();
    T acc = T(0);
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) acc += av[i];
    out->value[0] = acc;
    if (out->requires_grad) {
        Node<T>* o = out.get();
        Node<T>* pa = a.node().get();
        out->backprop = [o, pa, n] {
            pa->ensure_grad();
            const T g = o->grad[0];
            for (std::size_t i = 0; i < n; ++i) pa->grad[i] += g;
        };
    }
    return Tensor<T>(out);
}

// Mean cross-entropy of logits [N,K] against integer class targets.
// Fused log-softmax keeps large logits finite.
template <class T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets) {
    if (logits.ndim() != 2) shape_error("cross_entropy", "logits must be [N,K], got " + shape_str(logits.shape()));
    const int N = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(targets.size()) != N)
        shape_error("cross_entropy", "got " + std::to_string(targets.size()) + " targets for " + std::to_string(N) + " rows");
    for (int t : targets)
        if (t < 0 || t >= K) shape_error("cross_entropy", "target class out of range");
    auto out = make_op<T>({1}, "cross_entropy", {logits.node()});
    auto probs = std::make_shared<std::vector<T>>(logits.size());
    const T* lv = logits.data().data();
    T loss = T(0);
    for (int r = 0; r < N; ++r) {
        const T* row = lv + static_cast<std::size_t>(r) * K;
        T* prow = probs->data() + static_cast<std::size_t>(r) * K;
        T m = row[0];
        for (int k = 1; k < K; ++k) m = std::max(m, row[k]);
        T z = T(0);
        for (int k = 0; k < K; ++k) {
            prow[k] = std::exp(row[k] - m);
            z += prow[k];
        }
        for (int k = 0; k < K; ++k) prow[k] /= z;
        loss += m + std::log(z) - row[targets[static_cast<std::size_t>(r)]];
    }
    out->value[0] = loss / static_cast<T>(N);
    if (out->requires_grad) {
        Node<T>* o = out.get();
        Node<T>* pl = logits.node().get();
        out->backprop = [o, pl, probs, targets, N, K] {
            pl->ensure_grad();
            const T g = o->grad[0] / static_cast<T>(N);
            for (int r = 0; r < N; ++r) {
                const T* prow = probs->data() + static_cast<std::size_t>(r) * K;
                T* drow = pl->grad.data() + static_cast<std::size_t>(r) * K;
                for (int k = 0; k < K; ++k)
                    drow[k] += g * (prow[k] - (k == targets[static_cast<std::size_t>(r)] ? T(1) : T(0)));
            }
        };
    }
    return Tensor<T>(out);
}

// Mean squared error between equal-shape tensors.
template <class T>
Tensor<T> mse(const Tensor<T>& pred, const Tensor<T>& target) {
    check_same_shape("mse", pred, target);
    auto out = make_op<T>({1}, "mse", {pred.node(), target.node()});
    const T* pv = pred.data().data();
    const T* tv = target.data().data();
    const std::size_t n = pred.size();
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        const T d = pv[i] - tv[i];
        acc += d * d;
    }
    out->value[0] = acc / static_cast<T>(n);
    if (out->requires_grad) {
        Node<T>* o = out.get();
        Node<T>* pp = pred.node().get();
        Node<T>* pt = target.node().get();
        out->backprop = [o, pp, pt, n] {
            const T g = o->grad[0] * T(2) / static_cast<T>(n);
            if (pp->requires_grad) {
                pp->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) pp->grad[i] += g * (pp->value[i] - pt->value[i]);
            }
            if (pt->requires_grad) {
                pt->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) pt->grad[i] -= g * (pp->value[i] - pt->value[i]);
            }
        };
    }
    return Tensor<T>(out);
}

}  // namespace stdrive::ag::ops
