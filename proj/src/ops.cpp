#include "tapir/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tapir {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }
}

std::size_t us(int v) { return static_cast<std::size_t>(v); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = make_op(a.shape(), {a, b}, [](TensorNode& n) {
        for (int p = 0; p < 2; ++p) {
            Tensor& par = n.parents[us(p)];
            if (!par.tracked()) continue;
            auto& g = par.grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
        }
    });
    const auto& av = a.value();
    const auto& bv = b.value();
    auto& ov = out.value();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, real(-1))); }

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = make_op(a.shape(), {a, b}, [](TensorNode& n) {
        Tensor& pa = n.parents[0];
        Tensor& pb = n.parents[1];
        if (pa.tracked()) {
            auto& g = pa.grad();
            const auto& bv = pb.value();
            for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * bv[i];
        }
        if (pb.tracked()) {
            auto& g = pb.grad();
            const auto& av = pa.value();
            for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * av[i];
        }
    });
    const auto& av = a.value();
    const auto& bv = b.value();
    auto& ov = out.value();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
    return out;
}

Tensor scale(const Tensor& a, real c) {
    Tensor out = make_op(a.shape(), {a}, [c](TensorNode& n) {
        Tensor& pa = n.parents[0];
        if (!pa.tracked()) return;
        auto& g = pa.grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += c * n.grad[i];
    });
    const auto& av = a.value();
    auto& ov = out.value();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = c * av[i];
    return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& bias) {
    require(a.ndim() == 2 && bias.ndim() == 1 && a.dim(1) == bias.dim(0),
            "add_rowvec: expects [m,n] and [n]");
    const int m = a.dim(0), nn = a.dim(1);
    Tensor out = make_op(a.shape(), {a, bias}, [m, nn](TensorNode& n) {
        Tensor& pa = n.parents[0];
        Tensor& pb = n.parents[1];
        if (pa.tracked()) {
            auto& g = pa.grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
        }
        if (pb.tracked()) {
            auto& g = pb.grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < nn; ++j) g[us(j)] += n.grad[us(i) * us(nn) + us(j)];
        }
    });
    const auto& av = a.value();
    const auto& bv = bias.value();
    auto& ov = out.value();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < nn; ++j) ov[us(i) * us(nn) + us(j)] = av[us(i) * us(nn) + us(j)] + bv[us(j)];
    return out;
}

Tensor div_colvec(const Tensor& a, const Tensor& denom) {
    require(a.ndim() == 2 && denom.ndim() == 1 && a.dim(0) == denom.dim(0),
            "div_colvec: expects [m,n] and [m]");
    const int m = a.dim(0), nn = a.dim(1);
    Tensor out = make_op(a.shape(), {a, denom}, [m, nn](TensorNode& n) {
        Tensor& pa = n.parents[0];
        Tensor& pd = n.parents[1];
        const auto& dv = pd.value();
        if (pa.tracked()) {
            auto& g = pa.grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < nn; ++j)
                    g[us(i) * us(nn) + us(j)] += n.grad[us(i) * us(nn) + us(j)] / dv[us(i)];
        }
        if (pd.tracked()) {
            auto& g = pd.grad();
            for (int i = 0; i < m; ++i) {
                real acc = 0;
                for (int j = 0; j < nn; ++j)
                    acc += n.grad[us(i) * us(nn) + us(j)] * n.value[us(i) * us(nn) + us(j)];
                g[us(i)] -= acc / dv[us(i)];
            }
        }
    });
    const auto& av = a.value();
    const auto& dv = denom.value();
    auto& ov = out.value();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < nn; ++j) ov[us(i) * us(nn) + us(j)] = av[us(i) * us(nn) + us(j)] / dv[us(i)];
    return out;
}

namespace {

// C[m,n] += A[m,k] * B[k,n], raw buffers
void gemm_acc(const real* a, const real* b, real* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const real av = a[us(i) * us(k) + us(p)];
            if (av == real(0)) continue;
            const real* brow = b + us(p) * us(n);
            real* crow = c + us(i) * us(n);
            for (int j = 0; j < n; ++j) crow[us(j)] += av * brow[us(j)];
        }
    }
}

// C[m,n] += A[m,k] * B[n,k]^T
void gemm_bt_acc(const real* a, const real* b, real* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            real acc = 0;
            const real* arow = a + us(i) * us(k);
            const real* brow = b + us(j) * us(k);
            for (int p = 0; p < k; ++p) acc += arow[us(p)] * brow[us(p)];
            c[us(i) * us(n) + us(j)] += acc;
        }
    }
}

// C[m,n] += A[k,m]^T * B[k,n]
void gemm_tn_acc(const real* a, const real* b, real* c, int m, int k, int n) {
    for (int p = 0; p < k; ++p) {
        const real* arow = a + us(p) * us(m);
        const real* brow = b + us(p) * us(n);
        for (int i = 0; i < m; ++i) {
            const real av = arow[us(i)];
            if (av == real(0)) continue;
            real* crow = c + us(i) * us(n);
            for (int j = 0; j < n; ++j) crow[us(j)] += av * brow[us(j)];
        }
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(0), "matmul: inner dims differ");
    const int m = a.dim(0), k = a.dim(1), nn = b.dim(1);
    Tensor out = make_op({m, nn}, {a, b}, [m, k, nn](TensorNode& n) {
        Tensor& pa = n.parents[0];
        Tensor& pb = n.parents[1];
        // dA = g * B^T ; dB = A^T * g
        if (pa.tracked()) gemm_bt_acc(n.grad.data(), pb.value().data(), pa.grad().data(), m, nn, k);
        if (pb.tracked()) gemm_tn_acc(pa.value().data(), n.grad.data(), pb.grad().data(), k, m, nn);
    });
    gemm_acc(a.value().data(), b.value().data(), out.value().data(), m, k, nn);
    return out;
}

Tensor matmul_bt(const Tensor& a, const Tensor& b) {
    require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(1), "matmul_bt: inner dims differ");
    const int m = a.dim(0), k = a.dim(1), nn = b.dim(0);
    Tensor out = make_op({m, nn}, {a, b}, [m, k, nn](TensorNode& n) {
        Tensor& pa = n.parents[0];
        Tensor& pb = n.parents[1];
        // dA = g * B ; dB = g^T * A
        if (pa.tracked()) gemm_acc(n.grad.data(), pb.value().data(), pa.grad().data(), m, nn, k);
        if (pb.tracked()) gemm_tn_acc(n.grad.data(), pa.value().data(), pb.grad().data(), nn, m, k);
    });
    gemm_bt_acc(a.value().data(), b.value().data(), out.value().data(), m, k, nn);
    return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require(a.ndim() == 2 && b.ndim() == 2 && a.dim(0) == b.dim(0), "matmul_tn: inner dims differ");
    const int k = a.dim(0), m = a.dim(1), nn = b.dim(1);
    Tensor out = make_op({m, nn}, {a, b}, [m, k, nn](TensorNode& n) {
        Tensor& pa = n.parents[0];
        Tensor& pb = n.parents[1];
        // dA = B * g^T ; dB = A * g
        if (pa.tracked()) gemm_bt_acc(pb.value().data(), n.grad.data(), pa.grad().data(), k, nn, m);
        if (pb.tracked()) gemm_acc(pa.value().data(), n.grad.data(), pb.grad().data(), k, m, nn);
    });
    gemm_tn_acc(a.value().data(), b.value().data(), out.value().data(), m, k, nn);
    return out;
}

Tensor matvec(const Tensor& a, const Tensor& x) {
    require(a.ndim() == 2 && x.ndim() == 1 && a.dim(1) == x.dim(0), "matvec: dims differ");
    const int m = a.dim(0), nn = a.dim(1);
    Tensor out = make_op({m}, {a, x}, [m, nn](TensorNode& n) {
        Tensor& pa = n.parents[0];
        Tensor& px = n.parents[1];
        if (pa.tracked()) {
            auto& g = pa.grad();
            const auto& xv = px.value();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < nn; ++j) g[us(i) * us(nn) + us(j)] += n.grad[us(i)] * xv[us(j)];
        }
        if (px.tracked()) {
            auto& g = px.grad();
            const auto& av = pa.value();
            for (int i = 0; i < m; ++i) {
                const real gi = n.grad[us(i)];
                if (gi == real(0)) continue;
                for (int j = 0; j < nn; ++j) g[us(j)] += gi * av[us(i) * us(nn) + us(j)];
            }
        }
    });
    const auto& av = a.value();
    const auto& xv = x.value();
    auto& ov = out.value();
    for (int i = 0; i < m; ++i) {
        real acc = 0;
        for (int j = 0; j < nn; ++j) acc += av[us(i) * us(nn) + us(j)] * xv[us(j)];
        ov[us(i)] = acc;
    }
    return out;
}

Tensor vecmat(const Tensor& x, const Tensor& a) {
    require(x.ndim() == 1 && a.ndim() == 2 && x.dim(0) == a.dim(0), "vecmat: dims differ");
    const int m = a.dim(0), nn = a.dim(1);
    Tensor out = make_op({nn}, {x, a}, [m, nn](TensorNode& n) {
        Tensor& px = n.parents[0];
        Tensor& pa = n.parents[1];
        if (px.tracked()) {
            auto& g = px.grad();
            const auto& av = pa.value();
            for (int i = 0; i < m; ++i) {
                real acc = 0;
                for (int j = 0; j < nn; ++j) acc += av[us(i) * us(nn) + us(j)] * n.grad[us(j)];
                g[us(i)] += acc;
            }
        }
        if (pa.tracked()) {
            auto& g = pa.grad();
            const auto& xv = px.value();
            for (int i = 0; i < m; ++i) {
                const real xi = xv[us(i)];
                if (xi == real(0)) continue;
                for (int j = 0; j < nn; ++j) g[us(i) * us(nn) + us(j)] += xi * n.grad[us(j)];
            }
        }
    });
    const auto& xv = x.value();
    const auto& av = a.value();
    auto& ov = out.value();
    for (int i = 0; i < m; ++i) {
        const real xi = xv[us(i)];
        if (xi == real(0)) continue;
        for (int j = 0; j < nn; ++j) ov[us(j)] += xi * av[us(i) * us(nn) + us(j)];
    }
    return out;
}

Tensor div_by_scalar(const Tensor& v, const Tensor& s) {
    require(s.size() == 1, "div_by_scalar: divisor must be scalar");
    Tensor out = make_op(v.shape(), {v, s}, [](TensorNode& n) {
        Tensor& pv = n.parents[0];
        Tensor& ps = n.parents[1];
        const real sv = ps.value()[0];
        if (pv.tracked()) {
            auto& g = pv.grad();
            for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] / sv;
        }
        if (ps.tracked()) {
            real acc = 0;
            for (std::size_t i = 0; i < n.grad.size(); ++i) acc += n.grad[i] * n.value[i];
            ps.grad()[0] -= acc / sv;
        }
    });
    const real sv = s.item();
    const auto& vv = v.value();
    auto& ov = out.value();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = vv[i] / sv;
    return out;
}

Tensor dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    Tensor out = make_op({1}, {a, b}, [](TensorNode& n) {
        Tensor& pa = n.parents[0];
        Tensor& pb = n.parents[1];
        const real g = n.grad[0];
        if (pa.tracked()) {
            auto& ga = pa.grad();
            const auto& bv = pb.value();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * bv[i];
        }
        if (pb.tracked()) {
            auto& gb = pb.grad();
            const auto& av = pa.value();
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * av[i];
        }
    });
    const auto& av = a.value();
    const auto& bv = b.value();
    real acc = 0;
    for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
    out.value()[0] = acc;
    return out;
}

Tensor outer(const Tensor& u, const Tensor& v) {
    require(u.ndim() == 1 && v.ndim() == 1, "outer: expects vectors");
    const int m = u.dim(0), nn = v.dim(0);
    Tensor out = make_op({m, nn}, {u, v}, [m, nn](TensorNode& n) {
        Tensor& pu = n.parents[0];
        Tensor& pv = n.parents[1];
        if (pu.tracked()) {
            auto& g = pu.grad();
            const auto& vv = pv.value();
            for (int i = 0; i < m; ++i) {
                real acc = 0;
                for (int j = 0; j < nn; ++j) acc += n.grad[us(i) * us(nn) + us(j)] * vv[us(j)];
                g[us(i)] += acc;
            }
        }
        if (pv.tracked()) {
            auto& g = pv.grad();
            const auto& uv = pu.value();
            for (int i = 0; i < m; ++i) {
                const real ui = uv[us(i)];
                if (ui == real(0)) continue;
                for (int j = 0; j < nn; ++j) g[us(j)] += ui * n.grad[us(i) * us(nn) + us(j)];
            }
        }
    });
    const auto& uv = u.value();
    const auto& vv = v.value();
    auto& ov = out.value();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < nn; ++j) ov[us(i) * us(nn) + us(j)] = uv[us(i)] * vv[us(j)];
    return out;
}

Tensor concat(const Tensor& a, const Tensor& b) {
    require(a.ndim() == 1 && b.ndim() == 1, "concat: expects vectors");
    const int na = a.dim(0), nb = b.dim(0);
    Tensor out = make_op({na + nb}, {a, b}, [na, nb](TensorNode& n) {
        Tensor& pa = n.parents[0];
        Tensor& pb = n.parents[1];
        if (pa.tracked()) {
            auto& g = pa.grad();
            for (int i = 0; i < na; ++i) g[us(i)] += n.grad[us(i)];
        }
        if (pb.tracked()) {
            auto& g = pb.grad();
            for (int i = 0; i < nb; ++i) g[us(i)] += n.grad[us(na + i)];
        }
    });
    auto& ov = out.value();
    std::copy(a.value().begin(), a.value().end(), ov.begin());
    std::copy(b.value().begin(), b.value().end(), ov.begin() + na);
    return out;
}

Tensor slice(const Tensor& a, int offset, int len) {
    require(a.ndim() == 1 && offset >= 0 && len > 0 && offset + len <= a.dim(0),
            "slice: range out of bounds");
    Tensor out = make_op({len}, {a}, [offset, len](TensorNode& n) {
        Tensor& pa = n.parents[0];
        if (!pa.tracked()) return;
        auto& g = pa.grad();
        for (int i = 0; i < len; ++i) g[us(offset + i)] += n.grad[us(i)];
    });
    auto& ov = out.value();
    std::copy(a.value().begin() + offset, a.value().begin() + offset + len, ov.begin());
    return out;
}

Tensor slice_row(const Tensor& a, int row) {
    require(a.ndim() == 2 && row >= 0 && row < a.dim(0), "slice_row: row out of bounds");
    const int nn = a.dim(1);
    Tensor out = make_op({nn}, {a}, [row, nn](TensorNode& n) {
        Tensor& pa = n.parents[0];
        if (!pa.tracked()) return;
        auto& g = pa.grad();
        for (int j = 0; j < nn; ++j) g[us(row) * us(nn) + us(j)] += n.grad[us(j)];
    });
    auto& ov = out.value();
    const auto& av = a.value();
    std::copy(av.begin() + us(row) * us(nn), av.begin() + us(row + 1) * us(nn), ov.begin());
    return out;
}

Tensor slice_cols(const Tensor& a, int offset, int len) {
    require(a.ndim() == 2 && offset >= 0 && len > 0 && offset + len <= a.dim(1),
            "slice_cols: range out of bounds");
    const int m = a.dim(0), nn = a.dim(1);
    Tensor out = make_op({m, len}, {a, }, [m, nn, offset, len](TensorNode& n) {
        Tensor& pa = n.parents[0];
        if (!pa.tracked()) return;
        auto& g = pa.grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < len; ++j)
                g[us(i) * us(nn) + us(offset + j)] += n.grad[us(i) * us(len) + us(j)];
    });
    auto& ov = out.value();
    const auto& av = a.value();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < len; ++j) ov[us(i) * us(len) + us(j)] = av[us(i) * us(nn) + us(offset + j)];
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_cols: empty input");
    const int m = parts[0].dim(0);
    int total = 0;
    for (const auto& p : parts) {
        require(p.ndim() == 2 && p.dim(0) == m, "concat_cols: row counts differ");
        total += p.dim(1);
    }
    std::vector<int> widths;
    for (const auto& p : parts) widths.push_back(p.dim(1));
    Tensor out = make_op({m, total}, parts, [m, total, widths](TensorNode& n) {
        int off = 0;
        for (std::size_t p = 0; p < n.parents.size(); ++p) {
            Tensor& par = n.parents[p];
            const int w = widths[p];
            if (par.tracked()) {
                auto& g = par.grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < w; ++j)
                        g[us(i) * us(w) + us(j)] += n.grad[us(i) * us(total) + us(off + j)];
            }
            off += w;
        }
    });
    auto& ov = out.value();
    int off = 0;
    for (const auto& p : parts) {
        const int w = p.dim(1);
        const auto& pv = p.value();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < w; ++j) ov[us(i) * us(total) + us(off + j)] = pv[us(i) * us(w) + us(j)];
        off += w;
    }
    return out;
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
    require(!rows.empty(), "stack_rows: empty input");
    const int nn = rows[0].dim(0);
    for (const auto& r : rows) require(r.ndim() == 1 && r.dim(0) == nn, "stack_rows: widths differ");
    const int m = static_cast<int>(rows.size());
    Tensor out = make_op({m, nn}, rows, [m, nn](TensorNode& n) {
        for (int i = 0; i < m; ++i) {
            Tensor& par = n.parents[us(i)];
            if (!par.tracked()) continue;
            auto& g = par.grad();
            for (int j = 0; j < nn; ++j) g[us(j)] += n.grad[us(i) * us(nn) + us(j)];
        }
    });
    auto& ov = out.value();
    for (int i = 0; i < m; ++i)
        std::copy(rows[us(i)].value().begin(), rows[us(i)].value().end(), ov.begin() + us(i) * us(nn));
    return out;
}

Tensor stack_scalars(const std::vector<Tensor>& xs) {
    require(!xs.empty(), "stack_scalars: empty input");
    for (const auto& x : xs) require(x.size() == 1, "stack_scalars: expects scalars");
    const int m = static_cast<int>(xs.size());
    Tensor out = make_op({m}, xs, [m](TensorNode& n) {
        for (int i = 0; i < m; ++i) {
            Tensor& par = n.parents[us(i)];
            if (par.tracked()) par.grad()[0] += n.grad[us(i)];
        }
    });
    for (int i = 0; i < m; ++i) out.value()[us(i)] = xs[us(i)].item();
    return out;
}

Tensor sum_rows(const Tensor& a) {
    require(a.ndim() == 2, "sum_rows: expects a matrix");
    const int m = a.dim(0), nn = a.dim(1);
    Tensor out = make_op({nn}, {a}, [m, nn](TensorNode& n) {
        Tensor& pa = n.parents[0];
        if (!pa.tracked()) return;
        auto& g = pa.grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < nn; ++j) g[us(i) * us(nn) + us(j)] += n.grad[us(j)];
    });
    const auto& av = a.value();
    auto& ov = out.value();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < nn; ++j) ov[us(j)] += av[us(i) * us(nn) + us(j)];
    return out;
}

namespace {

template <typename F, typename DF>
Tensor unary_op(const Tensor& x, F f, DF df_from_xy) {
    Tensor out = make_op(x.shape(), {x}, [df_from_xy](TensorNode& n) {
        Tensor& px = n.parents[0];
        if (!px.tracked()) return;
        auto& g = px.grad();
        const auto& xv = px.value();
        for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * df_from_xy(xv[i], n.value[i]);
    });
    const auto& xv = x.value();
    auto& ov = out.value();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = f(xv[i]);
    return out;
}

}  // namespace

Tensor sigmoid(const Tensor& x) {
    return unary_op(
        x,
        [](real v) {
            // stable in both tails
            if (v >= real(0)) {
                const real e = std::exp(-v);
                return real(1) / (real(1) + e);
            }
            const real e = std::exp(v);
            return e / (real(1) + e);
        },
        [](real, real y) { return y * (real(1) - y); });
}

Tensor tanh(const Tensor& x) {
    return unary_op(x, [](real v) { return std::tanh(v); },
                    [](real, real y) { return real(1) - y * y; });
}

Tensor relu(const Tensor& x) {
    return unary_op(x, [](real v) { return v > real(0) ? v : real(0); },
                    [](real v, real) { return v > real(0) ? real(1) : real(0); });
}

Tensor elu1(const Tensor& x) {
    return unary_op(x, [](real v) { return v > real(0) ? v + real(1) : std::exp(v); },
                    [](real v, real y) { return v > real(0) ? real(1) : y; });
}

namespace {

void softmax_span(const real* in, real* out, int n) {
    real mx = in[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, in[us(i)]);
    real denom = 0;
    for (int i = 0; i < n; ++i) {
        out[us(i)] = std::exp(in[us(i)] - mx);
        denom += out[us(i)];
    }
    for (int i = 0; i < n; ++i) out[us(i)] /= denom;
}

void softmax_backward_span(const real* y, const real* gy, real* gx, int n) {
    real dotv = 0;
    for (int i = 0; i < n; ++i) dotv += y[us(i)] * gy[us(i)];
    for (int i = 0; i < n; ++i) gx[us(i)] += y[us(i)] * (gy[us(i)] - dotv);
}

}  // namespace

Tensor softmax(const Tensor& x) {
    require(x.ndim() == 1, "softmax: expects a vector");
    const int n = x.dim(0);
    Tensor out = make_op({n}, {x}, [n](TensorNode& nd) {
        Tensor& px = nd.parents[0];
        if (!px.tracked()) return;
        softmax_backward_span(nd.value.data(), nd.grad.data(), px.grad().data(), n);
    });
    softmax_span(x.value().data(), out.value().data(), n);
    return out;
}

Tensor row_softmax(const Tensor& scores, bool causal) {
    require(scores.ndim() == 2, "row_softmax: expects a matrix");
    const int m = scores.dim(0), n = scores.dim(1);
    if (causal) require(m == n, "row_softmax: causal mask needs a square matrix");
    Tensor out = make_op({m, n}, {scores}, [m, n, causal](TensorNode& nd) {
        Tensor& px = nd.parents[0];
        if (!px.tracked()) return;
        for (int i = 0; i < m; ++i) {
            const int w = causal ? i + 1 : n;
            softmax_backward_span(nd.value.data() + us(i) * us(n), nd.grad.data() + us(i) * us(n),
                                  px.grad().data() + us(i) * us(n), w);
        }
    });
    const auto& sv = scores.value();
    auto& ov = out.value();
    for (int i = 0; i < m; ++i) {
        const int w = causal ? i + 1 : n;
        softmax_span(sv.data() + us(i) * us(n), ov.data() + us(i) * us(n), w);
        for (int j = w; j < n; ++j) ov[us(i) * us(n) + us(j)] = real(0);
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, real eps) {
    require(x.ndim() == 2 && gain.ndim() == 1 && bias.ndim() == 1 && gain.dim(0) == x.dim(1) &&
                bias.dim(0) == x.dim(1),
            "layer_norm: shape mismatch");
    const int m = x.dim(0), n = x.dim(1);
    Tensor out = make_op({m, n}, {x, gain, bias}, [m, n, eps](TensorNode& nd) {
        Tensor& px = nd.parents[0];
        Tensor& pg = nd.parents[1];
        Tensor& pb = nd.parents[2];
        const auto& xv = px.value();
        const auto& gv = pg.value();
        for (int i = 0; i < m; ++i) {
            // recompute row statistics
            real mu = 0;
            for (int j = 0; j < n; ++j) mu += xv[us(i) * us(n) + us(j)];
            mu /= real(n);
            real var = 0;
            for (int j = 0; j < n; ++j) {
                const real d = xv[us(i) * us(n) + us(j)] - mu;
                var += d * d;
            }
            var /= real(n);
            const real s = std::sqrt(var + eps);
            real mean_dxhat = 0, mean_dxhat_xhat = 0;
            std::vector<real> xhat(us(n)), dxhat(us(n));
            for (int j = 0; j < n; ++j) {
                xhat[us(j)] = (xv[us(i) * us(n) + us(j)] - mu) / s;
                dxhat[us(j)] = nd.grad[us(i) * us(n) + us(j)] * gv[us(j)];
                mean_dxhat += dxhat[us(j)];
                mean_dxhat_xhat += dxhat[us(j)] * xhat[us(j)];
            }
            mean_dxhat /= real(n);
            mean_dxhat_xhat /= real(n);
            if (px.tracked()) {
                auto& g = px.grad();
                for (int j = 0; j < n; ++j)
                    g[us(i) * us(n) + us(j)] +=
                        (dxhat[us(j)] - mean_dxhat - xhat[us(j)] * mean_dxhat_xhat) / s;
            }
            if (pg.tracked()) {
                auto& g = pg.grad();
                for (int j = 0; j < n; ++j) g[us(j)] += nd.grad[us(i) * us(n) + us(j)] * xhat[us(j)];
            }
            if (pb.tracked()) {
                auto& g = pb.grad();
                for (int j = 0; j < n; ++j) g[us(j)] += nd.grad[us(i) * us(n) + us(j)];
            }
        }
    });
    const auto& xv = x.value();
    const auto& gv = gain.value();
    const auto& bv = bias.value();
    auto& ov = out.value();
    for (int i = 0; i < m; ++i) {
        real mu = 0;
        for (int j = 0; j < n; ++j) mu += xv[us(i) * us(n) + us(j)];
        mu /= real(n);
        real var = 0;
        for (int j = 0; j < n; ++j) {
            const real d = xv[us(i) * us(n) + us(j)] - mu;
            var += d * d;
        }
        var /= real(n);
        const real s = std::sqrt(var + eps);
        for (int j = 0; j < n; ++j)
            ov[us(i) * us(n) + us(j)] = ((xv[us(i) * us(n) + us(j)] - mu) / s) * gv[us(j)] + bv[us(j)];
    }
    return out;
}

Tensor dropout(const Tensor& x, real rate, Rng& rng, bool train) {
    if (!train || rate <= real(0)) return x;
    require(rate < real(1), "dropout: rate must be < 1");
    const real keep = real(1) - rate;
    auto mask = std::make_shared<std::vector<real>>(x.size());
    for (auto& m : *mask) m = rng.uniform() < static_cast<double>(rate) ? real(0) : real(1) / keep;
    Tensor out = make_op(x.shape(), {x}, [mask](TensorNode& n) {
        Tensor& px = n.parents[0];
        if (!px.tracked()) return;
        auto& g = px.grad();
        for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i] * (*mask)[i];
    });
    const auto& xv = x.value();
    auto& ov = out.value();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] * (*mask)[i];
    return out;
}

Tensor sum(const Tensor& x) {
    Tensor out = make_op({1}, {x}, [](TensorNode& n) {
        Tensor& px = n.parents[0];
        if (!px.tracked()) return;
        auto& g = px.grad();
        for (auto& gi : g) gi += n.grad[0];
    });
    real acc = 0;
    for (real v : x.value()) acc += v;
    out.value()[0] = acc;
    return out;
}

Tensor mean(const Tensor& x) {
    return scale(sum(x), real(1) / static_cast<real>(x.size()));
}

Tensor weighted_sum(const Tensor& weights, const std::vector<Tensor>& xs) {
    require(weights.ndim() == 1 && static_cast<std::size_t>(weights.dim(0)) == xs.size(),
            "weighted_sum: weight count mismatch");
    require(!xs.empty(), "weighted_sum: empty input");
    const int d = xs[0].dim(0);
    for (const auto& x : xs) require(x.ndim() == 1 && x.dim(0) == d, "weighted_sum: dims differ");
    std::vector<Tensor> parents = xs;
    parents.push_back(weights);
    const int k = static_cast<int>(xs.size());
    Tensor out = make_op({d}, parents, [k, d](TensorNode& n) {
        Tensor& pw = n.parents[us(k)];
        const auto& wv = pw.value();
        for (int i = 0; i < k; ++i) {
            Tensor& px = n.parents[us(i)];
            if (px.tracked()) {
                auto& g = px.grad();
                for (int j = 0; j < d; ++j) g[us(j)] += wv[us(i)] * n.grad[us(j)];
            }
            if (pw.tracked()) {
                real acc = 0;
                const auto& xv = px.value();
                for (int j = 0; j < d; ++j) acc += xv[us(j)] * n.grad[us(j)];
                pw.grad()[us(i)] += acc;
            }
        }
    });
    auto& ov = out.value();
    const auto& wv = weights.value();
    for (int i = 0; i < k; ++i) {
        const auto& xv = xs[us(i)].value();
        for (int j = 0; j < d; ++j) ov[us(j)] += wv[us(i)] * xv[us(j)];
    }
    return out;
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
    require(table.ndim() == 2, "embedding: table must be [V,E]");
    require(!ids.empty(), "embedding: empty id list");
    const int v = table.dim(0), e = table.dim(1);
    for (int id : ids) require(id >= 0 && id < v, "embedding: id out of range");
    const int t = static_cast<int>(ids.size());
    auto ids_copy = std::make_shared<std::vector<int>>(ids);
    Tensor out = make_op({t, e}, {table}, [ids_copy, e, t](TensorNode& n) {
        Tensor& pt = n.parents[0];
        if (!pt.tracked()) return;
        auto& g = pt.grad();
        for (int i = 0; i < t; ++i) {
            const int id = (*ids_copy)[us(i)];
            for (int j = 0; j < e; ++j) g[us(id) * us(e) + us(j)] += n.grad[us(i) * us(e) + us(j)];
        }
    });
    const auto& tv = table.value();
    auto& ov = out.value();
    for (int i = 0; i < t; ++i)
        std::copy(tv.begin() + us(ids[us(i)]) * us(e), tv.begin() + us(ids[us(i)] + 1) * us(e),
                  ov.begin() + us(i) * us(e));
    return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& gold) {
    require(logits.ndim() == 2, "cross_entropy: logits must be [T,L]");
    const int t = logits.dim(0), l = logits.dim(1);
    require(static_cast<int>(gold.size()) == t, "cross_entropy: gold length mismatch");
    int counted = 0;
    for (int g : gold) {
        if (g < 0) continue;  // negative = masked out
        require(g < l, "cross_entropy: label out of range");
        ++counted;
    }
    require(counted > 0, "cross_entropy: no unmasked positions");
    auto gold_copy = std::make_shared<std::vector<int>>(gold);
    auto probs = std::make_shared<std::vector<real>>(us(t) * us(l));
    const auto& lv = logits.value();
    for (int i = 0; i < t; ++i) softmax_span(lv.data() + us(i) * us(l), probs->data() + us(i) * us(l), l);

    Tensor out = make_op({1}, {logits}, [gold_copy, probs, t, l, counted](TensorNode& n) {
        Tensor& pl = n.parents[0];
        if (!pl.tracked()) return;
        auto& g = pl.grad();
        const real gscale = n.grad[0] / static_cast<real>(counted);
        for (int i = 0; i < t; ++i) {
            const int gi = (*gold_copy)[us(i)];
            if (gi < 0) continue;
            for (int j = 0; j < l; ++j) {
                real p = (*probs)[us(i) * us(l) + us(j)];
                if (j == gi) p -= real(1);
                g[us(i) * us(l) + us(j)] += gscale * p;
            }
        }
    });
    real acc = 0;
    for (int i = 0; i < t; ++i) {
        const int gi = gold[us(i)];
        if (gi < 0) continue;
        acc -= std::log(std::max((*probs)[us(i) * us(l) + us(gi)], real(1e-30)));
    }
    out.value()[0] = acc / static_cast<real>(counted);
    return out;
}

Tensor bce(const Tensor& score, real target) {
    require(score.size() == 1, "bce: score must be scalar");
    const real s_raw = score.item();
    const real s = std::min(std::max(s_raw, kBceEps), real(1) - kBceEps);
    const bool clamped = s != s_raw;
    Tensor out = make_op({1}, {score}, [s, target, clamped](TensorNode& n) {
        Tensor& ps = n.parents[0];
        if (!ps.tracked() || clamped) return;
        ps.grad()[0] += n.grad[0] * ((s - target) / (s * (real(1) - s)));
    });
    out.value()[0] = -(target * std::log(s) + (real(1) - target) * std::log(real(1) - s));
    return out;
}

int argmax(const std::vector<real>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

int argmax_row(const Tensor& a, int row) {
    const int n = a.dim(1);
    const real* p = a.value().data() + us(row) * us(n);
    return static_cast<int>(std::max_element(p, p + n) - p);
}

}  // namespace tapir
