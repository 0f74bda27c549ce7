#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "utvi/errors.hpp"
#include "utvi/normal.hpp"

namespace utvi {

class Tape;

/// Handle to a node on a tape. The node's value, parent list (node index +
/// local partial per parent) and gradient accumulator live on the tape in
/// structure-of-arrays form; nodes are stored in recording order, which is a
/// topological order of the graph.
struct Var {
    Tape* tape = nullptr;
    std::uint32_t idx = 0;

    double value() const;
};

class Tape {
public:
    Tape() { ebeg_.push_back(0); }

    std::size_t size() const { return val_.size(); }
    std::size_t entry_count() const { return eparent_.size(); }

    void reserve(std::size_t nodes, std::size_t entries) {
        val_.reserve(nodes);
        adj_.reserve(nodes);
        ebeg_.reserve(nodes + 1);
        eparent_.reserve(entries);
        epartial_.reserve(entries);
    }

    double value(Var v) const { return val_[v.idx]; }
    double adjoint(Var v) const { return adj_[v.idx]; }

    /// Leaf holding a constant; gradient flow stops here.
    Var constant(double v) { return close(v); }

    /// Leaf registered as a trainable parameter. Parameter ids are dense,
    /// assigned in registration order.
    Var param(double v) {
        Var n = close(v);
        params_.push_back(n.idx);
        return n;
    }

    std::size_t num_params() const { return params_.size(); }
    double param_value(std::size_t id) const { return val_[params_[id]]; }
    void set_param_value(std::size_t id, double v) { val_[params_[id]] = v; }
    Var param_node(std::size_t id) { return Var{this, params_[id]}; }

    /// Current node count; pass to rewind() to drop nodes recorded after.
    std::size_t mark() const { return val_.size(); }

    /// Drops every node at index >= node_mark. Registered parameters must lie
    /// below the mark.
    void rewind(std::size_t node_mark) {
        if (!params_.empty() && params_.back() >= node_mark) {
            throw ParamError("Tape::rewind: would discard registered parameters");
        }
        val_.resize(node_mark);
        adj_.resize(node_mark);
        ebeg_.resize(node_mark + 1);
        const std::size_t e = ebeg_[node_mark];
        eparent_.resize(e);
        epartial_.resize(e);
    }

    void zero_adjoints() { std::fill(adj_.begin(), adj_.end(), 0.0); }
    void zero_adjoints_from(std::size_t node_mark) {
        std::fill(adj_.begin() + static_cast<std::ptrdiff_t>(node_mark), adj_.end(), 0.0);
    }

    void seed(Var v, double weight) { adj_[v.idx] += weight; }

    /// Reverse sweep over nodes [lo, hi), accumulating adjoints into parents.
    /// Nodes with zero adjoint are skipped.
    void backward_range(std::size_t hi, std::size_t lo) {
        const std::uint32_t* eb = ebeg_.data();
        const std::uint32_t* pr = eparent_.data();
        const double* pt = epartial_.data();
        double* ad = adj_.data();
        for (std::size_t n = hi; n-- > lo;) {
            const double a = ad[n];
            if (a == 0.0) continue;
            for (std::uint32_t e = eb[n], end = eb[n + 1]; e != end; ++e) {
                ad[pr[e]] += a * pt[e];
            }
        }
    }

    /// Full reverse pass from a scalar output. Returns the gradient for every
    /// registered parameter, indexed by parameter id; parameters the output
    /// does not depend on get 0.
    std::vector<double> backward(Var output) {
        if (output.tape != this || output.idx >= val_.size()) {
            throw ParamError("Tape::backward: output is not a node on this tape");
        }
        zero_adjoints();
        adj_[output.idx] = 1.0;
        backward_range(val_.size(), 0);
        std::vector<double> g(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) g[i] = adj_[params_[i]];
        return g;
    }

    // Node construction. Entries for a node are pushed first, then close()
    // finalizes the node; makeN are shorthands for fixed arity.

    void push_entry(std::uint32_t parent, double partial) {
        eparent_.push_back(parent);
        epartial_.push_back(partial);
    }

    Var close(double v) {
        const std::uint32_t idx = static_cast<std::uint32_t>(val_.size());
        val_.push_back(v);
        adj_.push_back(0.0);
        ebeg_.push_back(static_cast<std::uint32_t>(eparent_.size()));
        return Var{this, idx};
    }

    Var make1(double v, std::uint32_t p0, double d0) {
        push_entry(p0, d0);
        return close(v);
    }

    Var make2(double v, std::uint32_t p0, double d0, std::uint32_t p1, double d1) {
        push_entry(p0, d0);
        push_entry(p1, d1);
        return close(v);
    }

private:
    std::vector<double> val_;
    std::vector<double> adj_;
    std::vector<std::uint32_t> ebeg_;  // size() + 1 offsets into the entry arrays
    std::vector<std::uint32_t> eparent_;
    std::vector<double> epartial_;
    std::vector<std::uint32_t> params_;
};

inline double Var::value() const { return tape->value(*this); }

/// Numeric value of a scalar regardless of whether it is a plain double or a
/// tape variable; lets kernels branch on magnitudes generically.
inline double scalar_value(double x) { return x; }
inline double scalar_value(Var v) { return v.value(); }

// Arithmetic

inline Var operator+(Var a, Var b) {
    return a.tape->make2(a.value() + b.value(), a.idx, 1.0, b.idx, 1.0);
}
inline Var operator+(Var a, double c) { return a.tape->make1(a.value() + c, a.idx, 1.0); }
inline Var operator+(double c, Var a) { return a + c; }

inline Var operator-(Var a) { return a.tape->make1(-a.value(), a.idx, -1.0); }
inline Var operator-(Var a, Var b) {
    return a.tape->make2(a.value() - b.value(), a.idx, 1.0, b.idx, -1.0);
}
inline Var operator-(Var a, double c) { return a.tape->make1(a.value() - c, a.idx, 1.0); }
inline Var operator-(double c, Var a) { return a.tape->make1(c - a.value(), a.idx, -1.0); }

inline Var operator*(Var a, Var b) {
    return a.tape->make2(a.value() * b.value(), a.idx, b.value(), b.idx, a.value());
}
inline Var operator*(Var a, double c) { return a.tape->make1(a.value() * c, a.idx, c); }
inline Var operator*(double c, Var a) { return a * c; }

inline Var operator/(Var a, Var b) {
    const double bv = b.value();
    if (bv == 0.0) throw DomainError("Var: division by zero");
    const double inv = 1.0 / bv;
    return a.tape->make2(a.value() * inv, a.idx, inv, b.idx, -a.value() * inv * inv);
}
inline Var operator/(Var a, double c) {
    if (c == 0.0) throw DomainError("Var: division by zero");
    return a * (1.0 / c);
}
inline Var operator/(double c, Var b) {
    const double bv = b.value();
    if (bv == 0.0) throw DomainError("Var: division by zero");
    return b.tape->make1(c / bv, b.idx, -c / (bv * bv));
}

// Elementary functions

inline Var exp(Var a) {
    const double v = std::exp(a.value());
    return a.tape->make1(v, a.idx, v);
}

inline Var log(Var a) {
    const double x = a.value();
    if (!(x > 0.0)) throw DomainError("Var: log of non-positive value");
    return a.tape->make1(std::log(x), a.idx, 1.0 / x);
}

inline Var sqrt(Var a) {
    const double x = a.value();
    if (x < 0.0) throw DomainError("Var: sqrt of negative value");
    const double s = std::sqrt(x);
    return a.tape->make1(s, a.idx, 0.5 / s);
}

inline Var square(Var a) {
    const double x = a.value();
    return a.tape->make1(x * x, a.idx, 2.0 * x);
}
inline double square(double x) { return x * x; }

inline Var pow(Var a, double p) {
    const double x = a.value();
    const double v = std::pow(x, p);
    const double d = p * std::pow(x, p - 1.0);
    if (!std::isfinite(v) || !std::isfinite(d)) {
        throw DomainError("Var: pow outside differentiable domain");
    }
    return a.tape->make1(v, a.idx, d);
}

inline Var sigmoid(Var a) {
    const double s = sigmoid(a.value());
    return a.tape->make1(s, a.idx, s * (1.0 - s));
}

inline Var softplus(Var a) {
    return a.tape->make1(softplus(a.value()), a.idx, sigmoid(a.value()));
}

inline Var leaky_relu(Var a, double alpha) {
    const double x = a.value();
    return a.tape->make1(x > 0.0 ? x : alpha * x, a.idx, x > 0.0 ? 1.0 : alpha);
}

inline Var normal_cdf(Var a) {
    return a.tape->make1(normal_cdf(a.value()), a.idx, normal_pdf(a.value()));
}

inline Var normal_pdf(Var a) {
    const double p = normal_pdf(a.value());
    return a.tape->make1(p, a.idx, -a.value() * p);
}

inline Var normal_inv_cdf(Var a) {
    const double z = normal_inv_cdf(a.value());
    return a.tape->make1(z, a.idx, kSqrt2Pi * std::exp(0.5 * z * z));
}

// min/max pass the gradient to the selected side; ties select the first
// argument, which also fixes the subgradient at equality.

inline Var vmax(Var a, Var b) {
    return a.value() >= b.value() ? a.tape->make1(a.value(), a.idx, 1.0)
                                  : b.tape->make1(b.value(), b.idx, 1.0);
}
inline Var vmax(Var a, double c) {
    return a.value() >= c ? a.tape->make1(a.value(), a.idx, 1.0) : a.tape->constant(c);
}
inline Var vmin(Var a, Var b) {
    return a.value() <= b.value() ? a.tape->make1(a.value(), a.idx, 1.0)
                                  : b.tape->make1(b.value(), b.idx, 1.0);
}
inline Var vmin(Var a, double c) {
    return a.value() <= c ? a.tape->make1(a.value(), a.idx, 1.0) : a.tape->constant(c);
}
inline double vmax(double a, double b) { return a >= b ? a : b; }
inline double vmin(double a, double b) { return a <= b ? a : b; }

/// s*z + m in one node; the workhorse of reparameterized sampling.
inline Var mul_add(Var s, double z, Var m) {
    return s.tape->make2(s.value() * z + m.value(), s.idx, z, m.idx, 1.0);
}
inline double mul_add(double s, double z, double m) { return s * z + m; }

// Fused reductions. One node with one entry per contributing term; these keep
// the graph for wide layers flat instead of building log-depth add trees.

inline Var dot(const Var* a, const Var* b, std::size_t n) {
    if (n == 0) throw ParamError("dot: empty input");
    Tape& t = *a[0].tape;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double av = t.value(a[i]), bv = t.value(b[i]);
        acc += av * bv;
        t.push_entry(a[i].idx, bv);
        t.push_entry(b[i].idx, av);
    }
    return t.close(acc);
}
inline double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

inline Var weighted_sum(const Var* a, const double* w, std::size_t n) {
    if (n == 0) throw ParamError("weighted_sum: empty input");
    Tape& t = *a[0].tape;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += t.value(a[i]) * w[i];
        t.push_entry(a[i].idx, w[i]);
    }
    return t.close(acc);
}
inline double weighted_sum(const double* a, const double* w, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * w[i];
    return acc;
}

inline Var sum(const Var* a, std::size_t n) {
    if (n == 0) throw ParamError("sum: empty input");
    Tape& t = *a[0].tape;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += t.value(a[i]);
        t.push_entry(a[i].idx, 1.0);
    }
    return t.close(acc);
}
inline double sum(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

/// Sum of w_i * d_i^2.
inline Var weighted_sq_sum(const Var* d, const double* w, std::size_t n) {
    if (n == 0) throw ParamError("weighted_sq_sum: empty input");
    Tape& t = *d[0].tape;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dv = t.value(d[i]);
        acc += w[i] * dv * dv;
        t.push_entry(d[i].idx, 2.0 * w[i] * dv);
    }
    return t.close(acc);
}
inline double weighted_sq_sum(const double* d, const double* w, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += w[i] * d[i] * d[i];
    return acc;
}

// Linear-layer moment reductions (one output node each).
// mean:     sum_j mu_w[j] * mu_x[j] + mu_b
// variance: sum_j (v_w[j]*v_x[j] + v_w[j]*mu_x[j]^2 + mu_w[j]^2*v_x[j]) + v_b

inline Var linear_mean(const Var* mu_w, const Var* mu_x, std::size_t n, Var mu_b) {
    Tape& t = *mu_b.tape;
    double acc = t.value(mu_b);
    for (std::size_t i = 0; i < n; ++i) {
        const double wv = t.value(mu_w[i]), xv = t.value(mu_x[i]);
        acc += wv * xv;
        t.push_entry(mu_w[i].idx, xv);
        t.push_entry(mu_x[i].idx, wv);
    }
    t.push_entry(mu_b.idx, 1.0);
    return t.close(acc);
}
inline Var linear_mean(const Var* mu_w, const double* mu_x, std::size_t n, Var mu_b) {
    Tape& t = *mu_b.tape;
    double acc = t.value(mu_b);
    for (std::size_t i = 0; i < n; ++i) {
        acc += t.value(mu_w[i]) * mu_x[i];
        t.push_entry(mu_w[i].idx, mu_x[i]);
    }
    t.push_entry(mu_b.idx, 1.0);
    return t.close(acc);
}
inline double linear_mean(const double* mu_w, const double* mu_x, std::size_t n, double mu_b) {
    return dot(mu_w, mu_x, n) + mu_b;
}

inline Var linear_var(const Var* v_w, const Var* mu_w, const Var* v_x, const Var* mu_x,
                      std::size_t n, Var v_b) {
    Tape& t = *v_b.tape;
    double acc = t.value(v_b);
    for (std::size_t i = 0; i < n; ++i) {
        const double vw = t.value(v_w[i]), mw = t.value(mu_w[i]);
        const double vx = t.value(v_x[i]), mx = t.value(mu_x[i]);
        acc += vw * vx + vw * mx * mx + mw * mw * vx;
        t.push_entry(v_w[i].idx, vx + mx * mx);
        t.push_entry(mu_w[i].idx, 2.0 * mw * vx);
        t.push_entry(v_x[i].idx, vw + mw * mw);
        t.push_entry(mu_x[i].idx, 2.0 * mx * vw);
    }
    t.push_entry(v_b.idx, 1.0);
    return t.close(acc);
}
inline Var linear_var(const Var* v_w, const Var* mu_w, const double* v_x, const double* mu_x,
                      std::size_t n, Var v_b) {
    Tape& t = *v_b.tape;
    double acc = t.value(v_b);
    for (std::size_t i = 0; i < n; ++i) {
        const double vw = t.value(v_w[i]), mw = t.value(mu_w[i]);
        const double vx = v_x[i], mx = mu_x[i];
        acc += vw * vx + vw * mx * mx + mw * mw * vx;
        t.push_entry(v_w[i].idx, vx + mx * mx);
        if (vx != 0.0) t.push_entry(mu_w[i].idx, 2.0 * mw * vx);
    }
    t.push_entry(v_b.idx, 1.0);
    return t.close(acc);
}
inline double linear_var(const double* v_w, const double* mu_w, const double* v_x,
                         const double* mu_x, std::size_t n, double v_b) {
    double acc = v_b;
    for (std::size_t i = 0; i < n; ++i) {
        acc += v_w[i] * v_x[i] + v_w[i] * mu_x[i] * mu_x[i] + mu_w[i] * mu_w[i] * v_x[i];
    }
    return acc;
}

/// KL of N(mu, sigma2) to the prior N(0, prior_sigma^2), as a function of the
/// (mu, sigma2) nodes: -0.5*log(sigma2) + c*(sigma2 + mu^2) + const with
/// c = 1/(2*prior_sigma^2).
inline Var kl_term(Var mu, Var sigma2, double prior_sigma) {
    Tape& t = *mu.tape;
    const double s2 = t.value(sigma2);
    if (!(s2 > 0.0)) throw DomainError("kl_term: sigma2 must be positive");
    const double m = t.value(mu);
    const double c = 0.5 / (prior_sigma * prior_sigma);
    const double v = std::log(prior_sigma) - 0.5 * std::log(s2) + c * (s2 + m * m) - 0.5;
    return t.make2(v, sigma2.idx, c - 0.5 / s2, mu.idx, 2.0 * c * m);
}

// The operation set exposed through the enum dispatcher.

enum class Op {
    Add,
    Mul,
    Div,
    Exp,
    Log,
    Sqrt,
    NormalCdf,
    Sigmoid,
    LeakyRelu,
    Pow,
    Min,
    Max,
};

inline Var record(Op op, Var a, Var b) {
    switch (op) {
        case Op::Add: return a + b;
        case Op::Mul: return a * b;
        case Op::Div: return a / b;
        case Op::Min: return vmin(a, b);
        case Op::Max: return vmax(a, b);
        default: throw ParamError("record: operation is not binary");
    }
}

inline Var record(Op op, Var a) {
    switch (op) {
        case Op::Exp: return exp(a);
        case Op::Log: return log(a);
        case Op::Sqrt: return sqrt(a);
        case Op::NormalCdf: return normal_cdf(a);
        case Op::Sigmoid: return sigmoid(a);
        default: throw ParamError("record: operation is not unary");
    }
}

inline Var record(Op op, Var a, double c) {
    switch (op) {
        case Op::LeakyRelu: return leaky_relu(a, c);
        case Op::Pow: return pow(a, c);
        default: throw ParamError("record: operation does not take a scalar argument");
    }
}

}  // namespace utvi
