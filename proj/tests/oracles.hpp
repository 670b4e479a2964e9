#pragma once

// Independent reference implementations and finite-difference machinery used
// to derive expected test values. Everything here recomputes results from
// first principles in plain scalar code so library kernels are checked
// against an implementation that shares none of their internals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "atoc/array.hpp"
#include "atoc/graph.hpp"
#include "atoc/params.hpp"
#include "atoc/rng.hpp"

namespace oracle {

inline double rel_err(double got, double want) {
  const double denom = std::max({std::fabs(got), std::fabs(want), 1e-12});
  return std::fabs(got - want) / denom;
}

inline double max_abs_diff(const atoc::Array& a, const atoc::Array& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a.v[i] - b.v[i]));
  return m;
}

// Central finite difference of `loss` along one entry of a parameter tensor.
template <typename LossFn>
double fd_param_slope(atoc::ParameterSet& ps, const std::string& name, std::size_t idx,
                      LossFn loss, double eps = 1e-5) {
  double& p = ps.value(name).v[idx];
  const double saved = p;
  p = saved + eps;
  const double up = loss();
  p = saved - eps;
  const double down = loss();
  p = saved;
  return (up - down) / (2.0 * eps);
}

// Central finite difference of `loss` along one entry of a free array.
template <typename LossFn>
double fd_array_slope(atoc::Array& x, std::size_t idx, LossFn loss, double eps = 1e-5) {
  const double saved = x.v[idx];
  x.v[idx] = saved + eps;
  const double up = loss();
  x.v[idx] = saved - eps;
  const double down = loss();
  x.v[idx] = saved;
  return (up - down) / (2.0 * eps);
}

struct GradMismatch {
  bool ok = true;
  std::string where;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Checks every entry of every parameter gradient against central finite
// differences. `build` receives a fresh graph and returns the scalar loss
// node; it must rebuild the identical computation on each call.
template <typename BuildFn>
GradMismatch check_all_param_grads(atoc::ParameterSet& ps, BuildFn build, double rtol,
                                   double atol = 0.0, double eps = 1e-5) {
  atoc::Graph g;
  const int loss = build(g);
  g.backward(loss);
  const auto grads = g.param_grads(ps);
  for (const auto& [name, grad] : grads) {
    for (std::size_t idx = 0; idx < grad.numel(); ++idx) {
      const double analytic = grad.v[idx];
      const double numeric = fd_param_slope(
          ps, name, idx,
          [&] {
            atoc::Graph h;
            return h.value(build(h)).v[0];
          },
          eps);
      if (rel_err(analytic, numeric) > rtol && std::fabs(analytic - numeric) > atol) {
        return {false, name + "[" + std::to_string(idx) + "]", analytic, numeric};
      }
    }
  }
  return {};
}

// Probe-based variant for large parameter sets: `probes` uniformly random
// (tensor, entry) picks per call.
template <typename BuildFn>
GradMismatch check_param_grads(atoc::ParameterSet& ps, BuildFn build, atoc::Rng& rng,
                               std::size_t probes, double rtol, double atol = 1e-7,
                               double eps = 1e-5) {
  atoc::Graph g;
  const int loss = build(g);
  g.backward(loss);
  const auto grads = g.param_grads(ps);
  for (std::size_t k = 0; k < probes; ++k) {
    std::size_t which = rng.index(grads.size());
    auto it = grads.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(which));
    const std::string name = it->first;
    const std::size_t idx = rng.index(it->second.numel());
    const double analytic = it->second.v[idx];
    const double numeric = fd_param_slope(ps, name, idx, [&] {
      atoc::Graph h;
      return h.value(build(h)).v[0];
    });
    if (rel_err(analytic, numeric) > rtol && std::fabs(analytic - numeric) > atol) {
      return {false, name + "[" + std::to_string(idx) + "]", analytic, numeric};
    }
  }
  return {};
}

// Checks the gradient of a scalar loss with respect to a free input array,
// every entry. `build` receives (graph, current x) and returns the loss node.
template <typename BuildFn>
GradMismatch check_input_grads(atoc::Array x, BuildFn build, double rtol,
                               double atol = 0.0, double eps = 1e-5) {
  atoc::Graph g;
  const int xin = g.input(x);
  const int loss = build(g, xin);
  g.backward(loss);
  const atoc::Array gx = g.input_grad(xin);
  for (std::size_t idx = 0; idx < x.numel(); ++idx) {
    const double analytic = gx.v[idx];
    const double numeric = fd_array_slope(
        x, idx,
        [&] {
          atoc::Graph h;
          const int hx = h.input(x);
          return h.value(build(h, hx)).v[0];
        },
        eps);
    if (rel_err(analytic, numeric) > rtol && std::fabs(analytic - numeric) > atol) {
      return {false, "x[" + std::to_string(idx) + "]", analytic, numeric};
    }
  }
  return {};
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Scalar-loop LSTM cell over one timestep. x is [in], h/c are [hid], w is
// [in+hid, 4*hid] row-major with fused gate order input, forget, candidate,
// output; b is [4*hid].
struct LstmCellRef {
  std::vector<double> h;
  std::vector<double> c;
};

inline LstmCellRef lstm_cell_ref(const std::vector<double>& x, const std::vector<double>& h,
                                 const std::vector<double>& c, const atoc::Array& w,
                                 const atoc::Array& b) {
  const std::size_t in = x.size();
  const std::size_t hid = h.size();
  std::vector<double> z(4 * hid, 0.0);
  for (std::size_t j = 0; j < 4 * hid; ++j) {
    double s = b.v[j];
    for (std::size_t k = 0; k < in; ++k) s += x[k] * w.at(k, j);
    for (std::size_t k = 0; k < hid; ++k) s += h[k] * w.at(in + k, j);
    z[j] = s;
  }
  LstmCellRef out{std::vector<double>(hid), std::vector<double>(hid)};
  for (std::size_t j = 0; j < hid; ++j) {
    const double ig = sigmoid(z[j]);
    const double fg = sigmoid(z[hid + j]);
    const double gg = std::tanh(z[2 * hid + j]);
    const double og = sigmoid(z[3 * hid + j]);
    out.c[j] = fg * c[j] + ig * gg;
    out.h[j] = og * std::tanh(out.c[j]);
  }
  return out;
}

// Unidirectional LSTM pass over a [len, dim] sequence with zero initial
// state; returns the [len, dim] hidden trajectory.
inline atoc::Array lstm_pass_ref(const atoc::Array& seq, const atoc::Array& w,
                                 const atoc::Array& b) {
  const std::size_t len = seq.rows();
  const std::size_t dim = seq.cols();
  atoc::Array out({len, dim});
  std::vector<double> h(dim, 0.0), c(dim, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    std::vector<double> x(dim);
    for (std::size_t j = 0; j < dim; ++j) x[j] = seq.at(t, j);
    LstmCellRef r = lstm_cell_ref(x, h, c, w, b);
    h = r.h;
    c = r.c;
    for (std::size_t j = 0; j < dim; ++j) out.at(t, j) = h[j];
  }
  return out;
}

inline atoc::Array reverse_rows(const atoc::Array& a) {
  atoc::Array out(a.shape);
  const std::size_t n = a.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(i, j) = a.at(n - 1 - i, j);
  return out;
}

// Bidirectional reference: forward pass plus row-reversed forward pass of the
// row-reversed input through the backward-direction weights, summed.
inline atoc::Array bilstm_ref(const atoc::Array& seq, const atoc::Array& w_fwd,
                              const atoc::Array& b_fwd, const atoc::Array& w_bwd,
                              const atoc::Array& b_bwd) {
  atoc::Array fwd = lstm_pass_ref(seq, w_fwd, b_fwd);
  atoc::Array bwd = reverse_rows(lstm_pass_ref(reverse_rows(seq), w_bwd, b_bwd));
  atoc::Array out(fwd.shape);
  for (std::size_t i = 0; i < out.numel(); ++i) out.v[i] = fwd.v[i] + bwd.v[i];
  return out;
}

// Train-mode batch norm recomputed with plain loops: biased variance, the
// same epsilon the graph op documents.
inline atoc::Array bn_train_ref(const atoc::Array& x, const atoc::Array& gamma,
                                const atoc::Array& beta, double eps) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  atoc::Array out(x.shape);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x.at(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dlt = x.at(i, j) - mean;
      var += dlt * dlt;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < n; ++i)
      out.at(i, j) = gamma.v[j] * (x.at(i, j) - mean) * inv + beta.v[j];
  }
  return out;
}

inline double sample_mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double sample_stddev(const std::vector<double>& xs) {
  const double mu = sample_mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

inline atoc::Array random_array(std::vector<std::size_t> shape, atoc::Rng& rng,
                                double scale = 1.0) {
  atoc::Array a(std::move(shape));
  for (double& x : a.v) x = rng.normal() * scale;
  return a;
}

}  // namespace oracle
