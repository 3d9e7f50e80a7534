// Copyright 2026 The Voxshield Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VOXSHIELD_NN_HPP_
#define VOXSHIELD_NN_HPP_

#include <vector>

#include "voxshield/common.hpp"

namespace voxshield {
namespace nn {

struct ParamBlock {
  std::vector<double> w;
  // Gradient accumulator; mutable so inference-time input gradients can run
  // through const models.
  mutable std::vector<double> g;

  void resize(size_t n) {
    w.assign(n, 0.0);
    g.assign(n, 0.0);
  }
  void zero_grad() const { std::fill(g.begin(), g.end(), 0.0); }
};

inline void init_uniform(ParamBlock& p, Rng& rng, double scale) {
  for (double& v : p.w) v = rng.uniform(-scale, scale);
}

// Row-wise affine map: y[t] = W x[t] + b.
struct Linear {
  int in = 0, out = 0;
  ParamBlock weight;  // [out x in]
  ParamBlock bias;    // [out]

  void init(int in_dim, int out_dim, Rng& rng) {
    in = in_dim;
    out = out_dim;
    weight.resize(static_cast<size_t>(in) * out);
    bias.resize(out);
    init_uniform(weight, rng, std::sqrt(1.0 / in));
  }

  Mat<double> forward(const Mat<double>& x) const {
    Mat<double> y(x.rows, out);
    for (int t = 0; t < x.rows; ++t) {
      const double* xi = x.row(t);
      double* yi = y.row(t);
      for (int o = 0; o < out; ++o) {
        const double* wr = weight.w.data() + static_cast<size_t>(o) * in;
        double acc = bias.w[o];
        for (int i = 0; i < in; ++i) acc += wr[i] * xi[i];
        yi[o] = acc;
      }
    }
    return y;
  }

  Mat<double> backward(const Mat<double>& x, const Mat<double>& gy, bool train) const {
    Mat<double> gx(x.rows, in);
    for (int t = 0; t < x.rows; ++t) {
      const double* xi = x.row(t);
      const double* gyi = gy.row(t);
      double* gxi = gx.row(t);
      for (int o = 0; o < out; ++o) {
        const double g = gyi[o];
        const double* wr = weight.w.data() + static_cast<size_t>(o) * in;
        double* gwr = weight.g.data() + static_cast<size_t>(o) * in;
        for (int i = 0; i < in; ++i) {
          gxi[i] += wr[i] * g;
          if (train) gwr[i] += xi[i] * g;
        }
        if (train) bias.g[o] += g;
      }
    }
    return gx;
  }

  std::vector<ParamBlock*> blocks() { return {&weight, &bias}; }
};

// Temporal convolution over [T x channels] with zero padding ("same" up to
// the stride): out length = ceil(T / stride).
struct Conv1d {
  int in_ch = 0, out_ch = 0, kernel = 0, stride = 1;
  ParamBlock weight;  // [out][in][k]
  ParamBlock bias;

  void init(int in_c, int out_c, int k, int s, Rng& rng) {
    in_ch = in_c;
    out_ch = out_c;
    kernel = k;
    stride = s;
    weight.resize(static_cast<size_t>(out_ch) * in_ch * kernel);
    bias.resize(out_ch);
    init_uniform(weight, rng, std::sqrt(1.0 / (in_ch * kernel)));
  }

  int out_len(int t_in) const { return (t_in + stride - 1) / stride; }

  double wt(int o, int c, int j) const {
    return weight.w[(static_cast<size_t>(o) * in_ch + c) * kernel + j];
  }

  Mat<double> forward(const Mat<double>& x) const {
    const int t_out = out_len(x.rows);
    const int pad_left = (kernel - 1) / 2;
    Mat<double> y(t_out, out_ch);
    for (int t = 0; t < t_out; ++t) {
      for (int o = 0; o < out_ch; ++o) {
        double acc = bias.w[o];
        for (int j = 0; j < kernel; ++j) {
          const int src = t * stride + j - pad_left;
          if (src < 0 || src >= x.rows) continue;
          const double* xr = x.row(src);
          for (int c = 0; c < in_ch; ++c) acc += wt(o, c, j) * xr[c];
        }
        y.at(t, o) = acc;
      }
    }
    return y;
  }

  Mat<double> backward(const Mat<double>& x, const Mat<double>& gy, bool train) const {
    const int pad_left = (kernel - 1) / 2;
    Mat<double> gx(x.rows, in_ch);
    for (int t = 0; t < gy.rows; ++t) {
      const double* gyr = gy.row(t);
      for (int j = 0; j < kernel; ++j) {
        const int src = t * stride + j - pad_left;
        if (src < 0 || src >= x.rows) continue;
        const double* xr = x.row(src);
        double* gxr = gx.row(src);
        for (int o = 0; o < out_ch; ++o) {
          const double g = gyr[o];
          for (int c = 0; c < in_ch; ++c) {
            gxr[c] += wt(o, c, j) * g;
            if (train) weight.g[(static_cast<size_t>(o) * in_ch + c) * kernel + j] += xr[c] * g;
          }
        }
      }
      if (train) {
        for (int o = 0; o < out_ch; ++o) bias.g[o] += gyr[o];
      }
    }
    return gx;
  }

  std::vector<ParamBlock*> blocks() { return {&weight, &bias}; }
};

// Vanilla tanh recurrence: h_t = tanh(Wx x_t + Wh h_{t-1} + b), h_0 = 0.
struct Rnn {
  int in = 0, hidden = 0;
  ParamBlock wx;  // [hidden x in]
  ParamBlock wh;  // [hidden x hidden]
  ParamBlock b;

  void init(int in_dim, int hidden_dim, Rng& rng) {
    in = in_dim;
    hidden = hidden_dim;
    wx.resize(static_cast<size_t>(hidden) * in);
    wh.resize(static_cast<size_t>(hidden) * hidden);
    b.resize(hidden);
    init_uniform(wx, rng, std::sqrt(1.0 / in));
    init_uniform(wh, rng, std::sqrt(0.25 / hidden));
  }

  Mat<double> forward(const Mat<double>& x) const {
    Mat<double> h(x.rows, hidden);
    std::vector<double> prev(hidden, 0.0);
    for (int t = 0; t < x.rows; ++t) {
      const double* xi = x.row(t);
      double* hi = h.row(t);
      for (int o = 0; o < hidden; ++o) {
        double acc = b.w[o];
        const double* wxr = wx.w.data() + static_cast<size_t>(o) * in;
        for (int i = 0; i < in; ++i) acc += wxr[i] * xi[i];
        const double* whr = wh.w.data() + static_cast<size_t>(o) * hidden;
        for (int i = 0; i < hidden; ++i) acc += whr[i] * prev[i];
        hi[o] = std::tanh(acc);
      }
      std::copy(hi, hi + hidden, prev.begin());
    }
    return h;
  }

  Mat<double> backward(const Mat<double>& x, const Mat<double>& h, const Mat<double>& gy, bool train) const {
    Mat<double> gx(x.rows, in);
    std::vector<double> carry(hidden, 0.0);
    for (int t = x.rows - 1; t >= 0; --t) {
      const double* hi = h.row(t);
      const double* xi = x.row(t);
      std::vector<double> gpre(hidden);
      for (int o = 0; o < hidden; ++o) {
        const double gh = gy.at(t, o) + carry[o];
        gpre[o] = gh * (1.0 - hi[o] * hi[o]);
      }
      const double* hprev = t > 0 ? h.row(t - 1) : nullptr;
      std::fill(carry.begin(), carry.end(), 0.0);
      double* gxi = gx.row(t);
      for (int o = 0; o < hidden; ++o) {
        const double g = gpre[o];
        const double* wxr = wx.w.data() + static_cast<size_t>(o) * in;
        for (int i = 0; i < in; ++i) gxi[i] += wxr[i] * g;
        const double* whr = wh.w.data() + static_cast<size_t>(o) * hidden;
        for (int i = 0; i < hidden; ++i) carry[i] += whr[i] * g;
        if (train) {
          double* gwxr = wx.g.data() + static_cast<size_t>(o) * in;
          for (int i = 0; i < in; ++i) gwxr[i] += xi[i] * g;
          if (hprev != nullptr) {
            double* gwhr = wh.g.data() + static_cast<size_t>(o) * hidden;
            for (int i = 0; i < hidden; ++i) gwhr[i] += hprev[i] * g;
          }
          b.g[o] += g;
        }
      }
    }
    return gx;
  }

  std::vector<ParamBlock*> blocks() { return {&wx, &wh, &b}; }
};

inline Mat<double> tanh_forward(const Mat<double>& x) {
  Mat<double> y(x.rows, x.cols);
  for (size_t i = 0; i < x.data.size(); ++i) y.data[i] = std::tanh(x.data[i]);
  return y;
}

inline Mat<double> tanh_backward(const Mat<double>& y, const Mat<double>& gy) {
  Mat<double> gx(y.rows, y.cols);
  for (size_t i = 0; i < y.data.size(); ++i) gx.data[i] = gy.data[i] * (1.0 - y.data[i] * y.data[i]);
  return gx;
}

inline std::vector<double> mean_pool(const Mat<double>& x) {
  std::vector<double> v(x.cols, 0.0);
  for (int t = 0; t < x.rows; ++t) {
    const double* xi = x.row(t);
    for (int c = 0; c < x.cols; ++c) v[c] += xi[c];
  }
  for (double& s : v) s /= x.rows;
  return v;
}

inline Mat<double> mean_pool_backward(int rows, const std::vector<double>& gv) {
  Mat<double> gx(rows, static_cast<int>(gv.size()));
  for (int t = 0; t < rows; ++t) {
    for (size_t c = 0; c < gv.size(); ++c) gx.at(t, static_cast<int>(c)) = gv[c] / rows;
  }
  return gx;
}

// y = v / ||v||; backward maps dL/dy to dL/dv.
inline std::vector<double> l2_normalize(const std::vector<double>& v, double* norm_out = nullptr) {
  const double n = std::max(l2_norm(v), 1e-12);
  if (norm_out != nullptr) *norm_out = n;
  std::vector<double> y(v.size());
  for (size_t i = 0; i < v.size(); ++i) y[i] = v[i] / n;
  return y;
}

inline std::vector<double> l2_normalize_backward(const std::vector<double>& y, double norm,
                                                 const std::vector<double>& gy) {
  const double proj = dot(y, gy);
  std::vector<double> gv(y.size());
  for (size_t i = 0; i < y.size(); ++i) gv[i] = (gy[i] - proj * y[i]) / norm;
  return gv;
}

inline Mat<double> log_softmax_rows(const Mat<double>& logits) {
  Mat<double> out(logits.rows, logits.cols);
  for (int t = 0; t < logits.rows; ++t) {
    const double* r = logits.row(t);
    double m = r[0];
    for (int k = 1; k < logits.cols; ++k) m = std::max(m, r[k]);
    double z = 0.0;
    for (int k = 0; k < logits.cols; ++k) z += std::exp(r[k] - m);
    const double lse = m + std::log(z);
    for (int k = 0; k < logits.cols; ++k) out.at(t, k) = r[k] - lse;
  }
  return out;
}

// Given dL/d(log-softmax) rows, returns dL/d(logits).
inline Mat<double> log_softmax_backward(const Mat<double>& log_probs, const Mat<double>& gy) {
  Mat<double> gx(log_probs.rows, log_probs.cols);
  for (int t = 0; t < log_probs.rows; ++t) {
    double gsum = 0.0;
    for (int k = 0; k < log_probs.cols; ++k) gsum += gy.at(t, k);
    for (int k = 0; k < log_probs.cols; ++k) {
      gx.at(t, k) = gy.at(t, k) - std::exp(log_probs.at(t, k)) * gsum;
    }
  }
  return gx;
}

// Cross entropy with integrated softmax over a single logit vector.
inline double softmax_cross_entropy(const std::vector<double>& logits, int label,
                                    std::vector<double>* grad_logits = nullptr) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  const double lse = m + std::log(z);
  if (grad_logits != nullptr) {
    grad_logits->resize(logits.size());
    for (size_t k = 0; k < logits.size(); ++k) {
      (*grad_logits)[k] = std::exp(logits[k] - lse) - (static_cast<int>(k) == label ? 1.0 : 0.0);
    }
  }
  return lse - logits[label];
}

struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void attach(const std::vector<ParamBlock*>& blocks) {
    m_.clear();
    v_.clear();
    for (const ParamBlock* b : blocks) {
      m_.emplace_back(b->w.size(), 0.0);
      v_.emplace_back(b->w.size(), 0.0);
    }
    t_ = 0;
  }

  void step(const std::vector<ParamBlock*>& blocks) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (size_t b = 0; b < blocks.size(); ++b) {
      ParamBlock& p = *blocks[b];
      for (size_t i = 0; i < p.w.size(); ++i) {
        const double g = p.g[i];
        m_[b][i] = beta1 * m_[b][i] + (1.0 - beta1) * g;
        v_[b][i] = beta2 * v_[b][i] + (1.0 - beta2) * g * g;
        p.w[i] -= lr * (m_[b][i] / bc1) / (std::sqrt(v_[b][i] / bc2) + eps);
      }
      p.zero_grad();
    }
  }

 private:
  std::vector<std::vector<double>> m_, v_;
  int64_t t_ = 0;
};

}  // namespace nn
}  // namespace voxshield

#endif  // VOXSHIELD_NN_HPP_
