#include "prefscore/scorer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "prefscore/rng.hpp"

namespace prefscore {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

inline double gelu(double x) {
  double u = kGeluC * (x + kGeluA * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

inline double gelu_grad(double x) {
  double u = kGeluC * (x + kGeluA * x * x * x);
  double t = std::tanh(u);
  double sech2 = 1.0 - t * t;
  return 0.5 * (1.0 + t) + 0.5 * x * sech2 * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

// Y[i,j] = b[j] + sum_k X[i,k] * W[k,j]. Weights are input-major so the inner
// loop runs contiguously over both W rows and Y rows.
void linear(const double* X, const double* W, const double* b, double* Y,
            int L, int din, int dout) {
  for (int i = 0; i < L; ++i) {
    double* y = Y + static_cast<std::size_t>(i) * dout;
    for (int j = 0; j < dout; ++j) y[j] = b[j];
    const double* x = X + static_cast<std::size_t>(i) * din;
    for (int k = 0; k < din; ++k) {
      const double a = x[k];
      const double* w = W + static_cast<std::size_t>(k) * dout;
      for (int j = 0; j < dout; ++j) y[j] += a * w[j];
    }
  }
}

// C[i,j] += sum_k A[i,k] * B[k,j]
void matmul_acc(const double* A, const double* B, double* C, int L, int din, int dout) {
  for (int i = 0; i < L; ++i) {
    const double* a = A + static_cast<std::size_t>(i) * din;
    double* c = C + static_cast<std::size_t>(i) * dout;
    for (int k = 0; k < din; ++k) {
      const double s = a[k];
      const double* b = B + static_cast<std::size_t>(k) * dout;
      for (int j = 0; j < dout; ++j) c[j] += s * b[j];
    }
  }
}

// dW[k,j] += sum_i X[i,k] * dY[i,j];  db[j] += sum_i dY[i,j]
void linear_param_grad(const double* X, const double* dY, double* dW, double* db,
                       int L, int din, int dout) {
  for (int i = 0; i < L; ++i) {
    const double* x = X + static_cast<std::size_t>(i) * din;
    const double* dy = dY + static_cast<std::size_t>(i) * dout;
    for (int k = 0; k < din; ++k) {
      const double a = x[k];
      double* dw = dW + static_cast<std::size_t>(k) * dout;
      for (int j = 0; j < dout; ++j) dw[j] += a * dy[j];
    }
    for (int j = 0; j < dout; ++j) db[j] += dy[j];
  }
}

void transpose(const double* W, double* WT, int rows, int cols) {
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      WT[static_cast<std::size_t>(c) * rows + r] = W[static_cast<std::size_t>(r) * cols + c];
}

void layer_norm(const double* x, const double* g, const double* b, double* xhat,
                double* rstd, double* y, int L, int d) {
  for (int i = 0; i < L; ++i) {
    const double* xi = x + static_cast<std::size_t>(i) * d;
    double mean = 0.0;
    for (int c = 0; c < d; ++c) mean += xi[c];
    mean /= d;
    double var = 0.0;
    for (int c = 0; c < d; ++c) {
      double t = xi[c] - mean;
      var += t * t;
    }
    var /= d;
    const double rs = 1.0 / std::sqrt(var + kLnEps);
    rstd[i] = rs;
    double* xh = xhat + static_cast<std::size_t>(i) * d;
    double* yi = y + static_cast<std::size_t>(i) * d;
    for (int c = 0; c < d; ++c) {
      xh[c] = (xi[c] - mean) * rs;
      yi[c] = g[c] * xh[c] + b[c];
    }
  }
}

// dx += rstd * (dxhat - mean(dxhat) - xhat * mean(dxhat .* xhat))
void layer_norm_backward(const double* dy, const double* xhat, const double* rstd,
                         const double* g, double* dg, double* db, double* dx,
                         int L, int d) {
  for (int i = 0; i < L; ++i) {
    const double* dyi = dy + static_cast<std::size_t>(i) * d;
    const double* xh = xhat + static_cast<std::size_t>(i) * d;
    double* dxi = dx + static_cast<std::size_t>(i) * d;
    double m1 = 0.0, m2 = 0.0;
    for (int c = 0; c < d; ++c) {
      const double dxh = dyi[c] * g[c];
      m1 += dxh;
      m2 += dxh * xh[c];
    }
    m1 /= d;
    m2 /= d;
    for (int c = 0; c < d; ++c) {
      const double dxh = dyi[c] * g[c];
      dxi[c] += rstd[i] * (dxh - m1 - xh[c] * m2);
      dg[c] += dyi[c] * xh[c];
      db[c] += dyi[c];
    }
  }
}

}  // namespace

void ScorerConfig::validate() const {
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || d_ff <= 0 || max_len <= 0) {
    throw ValidationError("scorer config: all dimensions must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ValidationError("scorer config: d_model must be divisible by n_heads");
  }
  if (vocab_size < 4) {
    throw ValidationError("scorer config: vocab_size must cover the special tokens");
  }
}

ParamSet ParamSet::zeros(const ScorerConfig& cfg) {
  const std::size_t d = static_cast<std::size_t>(cfg.d_model);
  const std::size_t f = static_cast<std::size_t>(cfg.d_ff);
  ParamSet p;
  p.embedding.assign(static_cast<std::size_t>(cfg.vocab_size) * d, 0.0);
  p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (auto& l : p.layers) {
    l.ln1_g.assign(d, 0.0);
    l.ln1_b.assign(d, 0.0);
    l.wq.assign(d * d, 0.0);
    l.bq.assign(d, 0.0);
    l.wk.assign(d * d, 0.0);
    l.bk.assign(d, 0.0);
    l.wv.assign(d * d, 0.0);
    l.bv.assign(d, 0.0);
    l.wo.assign(d * d, 0.0);
    l.bo.assign(d, 0.0);
    l.ln2_g.assign(d, 0.0);
    l.ln2_b.assign(d, 0.0);
    l.w1.assign(d * f, 0.0);
    l.b1.assign(f, 0.0);
    l.w2.assign(f * d, 0.0);
    l.b2.assign(d, 0.0);
  }
  p.lnf_g.assign(d, 0.0);
  p.lnf_b.assign(d, 0.0);
  p.head_w.assign(d, 0.0);
  p.head_b.assign(1, 0.0);
  return p;
}

void ParamSet::set_zero() {
  for_each_tensor([](std::vector<double>& t) { std::fill(t.begin(), t.end(), 0.0); });
}

ScorerModel init_scorer(const ScorerConfig& cfg) {
  cfg.validate();
  ScorerModel m;
  m.cfg = cfg;
  m.params = ParamSet::zeros(cfg);

  DetRng rng(cfg.init_seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
  auto fill_uniform = [&](std::vector<double>& t) {
    for (double& x : t) x = rng.uniform(-bound, bound);
  };
  fill_uniform(m.params.embedding);
  for (auto& l : m.params.layers) {
    fill_uniform(l.wq);
    fill_uniform(l.wk);
    fill_uniform(l.wv);
    fill_uniform(l.wo);
    fill_uniform(l.w1);
    fill_uniform(l.w2);
    std::fill(l.ln1_g.begin(), l.ln1_g.end(), 1.0);
    std::fill(l.ln2_g.begin(), l.ln2_g.end(), 1.0);
  }
  std::fill(m.params.lnf_g.begin(), m.params.lnf_g.end(), 1.0);
  // head_w and head_b stay zero: the untrained model scores everything 0.0.

  m.pos_table.assign(static_cast<std::size_t>(cfg.max_len) * cfg.d_model, 0.0);
  for (int i = 0; i < cfg.max_len; ++i) {
    for (int k = 0; 2 * k < cfg.d_model; ++k) {
      const double rate = std::pow(10000.0, -2.0 * k / cfg.d_model);
      m.pos_table[static_cast<std::size_t>(i) * cfg.d_model + 2 * k] = std::sin(i * rate);
      if (2 * k + 1 < cfg.d_model) {
        m.pos_table[static_cast<std::size_t>(i) * cfg.d_model + 2 * k + 1] = std::cos(i * rate);
      }
    }
  }
  return m;
}

double score_cached(const ScorerModel& model, std::span<const int> ids, int true_len,
                    ForwardCache& cache) {
  const ScorerConfig& cfg = model.cfg;
  if (static_cast<int>(ids.size()) != cfg.max_len) {
    throw ValidationError("score: ids length must equal max_len");
  }
  if (true_len < 1 || true_len > cfg.max_len) {
    throw ValidationError("score: true_len out of range [1, max_len]");
  }
  const int L = true_len;
  const int d = cfg.d_model;
  const int H = cfg.n_heads;
  const int dh = cfg.head_dim();
  const int F = cfg.d_ff;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t Ld = static_cast<std::size_t>(L) * d;

  cache.len_ = L;
  cache.ids_.assign(ids.begin(), ids.begin() + L);
  cache.x0_.resize(Ld);
  for (int i = 0; i < L; ++i) {
    const int tok = ids[static_cast<std::size_t>(i)];
    if (tok < 0 || tok >= cfg.vocab_size) {
      throw ValidationError("score: token id out of vocabulary range");
    }
    const double* e = model.params.embedding.data() + static_cast<std::size_t>(tok) * d;
    const double* p = model.pos_table.data() + static_cast<std::size_t>(i) * d;
    double* x = cache.x0_.data() + static_cast<std::size_t>(i) * d;
    for (int c = 0; c < d; ++c) x[c] = e[c] + p[c];
  }

  cache.layers_.resize(model.params.layers.size());
  std::vector<double> x = cache.x0_;       // running activations
  std::vector<double> scratch(Ld);         // attention/ff projection output
  std::vector<double> srow(static_cast<std::size_t>(L));

  for (std::size_t li = 0; li < model.params.layers.size(); ++li) {
    const auto& lp = model.params.layers[li];
    auto& lc = cache.layers_[li];
    lc.xhat1.resize(Ld);
    lc.rstd1.resize(static_cast<std::size_t>(L));
    lc.a.resize(Ld);
    layer_norm(x.data(), lp.ln1_g.data(), lp.ln1_b.data(), lc.xhat1.data(),
               lc.rstd1.data(), lc.a.data(), L, d);

    lc.q.resize(Ld);
    lc.k.resize(Ld);
    lc.v.resize(Ld);
    linear(lc.a.data(), lp.wq.data(), lp.bq.data(), lc.q.data(), L, d, d);
    linear(lc.a.data(), lp.wk.data(), lp.bk.data(), lc.k.data(), L, d, d);
    linear(lc.a.data(), lp.wv.data(), lp.bv.data(), lc.v.data(), L, d, d);

    lc.att.assign(static_cast<std::size_t>(H) * L * L, 0.0);
    lc.ctx.assign(Ld, 0.0);
    for (int h = 0; h < H; ++h) {
      const int off = h * dh;
      double* att_h = lc.att.data() + static_cast<std::size_t>(h) * L * L;
      for (int i = 0; i < L; ++i) {
        const double* qi = lc.q.data() + static_cast<std::size_t>(i) * d + off;
        double maxs = -1e300;
        for (int j = 0; j < L; ++j) {
          const double* kj = lc.k.data() + static_cast<std::size_t>(j) * d + off;
          double s = 0.0;
          for (int c = 0; c < dh; ++c) s += qi[c] * kj[c];
          s *= scale;
          srow[static_cast<std::size_t>(j)] = s;
          if (s > maxs) maxs = s;
        }
        double denom = 0.0;
        for (int j = 0; j < L; ++j) {
          const double e = std::exp(srow[static_cast<std::size_t>(j)] - maxs);
          srow[static_cast<std::size_t>(j)] = e;
          denom += e;
        }
        double* arow = att_h + static_cast<std::size_t>(i) * L;
        for (int j = 0; j < L; ++j) arow[j] = srow[static_cast<std::size_t>(j)] / denom;
        double* ci = lc.ctx.data() + static_cast<std::size_t>(i) * d + off;
        for (int j = 0; j < L; ++j) {
          const double w = arow[j];
          const double* vj = lc.v.data() + static_cast<std::size_t>(j) * d + off;
          for (int c = 0; c < dh; ++c) ci[c] += w * vj[c];
        }
      }
    }

    linear(lc.ctx.data(), lp.wo.data(), lp.bo.data(), scratch.data(), L, d, d);
    for (std::size_t t = 0; t < Ld; ++t) x[t] += scratch[t];  // residual

    lc.xhat2.resize(Ld);
    lc.rstd2.resize(static_cast<std::size_t>(L));
    lc.a2.resize(Ld);
    layer_norm(x.data(), lp.ln2_g.data(), lp.ln2_b.data(), lc.xhat2.data(),
               lc.rstd2.data(), lc.a2.data(), L, d);

    lc.f.resize(static_cast<std::size_t>(L) * F);
    lc.u.resize(static_cast<std::size_t>(L) * F);
    linear(lc.a2.data(), lp.w1.data(), lp.b1.data(), lc.f.data(), L, d, F);
    for (std::size_t t = 0; t < lc.f.size(); ++t) lc.u[t] = gelu(lc.f[t]);
    linear(lc.u.data(), lp.w2.data(), lp.b2.data(), scratch.data(), L, F, d);
    for (std::size_t t = 0; t < Ld; ++t) x[t] += scratch[t];  // residual
  }

  const int pool = cfg.pooling == Pooling::Cls ? 0 : L - 1;
  cache.pool_ = pool;
  cache.xhatf_.resize(static_cast<std::size_t>(d));
  // Final layer norm only at the pooled position.
  {
    const double* xi = x.data() + static_cast<std::size_t>(pool) * d;
    double mean = 0.0;
    for (int c = 0; c < d; ++c) mean += xi[c];
    mean /= d;
    double var = 0.0;
    for (int c = 0; c < d; ++c) {
      double t = xi[c] - mean;
      var += t * t;
    }
    var /= d;
    cache.rstdf_ = 1.0 / std::sqrt(var + kLnEps);
    for (int c = 0; c < d; ++c) {
      cache.xhatf_[static_cast<std::size_t>(c)] = (xi[c] - mean) * cache.rstdf_;
    }
  }
  double r = model.params.head_b[0];
  for (int c = 0; c < d; ++c) {
    const double h = model.params.lnf_g[static_cast<std::size_t>(c)] *
                         cache.xhatf_[static_cast<std::size_t>(c)] +
                     model.params.lnf_b[static_cast<std::size_t>(c)];
    r += model.params.head_w[static_cast<std::size_t>(c)] * h;
  }
  return r;
}

double score(const ScorerModel& model, std::span<const int> ids, int true_len) {
  thread_local ForwardCache cache;
  return score_cached(model, ids, true_len, cache);
}

void backward(const ScorerModel& model, const ForwardCache& cache, double seed,
              Gradients& grads) {
  const ScorerConfig& cfg = model.cfg;
  const int L = cache.len_;
  if (L <= 0) throw ValidationError("backward: no forward pass recorded");
  const int d = cfg.d_model;
  const int H = cfg.n_heads;
  const int dh = cfg.head_dim();
  const int F = cfg.d_ff;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t Ld = static_cast<std::size_t>(L) * d;

  // Head and final layer norm (pooled position only).
  std::vector<double> dX(Ld, 0.0);
  {
    const int pool = cache.pool_;
    double* dxp = dX.data() + static_cast<std::size_t>(pool) * d;
    double m1 = 0.0, m2 = 0.0;
    for (int c = 0; c < d; ++c) {
      const double xh = cache.xhatf_[static_cast<std::size_t>(c)];
      const double h = model.params.lnf_g[static_cast<std::size_t>(c)] * xh +
                       model.params.lnf_b[static_cast<std::size_t>(c)];
      const double dy = seed * model.params.head_w[static_cast<std::size_t>(c)];
      grads.head_w[static_cast<std::size_t>(c)] += seed * h;
      grads.lnf_g[static_cast<std::size_t>(c)] += dy * xh;
      grads.lnf_b[static_cast<std::size_t>(c)] += dy;
      const double dxh = dy * model.params.lnf_g[static_cast<std::size_t>(c)];
      m1 += dxh;
      m2 += dxh * xh;
    }
    grads.head_b[0] += seed;
    m1 /= d;
    m2 /= d;
    for (int c = 0; c < d; ++c) {
      const double xh = cache.xhatf_[static_cast<std::size_t>(c)];
      const double dxh = seed * model.params.head_w[static_cast<std::size_t>(c)] *
                         model.params.lnf_g[static_cast<std::size_t>(c)];
      dxp[c] += cache.rstdf_ * (dxh - m1 - xh * m2);
    }
  }

  std::vector<double> dp(Ld), du, df, da2(Ld), do_(Ld), dctx(Ld), dq(Ld), dk(Ld), dv(Ld),
      da(Ld), wt;
  du.resize(static_cast<std::size_t>(L) * F);
  df.resize(static_cast<std::size_t>(L) * F);
  std::vector<double> datt_row(static_cast<std::size_t>(L));

  for (std::size_t li = model.params.layers.size(); li-- > 0;) {
    const auto& lp = model.params.layers[li];
    const auto& lc = cache.layers_[li];
    auto& lg = grads.layers[li];

    // Feed-forward block: x2 = x1 + W2 gelu(W1 ln2(x1) + b1) + b2.
    // dX currently holds d/dx2; the residual passes it straight to dx1.
    std::copy(dX.begin(), dX.end(), dp.begin());
    std::fill(du.begin(), du.end(), 0.0);
    wt.resize(static_cast<std::size_t>(d) * F);
    transpose(lp.w2.data(), wt.data(), F, d);
    matmul_acc(dp.data(), wt.data(), du.data(), L, d, F);
    linear_param_grad(lc.u.data(), dp.data(), lg.w2.data(), lg.b2.data(), L, F, d);
    for (std::size_t t = 0; t < du.size(); ++t) df[t] = du[t] * gelu_grad(lc.f[t]);
    std::fill(da2.begin(), da2.end(), 0.0);
    wt.resize(static_cast<std::size_t>(F) * d);
    transpose(lp.w1.data(), wt.data(), d, F);
    matmul_acc(df.data(), wt.data(), da2.data(), L, F, d);
    linear_param_grad(lc.a2.data(), df.data(), lg.w1.data(), lg.b1.data(), L, d, F);
    layer_norm_backward(da2.data(), lc.xhat2.data(), lc.rstd2.data(), lp.ln2_g.data(),
                        lg.ln2_g.data(), lg.ln2_b.data(), dX.data(), L, d);

    // Attention block: x1 = x0 + Wo ctx + bo.
    std::copy(dX.begin(), dX.end(), do_.begin());
    std::fill(dctx.begin(), dctx.end(), 0.0);
    wt.resize(static_cast<std::size_t>(d) * d);
    transpose(lp.wo.data(), wt.data(), d, d);
    matmul_acc(do_.data(), wt.data(), dctx.data(), L, d, d);
    linear_param_grad(lc.ctx.data(), do_.data(), lg.wo.data(), lg.bo.data(), L, d, d);

    std::fill(dq.begin(), dq.end(), 0.0);
    std::fill(dk.begin(), dk.end(), 0.0);
    std::fill(dv.begin(), dv.end(), 0.0);
    for (int h = 0; h < H; ++h) {
      const int off = h * dh;
      const double* att_h = lc.att.data() + static_cast<std::size_t>(h) * L * L;
      for (int i = 0; i < L; ++i) {
        const double* arow = att_h + static_cast<std::size_t>(i) * L;
        const double* dci = dctx.data() + static_cast<std::size_t>(i) * d + off;
        // datt and dv from ctx = att * v
        double dot = 0.0;
        for (int j = 0; j < L; ++j) {
          const double* vj = lc.v.data() + static_cast<std::size_t>(j) * d + off;
          double s = 0.0;
          for (int c = 0; c < dh; ++c) s += dci[c] * vj[c];
          datt_row[static_cast<std::size_t>(j)] = s;
          dot += s * arow[j];
          double* dvj = dv.data() + static_cast<std::size_t>(j) * d + off;
          const double w = arow[j];
          for (int c = 0; c < dh; ++c) dvj[c] += w * dci[c];
        }
        // softmax backward, then the 1/sqrt(dh) scaling
        double* dqi = dq.data() + static_cast<std::size_t>(i) * d + off;
        for (int j = 0; j < L; ++j) {
          const double ds = arow[j] * (datt_row[static_cast<std::size_t>(j)] - dot) * scale;
          if (ds == 0.0) continue;
          const double* kj = lc.k.data() + static_cast<std::size_t>(j) * d + off;
          const double* qi = lc.q.data() + static_cast<std::size_t>(i) * d + off;
          double* dkj = dk.data() + static_cast<std::size_t>(j) * d + off;
          for (int c = 0; c < dh; ++c) {
            dqi[c] += ds * kj[c];
            dkj[c] += ds * qi[c];
          }
        }
      }
    }

    std::fill(da.begin(), da.end(), 0.0);
    wt.resize(static_cast<std::size_t>(d) * d);
    transpose(lp.wq.data(), wt.data(), d, d);
    matmul_acc(dq.data(), wt.data(), da.data(), L, d, d);
    transpose(lp.wk.data(), wt.data(), d, d);
    matmul_acc(dk.data(), wt.data(), da.data(), L, d, d);
    transpose(lp.wv.data(), wt.data(), d, d);
    matmul_acc(dv.data(), wt.data(), da.data(), L, d, d);
    linear_param_grad(lc.a.data(), dq.data(), lg.wq.data(), lg.bq.data(), L, d, d);
    linear_param_grad(lc.a.data(), dk.data(), lg.wk.data(), lg.bk.data(), L, d, d);
    linear_param_grad(lc.a.data(), dv.data(), lg.wv.data(), lg.bv.data(), L, d, d);
    layer_norm_backward(da.data(), lc.xhat1.data(), lc.rstd1.data(), lp.ln1_g.data(),
                        lg.ln1_g.data(), lg.ln1_b.data(), dX.data(), L, d);
  }

  // Embedding scatter-add (position table is fixed).
  for (int i = 0; i < L; ++i) {
    const int tok = cache.ids_[static_cast<std::size_t>(i)];
    double* de = grads.embedding.data() + static_cast<std::size_t>(tok) * d;
    const double* dx = dX.data() + static_cast<std::size_t>(i) * d;
    for (int c = 0; c < d; ++c) de[c] += dx[c];
  }
}

namespace {

constexpr char kMagic[8] = {'P', 'S', 'C', 'O', 'R', 'E', '0', '1'};
constexpr std::uint32_t kByteOrderMark = 0x01020304u;

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("checkpoint: truncated while reading " + what);
  return v;
}

}  // namespace

void save_checkpoint(const ScorerModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kByteOrderMark);
  write_pod<std::int64_t>(out, model.cfg.d_model);
  write_pod<std::int64_t>(out, model.cfg.n_layers);
  write_pod<std::int64_t>(out, model.cfg.n_heads);
  write_pod<std::int64_t>(out, model.cfg.d_ff);
  write_pod<std::int64_t>(out, model.cfg.max_len);
  write_pod<std::int64_t>(out, model.cfg.vocab_size);
  write_pod<std::uint64_t>(out, model.cfg.init_seed);
  write_pod<std::int64_t>(out, model.cfg.pooling == Pooling::Cls ? 1 : 0);

  std::uint64_t n_tensors = 0;
  model.params.for_each_tensor([&](const std::vector<double>&) { ++n_tensors; });
  write_pod(out, n_tensors);
  model.params.for_each_tensor([&](const std::vector<double>& t) {
    write_pod<std::uint64_t>(out, t.size());
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  });
  if (!out) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

ScorerModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("checkpoint " + path.string() + ": bad magic");
  }
  if (read_pod<std::uint32_t>(in, "byte order mark") != kByteOrderMark) {
    throw ParseError("checkpoint " + path.string() + ": byte order mismatch");
  }
  ScorerConfig cfg;
  cfg.d_model = static_cast<int>(read_pod<std::int64_t>(in, "d_model"));
  cfg.n_layers = static_cast<int>(read_pod<std::int64_t>(in, "n_layers"));
  cfg.n_heads = static_cast<int>(read_pod<std::int64_t>(in, "n_heads"));
  cfg.d_ff = static_cast<int>(read_pod<std::int64_t>(in, "d_ff"));
  cfg.max_len = static_cast<int>(read_pod<std::int64_t>(in, "max_len"));
  cfg.vocab_size = static_cast<int>(read_pod<std::int64_t>(in, "vocab_size"));
  cfg.init_seed = read_pod<std::uint64_t>(in, "init_seed");
  cfg.pooling = read_pod<std::int64_t>(in, "pooling") == 1 ? Pooling::Cls : Pooling::LastToken;

  ScorerModel model = init_scorer(cfg);  // rebuilds the position table
  std::uint64_t n_tensors = read_pod<std::uint64_t>(in, "tensor count");
  std::uint64_t expected = 0;
  model.params.for_each_tensor([&](const std::vector<double>&) { ++expected; });
  if (n_tensors != expected) {
    throw ParseError("checkpoint " + path.string() + ": tensor count mismatch");
  }
  model.params.for_each_tensor([&](std::vector<double>& t) {
    std::uint64_t n = read_pod<std::uint64_t>(in, "tensor size");
    if (n != t.size()) throw ParseError("checkpoint " + path.string() + ": tensor shape mismatch");
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw ParseError("checkpoint " + path.string() + ": truncated tensor data");
  });
  return model;
}

}  // namespace prefscore
