#include "spk/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace spk::loss {

std::string loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::Softmax: return "softmax";
    case LossKind::ASoftmax: return "asoftmax";
    case LossKind::AMSoftmax: return "amsoftmax";
    case LossKind::LogisticMargin: return "logistic_margin";
  }
  return "?";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "softmax") return LossKind::Softmax;
  if (name == "asoftmax") return LossKind::ASoftmax;
  if (name == "amsoftmax") return LossKind::AMSoftmax;
  if (name == "logistic_margin") return LossKind::LogisticMargin;
  throw std::invalid_argument("unknown loss kind: " + name);
}

double asoftmax_lambda(const LossConfig& cfg, std::int64_t iter) {
  return std::max(cfg.lambda_min,
                  cfg.lambda_base / (1.0 + cfg.gamma * static_cast<double>(iter)));
}

void asoftmax_psi(int m, double cos_theta, double* psi, double* dpsi_dcos) {
  if (m < 1) throw std::invalid_argument("asoftmax: m must be >= 1");
  const double c = std::clamp(cos_theta, -1.0, 1.0);
  const double theta = std::acos(c);
  const double r = theta * m / std::numbers::pi;
  int k = static_cast<int>(std::floor(r));
  // branch boundary: take the left-limit branch (psi is continuous); this
  // also maps theta = pi onto the last interval k = m-1
  if (k > 0 && std::floor(r) == r) --k;
  k = std::min(k, m - 1);
  // cos(m theta) = T_m(c); T_m'(c) = m U_{m-1}(c); Chebyshev recurrences
  double t_prev = 1.0, t_cur = c;      // T0, T1
  double u_prev = 1.0, u_cur = 2.0 * c;  // U0, U1
  for (int i = 2; i <= m; ++i) {
    const double t_next = 2.0 * c * t_cur - t_prev;
    t_prev = t_cur;
    t_cur = t_next;
  }
  for (int i = 2; i <= m - 1; ++i) {
    const double u_next = 2.0 * c * u_cur - u_prev;
    u_prev = u_cur;
    u_cur = u_next;
  }
  const double tm = m == 0 ? 1.0 : (m == 1 ? c : t_cur);
  const double um1 = m == 1 ? 1.0 : (m == 2 ? 2.0 * c : u_cur);
  const double sign = (k % 2 == 0) ? 1.0 : -1.0;
  if (psi) *psi = sign * tm - 2.0 * k;
  if (dpsi_dcos) *dpsi_dcos = sign * m * um1;
}

namespace {

void check_labels(const std::vector<int>& labels, std::size_t classes,
                  std::size_t batch, std::size_t x_dim, std::size_t head_dim) {
  if (x_dim != head_dim)
    throw std::invalid_argument("embedding dim does not match head dim");
  if (labels.size() != batch)
    throw std::invalid_argument("labels size does not match batch");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw std::out_of_range("label out of range");
}

// softmax probabilities of one logit row, numerically stabilized
std::vector<double> softmax_row(const std::vector<double>& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    p[j] = std::exp(z[j] - zmax);
    sum += p[j];
  }
  for (double& v : p) v /= sum;
  return p;
}

struct NormalizedRows {
  TensorD unit;                // C x d
  std::vector<double> norms;   // C
};

NormalizedRows normalize_rows(const TensorD& W) {
  const std::size_t C = W.dim(0), d = W.dim(1);
  NormalizedRows r{TensorD({C, d}), std::vector<double>(C)};
  for (std::size_t j = 0; j < C; ++j) {
    double n2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) n2 += W.at2(j, i) * W.at2(j, i);
    const double n = std::sqrt(n2);
    if (n == 0.0) throw std::domain_error("zero-norm weight row");
    r.norms[j] = n;
    for (std::size_t i = 0; i < d; ++i) r.unit.at2(j, i) = W.at2(j, i) / n;
  }
  return r;
}

double vec_norm(const TensorD& x, std::size_t row) {
  const std::size_t d = x.dim(1);
  double n2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) n2 += x.at2(row, i) * x.at2(row, i);
  const double n = std::sqrt(n2);
  if (n == 0.0) throw std::domain_error("zero-norm embedding");
  return n;
}

}  // namespace

LossOutput softmax_ce(const TensorD& x, const std::vector<int>& labels,
                      const Head& head) {
  const std::size_t B = x.dim(0), d = x.dim(1), C = head.classes();
  check_labels(labels, C, B, d, head.dim());
  LossOutput out;
  out.grad_x = TensorD({B, d});
  out.grad_W = TensorD({C, d});
  out.grad_c.assign(head.has_bias() ? C : 0, 0.0);
  out.prob_true.resize(B);

  for (std::size_t b = 0; b < B; ++b) {
    std::vector<double> z(C, 0.0);
    for (std::size_t j = 0; j < C; ++j) {
      double acc = head.has_bias() ? head.bias[j] : 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += head.W.at2(j, i) * x.at2(b, i);
      z[j] = acc;
    }
    const auto p = softmax_row(z);
    const std::size_t y = static_cast<std::size_t>(labels[b]);
    out.prob_true[b] = p[y];
    out.loss += -std::log(p[y]);
    for (std::size_t j = 0; j < C; ++j) {
      const double dz = (p[j] - (j == y ? 1.0 : 0.0)) / static_cast<double>(B);
      if (!out.grad_c.empty()) out.grad_c[j] += dz;
      for (std::size_t i = 0; i < d; ++i) {
        out.grad_W.at2(j, i) += dz * x.at2(b, i);
        out.grad_x.at2(b, i) += dz * head.W.at2(j, i);
      }
    }
  }
  out.loss /= static_cast<double>(B);
  return out;
}

LossOutput asoftmax(const TensorD& x, const std::vector<int>& labels, const Head& head,
                    const LossConfig& cfg, std::int64_t iter) {
  if (cfg.m < 1) throw std::invalid_argument("asoftmax: m must be >= 1");
  const std::size_t B = x.dim(0), d = x.dim(1), C = head.classes();
  check_labels(labels, C, B, d, head.dim());
  const double lambda = asoftmax_lambda(cfg, iter);
  const auto wn = normalize_rows(head.W);

  LossOutput out;
  out.grad_x = TensorD({B, d});
  out.grad_W = TensorD({C, d});
  out.prob_true.resize(B);

  for (std::size_t b = 0; b < B; ++b) {
    const double norm = vec_norm(x, b);
    std::vector<double> xhat(d);
    for (std::size_t i = 0; i < d; ++i) xhat[i] = x.at2(b, i) / norm;
    const std::size_t y = static_cast<std::size_t>(labels[b]);

    std::vector<double> cosv(C), z(C), dz_dcos(C), dz_dnorm(C);
    for (std::size_t j = 0; j < C; ++j) {
      double cj = 0.0;
      for (std::size_t i = 0; i < d; ++i) cj += wn.unit.at2(j, i) * xhat[i];
      cj = std::clamp(cj, -1.0, 1.0);
      cosv[j] = cj;
      if (j == y) {
        double psi, dpsi;
        asoftmax_psi(cfg.m, cj, &psi, &dpsi);
        const double blend = (lambda * cj + psi) / (lambda + 1.0);
        z[j] = norm * blend;
        dz_dcos[j] = norm * (lambda + dpsi) / (lambda + 1.0);
        dz_dnorm[j] = blend;
      } else {
        z[j] = norm * cj;
        dz_dcos[j] = norm;
        dz_dnorm[j] = cj;
      }
    }
    const auto p = softmax_row(z);
    out.prob_true[b] = p[y];
    out.loss += -std::log(p[y]);

    for (std::size_t j = 0; j < C; ++j) {
      const double dLdz = (p[j] - (j == y ? 1.0 : 0.0)) / static_cast<double>(B);
      const double dLdcos = dLdz * dz_dcos[j];
      const double dLdnorm = dLdz * dz_dnorm[j];
      // d cos_j / dx = (w_j_hat - cos_j x_hat)/norm ; d norm / dx = x_hat
      for (std::size_t i = 0; i < d; ++i) {
        out.grad_x.at2(b, i) +=
            dLdcos * (wn.unit.at2(j, i) - cosv[j] * xhat[i]) / norm +
            dLdnorm * xhat[i];
        out.grad_W.at2(j, i) +=
            dLdcos * (xhat[i] - cosv[j] * wn.unit.at2(j, i)) / wn.norms[j];
      }
    }
  }
  out.loss /= static_cast<double>(B);
  return out;
}

LossOutput amsoftmax(const TensorD& x, const std::vector<int>& labels, const Head& head,
                     const LossConfig& cfg) {
  if (cfg.scale <= 0.0) throw std::invalid_argument("amsoftmax: s must be > 0");
  const std::size_t B = x.dim(0), d = x.dim(1), C = head.classes();
  check_labels(labels, C, B, d, head.dim());
  const auto wn = normalize_rows(head.W);

  LossOutput out;
  out.grad_x = TensorD({B, d});
  out.grad_W = TensorD({C, d});
  out.prob_true.resize(B);

  for (std::size_t b = 0; b < B; ++b) {
    const double norm = vec_norm(x, b);
    std::vector<double> xhat(d);
    for (std::size_t i = 0; i < d; ++i) xhat[i] = x.at2(b, i) / norm;
    const std::size_t y = static_cast<std::size_t>(labels[b]);

    std::vector<double> cosv(C), z(C);
    for (std::size_t j = 0; j < C; ++j) {
      double cj = 0.0;
      for (std::size_t i = 0; i < d; ++i) cj += wn.unit.at2(j, i) * xhat[i];
      cosv[j] = std::clamp(cj, -1.0, 1.0);
      z[j] = cfg.scale * (cosv[j] - (j == y ? cfg.margin : 0.0));
    }
    const auto p = softmax_row(z);
    out.prob_true[b] = p[y];
    out.loss += -std::log(p[y]);

    std::vector<double> dLdxhat(d, 0.0);
    for (std::size_t j = 0; j < C; ++j) {
      const double dLdcos =
          cfg.scale * (p[j] - (j == y ? 1.0 : 0.0)) / static_cast<double>(B);
      for (std::size_t i = 0; i < d; ++i) {
        dLdxhat[i] += dLdcos * wn.unit.at2(j, i);
        out.grad_W.at2(j, i) +=
            dLdcos * (xhat[i] - cosv[j] * wn.unit.at2(j, i)) / wn.norms[j];
      }
    }
    // project through x_hat = x / |x|
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += dLdxhat[i] * xhat[i];
    for (std::size_t i = 0; i < d; ++i)
      out.grad_x.at2(b, i) = (dLdxhat[i] - dot * xhat[i]) / norm;
  }
  out.loss /= static_cast<double>(B);
  return out;
}

LossOutput logistic_margin(const TensorD& x, const std::vector<int>& labels,
                           const Head& head, const LossConfig& cfg) {
  if (cfg.alpha < 0.0) throw std::invalid_argument("logistic_margin: alpha must be >= 0");
  if (!head.has_bias())
    throw std::invalid_argument("logistic_margin: head requires biases");
  const std::size_t B = x.dim(0), d = x.dim(1), C = head.classes();
  check_labels(labels, C, B, d, head.dim());

  LossOutput out;
  out.grad_x = TensorD({B, d});
  out.grad_W = TensorD({C, d});
  out.grad_c.assign(C, 0.0);
  out.prob_true.resize(B);

  for (std::size_t b = 0; b < B; ++b) {
    const double norm = vec_norm(x, b);
    std::vector<double> xhat(d);
    for (std::size_t i = 0; i < d; ++i) xhat[i] = x.at2(b, i) / norm;
    const std::size_t y = static_cast<std::size_t>(labels[b]);

    std::vector<double> z(C);
    for (std::size_t j = 0; j < C; ++j) {
      double s = head.bias[j];
      for (std::size_t i = 0; i < d; ++i) s += head.W.at2(j, i) * xhat[i];
      z[j] = s - (j == y ? cfg.alpha : 0.0);
    }
    const auto p = softmax_row(z);
    out.prob_true[b] = p[y];
    out.loss += -std::log(p[y]);

    std::vector<double> dLdxhat(d, 0.0);
    for (std::size_t j = 0; j < C; ++j) {
      const double dLdS = (p[j] - (j == y ? 1.0 : 0.0)) / static_cast<double>(B);
      out.grad_c[j] += dLdS;
      for (std::size_t i = 0; i < d; ++i) {
        out.grad_W.at2(j, i) += dLdS * xhat[i];
        dLdxhat[i] += dLdS * head.W.at2(j, i);
      }
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < d; ++i) dot += dLdxhat[i] * xhat[i];
    for (std::size_t i = 0; i < d; ++i)
      out.grad_x.at2(b, i) = (dLdxhat[i] - dot * xhat[i]) / norm;
  }
  out.loss /= static_cast<double>(B);
  return out;
}

LossOutput loss_forward(const TensorD& x, const std::vector<int>& labels,
                        const Head& head, const LossConfig& cfg, std::int64_t iter) {
  switch (cfg.kind) {
    case LossKind::Softmax: return softmax_ce(x, labels, head);
    case LossKind::ASoftmax: return asoftmax(x, labels, head, cfg, iter);
    case LossKind::AMSoftmax: return amsoftmax(x, labels, head, cfg);
    case LossKind::LogisticMargin: return logistic_margin(x, labels, head, cfg);
  }
  throw std::invalid_argument("unknown loss kind");
}

double grad_check(const TensorD& x, const std::vector<int>& labels, const Head& head,
                  const LossConfig& cfg, std::int64_t iter, double h) {
  const LossOutput analytic = loss_forward(x, labels, head, cfg, iter);
  double max_rel = 0.0;
  auto update = [&](double a, double n) {
    const double rel = std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-3});
    max_rel = std::max(max_rel, rel);
  };
  auto eval = [&](const TensorD& xx, const Head& hh) {
    return loss_forward(xx, labels, hh, cfg, iter).loss;
  };

  for (std::size_t i = 0; i < x.size(); ++i) {
    TensorD xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    update(analytic.grad_x[i], (eval(xp, head) - eval(xm, head)) / (2.0 * h));
  }
  for (std::size_t i = 0; i < head.W.size(); ++i) {
    Head hp = head, hm = head;
    hp.W[i] += h;
    hm.W[i] -= h;
    update(analytic.grad_W[i], (eval(x, hp) - eval(x, hm)) / (2.0 * h));
  }
  for (std::size_t j = 0; j < head.bias.size(); ++j) {
    Head hp = head, hm = head;
    hp.bias[j] += h;
    hm.bias[j] -= h;
    update(analytic.grad_c[j], (eval(x, hp) - eval(x, hm)) / (2.0 * h));
  }
  return max_rel;
}

}  // namespace spk::loss
