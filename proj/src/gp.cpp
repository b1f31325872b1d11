#include "ledro/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ledro/errors.hpp"

namespace ledro {
namespace {

constexpr double kSqrt5 = 2.23606797749978969;

// Clamp boxes for the log hyperparameters. Inputs live in the unit cube and
// targets are standardized, so these are generous.
constexpr double kLogLsLo = -5.2983173665480363;  // log(0.005)
constexpr double kLogLsHi = 1.3862943611198906;   // log(4)
constexpr double kLogSfLo = -2.9957322735539909;  // log(0.05)
constexpr double kLogSfHi = 2.9957322735539909;   // log(20)
constexpr double kLogSnHi = 0.0;                  // log(1)

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

void clamp_hyper(GpHyper& h, double log_sn_lo) {
    for (Eigen::Index i = 0; i < h.log_ls.size(); ++i) {
        h.log_ls[i] = clampd(h.log_ls[i], kLogLsLo, kLogLsHi);
    }
    h.log_sf2 = clampd(h.log_sf2, kLogSfLo, kLogSfHi);
    h.log_sn2 = clampd(h.log_sn2, log_sn_lo, kLogSnHi);
}

// Scaled distance s = sqrt(5) * r between rows a and b.
double scaled_dist(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                   const Eigen::VectorXd& ls) {
    double r2 = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double d = (a[i] - b[i]) / ls[i];
        r2 += d * d;
    }
    return kSqrt5 * std::sqrt(r2);
}

// Dense kernel cross-matrix via the squared-distance expansion on
// length-scale-normalized rows. One GEMM plus elementwise transcendentals
// instead of a quadratic number of per-pair scalar loops.
Eigen::MatrixXd matern_cross(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                             const GpHyper& h) {
    const Eigen::VectorXd inv_ls = h.length_scales().cwiseInverse();
    const Eigen::MatrixXd as = a * inv_ls.asDiagonal();
    const Eigen::MatrixXd bs = b * inv_ls.asDiagonal();
    const Eigen::VectorXd an = as.rowwise().squaredNorm();
    const Eigen::VectorXd bn = bs.rowwise().squaredNorm();
    Eigen::MatrixXd d2 = -2.0 * as * bs.transpose();
    d2.colwise() += an;
    d2.rowwise() += bn.transpose();
    Eigen::ArrayXXd s = d2.array().max(0.0).sqrt() * kSqrt5;
    return (h.signal_var() * (1.0 + s + s.square() / 3.0) * (-s).exp()).matrix();
}

// Cholesky with escalating diagonal jitter. Throws only if the matrix stays
// indefinite at jitter 1e-2 * mean diagonal, which indicates corrupt inputs.
Eigen::LLT<Eigen::MatrixXd> chol_jittered(const Eigen::MatrixXd& k, double jitter_floor) {
    const double scale = k.diagonal().mean();
    double jitter = jitter_floor * scale;
    for (int attempt = 0; attempt < 8; ++attempt) {
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(kj);
        if (llt.info() == Eigen::Success) return llt;
        jitter *= 100.0;
        if (jitter > 1e-2 * scale && attempt >= 4) break;
    }
    throw Error("covariance matrix not positive definite after jitter escalation");
}

struct Standardized {
    Eigen::VectorXd y;
    double mean;
    double scale;
    bool degenerate;
};

Standardized standardize(const Eigen::VectorXd& y) {
    Standardized s;
    s.mean = y.mean();
    const double var = (y.array() - s.mean).square().mean();
    s.scale = std::sqrt(var);
    s.degenerate = !(s.scale > 1e-12);
    if (s.degenerate) {
        s.scale = 1.0;
        s.y = Eigen::VectorXd::Zero(y.size());
    } else {
        s.y = (y.array() - s.mean) / s.scale;
    }
    return s;
}

// Deterministic subsample of row indices: a seeded shuffle, first `m` kept,
// restored to original order so the kernel matrix layout is stable.
std::vector<std::size_t> pick_rows(std::size_t n, std::size_t m, std::uint64_t seed) {
    if (m >= n) {
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), std::size_t{0});
        return all;
    }
    Rng rng(seed);
    auto perm = rng.permutation(n);
    perm.resize(m);
    std::sort(perm.begin(), perm.end());
    return perm;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
    }
    return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& y, const std::vector<std::size_t>& idx) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(idx[i])];
    }
    return out;
}

} // namespace

double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const GpHyper& h) {
    const Eigen::VectorXd ls = h.length_scales();
    const double s = scaled_dist(a, b, ls);
    return h.signal_var() * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

double gp_log_marginal(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const GpHyper& h, GpHyper* grad) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    if (n < 1 || y.size() != n) throw ConfigError("log marginal: shape mismatch");
    if (h.log_ls.size() != d) throw ConfigError("log marginal: length-scale dimension mismatch");

    const Eigen::VectorXd ls = h.length_scales();
    const double sf2 = h.signal_var();
    const double sn2 = h.noise_var();

    // Kernel matrix plus the pairwise factors the gradient reuses.
    Eigen::MatrixXd k(n, n);
    Eigen::MatrixXd g;  // (5/3) sf2 (1+s) exp(-s), the shared length-scale factor
    if (grad) g.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = sf2 + sn2;
        if (grad) g(i, i) = (5.0 / 3.0) * sf2;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double s = scaled_dist(x.row(i), x.row(j), ls);
            const double es = std::exp(-s);
            const double kf = sf2 * (1.0 + s + s * s / 3.0) * es;
            k(i, j) = kf;
            k(j, i) = kf;
            if (grad) {
                const double gij = (5.0 / 3.0) * sf2 * (1.0 + s) * es;
                g(i, j) = gij;
                g(j, i) = gij;
            }
        }
    }

    const auto llt = chol_jittered(k, 1e-12);
    const Eigen::VectorXd alpha = llt.solve(y);
    double logdet = 0.0;
    const auto& l = llt.matrixLLT();
    for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(l(i, i));
    const double lml = -0.5 * y.dot(alpha) - logdet
                       - 0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);

    if (grad) {
        // d(lml)/d(theta) = 0.5 tr((alpha alpha^T - K^-1) dK/dtheta).
        Eigen::MatrixXd kinv = llt.solve(Eigen::MatrixXd::Identity(n, n));
        Eigen::MatrixXd a = alpha * alpha.transpose() - kinv;

        grad->log_ls.resize(d);
        // dK/d(log ls_j) = g .* sqdiff_j / ls_j^2, zero on the diagonal.
        for (Eigen::Index dd = 0; dd < d; ++dd) {
            double acc = 0.0;
            const double inv_ls2 = 1.0 / (ls[dd] * ls[dd]);
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = i + 1; j < n; ++j) {
                    const double diff = x(i, dd) - x(j, dd);
                    acc += a(i, j) * g(i, j) * diff * diff * inv_ls2;
                }
            }
            grad->log_ls[dd] = acc;  // 0.5 * 2 off-diagonal halves
        }
        // dK/d(log sf2) = K_f (the noiseless kernel), dK/d(log sn2) = sn2 I.
        double acc_sf = 0.0;
        double acc_sn = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            acc_sf += a(i, i) * (k(i, i) - sn2);
            acc_sn += a(i, i) * sn2;
            for (Eigen::Index j = i + 1; j < n; ++j) acc_sf += 2.0 * a(i, j) * k(i, j);
        }
        grad->log_sf2 = 0.5 * acc_sf;
        grad->log_sn2 = 0.5 * acc_sn;
    }
    return lml;
}

GpHyper GaussianProcess::optimize_from(GpHyper start, const Eigen::MatrixXd& x,
                                       const Eigen::VectorXd& y, int steps) const {
    const double log_sn_lo = std::log(cfg_.noise_floor);
    clamp_hyper(start, log_sn_lo);
    const Eigen::Index d = start.log_ls.size();
    const Eigen::Index np = d + 2;

    Eigen::VectorXd theta(np);
    theta.head(d) = start.log_ls;
    theta[d] = start.log_sf2;
    theta[d + 1] = start.log_sn2;

    Eigen::VectorXd m = Eigen::VectorXd::Zero(np);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(np);
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;

    GpHyper cur = start;
    for (int t = 1; t <= steps; ++t) {
        GpHyper grad;
        gp_log_marginal(x, y, cur, &grad);
        Eigen::VectorXd gvec(np);
        gvec.head(d) = grad.log_ls;
        gvec[d] = grad.log_sf2;
        gvec[d + 1] = grad.log_sn2;

        m = b1 * m + (1.0 - b1) * gvec;
        v = b2 * v.array().matrix() + (1.0 - b2) * gvec.array().square().matrix();
        const double bc1 = 1.0 - std::pow(b1, t);
        const double bc2 = 1.0 - std::pow(b2, t);
        // Ascent: step along +gradient.
        theta.array() += cfg_.adam_lr * (m.array() / bc1)
                         / ((v.array() / bc2).sqrt() + eps);

        cur.log_ls = theta.head(d);
        cur.log_sf2 = theta[d];
        cur.log_sn2 = theta[d + 1];
        clamp_hyper(cur, log_sn_lo);
        theta.head(d) = cur.log_ls;
        theta[d] = cur.log_sf2;
        theta[d + 1] = cur.log_sn2;
    }
    return cur;
}

void GaussianProcess::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          std::uint64_t seed) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    if (n < 2) throw ConfigError("gaussian process fit needs at least 2 observations");
    if (y.size() != n) throw ConfigError("gaussian process fit: x/y length mismatch");

    const auto std_y = standardize(y);
    if (std_y.degenerate) {
        prior_fallback_ = true;
        hyper_.log_ls = Eigen::VectorXd::Constant(d, std::log(0.5));
        hyper_.log_sf2 = 0.0;
        hyper_.log_sn2 = std::log(1e-6);
        have_hyper_ = false;  // a later informative fit restarts cold
        condition(x, y);
        return;
    }
    prior_fallback_ = false;

    const auto idx = pick_rows(static_cast<std::size_t>(n),
                               static_cast<std::size_t>(cfg_.hyperfit_subsample),
                               derive_seed(seed, "gp-subsample"));
    const Eigen::MatrixXd xs = take_rows(x, idx);
    const Eigen::VectorXd ys = take_rows(std_y.y, idx);

    std::vector<GpHyper> starts;
    if (have_hyper_ && hyper_.log_ls.size() == d) {
        starts.push_back(hyper_);
    } else {
        // Fixed cold-start schedule: mid / short / long length scales.
        for (double ls0 : {0.5, 0.15, 1.5}) {
            GpHyper h;
            h.log_ls = Eigen::VectorXd::Constant(d, std::log(ls0));
            h.log_sf2 = 0.0;
            h.log_sn2 = std::log(ls0 == 0.15 ? 1e-4 : 1e-3);
            starts.push_back(h);
        }
    }

    const int steps = have_hyper_ ? cfg_.adam_steps_warm : cfg_.adam_steps_cold;
    GpHyper best;
    double best_lml = -std::numeric_limits<double>::infinity();
    for (const auto& s : starts) {
        GpHyper cand = optimize_from(s, xs, ys, steps);
        const double lml = gp_log_marginal(xs, ys, cand);
        if (lml > best_lml) {
            best_lml = lml;
            best = cand;
        }
    }
    hyper_ = best;
    have_hyper_ = true;
    condition(x, y);
}

void GaussianProcess::set_hyper(const GpHyper& h) {
    if (h.log_ls.size() < 1) throw ConfigError("hyperparameters need at least one dimension");
    hyper_ = h;
    have_hyper_ = false;
    prior_fallback_ = false;
    conditioned_ = false;
}

void GaussianProcess::condition(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const Eigen::Index n = x.rows();
    if (n < 1) throw ConfigError("gaussian process condition: empty data");
    if (y.size() != n) throw ConfigError("gaussian process condition: x/y length mismatch");
    if (hyper_.log_ls.size() != x.cols()) {
        throw ConfigError("gaussian process condition: dimension mismatch");
    }

    const auto std_y = standardize(y);
    y_mean_ = std_y.mean;
    y_scale_ = std_y.scale;

    // Cap the conditioning set: keep the better half by value plus the most
    // recent of the rest, so the model stays sharp near the incumbent while
    // tracking the current data distribution.
    std::vector<std::size_t> keep;
    const auto cap = static_cast<std::size_t>(cfg_.conditioning_cap);
    const auto total = static_cast<std::size_t>(n);
    if (total <= cap) {
        keep.resize(total);
        std::iota(keep.begin(), keep.end(), std::size_t{0});
    } else {
        std::vector<std::size_t> order(total);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return y[static_cast<Eigen::Index>(a)] > y[static_cast<Eigen::Index>(b)];
        });
        const std::size_t elites = cap / 2;
        std::vector<bool> chosen(total, false);
        for (std::size_t i = 0; i < elites; ++i) chosen[order[i]] = true;
        std::size_t want = cap - elites;
        for (std::size_t i = total; i-- > 0 && want > 0;) {
            if (!chosen[i]) {
                chosen[i] = true;
                --want;
            }
        }
        for (std::size_t i = 0; i < total; ++i) {
            if (chosen[i]) keep.push_back(i);
        }
    }

    xc_ = take_rows(x, keep);
    const Eigen::VectorXd yk = take_rows(std_y.y, keep);

    Eigen::MatrixXd k = matern_cross(xc_, xc_, hyper_);
    k.diagonal().setConstant(hyper_.signal_var() + hyper_.noise_var());
    const auto llt = chol_jittered(k, cfg_.jitter_floor);
    chol_l_ = llt.matrixL();
    alpha_ = llt.solve(yk);
    conditioned_ = true;
}

Eigen::VectorXd GaussianProcess::kernel_vector(const Eigen::VectorXd& q) const {
    return matern_cross(q.transpose(), xc_, hyper_).row(0).transpose();
}

double GaussianProcess::posterior_mean(const Eigen::VectorXd& q) const {
    if (!conditioned_) throw ConfigError("posterior queried before conditioning");
    return y_mean_ + y_scale_ * kernel_vector(q).dot(alpha_);
}

Eigen::VectorXd GaussianProcess::posterior_mean_grad(const Eigen::VectorXd& q) const {
    if (!conditioned_) throw ConfigError("posterior queried before conditioning");
    const Eigen::Index m = xc_.rows();
    const Eigen::Index d = xc_.cols();
    const Eigen::VectorXd ls = hyper_.length_scales();
    const double sf2 = hyper_.signal_var();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(d);
    // d mean / dq_j = sum_i alpha_i * -(5/3) sf2 (1+s) exp(-s) (q_j - x_ij) / ls_j^2
    for (Eigen::Index i = 0; i < m; ++i) {
        const double s = scaled_dist(q, xc_.row(i), ls);
        const double f = -(5.0 / 3.0) * sf2 * (1.0 + s) * std::exp(-s) * alpha_[i];
        for (Eigen::Index j = 0; j < d; ++j) {
            const double diff = (q[j] - xc_(i, j)) / (ls[j] * ls[j]);
            grad[j] += f * diff;
        }
    }
    return y_scale_ * grad;
}

Eigen::VectorXd GaussianProcess::sample_joint(const Eigen::MatrixXd& q, Rng& rng) const {
    return sample_joint_multi(q, 1, rng).col(0);
}

Eigen::MatrixXd GaussianProcess::sample_joint_multi(const Eigen::MatrixXd& q, int draws,
                                                    Rng& rng) const {
    if (!conditioned_) throw ConfigError("posterior queried before conditioning");
    if (draws < 1) throw ConfigError("sample_joint_multi: draws must be positive");
    const Eigen::Index m = q.rows();

    const Eigen::MatrixXd ks = matern_cross(q, xc_, hyper_);
    const Eigen::VectorXd mu = ks * alpha_;

    Eigen::MatrixXd kqq = matern_cross(q, q, hyper_);
    kqq.diagonal().setConstant(hyper_.signal_var());

    // Posterior covariance Kqq - V^T V with V = L^-1 Ks^T, accumulated as a
    // symmetric rank update on the lower triangle (all the factorization
    // reads).
    Eigen::MatrixXd v = chol_l_.triangularView<Eigen::Lower>().solve(ks.transpose());
    Eigen::MatrixXd cov = kqq;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(v.transpose(), -1.0);

    const auto llt = chol_jittered(cov, 1e-8);
    const Eigen::MatrixXd l = llt.matrixL();
    Eigen::MatrixXd out(m, draws);
    for (int k = 0; k < draws; ++k) {
        Eigen::VectorXd z(m);
        for (Eigen::Index i = 0; i < m; ++i) z[i] = rng.normal();
        out.col(k) = (y_mean_ + (y_scale_ * (mu + l * z)).array()).matrix();
    }
    return out;
}

} // namespace ledro
