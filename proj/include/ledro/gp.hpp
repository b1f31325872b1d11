#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ledro/rng.hpp"

namespace ledro {

/// Kernel hyperparameters in log space. Log parametrization keeps gradient
/// ascent unconstrained; accessors expose the natural values.
struct GpHyper {
    Eigen::VectorXd log_ls;     // per-dimension length scales
    double log_sf2 = 0.0;       // signal variance
    double log_sn2 = -6.0;      // noise variance

    Eigen::VectorXd length_scales() const { return log_ls.array().exp(); }
    double signal_var() const { return std::exp(log_sf2); }
    double noise_var() const { return std::exp(log_sn2); }
};

struct GpConfig {
    int hyperfit_subsample = 160; // max observations used while fitting hyperparameters
    int conditioning_cap = 400;   // max observations the posterior conditions on
    int adam_steps_cold = 50;
    int adam_steps_warm = 25;
    double adam_lr = 0.08;
    double jitter_floor = 1e-10;  // relative to mean kernel diagonal
    double noise_floor = 1e-8;    // lower clamp on the noise variance
};

/// Matern-5/2 ARD covariance between two points under `h`.
double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const GpHyper& h);

/// Log marginal likelihood of `y` under a zero-mean GP with Matern-5/2 ARD
/// kernel plus Gaussian noise. If `grad` is non-null it receives d(lml)/d(log
/// params) packed in the same shape as the hyperparameters. Rows of `x` are
/// points.
double gp_log_marginal(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const GpHyper& h, GpHyper* grad = nullptr);

/// Gaussian-process regressor over the unit cube. Values are standardized
/// internally; predictions are returned in the original scale. All
/// randomness flows through explicit seeds or caller-owned Rng streams, so a
/// fixed seed reproduces the model bit for bit.
class GaussianProcess {
public:
    explicit GaussianProcess(GpConfig cfg = {}) : cfg_(cfg) {}

    /// Fits hyperparameters by Adam ascent on the marginal likelihood (fixed
    /// multi-start schedule on the first fit, continuation afterwards), then
    /// conditions on the data. Degenerate data (all values equal) falls back
    /// to prior hyperparameters and sets `prior_fallback`.
    void fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::uint64_t seed);

    /// Overrides hyperparameters without fitting. Clears the warm-start state
    /// so a later fit() restarts from the multi-start schedule.
    void set_hyper(const GpHyper& h);

    /// Conditions the posterior on (x, y) with the current hyperparameters.
    void condition(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

    double posterior_mean(const Eigen::VectorXd& q) const;
    Eigen::VectorXd posterior_mean_grad(const Eigen::VectorXd& q) const;

    /// One joint draw of the latent function over the rows of `q`.
    Eigen::VectorXd sample_joint(const Eigen::MatrixXd& q, Rng& rng) const;

    /// `draws` joint draws (columns) sharing one covariance factorization.
    Eigen::MatrixXd sample_joint_multi(const Eigen::MatrixXd& q, int draws, Rng& rng) const;

    const GpHyper& hyper() const { return hyper_; }
    bool prior_fallback() const { return prior_fallback_; }
    bool conditioned() const { return conditioned_; }
    std::size_t dim() const { return static_cast<std::size_t>(hyper_.log_ls.size()); }

private:
    GpHyper optimize_from(GpHyper start, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          int steps) const;
    Eigen::VectorXd kernel_vector(const Eigen::VectorXd& q) const;

    GpConfig cfg_;
    GpHyper hyper_;
    bool have_hyper_ = false;     // enables warm-start continuation
    bool prior_fallback_ = false;
    bool conditioned_ = false;

    Eigen::MatrixXd xc_;          // conditioning inputs
    Eigen::VectorXd alpha_;       // K^-1 y_std
    Eigen::MatrixXd chol_l_;      // lower Cholesky factor of K
    double y_mean_ = 0.0;
    double y_scale_ = 1.0;
};

} // namespace ledro
