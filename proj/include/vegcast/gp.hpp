#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "vegcast/types.hpp"

namespace vegcast::gp {

enum class Primitive { Linear, Rbf, Periodic, RationalQuadratic, Matern32, Matern52 };

const char* to_string(Primitive p);
Primitive parse_primitive(std::string_view text);

/// Period of the PERIODIC primitive in weeks. Never optimized.
inline constexpr double kPeriodWeeks = 52.0;

/// Covariance function over time in weeks, built from primitives with sums
/// and products. Hyperparameters are stored as natural logarithms of
/// positive quantities (signal std, length scale, RQ shape).
///
/// LINEAR is k = sigma^2 * t * t' on times already shifted to the model's
/// time origin; every other primitive is stationary.
class Kernel {
public:
    static Kernel primitive(Primitive p);
    static Kernel sum(Kernel a, Kernel b);
    static Kernel product(Kernel a, Kernel b);

    /// Parses structure strings like "RBF", "RBF+PERIODIC", "LINEAR*RBF".
    /// Operators bind left to right; '*' binds tighter than '+'.
    static Kernel parse(std::string_view structure);

    std::string structure() const;

    std::size_t num_params() const;
    std::vector<double> log_params() const;
    void set_log_params(std::span<const double> values);
    /// Names like "RBF.sigma", "PERIODIC.lengthscale"; prefixed "0."/"1." for composites.
    std::vector<std::string> param_names() const;

    double operator()(double t, double u) const;

    /// Kernel value; `dlog` (size num_params()) receives d k / d log(param).
    double eval_grad(double t, double u, std::span<double> dlog) const;

    /// Copy with every signal std, length scale and RQ shape reset for a
    /// fresh optimizer start. LINEAR's std is divided by `linear_time_scale`.
    Kernel initialized(double signal_std, double lengthscale, double periodic_lengthscale, double rq_alpha,
                       double linear_time_scale) const;

    bool contains(Primitive p) const;
    bool is_primitive() const noexcept { return op_ == Op::Leaf; }

private:
    enum class Op { Leaf, Sum, Product };

    Op op_ = Op::Leaf;
    Primitive prim_ = Primitive::Rbf;
    std::vector<double> params_;    // leaf only
    std::vector<Kernel> children_;  // composite only

    void collect_names(const std::string& prefix, std::vector<std::string>& out) const;
    double leaf_eval(double t, double u, double* dlog) const;
};

/// Cholesky factorization of K + jitter*I; jitter starts at 1e-6 times the
/// mean diagonal and doubles until factorization succeeds (up to 1e-2 relative).
/// Throws Error(ErrorCode::Conditioning) past that.
struct Factorization {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;
};
Factorization factorize(const Eigen::MatrixXd& gram);

/// Gram matrix of the kernel on the given times (no noise, no jitter).
Eigen::MatrixXd gram_matrix(const Kernel& kernel, std::span<const double> times);

struct LmlValue {
    double value = 0.0;
    /// Gradient w.r.t. [kernel log params..., log noise_std].
    std::vector<double> gradient;
};

/// Log marginal likelihood of zero-mean `residuals` observed at `times`
/// under kernel + noise_std^2 I.
LmlValue log_marginal_likelihood(const Kernel& kernel, double log_noise_std, std::span<const double> times,
                                 std::span<const double> residuals, bool with_gradient);

struct Prediction {
    double mean = 0.0;
    double std = 0.0;  // predictive std, includes observation noise
};

/// A GP conditioned on training data. Times are weeks, strictly increasing.
class GPModel {
public:
    GPModel(Kernel kernel, double mean, double noise_std, std::vector<double> times, std::vector<double> values);

    const Kernel& kernel() const noexcept { return kernel_; }
    double mean() const noexcept { return mean_; }
    double noise_std() const noexcept { return noise_std_; }
    double time_origin() const noexcept { return origin_; }
    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<double>& values() const noexcept { return values_; }
    double log_marginal_likelihood() const noexcept { return lml_; }
    double jitter() const noexcept { return jitter_; }

    std::vector<Prediction> predict(std::span<const double> query) const;
    Prediction predict(double query) const;

private:
    Kernel kernel_;
    double mean_;
    double noise_std_;
    double origin_;
    std::vector<double> times_;
    std::vector<double> values_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::VectorXd alpha_;
    double jitter_ = 0.0;
    double lml_ = 0.0;
};

struct FitOptions {
    std::size_t restarts = 5;
    std::uint64_t seed = 0;
    std::size_t max_iterations = 300;
};

/// Thrown when no restart converges; carries the best parameters seen.
class FitError : public Error {
public:
    FitError(const std::string& what, Kernel best_kernel, double best_noise_std, double best_lml)
        : Error(ErrorCode::FitFailure, what),
          best_kernel(std::move(best_kernel)),
          best_noise_std(best_noise_std),
          best_lml(best_lml) {}

    Kernel best_kernel;
    double best_noise_std;
    double best_lml;
};

inline constexpr std::size_t kMinTrainingPoints = 10;
inline constexpr double kLogParamLower = -9.210340371976184;  // log(1e-4)
inline constexpr double kLogParamUpper = 9.210340371976184;   // log(1e4)

/// Maximizes the log marginal likelihood over kernel hyperparameters and
/// noise std with the constant mean fixed to the training mean. Restart 0..2
/// start from length scales {2, 8, 26} weeks; later restarts draw random
/// starting points from `seed`.
GPModel gp_fit(std::span<const double> times, std::span<const double> values, const Kernel& structure,
               const FitOptions& options = {});

struct SearchResult {
    Kernel kernel;
    double log_marginal_likelihood = 0.0;
    /// log_marginal_likelihood minus the complexity penalty; the ranking key.
    double score = 0.0;
    double noise_std = 0.0;
    bool failed = false;
    std::string reason;
};

/// Every primitive in `candidates`, plus SUM and PRODUCT of each distinct
/// pair, fitted and ranked by descending score (failures last). The score is
/// the log marginal likelihood less `complexity_penalty` nats per fitted
/// hyperparameter, noise included; a penalty of 0 ranks by raw likelihood.
std::vector<SearchResult> kernel_search(std::span<const double> times, std::span<const double> values,
                                        std::span<const Primitive> candidates, const FitOptions& options = {},
                                        double complexity_penalty = 1.0);

std::vector<Primitive> all_primitives();

std::vector<Prediction> gp_predict(const GPModel& model, std::span<const double> query);

// --- gap-filling and forecasting --------------------------------------------

enum class GapfillMode { Forecast, NonForecast };

/// Hyperparameters that bypass fitting (kernel params are taken from `kernel`).
struct FixedHyperparameters {
    Kernel kernel;
    double mean = 0.0;
    double noise_std = 0.1;
};

struct GapfillOptions {
    GapfillMode mode = GapfillMode::NonForecast;
    std::optional<Date> cutoff;  // required in Forecast mode
    Kernel kernel = Kernel::parse("RBF+PERIODIC");
    FitOptions fit;
    std::optional<FixedHyperparameters> fixed;
};

struct GapfillOutcome {
    std::optional<WeeklySeries> series;
    std::string reason;  // set when series is absent
};

/// Trains on good samples (all of them, or only those dated <= cutoff in
/// Forecast mode) and emits the posterior mean at every slot of `grid`.
/// Time is measured in weeks from the grid start.
GapfillOutcome gp_gapfill(const ObservationSeries& obs, const TimeGrid& grid, const GapfillOptions& options);

struct GpForecastOptions {
    FitOptions fit;
    /// Train on at most this many weeks ending at the issue date (0 = all history).
    std::size_t history_weeks = 104;
    std::size_t min_history = 52;
};

struct GpForecast {
    std::optional<Prediction> value;
    std::string reason;  // INSUFFICIENT_HISTORY etc. when value is absent
};

/// Fits an RBF GP (constant mean = training mean) to present values at or
/// before `issue_date` and predicts `lead_weeks` ahead.
GpForecast gp_forecast(const IndexSeries& series, Date issue_date, std::size_t lead_weeks,
                       const GpForecastOptions& options = {});

/// Same, returning predictions for several leads from one fit.
std::vector<GpForecast> gp_forecast_leads(const IndexSeries& series, Date issue_date,
                                          std::span<const std::size_t> leads, const GpForecastOptions& options = {});

// --- persistence of fitted models -------------------------------------------

/// Key-value text: `kernel=RBF+PERIODIC`, `mean=...`, `noise_std=...`,
/// `time_origin=...`, `log_marginal_likelihood=...`, and one `param.<name>=`
/// line per hyperparameter in natural units. Training data are not stored.
void write_model(std::ostream& out, const GPModel& model);

struct StoredModel {
    Kernel kernel;
    double mean = 0.0;
    double noise_std = 0.0;
    double time_origin = 0.0;
    double log_marginal_likelihood = 0.0;
};
StoredModel read_model(std::istream& in);

}  // namespace vegcast::gp
