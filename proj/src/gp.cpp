#include "vegcast/gp.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <random>

#include "vegcast/ingest.hpp"
#include "vegcast/optimize.hpp"

namespace vegcast::gp {

const char* to_string(Primitive p) {
    switch (p) {
        case Primitive::Linear: return "LINEAR";
        case Primitive::Rbf: return "RBF";
        case Primitive::Periodic: return "PERIODIC";
        case Primitive::RationalQuadratic: return "RQ";
        case Primitive::Matern32: return "MATERN32";
        case Primitive::Matern52: return "MATERN52";
    }
    return "UNKNOWN";
}

Primitive parse_primitive(std::string_view text) {
    for (auto p : all_primitives()) {
        if (text == to_string(p)) return p;
    }
    if (text == "RATIONAL_QUADRATIC") return Primitive::RationalQuadratic;
    throw Error(ErrorCode::Parse, "unknown kernel primitive '" + std::string(text) + "'");
}

std::vector<Primitive> all_primitives() {
    return {Primitive::Linear,   Primitive::Rbf,      Primitive::Periodic, Primitive::RationalQuadratic,
            Primitive::Matern32, Primitive::Matern52};
}

// --- Kernel -----------------------------------------------------------------

namespace {

std::size_t leaf_param_count(Primitive p) {
    switch (p) {
        case Primitive::Linear: return 1;
        case Primitive::RationalQuadratic: return 3;
        default: return 2;
    }
}

const char* const kLeafNames[] = {"sigma", "lengthscale", "alpha"};

}  // namespace

Kernel Kernel::primitive(Primitive p) {
    Kernel k;
    k.op_ = Op::Leaf;
    k.prim_ = p;
    k.params_.assign(leaf_param_count(p), 0.0);
    if (p != Primitive::Linear && p != Primitive::Periodic) k.params_[1] = std::log(8.0);
    return k;
}

Kernel Kernel::sum(Kernel a, Kernel b) {
    Kernel k;
    k.op_ = Op::Sum;
    k.children_ = {std::move(a), std::move(b)};
    return k;
}

Kernel Kernel::product(Kernel a, Kernel b) {
    Kernel k;
    k.op_ = Op::Product;
    k.children_ = {std::move(a), std::move(b)};
    return k;
}

namespace {

struct StructureParser {
    std::string_view text;
    std::size_t pos = 0;

    char peek() const { return pos < text.size() ? text[pos] : '\0'; }

    Kernel parse_sum() {
        Kernel k = parse_product();
        while (peek() == '+') {
            ++pos;
            k = Kernel::sum(std::move(k), parse_product());
        }
        return k;
    }
    Kernel parse_product() {
        Kernel k = parse_atom();
        while (peek() == '*') {
            ++pos;
            k = Kernel::product(std::move(k), parse_atom());
        }
        return k;
    }
    Kernel parse_atom() {
        if (peek() == '(') {
            ++pos;
            Kernel k = parse_sum();
            if (peek() != ')') fail();
            ++pos;
            return k;
        }
        const std::size_t start = pos;
        while (pos < text.size() && (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_')) {
            ++pos;
        }
        if (pos == start) fail();
        return Kernel::primitive(parse_primitive(text.substr(start, pos - start)));
    }
    [[noreturn]] void fail() const {
        throw Error(ErrorCode::Parse, "malformed kernel structure '" + std::string(text) + "'");
    }
};

}  // namespace

Kernel Kernel::parse(std::string_view structure) {
    std::string compact;
    for (char c : structure) {
        if (!std::isspace(static_cast<unsigned char>(c))) compact.push_back(c);
    }
    StructureParser p{compact};
    Kernel k = p.parse_sum();
    if (p.pos != compact.size()) p.fail();
    return k;
}

std::string Kernel::structure() const {
    switch (op_) {
        case Op::Leaf: return to_string(prim_);
        case Op::Sum: return children_[0].structure() + "+" + children_[1].structure();
        case Op::Product: {
            auto wrap = [](const Kernel& c) {
                return c.op_ == Op::Sum ? "(" + c.structure() + ")" : c.structure();
            };
            return wrap(children_[0]) + "*" + wrap(children_[1]);
        }
    }
    return {};
}

std::size_t Kernel::num_params() const {
    if (op_ == Op::Leaf) return params_.size();
    return children_[0].num_params() + children_[1].num_params();
}

std::vector<double> Kernel::log_params() const {
    if (op_ == Op::Leaf) return params_;
    auto out = children_[0].log_params();
    const auto rest = children_[1].log_params();
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

void Kernel::set_log_params(std::span<const double> values) {
    if (values.size() != num_params()) {
        throw Error(ErrorCode::InvalidInput, "kernel " + structure() + " expects " +
                                                 std::to_string(num_params()) + " parameters");
    }
    if (op_ == Op::Leaf) {
        params_.assign(values.begin(), values.end());
        return;
    }
    const std::size_t n0 = children_[0].num_params();
    children_[0].set_log_params(values.subspan(0, n0));
    children_[1].set_log_params(values.subspan(n0));
}

void Kernel::collect_names(const std::string& prefix, std::vector<std::string>& out) const {
    if (op_ == Op::Leaf) {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            out.push_back(prefix + to_string(prim_) + "." + kLeafNames[i]);
        }
        return;
    }
    children_[0].collect_names(prefix + "0.", out);
    children_[1].collect_names(prefix + "1.", out);
}

std::vector<std::string> Kernel::param_names() const {
    std::vector<std::string> out;
    collect_names("", out);
    return out;
}

Kernel Kernel::initialized(double signal_std, double lengthscale, double periodic_lengthscale, double rq_alpha,
                           double linear_time_scale) const {
    auto clamp_log = [](double v) { return std::clamp(std::log(v), kLogParamLower, kLogParamUpper); };
    Kernel k = *this;
    switch (op_) {
        case Op::Leaf:
            k.params_[0] = clamp_log(prim_ == Primitive::Linear ? signal_std / linear_time_scale : signal_std);
            if (k.params_.size() > 1) {
                k.params_[1] = clamp_log(prim_ == Primitive::Periodic ? periodic_lengthscale : lengthscale);
            }
            if (k.params_.size() > 2) k.params_[2] = clamp_log(rq_alpha);
            return k;
        case Op::Sum:
        case Op::Product: {
            // sums split the prior variance, products split the std multiplicatively
            const double child_std = op_ == Op::Sum ? signal_std / std::sqrt(2.0) : std::sqrt(signal_std);
            for (auto& c : k.children_) {
                c = c.initialized(child_std, lengthscale, periodic_lengthscale, rq_alpha, linear_time_scale);
            }
            return k;
        }
    }
    return k;
}

bool Kernel::contains(Primitive p) const {
    if (op_ == Op::Leaf) return prim_ == p;
    return children_[0].contains(p) || children_[1].contains(p);
}

double Kernel::leaf_eval(double t, double u, double* dlog) const {
    const double sigma2 = std::exp(2.0 * params_[0]);
    const double r = std::abs(t - u);
    double k = 0.0;
    switch (prim_) {
        case Primitive::Linear: {
            k = sigma2 * t * u;
            if (dlog) dlog[0] = 2.0 * k;
            return k;
        }
        case Primitive::Rbf: {
            const double l = std::exp(params_[1]);
            const double q = r * r / (l * l);
            k = sigma2 * std::exp(-0.5 * q);
            if (dlog) {
                dlog[0] = 2.0 * k;
                dlog[1] = k * q;
            }
            return k;
        }
        case Primitive::Periodic: {
            const double l = std::exp(params_[1]);
            const double s = std::sin(std::numbers::pi * r / kPeriodWeeks);
            const double q = s * s / (l * l);
            k = sigma2 * std::exp(-2.0 * q);
            if (dlog) {
                dlog[0] = 2.0 * k;
                dlog[1] = 4.0 * k * q;
            }
            return k;
        }
        case Primitive::RationalQuadratic: {
            const double l = std::exp(params_[1]);
            const double alpha = std::exp(params_[2]);
            const double z = r * r / (2.0 * alpha * l * l);
            k = sigma2 * std::exp(-alpha * std::log1p(z));
            if (dlog) {
                dlog[0] = 2.0 * k;
                dlog[1] = k * 2.0 * alpha * z / (1.0 + z);
                dlog[2] = k * alpha * (-std::log1p(z) + z / (1.0 + z));
            }
            return k;
        }
        case Primitive::Matern32: {
            const double l = std::exp(params_[1]);
            const double s = std::sqrt(3.0) * r / l;
            const double e = std::exp(-s);
            k = sigma2 * (1.0 + s) * e;
            if (dlog) {
                dlog[0] = 2.0 * k;
                dlog[1] = sigma2 * s * s * e;
            }
            return k;
        }
        case Primitive::Matern52: {
            const double l = std::exp(params_[1]);
            const double s = std::sqrt(5.0) * r / l;
            const double e = std::exp(-s);
            k = sigma2 * (1.0 + s + s * s / 3.0) * e;
            if (dlog) {
                dlog[0] = 2.0 * k;
                dlog[1] = sigma2 * s * s * (1.0 + s) / 3.0 * e;
            }
            return k;
        }
    }
    return k;
}

double Kernel::operator()(double t, double u) const {
    switch (op_) {
        case Op::Leaf: return leaf_eval(t, u, nullptr);
        case Op::Sum: return children_[0](t, u) + children_[1](t, u);
        case Op::Product: return children_[0](t, u) * children_[1](t, u);
    }
    return 0.0;
}

double Kernel::eval_grad(double t, double u, std::span<double> dlog) const {
    if (op_ == Op::Leaf) return leaf_eval(t, u, dlog.data());
    const std::size_t n0 = children_[0].num_params();
    auto d0 = dlog.subspan(0, n0);
    auto d1 = dlog.subspan(n0);
    const double k0 = children_[0].eval_grad(t, u, d0);
    const double k1 = children_[1].eval_grad(t, u, d1);
    if (op_ == Op::Sum) return k0 + k1;
    for (auto& g : d0) g *= k1;
    for (auto& g : d1) g *= k0;
    return k0 * k1;
}

// --- linear algebra ---------------------------------------------------------

Eigen::MatrixXd gram_matrix(const Kernel& kernel, std::span<const double> times) {
    const auto n = static_cast<Eigen::Index>(times.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            k(i, j) = k(j, i) = kernel(times[i], times[j]);
        }
    }
    return k;
}

Factorization factorize(const Eigen::MatrixXd& gram) {
    const auto n = gram.rows();
    const double mean_diag = n > 0 ? gram.diagonal().mean() : 0.0;
    const double scale = mean_diag > 0.0 ? mean_diag : 1.0;
    for (double rel = 1e-6; rel <= 1e-2 * (1.0 + 1e-12); rel *= 2.0) {
        Factorization f;
        f.jitter = rel * scale;
        Eigen::MatrixXd a = gram;
        a.diagonal().array() += f.jitter;
        f.llt.compute(a);
        if (f.llt.info() == Eigen::Success) return f;
    }
    throw Error(ErrorCode::Conditioning, "Gram matrix is numerically singular even with jitter 1e-2");
}

LmlValue log_marginal_likelihood(const Kernel& kernel, double log_noise_std, std::span<const double> times,
                                 std::span<const double> residuals, bool with_gradient) {
    const auto n = static_cast<Eigen::Index>(times.size());
    const std::size_t p = kernel.num_params();
    const double noise_var = std::exp(2.0 * log_noise_std);

    Eigen::MatrixXd k = gram_matrix(kernel, times);
    k.diagonal().array() += noise_var;
    const Factorization f = factorize(k);
    const Eigen::Map<const Eigen::VectorXd> y(residuals.data(), n);
    const Eigen::VectorXd alpha = f.llt.solve(y);

    const Eigen::MatrixXd& l = f.llt.matrixLLT();
    double log_det_half = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) log_det_half += std::log(l(i, i));

    LmlValue out;
    out.value = -0.5 * y.dot(alpha) - log_det_half - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    if (!with_gradient) return out;

    Eigen::MatrixXd w = f.llt.solve(Eigen::MatrixXd::Identity(n, n));
    w = alpha * alpha.transpose() - w;

    // The jitter scales with the mean diagonal, so it moves with the
    // hyperparameters and contributes to the gradient.
    const double mean_diag = n > 0 ? k.diagonal().mean() : 0.0;
    const double rel = mean_diag > 0.0 ? f.jitter / mean_diag : 0.0;
    const double trace_w = w.trace();

    out.gradient.assign(p + 1, 0.0);
    std::vector<double> dk(p), diag_sum(p, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            kernel.eval_grad(times[i], times[j], dk);
            const double weight = (i == j ? 0.5 : 1.0) * w(i, j);
            for (std::size_t q = 0; q < p; ++q) out.gradient[q] += weight * dk[q];
            if (i == j) {
                for (std::size_t q = 0; q < p; ++q) diag_sum[q] += dk[q];
            }
        }
    }
    for (std::size_t q = 0; q < p; ++q) {
        out.gradient[q] += 0.5 * trace_w * rel * diag_sum[q] / static_cast<double>(n);
    }
    out.gradient[p] = noise_var * (1.0 + rel) * trace_w;
    return out;
}

// --- GPModel ----------------------------------------------------------------

namespace {

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(std::span<const double> v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

void check_training(std::span<const double> times, std::span<const double> values) {
    if (times.size() != values.size()) {
        throw Error(ErrorCode::InvalidInput, "times and values differ in length");
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!std::isfinite(times[i]) || !std::isfinite(values[i])) {
            throw Error(ErrorCode::InvalidValue, "non-finite training data");
        }
        if (i > 0 && !(times[i - 1] < times[i])) {
            throw Error(ErrorCode::InvalidInput, "training times must be strictly increasing");
        }
    }
}

}  // namespace

GPModel::GPModel(Kernel kernel, double mean, double noise_std, std::vector<double> times, std::vector<double> values)
    : kernel_(std::move(kernel)),
      mean_(mean),
      noise_std_(noise_std),
      origin_(mean_of(times)),
      times_(std::move(times)),
      values_(std::move(values)) {
    if (!(noise_std_ > 0.0)) {
        throw Error(ErrorCode::InvalidValue, "noise std must be positive");
    }
    check_training(times_, values_);
    std::vector<double> centered(times_.size());
    std::vector<double> residuals(values_.size());
    for (std::size_t i = 0; i < times_.size(); ++i) {
        centered[i] = times_[i] - origin_;
        residuals[i] = values_[i] - mean_;
    }
    Eigen::MatrixXd k = gram_matrix(kernel_, centered);
    k.diagonal().array() += noise_std_ * noise_std_;
    Factorization f = factorize(k);
    llt_ = std::move(f.llt);
    jitter_ = f.jitter;
    const Eigen::Map<const Eigen::VectorXd> y(residuals.data(), static_cast<Eigen::Index>(residuals.size()));
    alpha_ = llt_.solve(y);
    double log_det_half = 0.0;
    const Eigen::MatrixXd& l = llt_.matrixLLT();
    for (Eigen::Index i = 0; i < l.rows(); ++i) log_det_half += std::log(l(i, i));
    lml_ = -0.5 * y.dot(alpha_) - log_det_half -
           0.5 * static_cast<double>(times_.size()) * std::log(2.0 * std::numbers::pi);
}

std::vector<Prediction> GPModel::predict(std::span<const double> query) const {
    const auto n = static_cast<Eigen::Index>(times_.size());
    const auto m = static_cast<Eigen::Index>(query.size());
    Eigen::MatrixXd kq(n, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            kq(i, j) = kernel_(times_[i] - origin_, query[j] - origin_);
        }
    }
    const Eigen::VectorXd mean = kq.transpose() * alpha_;
    const Eigen::MatrixXd v = llt_.matrixL().solve(kq);
    std::vector<Prediction> out(query.size());
    for (Eigen::Index j = 0; j < m; ++j) {
        const double q = query[j] - origin_;
        const double latent = std::max(0.0, kernel_(q, q) - v.col(j).squaredNorm());
        out[j].mean = mean_ + mean(j);
        out[j].std = std::sqrt(latent + noise_std_ * noise_std_);
    }
    return out;
}

Prediction GPModel::predict(double query) const {
    return predict(std::span<const double>(&query, 1)).front();
}

std::vector<Prediction> gp_predict(const GPModel& model, std::span<const double> query) {
    return model.predict(query);
}

// --- fitting ----------------------------------------------------------------

GPModel gp_fit(std::span<const double> times, std::span<const double> values, const Kernel& structure,
               const FitOptions& options) {
    check_training(times, values);
    if (times.size() < kMinTrainingPoints) {
        throw Error(ErrorCode::InsufficientData, "GP fit needs at least " + std::to_string(kMinTrainingPoints) +
                                                     " points, got " + std::to_string(times.size()));
    }
    const double mean = mean_of(values);
    const double origin = mean_of(times);
    std::vector<double> centered(times.size()), residuals(values.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        centered[i] = times[i] - origin;
        residuals[i] = values[i] - mean;
    }
    const double data_std = std::max(std_of(values), 1e-3);
    const double time_scale = std::max(std_of(centered), 1.0);

    Kernel kernel = structure;
    const std::size_t p = kernel.num_params();
    const std::vector<double> lower(p + 1, kLogParamLower), upper(p + 1, kLogParamUpper);

    optimize::Objective objective = [&](const std::vector<double>& x, std::vector<double>& grad) {
        Kernel k = kernel;
        k.set_log_params(std::span<const double>(x.data(), p));
        try {
            const auto lml = log_marginal_likelihood(k, x[p], centered, residuals, true);
            grad.resize(p + 1);
            for (std::size_t i = 0; i <= p; ++i) grad[i] = -lml.gradient[i];
            return -lml.value;
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> jitter(0.0, 0.5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double start_lengthscales[] = {2.0, 8.0, 26.0};

    optimize::LbfgsOptions lbfgs;
    lbfgs.max_iterations = options.max_iterations;

    std::optional<optimize::LbfgsResult> best;
    bool any_converged = false;
    const std::size_t restarts = std::max<std::size_t>(options.restarts, 1);
    for (std::size_t r = 0; r < restarts; ++r) {
        Kernel start = kernel;
        double noise = 0.1 * data_std;
        if (r < 3) {
            start = kernel.initialized(data_std, start_lengthscales[r], 1.0, 1.0, time_scale);
        } else {
            const double ls = std::exp(std::log(1.0) + unit(rng) * std::log(104.0));
            const double pl = std::exp(std::log(0.3) + unit(rng) * std::log(10.0));
            const double alpha = std::exp(std::log(0.3) + unit(rng) * std::log(10.0));
            start = kernel.initialized(data_std * std::exp(jitter(rng)), ls, pl, alpha, time_scale);
            noise *= std::exp(jitter(rng));
        }
        std::vector<double> x0 = start.log_params();
        x0.push_back(std::clamp(std::log(noise), kLogParamLower, kLogParamUpper));
        auto result = optimize::minimize_lbfgs(objective, x0, lower, upper, lbfgs);
        if (!std::isfinite(result.value)) continue;
        any_converged = any_converged || result.converged;
        if (!best || result.value < best->value) best = std::move(result);
    }

    if (!best) {
        throw FitError("GP fit failed: no restart produced a finite likelihood", kernel, 0.1 * data_std,
                       -std::numeric_limits<double>::infinity());
    }
    kernel.set_log_params(std::span<const double>(best->x.data(), p));
    const double noise_std = std::exp(best->x[p]);
    if (!any_converged) {
        throw FitError("GP fit did not converge after " + std::to_string(restarts) + " restarts", kernel,
                       noise_std, -best->value);
    }
    return GPModel(kernel, mean, noise_std, std::vector<double>(times.begin(), times.end()),
                   std::vector<double>(values.begin(), values.end()));
}

std::vector<SearchResult> kernel_search(std::span<const double> times, std::span<const double> values,
                                        std::span<const Primitive> candidates, const FitOptions& options,
                                        double complexity_penalty) {
    std::vector<Kernel> structures;
    for (auto p : candidates) structures.push_back(Kernel::primitive(p));
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        for (std::size_t j = i + 1; j < candidates.size(); ++j) {
            structures.push_back(Kernel::sum(Kernel::primitive(candidates[i]), Kernel::primitive(candidates[j])));
            structures.push_back(
                Kernel::product(Kernel::primitive(candidates[i]), Kernel::primitive(candidates[j])));
        }
    }
    std::vector<SearchResult> out;
    out.reserve(structures.size());
    for (auto& s : structures) {
        SearchResult r;
        try {
            const GPModel m = gp_fit(times, values, s, options);
            r.kernel = m.kernel();
            r.log_marginal_likelihood = m.log_marginal_likelihood();
            r.noise_std = m.noise_std();
            r.score = r.log_marginal_likelihood - complexity_penalty * static_cast<double>(s.num_params() + 1);
        } catch (const FitError& e) {
            r.kernel = e.best_kernel;
            r.log_marginal_likelihood = e.best_lml;
            r.noise_std = e.best_noise_std;
            r.score = -std::numeric_limits<double>::infinity();
            r.failed = true;
            r.reason = e.what();
        } catch (const Error& e) {
            r.kernel = s;
            r.log_marginal_likelihood = -std::numeric_limits<double>::infinity();
            r.score = r.log_marginal_likelihood;
            r.failed = true;
            r.reason = e.what();
        }
        out.push_back(std::move(r));
    }
    std::stable_sort(out.begin(), out.end(), [](const SearchResult& a, const SearchResult& b) {
        if (a.failed != b.failed) return !a.failed;
        if (a.score != b.score) return a.score > b.score;
        return a.log_marginal_likelihood > b.log_marginal_likelihood;
    });
    return out;
}

// --- gap-filling and forecasting --------------------------------------------

GapfillOutcome gp_gapfill(const ObservationSeries& obs, const TimeGrid& grid, const GapfillOptions& options) {
    if (options.mode == GapfillMode::Forecast && !options.cutoff) {
        throw Error(ErrorCode::Config, "forecast-mode gap-filling needs a cutoff date");
    }
    std::vector<double> times, values;
    for (const auto& s : obs.samples()) {
        if (s.quality != Quality::Good) continue;
        if (options.mode == GapfillMode::Forecast && s.date > *options.cutoff) continue;
        times.push_back(static_cast<double>((s.date - grid.start()).count()) / TimeGrid::kStepDays);
        values.push_back(s.value);
    }
    GapfillOutcome out;
    if (times.size() < kMinTrainingPoints) {
        out.reason = "INSUFFICIENT_HISTORY: " + std::to_string(times.size()) + " good observations";
        return out;
    }
    std::optional<GPModel> model;
    try {
        if (options.fixed) {
            model.emplace(options.fixed->kernel, options.fixed->mean, options.fixed->noise_std, std::move(times),
                          std::move(values));
        } else {
            model.emplace(gp_fit(times, values, options.kernel, options.fit));
        }
    } catch (const Error& e) {
        out.reason = std::string(to_string(e.code())) + ": " + e.what();
        return out;
    }
    std::vector<double> query(grid.length());
    for (std::size_t i = 0; i < query.size(); ++i) query[i] = static_cast<double>(i);
    const auto pred = model->predict(query);
    std::vector<std::optional<double>> filled(grid.length());
    for (std::size_t i = 0; i < filled.size(); ++i) filled[i] = pred[i].mean;
    out.series.emplace(grid, std::move(filled));
    return out;
}

std::vector<GpForecast> gp_forecast_leads(const IndexSeries& series, Date issue_date,
                                          std::span<const std::size_t> leads, const GpForecastOptions& options) {
    if (series.kind() != IndexKind::NdviAnomaly && series.kind() != IndexKind::Vci3m) {
        throw Error(ErrorCode::InvalidInput, std::string("GP forecasting expects NDVI_ANOMALY or VCI3M, got ") +
                                                 to_string(series.kind()));
    }
    std::vector<GpForecast> out(leads.size());
    const auto& s = series.series();
    const auto issue = s.grid().slot_at(issue_date);
    if (!issue) {
        for (auto& f : out) f.reason = "INSUFFICIENT_HISTORY: issue date not on the grid";
        return out;
    }
    const std::size_t first =
        options.history_weeks == 0 || *issue + 1 <= options.history_weeks ? 0 : *issue + 1 - options.history_weeks;
    std::vector<double> times, values;
    for (std::size_t i = first; i <= *issue; ++i) {
        if (s[i]) {
            times.push_back(static_cast<double>(i));
            values.push_back(*s[i]);
        }
    }
    if (times.size() < std::max(options.min_history, kMinTrainingPoints)) {
        for (auto& f : out) {
            f.reason = "INSUFFICIENT_HISTORY: " + std::to_string(times.size()) + " present values";
        }
        return out;
    }
    try {
        const GPModel model = gp_fit(times, values, Kernel::primitive(Primitive::Rbf), options.fit);
        std::vector<double> query;
        for (auto lead : leads) query.push_back(static_cast<double>(*issue + lead));
        const auto pred = model.predict(query);
        for (std::size_t k = 0; k < leads.size(); ++k) out[k].value = pred[k];
    } catch (const Error& e) {
        for (auto& f : out) f.reason = std::string(to_string(e.code())) + ": " + e.what();
    }
    return out;
}

GpForecast gp_forecast(const IndexSeries& series, Date issue_date, std::size_t lead_weeks,
                       const GpForecastOptions& options) {
    const std::size_t leads[] = {lead_weeks};
    return gp_forecast_leads(series, issue_date, leads, options).front();
}

// --- model text format ------------------------------------------------------

void write_model(std::ostream& out, const GPModel& model) {
    out << "kernel=" << model.kernel().structure() << '\n';
    out << "mean=" << format_double(model.mean()) << '\n';
    out << "noise_std=" << format_double(model.noise_std()) << '\n';
    out << "time_origin=" << format_double(model.time_origin()) << '\n';
    out << "log_marginal_likelihood=" << format_double(model.log_marginal_likelihood()) << '\n';
    const auto names = model.kernel().param_names();
    const auto params = model.kernel().log_params();
    for (std::size_t i = 0; i < names.size(); ++i) {
        out << "param." << names[i] << '=' << format_double(std::exp(params[i])) << '\n';
    }
}

StoredModel read_model(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": expected key=value");
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) throw Error(ErrorCode::Parse, "model file missing key '" + key + "'");
        return it->second;
    };
    StoredModel m;
    m.kernel = Kernel::parse(get("kernel"));
    m.mean = parse_double(get("mean"));
    m.noise_std = parse_double(get("noise_std"));
    m.time_origin = kv.contains("time_origin") ? parse_double(kv["time_origin"]) : 0.0;
    m.log_marginal_likelihood =
        kv.contains("log_marginal_likelihood") ? parse_double(kv["log_marginal_likelihood"]) : 0.0;
    const auto names = m.kernel.param_names();
    std::vector<double> params(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
        params[i] = std::log(parse_double(get("param." + names[i])));
    }
    m.kernel.set_log_params(params);
    return m;
}

}  // namespace vegcast::gp
