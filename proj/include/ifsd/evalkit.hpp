#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ifsd/detail/text.hpp"
#include "ifsd/error.hpp"
#include "ifsd/featurizer.hpp"
#include "ifsd/random.hpp"

namespace ifsd {

inline constexpr std::string_view kModelMagic = "ifsd-logistic v1";

/// Dense row-major design matrix with binary labels.
struct Dataset {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> x;
    std::vector<int> y;

    std::span<const double> row(std::size_t i) const { return {x.data() + i * cols, cols}; }

    static Dataset from_rows(const std::vector<FeatureVector>& rows) {
        Dataset d;
        d.rows = rows.size();
        d.cols = rows.empty() ? 0 : rows.front().values.size();
        d.x.reserve(d.rows * d.cols);
        for (const auto& r : rows) {
            if (r.values.size() != d.cols) throw ShapeError("rows of differing width");
            d.x.insert(d.x.end(), r.values.begin(), r.values.end());
            d.y.push_back(r.label_sd);
        }
        return d;
    }
};

/// L2-regularized logistic regression on standardized features.
struct LinearModel {
    std::vector<double> weights;  // on the standardized scale
    double bias = 0;
    double l2_lambda = 0;
    std::vector<double> mean;
    std::vector<double> std;
    std::vector<std::string> columns;

    double logit(std::span<const double> raw) const {
        if (raw.size() != weights.size()) throw ShapeError("row width does not match model width");
        double s = bias;
        for (std::size_t j = 0; j < raw.size(); ++j) s += weights[j] * (raw[j] - mean[j]) / std[j];
        return s;
    }

    double predict_proba(std::span<const double> raw) const { return 1.0 / (1.0 + std::exp(-logit(raw))); }

    std::vector<double> predict_proba(const Dataset& d) const {
        std::vector<double> p(d.rows);
        for (std::size_t i = 0; i < d.rows; ++i) p[i] = predict_proba(d.row(i));
        return p;
    }
};

struct TrainOptions {
    double l2_lambda = 0.1;
    std::size_t max_iter = 500;
    double tol = 1e-9;
    std::uint64_t seed = 0;
};

/// Column means and population standard deviations; constant columns get
/// std 1 so they standardize to zero.
inline void fit_standardization(const Dataset& d, std::vector<double>& mean, std::vector<double>& sd) {
    mean.assign(d.cols, 0.0);
    sd.assign(d.cols, 0.0);
    for (std::size_t i = 0; i < d.rows; ++i)
        for (std::size_t j = 0; j < d.cols; ++j) mean[j] += d.x[i * d.cols + j];
    for (auto& m : mean) m /= static_cast<double>(std::max<std::size_t>(d.rows, 1));
    for (std::size_t i = 0; i < d.rows; ++i)
        for (std::size_t j = 0; j < d.cols; ++j) {
            const double c = d.x[i * d.cols + j] - mean[j];
            sd[j] += c * c;
        }
    for (auto& s : sd) {
        s = std::sqrt(s / static_cast<double>(std::max<std::size_t>(d.rows, 1)));
        if (!(s > 0) || !std::isfinite(s)) s = 1.0;
    }
}

inline Dataset standardized(const Dataset& d, const std::vector<double>& mean, const std::vector<double>& sd) {
    Dataset z = d;
    for (std::size_t i = 0; i < d.rows; ++i)
        for (std::size_t j = 0; j < d.cols; ++j) z.x[i * d.cols + j] = (d.x[i * d.cols + j] - mean[j]) / sd[j];
    return z;
}

namespace detail {

/// log(1 + e^s) without overflow.
inline double softplus(double s) { return s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

inline double sigmoid(double s) {
    if (s >= 0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

inline double linear(const Dataset& z, std::size_t i, std::span<const double> params) {
    const auto r = z.row(i);
    double s = params[z.cols];
    for (std::size_t j = 0; j < z.cols; ++j) s += params[j] * r[j];
    return s;
}

}  // namespace detail

/// Mean negative log-likelihood plus (lambda / 2) * |w|^2. `params` holds the
/// weights followed by the bias; the bias is not penalized.
inline double logistic_objective(const Dataset& z, std::span<const double> params, double lambda) {
    double loss = 0;
    for (std::size_t i = 0; i < z.rows; ++i) {
        const double s = detail::linear(z, i, params);
        loss += detail::softplus(s) - (z.y[i] ? s : 0.0);
    }
    loss /= static_cast<double>(z.rows);
    double reg = 0;
    for (std::size_t j = 0; j < z.cols; ++j) reg += params[j] * params[j];
    return loss + 0.5 * lambda * reg;
}

inline std::vector<double> logistic_gradient(const Dataset& z, std::span<const double> params, double lambda) {
    std::vector<double> g(z.cols + 1, 0.0);
    for (std::size_t i = 0; i < z.rows; ++i) {
        const double r = detail::sigmoid(detail::linear(z, i, params)) - z.y[i];
        const auto row = z.row(i);
        for (std::size_t j = 0; j < z.cols; ++j) g[j] += r * row[j];
        g[z.cols] += r;
    }
    const double inv = 1.0 / static_cast<double>(z.rows);
    for (auto& v : g) v *= inv;
    for (std::size_t j = 0; j < z.cols; ++j) g[j] += lambda * params[j];
    return g;
}

/// Gradient descent with Armijo backtracking. Stops when the objective moves
/// by less than `tol` or after `max_iter` steps.
inline LinearModel train_logistic(const Dataset& data, const TrainOptions& opt = {},
                                  const std::vector<std::string>& columns = {}) {
    if (data.rows == 0) throw DegenerateLabels("no training rows");
    const auto positives = std::count(data.y.begin(), data.y.end(), 1);
    if (positives == 0 || positives == static_cast<std::ptrdiff_t>(data.rows))
        throw DegenerateLabels("training labels contain a single class");
    if (opt.l2_lambda < 0) throw ConfigError("l2_lambda must be >= 0");

    LinearModel model;
    model.l2_lambda = opt.l2_lambda;
    model.columns = columns;
    fit_standardization(data, model.mean, model.std);
    const Dataset z = standardized(data, model.mean, model.std);

    Rng rng(opt.seed);
    std::vector<double> params(z.cols + 1, 0.0);
    for (std::size_t j = 0; j < z.cols; ++j) params[j] = 1e-3 * rng.normal();

    double f = logistic_objective(z, params, opt.l2_lambda);
    double step = 1.0;
    std::vector<double> trial(params.size());
    for (std::size_t it = 0; it < opt.max_iter; ++it) {
        const auto g = logistic_gradient(z, params, opt.l2_lambda);
        double gnorm2 = 0;
        for (double v : g) gnorm2 += v * v;
        if (gnorm2 == 0) break;
        step = std::min(step * 2.0, 1e3);
        double f_new = f;
        while (true) {
            for (std::size_t j = 0; j < params.size(); ++j) trial[j] = params[j] - step * g[j];
            f_new = logistic_objective(z, trial, opt.l2_lambda);
            if (f_new <= f - 1e-4 * step * gnorm2 || step < 1e-12) break;
            step *= 0.5;
        }
        params.swap(trial);
        const double change = f - f_new;
        f = f_new;
        if (std::fabs(change) < opt.tol) break;
    }
    model.weights.assign(params.begin(), params.end() - 1);
    model.bias = params.back();
    return model;
}

// ---------------------------------------------------------------------------
// Metrics

namespace detail {

inline void require_both_classes(std::span<const int> labels) {
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size()))
        throw DegenerateLabels("metric needs both classes in the labels");
}

}  // namespace detail

/// Rank-based (Mann-Whitney) area under the ROC curve; tied scores count 1/2.
inline double auroc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
    detail::require_both_classes(labels);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0;
    double pos = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]]) {
                rank_sum += avg_rank;
                pos += 1;
            }
        i = j + 1;
    }
    const double neg = static_cast<double>(scores.size()) - pos;
    return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

inline Confusion confusion(std::span<const int> pred, std::span<const int> labels) {
    if (pred.size() != labels.size()) throw ShapeError("predictions and labels differ in length");
    Confusion c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (labels[i]) (pred[i] ? c.tp : c.fn)++;
        else (pred[i] ? c.fp : c.tn)++;
    }
    return c;
}

/// Mean of the per-class recalls.
inline double balanced_accuracy(std::span<const int> pred, std::span<const int> labels) {
    detail::require_both_classes(labels);
    const auto c = confusion(pred, labels);
    const double tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    const double tnr = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    return (tpr + tnr) / 2.0;
}

struct ClassMetrics {
    double auroc = 0;
    double balanced_accuracy = 0;
    Confusion confusion;
    double threshold = 0.5;
};

inline ClassMetrics classification_metrics(std::span<const double> scores, std::span<const int> labels,
                                           double threshold = 0.5) {
    ClassMetrics m;
    m.threshold = threshold;
    m.auroc = auroc(scores, labels);
    std::vector<int> pred(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] >= threshold ? 1 : 0;
    m.balanced_accuracy = balanced_accuracy(pred, labels);
    m.confusion = confusion(pred, labels);
    return m;
}

struct RegMetrics {
    double mae = 0;
    double rmse = 0;
    double mape = 0;  // NaN when every truth value is zero
    std::size_t mape_excluded = 0;
};

/// MAE, RMSE and MAPE; rows with zero truth are left out of MAPE.
inline RegMetrics regression_metrics(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size()) throw ShapeError("prediction and truth lengths differ");
    if (pred.empty()) throw ShapeError("regression metrics need at least one row");
    RegMetrics m;
    double abs_sum = 0, sq_sum = 0, pct_sum = 0;
    std::size_t pct_n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - truth[i];
        abs_sum += std::fabs(e);
        sq_sum += e * e;
        if (truth[i] == 0) {
            ++m.mape_excluded;
        } else {
            pct_sum += std::fabs(e / truth[i]);
            ++pct_n;
        }
    }
    const auto n = static_cast<double>(pred.size());
    m.mae = abs_sum / n;
    m.rmse = std::sqrt(sq_sum / n);
    m.mape = pct_n ? pct_sum / static_cast<double>(pct_n) : std::numeric_limits<double>::quiet_NaN();
    return m;
}

struct GroupImportance {
    ColumnGroup group;
    double mean_abs_weight = 0;
    std::size_t columns = 0;
};

/// Mean |standardized weight| per column group, largest first.
inline std::vector<GroupImportance> feature_group_importance(const LinearModel& model,
                                                             const std::vector<std::string>& columns) {
    if (columns.size() != model.weights.size()) throw ShapeError("column list does not match model width");
    std::vector<GroupImportance> groups{
        {ColumnGroup::intra, 0, 0}, {ColumnGroup::covering, 0, 0}, {ColumnGroup::app_count, 0, 0}};
    for (std::size_t j = 0; j < columns.size(); ++j) {
        auto& g = groups[static_cast<std::size_t>(column_group(columns[j]))];
        g.mean_abs_weight += std::fabs(model.weights[j]);
        ++g.columns;
    }
    std::erase_if(groups, [](const GroupImportance& g) { return g.columns == 0; });
    for (auto& g : groups) g.mean_abs_weight /= static_cast<double>(g.columns);
    std::stable_sort(groups.begin(), groups.end(), [](const GroupImportance& a, const GroupImportance& b) {
        return a.mean_abs_weight > b.mean_abs_weight;
    });
    return groups;
}

// ---------------------------------------------------------------------------
// Model and metrics files

inline void write_model(const LinearModel& model, std::ostream& out) {
    using detail::format_double;
    out << kModelMagic << '\n';
    out << "columns " << model.weights.size() << '\n';
    out << "bias " << format_double(model.bias) << '\n';
    out << "l2_lambda " << format_double(model.l2_lambda) << '\n';
    for (std::size_t j = 0; j < model.weights.size(); ++j) {
        const std::string name = j < model.columns.size() ? model.columns[j] : "x" + std::to_string(j);
        out << name << ',' << format_double(model.weights[j]) << ',' << format_double(model.mean[j]) << ','
            << format_double(model.std[j]) << '\n';
    }
    if (!out) throw IoError("failed writing model");
}

inline LinearModel read_model(std::istream& in) {
    LinearModel model;
    std::string line;
    std::size_t lineno = 0;
    auto next = [&]() -> std::string_view {
        if (!std::getline(in, line)) throw ParseError(lineno + 1, "unexpected end of model file");
        ++lineno;
        return detail::trim_cr(line);
    };
    if (next() != kModelMagic) throw ParseError(1, "not an ifsd logistic model (expected '" + std::string(kModelMagic) + "')");
    auto keyed = [&](std::string_view key) {
        auto l = next();
        if (!l.starts_with(key) || l.size() <= key.size() + 1) throw ParseError(lineno, "expected '" + std::string(key) + "'");
        return std::string(l.substr(key.size() + 1));
    };
    const auto width = detail::parse_int(keyed("columns"));
    const auto bias = detail::parse_double(keyed("bias"));
    const auto lambda = detail::parse_double(keyed("l2_lambda"));
    if (!width || *width < 0 || !bias || !lambda) throw ParseError(lineno, "bad model header");
    model.bias = *bias;
    model.l2_lambda = *lambda;
    for (std::int64_t j = 0; j < *width; ++j) {
        auto f = detail::split(next(), ',');
        if (f.size() != 4) throw ParseError(lineno, "expected name,weight,mean,std");
        auto w = detail::parse_double(f[1]), mu = detail::parse_double(f[2]), sd = detail::parse_double(f[3]);
        if (!w || !mu || !sd) throw ParseError(lineno, "bad number");
        model.columns.emplace_back(f[0]);
        model.weights.push_back(*w);
        model.mean.push_back(*mu);
        model.std.push_back(*sd);
    }
    return model;
}

}  // namespace ifsd
