#include "idea/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace idea::evalkit {

namespace {

void check_lengths(const char* name, std::size_t a, std::size_t b) {
    if (a != b) {
        throw std::invalid_argument(std::string(name) + ": forecast length " + std::to_string(a) +
                                    " does not match target length " + std::to_string(b));
    }
}

}  // namespace

double smape(std::span<const double> yhat, std::span<const double> y) {
    check_lengths("smape", yhat.size(), y.size());
    if (y.empty()) throw std::invalid_argument("smape: empty horizon");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double denom = std::fabs(y[i]) + std::fabs(yhat[i]);
        if (denom > 0.0) acc += std::fabs(y[i] - yhat[i]) / denom;
    }
    return 200.0 * acc / static_cast<double>(y.size());
}

double mape(std::span<const double> yhat, std::span<const double> y) {
    check_lengths("mape", yhat.size(), y.size());
    if (y.empty()) throw std::invalid_argument("mape: empty horizon");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] == 0.0) {
            throw std::invalid_argument("mape: zero target at index " + std::to_string(i));
        }
        acc += std::fabs(y[i] - yhat[i]) / std::fabs(y[i]);
    }
    return 100.0 * acc / static_cast<double>(y.size());
}

MaseDenominator mase_denominator_from_name(const std::string& name) {
    if (name == "paper") return MaseDenominator::Paper;
    if (name == "insample") return MaseDenominator::Insample;
    throw std::invalid_argument("unknown mase denominator '" + name +
                                "', expected paper|insample");
}

const char* mase_denominator_name(MaseDenominator d) {
    return d == MaseDenominator::Paper ? "paper" : "insample";
}

double mase(std::span<const double> yhat, const EvalSeries& series, MaseDenominator denom) {
    std::size_t T = series.train.size(), H = series.test.size(), s = series.period;
    check_lengths("mase", yhat.size(), H);
    if (H == 0) throw std::invalid_argument("mase: empty horizon");
    if (s < 1) throw std::invalid_argument("mase: seasonal period must be >= 1");
    std::size_t span_end = denom == MaseDenominator::Paper ? T + H : T;
    if (span_end <= s) {
        throw std::invalid_argument("mase: series length " + std::to_string(span_end) +
                                    " leaves no lag-" + std::to_string(s) + " differences");
    }

    std::vector<double> full(series.train.begin(), series.train.end());
    full.insert(full.end(), series.test.begin(), series.test.end());

    double d = 0.0;
    for (std::size_t j = s; j < span_end; ++j) d += std::fabs(full[j] - full[j - s]);
    d /= static_cast<double>(span_end - s);
    if (d == 0.0) {
        throw std::invalid_argument("mase: degenerate series, seasonal-naive denominator is zero");
    }

    double num = 0.0;
    for (std::size_t i = 0; i < H; ++i) num += std::fabs(series.test[i] - yhat[i]);
    num /= static_cast<double>(H);
    return num / d;
}

namespace {

/// Autocorrelation at a given lag, mean-centered with the full-series
/// variance in the denominator.
double autocorrelation(std::span<const double> y, std::size_t lag) {
    std::size_t n = y.size();
    double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    if (var <= 0.0) return 0.0;
    double acc = 0.0;
    for (std::size_t t = lag; t < n; ++t) acc += (y[t] - mean) * (y[t - lag] - mean);
    return acc / var;
}

}  // namespace

bool seasonality_test(std::span<const double> train, std::size_t period) {
    if (period <= 1) return false;
    std::size_t T = train.size();
    if (T <= period + 2) return false;
    double sum_r2 = 0.0;
    for (std::size_t i = 1; i < period; ++i) {
        double r = autocorrelation(train, i);
        sum_r2 += r * r;
    }
    double crit = 1.645 * std::sqrt((1.0 + 2.0 * sum_r2) / static_cast<double>(T));
    return std::fabs(autocorrelation(train, period)) > crit;
}

namespace {

/// Multiplicative seasonal indices from a centered moving average, one per
/// phase, normalized to mean 1. Assumes T >= 3 * period.
std::vector<double> seasonal_indices(std::span<const double> y, std::size_t s) {
    std::size_t T = y.size();
    std::vector<double> cma(T, std::numeric_limits<double>::quiet_NaN());
    std::size_t half = s / 2;
    if (s % 2 == 0) {
        for (std::size_t t = half; t + half < T; ++t) {
            double acc = 0.5 * y[t - half] + 0.5 * y[t + half];
            for (std::size_t j = t - half + 1; j < t + half; ++j) acc += y[j];
            cma[t] = acc / static_cast<double>(s);
        }
    } else {
        for (std::size_t t = half; t + half < T; ++t) {
            double acc = 0.0;
            for (std::size_t j = t - half; j <= t + half; ++j) acc += y[j];
            cma[t] = acc / static_cast<double>(s);
        }
    }

    std::vector<double> idx(s, 0.0);
    std::vector<std::size_t> counts(s, 0);
    for (std::size_t t = 0; t < T; ++t) {
        if (!std::isnan(cma[t]) && cma[t] != 0.0) {
            idx[t % s] += y[t] / cma[t];
            counts[t % s] += 1;
        }
    }
    for (std::size_t p = 0; p < s; ++p) idx[p] = counts[p] > 0 ? idx[p] / counts[p] : 1.0;
    double mean = std::accumulate(idx.begin(), idx.end(), 0.0) / static_cast<double>(s);
    if (mean != 0.0) {
        for (double& v : idx) v /= mean;
    }
    return idx;
}

}  // namespace

std::vector<double> naive2_forecast(std::span<const double> train, std::size_t period,
                                    std::size_t horizon) {
    if (train.empty()) throw std::invalid_argument("naive2: empty training series");
    if (horizon < 1) throw std::invalid_argument("naive2: horizon must be positive");
    std::size_t T = train.size();

    bool seasonal = period > 1 && T >= 3 * period && seasonality_test(train, period);
    if (!seasonal) return std::vector<double>(horizon, train.back());

    std::vector<double> idx = seasonal_indices(train, period);
    double last_idx = idx[(T - 1) % period] != 0.0 ? idx[(T - 1) % period] : 1.0;
    double last_deseasonalized = train[T - 1] / last_idx;
    std::vector<double> out(horizon);
    for (std::size_t i = 0; i < horizon; ++i)
        out[i] = last_deseasonalized * idx[(T + i) % period];
    return out;
}

std::vector<double> naive2_forecast(const EvalSeries& series) {
    return naive2_forecast(series.train, series.period, series.test.size());
}

std::vector<double> seasonal_naive_forecast(std::span<const double> train, std::size_t period,
                                            std::size_t horizon) {
    if (train.size() < period) {
        throw std::invalid_argument("seasonal naive: series shorter than period");
    }
    std::vector<double> out(horizon);
    for (std::size_t i = 0; i < horizon; ++i)
        out[i] = train[train.size() - period + (i % period)];
    return out;
}

double owa(std::span<const double> yhat, const EvalSeries& series, MaseDenominator denom) {
    std::vector<double> ref = naive2_forecast(series);
    double smape_ref = smape(ref, series.test);
    double mase_ref = mase(ref, series, denom);
    if (smape_ref == 0.0 || mase_ref == 0.0) {
        throw std::invalid_argument("owa: naive2 is exact on this series, ratio degenerate");
    }
    return 0.5 * (smape(yhat, series.test) / smape_ref + mase(yhat, series, denom) / mase_ref);
}

namespace {

double mean_of(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("owa_aggregate: empty metric list");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double owa_aggregate(std::span<const double> smape_method, std::span<const double> mase_method,
                     std::span<const double> smape_naive2, std::span<const double> mase_naive2) {
    double sm_ref = mean_of(smape_naive2);
    double ms_ref = mean_of(mase_naive2);
    if (sm_ref == 0.0 || ms_ref == 0.0) {
        throw std::invalid_argument("owa_aggregate: naive2 aggregate metric is zero");
    }
    return 0.5 * (mean_of(smape_method) / sm_ref + mean_of(mase_method) / ms_ref);
}

double weighted_average(std::span<const double> values, std::span<const double> weights) {
    if (values.size() != weights.size()) {
        throw std::invalid_argument("weighted_average: " + std::to_string(values.size()) +
                                    " values vs " + std::to_string(weights.size()) + " weights");
    }
    double wsum = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (weights[i] <= 0.0) {
            throw std::invalid_argument("weighted_average: non-positive weight at index " +
                                        std::to_string(i));
        }
        acc += weights[i] * values[i];
        wsum += weights[i];
    }
    return acc / wsum;
}

std::string ScoreTable::to_csv() const {
    std::string out = "method,frequency,metric,value\n";
    char buf[48];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.10g", r.value);
        out += r.method + "," + r.frequency + "," + r.metric + "," + buf + "\n";
    }
    return out;
}

}  // namespace idea::evalkit
