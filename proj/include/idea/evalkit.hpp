#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace idea::evalkit {

/// One evaluation unit: observed history, held-out horizon, and the
/// seasonal convention used by MASE and naive2.
struct EvalSeries {
    std::vector<double> train;
    std::vector<double> test;
    std::size_t period = 1;  // s
    std::string frequency = "Yearly";
};

/// sMAPE with the 200/H factor. A term with |y| + |yhat| == 0 contributes
/// zero by convention.
double smape(std::span<const double> yhat, std::span<const double> y);

/// MAPE with the 100/H factor. A zero target is an error naming the index.
double mape(std::span<const double> yhat, std::span<const double> y);

/// Which span the seasonal-naive denominator runs over. Paper: the full
/// train+test concatenation (sum to T+H, as printed); Insample: training
/// region only (the M4 convention).
enum class MaseDenominator { Paper, Insample };

MaseDenominator mase_denominator_from_name(const std::string& name);
const char* mase_denominator_name(MaseDenominator d);

double mase(std::span<const double> yhat, const EvalSeries& series,
            MaseDenominator denom = MaseDenominator::Paper);

/// 90% autocorrelation seasonality test backing naive2:
/// |r_s| > 1.645 * sqrt((1 + 2 * sum_{i<s} r_i^2) / T).
bool seasonality_test(std::span<const double> train, std::size_t period);

/// The M4 reference forecaster: repeat the last value, on multiplicatively
/// deseasonalized data when the seasonality test fires (classical
/// centered-moving-average decomposition, indices normalized to mean one).
/// Series too short for the decomposition fall back to the plain naive.
std::vector<double> naive2_forecast(std::span<const double> train, std::size_t period,
                                    std::size_t horizon);
std::vector<double> naive2_forecast(const EvalSeries& series);

/// Repeats the last observed seasonal cycle.
std::vector<double> seasonal_naive_forecast(std::span<const double> train, std::size_t period,
                                            std::size_t horizon);

/// Per-series OWA against naive2 computed on the same series.
double owa(std::span<const double> yhat, const EvalSeries& series,
           MaseDenominator denom = MaseDenominator::Paper);

/// Competition convention: average sMAPE and MASE per method over the
/// dataset first, then form OWA from the aggregate ratios.
double owa_aggregate(std::span<const double> smape_method, std::span<const double> mase_method,
                     std::span<const double> smape_naive2, std::span<const double> mase_naive2);

/// Weighted average with caller-supplied weights (paper table weights or
/// dataset-derived counts): sum(w_f * v_f) / sum(w_f).
double weighted_average(std::span<const double> values, std::span<const double> weights);

/// method,frequency,metric,value rows, serialized as CSV.
struct ScoreRow {
    std::string method;
    std::string frequency;
    std::string metric;
    double value = 0.0;
};

struct ScoreTable {
    std::vector<ScoreRow> rows;
    std::string to_csv() const;
};

}  // namespace idea::evalkit
