#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "idea/adam.hpp"
#include "idea/dataio.hpp"
#include "idea/model.hpp"
#include "idea/tape.hpp"

namespace idea::train {

enum class LossKind { SMAPE, MAPE, MASE };
enum class LrDecay { None, Cosine, Step };

LossKind loss_from_name(const std::string& name);
const char* loss_name(LossKind k);
LrDecay decay_from_name(const std::string& name);
const char* decay_name(LrDecay d);

struct TrainConfig {
    LossKind loss = LossKind::SMAPE;
    std::size_t batch_size = 32;
    std::size_t steps = 1000;
    double lr = 1e-3;
    LrDecay lr_decay = LrDecay::None;
    double epsilon = 1e-8;               // loss denominator guard
    double validation_fraction = 1.0;    // fraction of series holding out their last H
    std::size_t validation_interval = 50;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Differentiable sMAPE: (200/H) * sum |y - yhat| / (|y| + |yhat| + eps).
diff::Value smape_loss(diff::Value yhat, std::span<const double> y, double epsilon,
                       diff::Tape& tape);
diff::Value mape_loss(diff::Value yhat, std::span<const double> y, double epsilon,
                      diff::Tape& tape);
/// MASE against the lookback's seasonal-naive mean absolute difference
/// (falls back to lag 1 if the window is shorter than the period).
diff::Value mase_loss(diff::Value yhat, std::span<const double> y,
                      std::span<const double> lookback, std::size_t period, double epsilon,
                      diff::Tape& tape);

diff::Value window_loss(diff::Value yhat, const dataio::SeriesWindow& window, LossKind kind,
                        double epsilon, diff::Tape& tape);

/// Draws (series, anchor) training windows: uniform over eligible series,
/// then over eligible anchors, with probability 0.5 concentrated on the
/// last H anchors. Series whose train region cannot host one window are
/// dropped (counted).
class WindowSampler {
public:
    /// `reserved_tail` observations at the end of each series are kept out
    /// of the sampled region (the validation holdout). A non-null
    /// `reserve_mask` restricts the holdout to the flagged series.
    WindowSampler(std::span<const dataio::SeriesRecord> series, std::size_t lookback,
                  std::size_t horizon, std::size_t reserved_tail = 0,
                  const std::vector<std::uint8_t>* reserve_mask = nullptr);

    bool empty() const { return eligible_.empty(); }
    std::size_t eligible_count() const { return eligible_.size(); }
    std::size_t dropped_count() const { return dropped_; }

    dataio::SeriesWindow sample(diff::Rng& rng) const;

private:
    struct Entry {
        std::size_t series_index;
        std::size_t anchor_lo;  // first eligible y-start
        std::size_t anchor_hi;  // last eligible y-start
    };
    std::span<const dataio::SeriesRecord> series_;
    std::vector<Entry> eligible_;
    std::size_t lookback_, horizon_;
    std::size_t dropped_ = 0;
};

/// One optimizer step on a batch: mean loss over the (normalized) windows,
/// backward, Adam. Throws on NaN loss naming the offending sample.
double train_step(model::Model& model, std::span<const dataio::SeriesWindow> batch,
                  const TrainConfig& config, diff::AdamState& opt, diff::Rng& step_rng);

struct LogEntry {
    std::size_t step = 0;
    double train_loss = 0.0;
    double val_smape = 0.0;
};

struct TrainLog {
    std::vector<LogEntry> entries;
    std::string to_csv() const;
};

/// Step loop with periodic validation sMAPE on each series' held-out last
/// horizon. Returns the log; the model is trained in place.
TrainLog fit(model::Model& model, std::span<const dataio::SeriesRecord> train_series,
             const TrainConfig& config);

struct LookbackSlot {
    std::size_t lookback = 0;
    model::Model model;
    TrainLog log;
    std::size_t used_series = 0;
    std::size_t dropped_series = 0;
};

/// The six-model protocol: lookbacks m*H for m in `multipliers`
/// (default 2..7), each trained independently. Series shorter than t + H
/// drop out of that slot's pool.
std::vector<LookbackSlot> build_lookback_ensemble(
    std::span<const dataio::SeriesRecord> train_series, std::size_t horizon,
    const model::ModelConfig& base_config, const TrainConfig& train_config,
    std::span<const std::size_t> multipliers = {});

/// Median across slot forecasts; lookbacks too long for the series fall
/// back to front-padding with the first observation.
std::vector<double> ensemble_forecast(std::vector<LookbackSlot>& slots,
                                      std::span<const double> history, std::size_t horizon);

/// Forecast with front-padding when the history is shorter than the
/// model's lookback. `padded` is incremented when padding was needed.
std::vector<double> forecast_with_padding(model::Model& model, std::span<const double> history,
                                          std::size_t* padded = nullptr);

std::vector<double> median_fuse(const std::vector<std::vector<double>>& forecasts);

}  // namespace idea::train
