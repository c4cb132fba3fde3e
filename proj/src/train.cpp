#include "idea/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "idea/evalkit.hpp"

namespace idea::train {

LossKind loss_from_name(const std::string& name) {
    if (name == "smape") return LossKind::SMAPE;
    if (name == "mape") return LossKind::MAPE;
    if (name == "mase") return LossKind::MASE;
    throw std::invalid_argument("unknown loss '" + name + "', expected smape|mape|mase");
}

const char* loss_name(LossKind k) {
    switch (k) {
        case LossKind::SMAPE: return "smape";
        case LossKind::MAPE: return "mape";
        case LossKind::MASE: return "mase";
    }
    return "?";
}

LrDecay decay_from_name(const std::string& name) {
    if (name == "none") return LrDecay::None;
    if (name == "cosine") return LrDecay::Cosine;
    if (name == "step") return LrDecay::Step;
    throw std::invalid_argument("unknown lr decay '" + name + "', expected none|cosine|step");
}

const char* decay_name(LrDecay d) {
    switch (d) {
        case LrDecay::None: return "none";
        case LrDecay::Cosine: return "cosine";
        case LrDecay::Step: return "step";
    }
    return "?";
}

void TrainConfig::validate() const {
    if (epsilon <= 0.0) throw std::invalid_argument("train config: epsilon must be > 0");
    if (batch_size < 1) throw std::invalid_argument("train config: batch size must be >= 1");
    if (validation_fraction < 0.0 || validation_fraction > 1.0) {
        throw std::invalid_argument("train config: validation fraction must be in [0, 1]");
    }
    if (validation_interval < 1) {
        throw std::invalid_argument("train config: validation interval must be >= 1");
    }
    if (lr <= 0.0) throw std::invalid_argument("train config: learning rate must be > 0");
}

diff::Value smape_loss(diff::Value yhat, std::span<const double> y, double epsilon,
                       diff::Tape& tape) {
    if (yhat.rows() != 1 || yhat.cols() != y.size()) {
        throw std::invalid_argument("smape_loss: forecast " + diff::shape_str(yhat.shape()) +
                                    " vs target length " + std::to_string(y.size()));
    }
    if (epsilon <= 0.0) throw std::invalid_argument("smape_loss: epsilon must be > 0");
    diff::Value yc = tape.constant_row(y);
    diff::Value err = diff::abs(diff::sub(yc, yhat));
    diff::Value denom = diff::add_scalar(diff::add(diff::abs(yc), diff::abs(yhat)), epsilon);
    return diff::scale(diff::mean_axis(diff::div(err, denom), 1), 200.0);
}

diff::Value mape_loss(diff::Value yhat, std::span<const double> y, double epsilon,
                      diff::Tape& tape) {
    if (yhat.rows() != 1 || yhat.cols() != y.size()) {
        throw std::invalid_argument("mape_loss: forecast " + diff::shape_str(yhat.shape()) +
                                    " vs target length " + std::to_string(y.size()));
    }
    diff::Value yc = tape.constant_row(y);
    diff::Value err = diff::abs(diff::sub(yc, yhat));
    diff::Value denom = diff::add_scalar(diff::abs(yc), epsilon);
    return diff::scale(diff::mean_axis(diff::div(err, denom), 1), 100.0);
}

diff::Value mase_loss(diff::Value yhat, std::span<const double> y,
                      std::span<const double> lookback, std::size_t period, double epsilon,
                      diff::Tape& tape) {
    if (yhat.rows() != 1 || yhat.cols() != y.size()) {
        throw std::invalid_argument("mase_loss: forecast " + diff::shape_str(yhat.shape()) +
                                    " vs target length " + std::to_string(y.size()));
    }
    std::size_t s = period < lookback.size() ? period : 1;
    double denom = 0.0;
    for (std::size_t j = s; j < lookback.size(); ++j)
        denom += std::fabs(lookback[j] - lookback[j - s]);
    denom /= static_cast<double>(lookback.size() - s);
    denom = std::max(denom, epsilon);
    diff::Value yc = tape.constant_row(y);
    diff::Value err = diff::abs(diff::sub(yc, yhat));
    return diff::scale(diff::mean_axis(err, 1), 1.0 / denom);
}

diff::Value window_loss(diff::Value yhat, const dataio::SeriesWindow& window, LossKind kind,
                        double epsilon, diff::Tape& tape) {
    switch (kind) {
        case LossKind::SMAPE: return smape_loss(yhat, window.target, epsilon, tape);
        case LossKind::MAPE: return mape_loss(yhat, window.target, epsilon, tape);
        case LossKind::MASE:
            return mase_loss(yhat, window.target, window.lookback, window.period, epsilon, tape);
    }
    throw std::invalid_argument("window_loss: bad loss kind");
}

WindowSampler::WindowSampler(std::span<const dataio::SeriesRecord> series, std::size_t lookback,
                             std::size_t horizon, std::size_t reserved_tail,
                             const std::vector<std::uint8_t>* reserve_mask)
    : series_(series), lookback_(lookback), horizon_(horizon) {
    if (lookback < 1 || horizon < 1) {
        throw std::invalid_argument("window sampler: lookback and horizon must be positive");
    }
    for (std::size_t i = 0; i < series.size(); ++i) {
        std::size_t tail =
            (reserve_mask == nullptr || (*reserve_mask)[i] != 0) ? reserved_tail : 0;
        std::size_t len = series[i].values.size();
        if (len < tail + lookback + horizon) {
            ++dropped_;
            continue;
        }
        Entry e;
        e.series_index = i;
        e.anchor_lo = lookback;
        e.anchor_hi = len - tail - horizon;
        eligible_.push_back(e);
    }
}

dataio::SeriesWindow WindowSampler::sample(diff::Rng& rng) const {
    if (eligible_.empty()) throw std::runtime_error("window sampler: no eligible series");
    const Entry& e = eligible_[rng.uniform_index(eligible_.size())];
    std::size_t range = e.anchor_hi - e.anchor_lo + 1;
    std::size_t anchor;
    if (rng.bernoulli(0.5)) {  // recency bias: half the mass on the last H anchors
        std::size_t recent = std::min(horizon_, range);
        anchor = e.anchor_hi - rng.uniform_index(recent);
    } else {
        anchor = e.anchor_lo + rng.uniform_index(range);
    }
    const auto& vals = series_[e.series_index].values;
    dataio::SeriesWindow w;
    w.lookback.assign(vals.begin() + static_cast<std::ptrdiff_t>(anchor - lookback_),
                      vals.begin() + static_cast<std::ptrdiff_t>(anchor));
    w.target.assign(vals.begin() + static_cast<std::ptrdiff_t>(anchor),
                    vals.begin() + static_cast<std::ptrdiff_t>(anchor + horizon_));
    w.period = series_[e.series_index].period;
    w.series_index = e.series_index;
    return w;
}

double train_step(model::Model& model, std::span<const dataio::SeriesWindow> batch,
                  const TrainConfig& config, diff::AdamState& opt, diff::Rng& step_rng) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    auto params = model.parameters();
    diff::zero_grads(params);

    diff::Tape tape;
    diff::Value total;
    model::ForwardOptions opts;
    opts.training = true;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& w = batch[i];
        if (w.lookback.size() != model.config.lookback ||
            w.target.size() != model.config.horizon) {
            throw std::invalid_argument("train_step: window " + std::to_string(i) + " is " +
                                        std::to_string(w.lookback.size()) + "+" +
                                        std::to_string(w.target.size()) +
                                        ", model wants " + std::to_string(model.config.lookback) +
                                        "+" + std::to_string(model.config.horizon));
        }
        double sc = dataio::window_scale(w.lookback);
        std::vector<double> xnorm(w.lookback.size());
        for (std::size_t j = 0; j < xnorm.size(); ++j) xnorm[j] = w.lookback[j] / sc;

        diff::Value loss;
        try {
            diff::Rng sample_rng = step_rng.fork(i);
            auto fwd = model::model_forward(model, xnorm, opts, sample_rng, tape);
            diff::Value yhat = diff::scale(fwd.forecast, sc);
            loss = window_loss(yhat, w, config.loss, config.epsilon, tape);
        } catch (const std::exception& e) {
            throw std::runtime_error("train_step: failure at sample index " + std::to_string(i) +
                                     " (series " + std::to_string(w.series_index) +
                                     "): " + e.what());
        }
        if (!std::isfinite(loss.scalar())) {
            throw std::runtime_error("train_step: non-finite loss at sample index " +
                                     std::to_string(i) + " (series " +
                                     std::to_string(w.series_index) + ")");
        }
        total = total.valid() ? diff::add(total, loss) : loss;
    }
    total = diff::scale(total, 1.0 / static_cast<double>(batch.size()));
    tape.backward(total);
    adam_step(params, opt);
    return total.scalar();
}

std::string TrainLog::to_csv() const {
    std::string out = "step,train_loss,val_smape\n";
    char buf[64];
    for (const auto& e : entries) {
        std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g", e.step, e.train_loss, e.val_smape);
        out += buf;
        out += "\n";
    }
    return out;
}

namespace {

double effective_lr(const TrainConfig& cfg, std::size_t step) {
    double frac = static_cast<double>(step - 1) / static_cast<double>(cfg.steps);
    switch (cfg.lr_decay) {
        case LrDecay::None: return cfg.lr;
        case LrDecay::Cosine:
            return cfg.lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac));
        case LrDecay::Step:
            if (frac >= 0.9) return cfg.lr * 0.01;
            if (frac >= 0.75) return cfg.lr * 0.1;
            return cfg.lr;
    }
    return cfg.lr;
}

struct ValidationSet {
    std::vector<dataio::SeriesWindow> windows;
};

ValidationSet build_validation(std::span<const dataio::SeriesRecord> series,
                               const std::vector<std::uint8_t>& mask, std::size_t lookback,
                               std::size_t horizon) {
    ValidationSet out;
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (mask[i] == 0) continue;
        const auto& vals = series[i].values;
        if (vals.size() < lookback + horizon) continue;
        dataio::SeriesWindow w;
        std::size_t anchor = vals.size() - horizon;
        w.lookback.assign(vals.begin() + static_cast<std::ptrdiff_t>(anchor - lookback),
                          vals.begin() + static_cast<std::ptrdiff_t>(anchor));
        w.target.assign(vals.begin() + static_cast<std::ptrdiff_t>(anchor), vals.end());
        w.period = series[i].period;
        w.series_index = i;
        out.windows.push_back(std::move(w));
    }
    return out;
}

double validation_smape(model::Model& model, const ValidationSet& val) {
    if (val.windows.empty()) return std::numeric_limits<double>::quiet_NaN();
    diff::Rng dummy(0);
    double acc = 0.0;
    for (const auto& w : val.windows) {
        double sc = dataio::window_scale(w.lookback);
        std::vector<double> xnorm(w.lookback.size());
        for (std::size_t j = 0; j < xnorm.size(); ++j) xnorm[j] = w.lookback[j] / sc;
        std::vector<double> yhat = model::forecast_values(model, xnorm, dummy);
        for (double& v : yhat) v *= sc;
        acc += evalkit::smape(yhat, w.target);
    }
    return acc / static_cast<double>(val.windows.size());
}

}  // namespace

TrainLog fit(model::Model& model, std::span<const dataio::SeriesRecord> train_series,
             const TrainConfig& config) {
    config.validate();
    if (train_series.empty()) throw std::invalid_argument("fit: empty dataset");

    std::size_t n = train_series.size();
    std::size_t val_count = static_cast<std::size_t>(
        std::ceil(config.validation_fraction * static_cast<double>(n)));
    std::vector<std::uint8_t> val_mask(n, 0);
    for (std::size_t i = 0; i < val_count; ++i) val_mask[i] = 1;

    WindowSampler sampler(train_series, model.config.lookback, model.config.horizon,
                          model.config.horizon, &val_mask);
    if (sampler.empty()) {
        throw std::invalid_argument("fit: no series long enough for lookback " +
                                    std::to_string(model.config.lookback) + " + horizon " +
                                    std::to_string(model.config.horizon));
    }
    ValidationSet val =
        build_validation(train_series, val_mask, model.config.lookback, model.config.horizon);

    auto params = model.parameters();
    diff::AdamState opt = make_adam(params, config.lr);
    diff::Rng sample_rng = diff::Rng(config.seed).fork(0x5a3c91);
    diff::Rng dropout_root = diff::Rng(config.seed).fork(0xd70b0a);

    TrainLog log;
    for (std::size_t step = 1; step <= config.steps; ++step) {
        opt.lr = effective_lr(config, step);
        std::vector<dataio::SeriesWindow> batch;
        batch.reserve(config.batch_size);
        for (std::size_t b = 0; b < config.batch_size; ++b)
            batch.push_back(sampler.sample(sample_rng));
        diff::Rng step_rng = dropout_root.fork(step);
        double loss = train_step(model, batch, config, opt, step_rng);
        if (step % config.validation_interval == 0 || step == config.steps) {
            log.entries.push_back({step, loss, validation_smape(model, val)});
        }
    }
    return log;
}

std::vector<LookbackSlot> build_lookback_ensemble(
    std::span<const dataio::SeriesRecord> train_series, std::size_t horizon,
    const model::ModelConfig& base_config, const TrainConfig& train_config,
    std::span<const std::size_t> multipliers) {
    static constexpr std::size_t kDefault[] = {2, 3, 4, 5, 6, 7};
    std::span<const std::size_t> ms =
        multipliers.empty() ? std::span<const std::size_t>(kDefault) : multipliers;

    std::vector<LookbackSlot> slots;
    for (std::size_t i = 0; i < ms.size(); ++i) {
        std::size_t t = ms[i] * horizon;
        model::ModelConfig mc = base_config;
        mc.lookback = t;
        mc.horizon = horizon;
        mc.seed = diff::Rng(base_config.seed).fork(100 + ms[i]).seed();
        TrainConfig tc = train_config;
        tc.seed = diff::Rng(train_config.seed).fork(200 + ms[i]).seed();

        LookbackSlot slot;
        slot.lookback = t;
        slot.model = model::init_model(mc);

        WindowSampler probe(train_series, t, horizon);
        slot.used_series = probe.eligible_count();
        slot.dropped_series = probe.dropped_count();
        if (slot.used_series > 0) {
            slot.log = fit(slot.model, train_series, tc);
        }
        slots.push_back(std::move(slot));
    }
    return slots;
}

std::vector<double> forecast_with_padding(model::Model& model, std::span<const double> history,
                                          std::size_t* padded) {
    if (history.empty()) throw std::invalid_argument("forecast: empty history");
    std::size_t t = model.config.lookback;
    std::vector<double> window(t);
    if (history.size() >= t) {
        std::copy(history.end() - static_cast<std::ptrdiff_t>(t), history.end(), window.begin());
    } else {
        std::size_t pad = t - history.size();
        std::fill(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(pad),
                  history.front());
        std::copy(history.begin(), history.end(),
                  window.begin() + static_cast<std::ptrdiff_t>(pad));
        if (padded != nullptr) ++*padded;
    }
    double sc = dataio::window_scale(window);
    for (double& v : window) v /= sc;
    diff::Rng dummy(0);
    std::vector<double> yhat = model::forecast_values(model, window, dummy);
    for (double& v : yhat) v *= sc;
    return yhat;
}

std::vector<double> median_fuse(const std::vector<std::vector<double>>& forecasts) {
    if (forecasts.empty()) throw std::invalid_argument("median_fuse: no forecasts");
    std::size_t h = forecasts[0].size();
    for (const auto& f : forecasts) {
        if (f.size() != h) throw std::invalid_argument("median_fuse: horizon mismatch");
    }
    std::vector<double> out(h);
    std::vector<double> col(forecasts.size());
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < forecasts.size(); ++j) col[j] = forecasts[j][i];
        std::sort(col.begin(), col.end());
        std::size_t mid = col.size() / 2;
        out[i] = col.size() % 2 == 1 ? col[mid] : 0.5 * (col[mid - 1] + col[mid]);
    }
    return out;
}

std::vector<double> ensemble_forecast(std::vector<LookbackSlot>& slots,
                                      std::span<const double> history, std::size_t horizon) {
    if (slots.empty()) throw std::invalid_argument("ensemble_forecast: no slots");
    std::vector<std::vector<double>> per_slot;
    for (auto& slot : slots) {
        if (slot.model.config.horizon != horizon) {
            throw std::invalid_argument("ensemble_forecast: slot horizon " +
                                        std::to_string(slot.model.config.horizon) +
                                        " does not match requested " + std::to_string(horizon));
        }
        per_slot.push_back(forecast_with_padding(slot.model, history));
    }
    return median_fuse(per_slot);
}

}  // namespace idea::train
