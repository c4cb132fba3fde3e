#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "idea/rng.hpp"

namespace idea::dataio {

/// One univariate series with its evaluation convention attached.
struct SeriesRecord {
    std::string id;
    std::vector<double> values;
    std::string frequency = "Yearly";
    std::size_t period = 1;   // s
    std::size_t horizon = 1;  // H
};

struct FrequencyInfo {
    std::size_t period = 1;
    std::size_t horizon = 1;
};

/// TOURISM convention: Yearly H=4 s=1, Quarterly H=8 s=4, Monthly H=24 s=12.
std::optional<FrequencyInfo> tourism_frequency(const std::string& name);

/// M4 convention: Yearly 6/1, Quarterly 8/4, Monthly 18/12, Weekly 13/1,
/// Daily 14/1, Hourly 48/24. Weekly/Daily/Hourly report under "Others".
std::optional<FrequencyInfo> m4_frequency(const std::string& name);

std::optional<FrequencyInfo> lookup_frequency(const std::string& dataset,
                                              const std::string& name);

/// Reporting bucket for a frequency label ("Weekly" -> "Others" etc.).
std::string frequency_bucket(const std::string& name);

/// CSV with header `id,V1,V2,...`, one series per row, variable lengths,
/// trailing empty cells trimmed. Frequencies are attached afterwards via a
/// manifest or a uniform label.
std::vector<SeriesRecord> load_csv(const std::string& path);
void write_csv(const std::string& path, std::span<const SeriesRecord> records);

/// Sidecar manifest rows `id_prefix,frequency,period,horizon`; the longest
/// matching prefix wins.
struct ManifestRule {
    std::string id_prefix;
    std::string frequency;
    std::size_t period = 1;
    std::size_t horizon = 1;
};

std::vector<ManifestRule> load_manifest(const std::string& path);
void apply_manifest(std::vector<SeriesRecord>& records, std::span<const ManifestRule> rules);
void apply_frequency(std::vector<SeriesRecord>& records, const std::string& frequency,
                     std::size_t period, std::size_t horizon);

/// test = last H observations, train = the remainder.
struct TrainTestSplit {
    SeriesRecord train;          // values truncated to T - H
    std::vector<double> test;    // length H
};

TrainTestSplit split_train_test(const SeriesRecord& record, std::size_t horizon);

/// Synthetic generators for desk-scale runs. TrendSeason draws
/// y_t = a + b*t + A*sin(2*pi*t/period + phase) + noise; Silent stays at a
/// base level (plus small noise) until a jump at the final position.
struct SyntheticSpec {
    enum class Kind { TrendSeason, Silent };
    Kind kind = Kind::TrendSeason;
    double slope_min = -1.0, slope_max = 1.0;
    double amplitude_min = 1.0, amplitude_max = 20.0;
    double base_min = 50.0, base_max = 100.0;
    std::size_t period = 12;
    double noise_scale = 0.05;  // stddev as a fraction of the amplitude (or jump)
    double jump_min = 40.0, jump_max = 80.0;  // Silent only
    std::size_t length = 72;
    std::size_t count = 1;
    std::uint64_t seed = 0;
    std::string frequency = "Monthly";
    std::size_t series_period = 12;   // seasonal period stamped on records
    std::size_t series_horizon = 12;  // horizon stamped on records
};

std::vector<SeriesRecord> generate_synthetic(const SyntheticSpec& spec);

/// One training/evaluation sample.
struct SeriesWindow {
    std::vector<double> lookback;  // x, length t
    std::vector<double> target;    // y, length H
    std::size_t period = 1;
    std::size_t series_index = 0;
};

enum class WindowPolicy {
    All,         // every (x, y) pair inside the train region
    LastPerSeries,
};

struct WindowSet {
    std::vector<SeriesWindow> windows;
    std::size_t skipped_series = 0;  // too short for even one window
};

WindowSet make_windows(std::span<const SeriesRecord> records, std::size_t lookback,
                       std::size_t horizon, WindowPolicy policy = WindowPolicy::All);

/// Per-window normalization: max |lookback| guarded by eps. Model inputs
/// are divided by this and forecasts multiplied back.
double window_scale(std::span<const double> lookback, double eps = 1e-8);

}  // namespace idea::dataio
