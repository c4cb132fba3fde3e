#include "idea/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace idea::dataio {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}
}  // namespace

std::optional<FrequencyInfo> tourism_frequency(const std::string& name) {
    std::string f = lower(name);
    if (f == "yearly") return FrequencyInfo{1, 4};
    if (f == "quarterly") return FrequencyInfo{4, 8};
    if (f == "monthly") return FrequencyInfo{12, 24};
    return std::nullopt;
}

std::optional<FrequencyInfo> m4_frequency(const std::string& name) {
    std::string f = lower(name);
    if (f == "yearly") return FrequencyInfo{1, 6};
    if (f == "quarterly") return FrequencyInfo{4, 8};
    if (f == "monthly") return FrequencyInfo{12, 18};
    if (f == "weekly") return FrequencyInfo{1, 13};
    if (f == "daily") return FrequencyInfo{1, 14};
    if (f == "hourly") return FrequencyInfo{24, 48};
    return std::nullopt;
}

std::optional<FrequencyInfo> lookup_frequency(const std::string& dataset,
                                              const std::string& name) {
    std::string d = lower(dataset);
    if (d == "tourism") return tourism_frequency(name);
    if (d == "m4") return m4_frequency(name);
    return std::nullopt;
}

std::string frequency_bucket(const std::string& name) {
    std::string f = lower(name);
    if (f == "weekly" || f == "daily" || f == "hourly" || f == "others") return "Others";
    if (f == "yearly") return "Yearly";
    if (f == "quarterly") return "Quarterly";
    if (f == "monthly") return "Monthly";
    return name;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    cells.push_back(cur);
    return cells;
}

}  // namespace

std::vector<SeriesRecord> load_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open data file: " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty data file: " + path);

    std::vector<SeriesRecord> out;
    std::set<std::string> seen;
    std::size_t row = 1;  // header
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        SeriesRecord rec;
        rec.id = cells[0];
        if (rec.id.empty()) {
            throw std::runtime_error("row " + std::to_string(row) + ", column 1: empty series id");
        }
        if (!seen.insert(rec.id).second) {
            throw std::runtime_error("duplicate series id '" + rec.id + "' at row " +
                                     std::to_string(row));
        }
        std::size_t last = cells.size();
        while (last > 1 && cells[last - 1].empty()) --last;  // trim trailing empties
        for (std::size_t c = 1; c < last; ++c) {
            const std::string& cell = cells[c];
            if (cell.empty()) {
                throw std::runtime_error("row " + std::to_string(row) + ", column " +
                                         std::to_string(c + 1) + ": empty cell inside series");
            }
            char* end = nullptr;
            double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0' || !std::isfinite(v)) {
                throw std::runtime_error("row " + std::to_string(row) + ", column " +
                                         std::to_string(c + 1) + ": '" + cell +
                                         "' is not a finite number");
            }
            rec.values.push_back(v);
        }
        if (rec.values.empty()) {
            throw std::runtime_error("row " + std::to_string(row) + ": series '" + rec.id +
                                     "' has no observations");
        }
        out.push_back(std::move(rec));
    }
    return out;
}

void write_csv(const std::string& path, std::span<const SeriesRecord> records) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    std::size_t maxlen = 0;
    for (const auto& r : records) maxlen = std::max(maxlen, r.values.size());
    os << "id";
    for (std::size_t i = 1; i <= maxlen; ++i) os << ",V" << i;
    os << "\n";
    char buf[40];
    for (const auto& r : records) {
        os << r.id;
        for (double v : r.values) {
            std::snprintf(buf, sizeof(buf), "%.10g", v);
            os << ',' << buf;
        }
        for (std::size_t i = r.values.size(); i < maxlen; ++i) os << ',';
        os << "\n";
    }
    if (!os) throw std::runtime_error("failed writing: " + path);
}

std::vector<ManifestRule> load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open manifest: " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty manifest: " + path);
    std::vector<ManifestRule> rules;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() < 4) {
            throw std::runtime_error("manifest row " + std::to_string(row) +
                                     ": expected id_prefix,frequency,period,horizon");
        }
        ManifestRule r;
        r.id_prefix = cells[0];
        r.frequency = cells[1];
        r.period = static_cast<std::size_t>(std::stoul(cells[2]));
        r.horizon = static_cast<std::size_t>(std::stoul(cells[3]));
        if (r.period < 1 || r.horizon < 1) {
            throw std::runtime_error("manifest row " + std::to_string(row) +
                                     ": period and horizon must be positive");
        }
        rules.push_back(std::move(r));
    }
    return rules;
}

void apply_manifest(std::vector<SeriesRecord>& records, std::span<const ManifestRule> rules) {
    for (auto& rec : records) {
        const ManifestRule* best = nullptr;
        for (const auto& r : rules) {
            if (rec.id.rfind(r.id_prefix, 0) == 0 &&
                (best == nullptr || r.id_prefix.size() > best->id_prefix.size())) {
                best = &r;
            }
        }
        if (best == nullptr) {
            throw std::runtime_error("series '" + rec.id + "' matches no manifest prefix");
        }
        rec.frequency = best->frequency;
        rec.period = best->period;
        rec.horizon = best->horizon;
    }
}

void apply_frequency(std::vector<SeriesRecord>& records, const std::string& frequency,
                     std::size_t period, std::size_t horizon) {
    for (auto& rec : records) {
        rec.frequency = frequency;
        rec.period = period;
        rec.horizon = horizon;
    }
}

TrainTestSplit split_train_test(const SeriesRecord& record, std::size_t horizon) {
    if (horizon < 1) throw std::invalid_argument("split_train_test: horizon must be positive");
    if (record.values.size() <= horizon) {
        throw std::invalid_argument("split_train_test: series '" + record.id + "' has " +
                                    std::to_string(record.values.size()) +
                                    " observations, need more than horizon " +
                                    std::to_string(horizon));
    }
    TrainTestSplit out;
    out.train = record;
    out.train.values.assign(record.values.begin(),
                            record.values.end() - static_cast<std::ptrdiff_t>(horizon));
    out.test.assign(record.values.end() - static_cast<std::ptrdiff_t>(horizon),
                    record.values.end());
    return out;
}

std::vector<SeriesRecord> generate_synthetic(const SyntheticSpec& spec) {
    std::vector<SeriesRecord> out;
    out.reserve(spec.count);
    diff::Rng root(spec.seed);
    for (std::size_t i = 0; i < spec.count; ++i) {
        diff::Rng rng = root.fork(i);
        SeriesRecord rec;
        rec.id =
            (spec.kind == SyntheticSpec::Kind::TrendSeason ? "T" : "S") + std::to_string(i + 1);
        rec.frequency = spec.frequency;
        rec.period = spec.series_period;
        rec.horizon = spec.series_horizon;
        rec.values.resize(spec.length);
        if (spec.kind == SyntheticSpec::Kind::TrendSeason) {
            double base = rng.uniform(spec.base_min, spec.base_max);
            double slope = rng.uniform(spec.slope_min, spec.slope_max);
            double amp = rng.uniform(spec.amplitude_min, spec.amplitude_max);
            double phase = rng.uniform(0.0, kTwoPi);
            double noise_sd = spec.noise_scale * amp;
            for (std::size_t t = 0; t < spec.length; ++t) {
                double v = base + slope * static_cast<double>(t) +
                           amp * std::sin(kTwoPi * static_cast<double>(t) /
                                              static_cast<double>(spec.period) +
                                          phase);
                rec.values[t] = v + rng.normal(0.0, noise_sd);
            }
        } else {
            double base = rng.uniform(spec.base_min, spec.base_max);
            double jump = rng.uniform(spec.jump_min, spec.jump_max);
            double noise_sd = spec.noise_scale * jump;
            for (std::size_t t = 0; t < spec.length; ++t)
                rec.values[t] = base + rng.normal(0.0, noise_sd);
            rec.values[spec.length - 1] = base + jump;
        }
        out.push_back(std::move(rec));
    }
    return out;
}

WindowSet make_windows(std::span<const SeriesRecord> records, std::size_t lookback,
                       std::size_t horizon, WindowPolicy policy) {
    if (lookback < 1 || horizon < 1) {
        throw std::invalid_argument("make_windows: lookback and horizon must be positive");
    }
    WindowSet out;
    for (std::size_t s = 0; s < records.size(); ++s) {
        const auto& rec = records[s];
        if (rec.values.size() < lookback + horizon) {
            ++out.skipped_series;
            continue;
        }
        std::size_t first_anchor = lookback;  // index where y starts
        std::size_t last_anchor = rec.values.size() - horizon;
        std::size_t begin = policy == WindowPolicy::LastPerSeries ? last_anchor : first_anchor;
        for (std::size_t a = begin; a <= last_anchor; ++a) {
            SeriesWindow w;
            w.lookback.assign(rec.values.begin() + static_cast<std::ptrdiff_t>(a - lookback),
                              rec.values.begin() + static_cast<std::ptrdiff_t>(a));
            w.target.assign(rec.values.begin() + static_cast<std::ptrdiff_t>(a),
                            rec.values.begin() + static_cast<std::ptrdiff_t>(a + horizon));
            w.period = rec.period;
            w.series_index = s;
            out.windows.push_back(std::move(w));
        }
    }
    return out;
}

double window_scale(std::span<const double> lookback, double eps) {
    double m = 0.0;
    for (double v : lookback) m = std::max(m, std::fabs(v));
    return std::max(m, eps);
}

}  // namespace idea::dataio
