#include "idea/cli_app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "idea/dataio.hpp"
#include "idea/evalkit.hpp"
#include "idea/model.hpp"
#include "idea/train.hpp"

namespace idea::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::trunc | std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << content;
}

// ---------------------------------------------------------------------------
// shared option blocks

struct DataOpts {
    std::string data;
    std::string manifest;
    std::string freq;
    std::string dataset = "tourism";
    std::size_t horizon = 0;  // overrides the frequency table when nonzero
    std::size_t period = 0;
};

void add_data_opts(CLI::App* cmd, DataOpts& d, bool require_data) {
    auto* o = cmd->add_option("--data", d.data, "Series CSV (id,V1,V2,...)");
    if (require_data) o->required();
    cmd->add_option("--manifest", d.manifest,
                    "Sidecar CSV id_prefix,frequency,period,horizon");
    cmd->add_option("--freq", d.freq,
                    "Uniform frequency label (yearly|quarterly|monthly|weekly|daily|hourly)");
    cmd->add_option("--dataset", d.dataset,
                    "Frequency convention for --freq: tourism|m4");
    cmd->add_option("--horizon", d.horizon, "Forecast horizon override");
    cmd->add_option("--period", d.period, "Seasonal period override");
}

std::vector<dataio::SeriesRecord> load_records(const DataOpts& d) {
    auto records = dataio::load_csv(d.data);
    if (!d.manifest.empty()) {
        auto rules = dataio::load_manifest(d.manifest);
        dataio::apply_manifest(records, rules);
    } else if (!d.freq.empty()) {
        auto info = dataio::lookup_frequency(d.dataset, d.freq);
        if (!info) {
            throw std::runtime_error("unknown frequency '" + d.freq + "' for dataset '" +
                                     d.dataset + "'");
        }
        dataio::apply_frequency(records, d.freq, info->period, info->horizon);
    } else if (d.horizon == 0) {
        throw std::runtime_error("supply --manifest, --freq, or an explicit --horizon");
    }
    if (d.horizon != 0)
        for (auto& r : records) r.horizon = d.horizon;
    if (d.period != 0)
        for (auto& r : records) r.period = d.period;
    return records;
}

std::size_t uniform_horizon(const std::vector<dataio::SeriesRecord>& records) {
    std::size_t h = records.empty() ? 0 : records[0].horizon;
    for (const auto& r : records) {
        if (r.horizon != h) {
            throw std::runtime_error(
                "mixed horizons in dataset (" + std::to_string(h) + " vs " +
                std::to_string(r.horizon) + "); evaluate one frequency at a time");
        }
    }
    return h;
}

struct ModelOpts {
    model::ModelConfig cfg;
    std::string mode = "interpretable";
    std::size_t lookback = 0;  // 0 -> 2 * horizon
};

void add_model_opts(CLI::App* cmd, ModelOpts& m) {
    cmd->add_option("--mode", m.mode, "interpretable|generic");
    cmd->add_option("--groups", m.cfg.groups, "Stacked groups L");
    cmd->add_option("--learners", m.cfg.learners, "Base learners per group G");
    cmd->add_option("--topk", m.cfg.topk, "Activated learners per group k");
    cmd->add_option("--layers", m.cfg.layers, "Embedding layers M");
    cmd->add_option("--width", m.cfg.hidden_width, "Hidden layer width");
    cmd->add_option("--context-width", m.cfg.context_width, "Context width D");
    cmd->add_option("--dk", m.cfg.key_width, "Gating key width");
    cmd->add_option("--dv", m.cfg.value_width, "Gating value width");
    cmd->add_option("--dc", m.cfg.comm_width, "Communication width");
    cmd->add_option("--alpha", m.cfg.alpha, "Communication softening factor");
    cmd->add_option("--comm-dropout", m.cfg.comm_dropout, "Attention dropout rho");
    cmd->add_option("--trend-degree", m.cfg.trend_degree, "Trend polynomial degree p");
    cmd->add_option("--lookback", m.lookback, "Lookback length t (default 2*horizon)");
}

struct TrainOpts {
    train::TrainConfig cfg;
    std::string loss = "smape";
    std::string lr_decay = "none";
};

void add_train_opts(CLI::App* cmd, TrainOpts& t) {
    cmd->add_option("--loss", t.loss, "Training loss: smape|mape|mase");
    cmd->add_option("--steps", t.cfg.steps, "Optimizer steps");
    cmd->add_option("--batch", t.cfg.batch_size, "Windows per step");
    cmd->add_option("--lr", t.cfg.lr, "Learning rate");
    cmd->add_option("--lr-decay", t.lr_decay, "none|cosine|step");
    cmd->add_option("--epsilon", t.cfg.epsilon, "Loss denominator guard");
    cmd->add_option("--val-interval", t.cfg.validation_interval, "Steps between validations");
    cmd->add_option("--val-fraction", t.cfg.validation_fraction,
                    "Fraction of series holding out their last horizon");
}

struct OutOpts {
    std::string out = "out";
    std::uint64_t seed = 0;
};

void add_out_opts(CLI::App* cmd, OutOpts& o) {
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--seed", o.seed, "Master seed");
}

fs::path prepare_out(const OutOpts& o, CLI::App* cmd) {
    fs::path dir(o.out);
    fs::create_directories(dir);
    write_file(dir / "config_resolved.txt", cmd->config_to_str(true, true));
    return dir;
}

// Key=value config support with plain precedence: defaults, then file
// values, then command-line flags. The file's pairs are spliced into the
// argument list right after the subcommand name; TakeLast option policy
// makes later (command-line) values win.
std::vector<std::string> config_file_args(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    std::vector<std::string> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string s = line;
        if (auto pos = s.find('#'); pos != std::string::npos) s.resize(pos);
        auto trim = [](std::string v) {
            std::size_t a = v.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            std::size_t b = v.find_last_not_of(" \t\r");
            return v.substr(a, b - a + 1);
        };
        s = trim(s);
        if (s.empty()) continue;
        auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config file " + path + ", line " +
                                     std::to_string(lineno) + ": expected key=value");
        }
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        if (key.empty()) {
            throw std::runtime_error("config file " + path + ", line " +
                                     std::to_string(lineno) + ": empty key");
        }
        if (value.empty()) continue;  // echoed defaults for unset string options
        if (key == "config") {
            throw std::runtime_error("config file " + path + ": config files cannot nest");
        }
        std::string lv = value;
        for (char& c : lv) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        if (lv == "true" || lv == "yes" || lv == "on") {
            out.push_back("--" + key);
        } else if (lv == "false" || lv == "no" || lv == "off") {
            // default-off flags stay off
        } else {
            out.push_back("--" + key);
            out.push_back(value);
        }
    }
    return out;
}

/// Strips --config from the raw arguments and splices the file's pairs in
/// after the subcommand name.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
    std::string config_path;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw std::runtime_error("--config needs a file path");
            config_path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (config_path.empty()) return rest;
    if (rest.empty()) throw std::runtime_error("--config requires a subcommand");
    std::vector<std::string> merged{rest[0]};
    for (auto& a : config_file_args(config_path)) merged.push_back(a);
    merged.insert(merged.end(), rest.begin() + 1, rest.end());
    return merged;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(CLI::App* cmd, DataOpts& d, ModelOpts& m, TrainOpts& t, OutOpts& o,
              std::ostream& err) {
    auto records = load_records(d);
    std::size_t horizon = uniform_horizon(records);

    // the last horizon of every series is the test region; never train on it
    std::vector<dataio::SeriesRecord> train_series;
    std::size_t too_short = 0;
    for (const auto& r : records) {
        if (r.values.size() <= horizon) {
            ++too_short;
            continue;
        }
        train_series.push_back(dataio::split_train_test(r, horizon).train);
    }
    if (train_series.empty()) throw std::runtime_error("no series longer than the horizon");

    m.cfg.mode = model::mode_from_name(m.mode);
    m.cfg.horizon = horizon;
    m.cfg.lookback = m.lookback != 0 ? m.lookback : 2 * horizon;
    m.cfg.seed = o.seed;
    t.cfg.loss = train::loss_from_name(t.loss);
    t.cfg.lr_decay = train::decay_from_name(t.lr_decay);
    t.cfg.seed = o.seed;

    model::Model mod = model::init_model(m.cfg);
    train::TrainLog log = train::fit(mod, train_series, t.cfg);

    fs::path dir = prepare_out(o, cmd);
    model::save_checkpoint(mod, (dir / "checkpoint.idea").string());
    write_file(dir / "training_log.csv", log.to_csv());

    std::string summary;
    summary += "command: train\n";
    summary += "series: " + std::to_string(records.size()) + "\n";
    summary += "trainable series: " + std::to_string(train_series.size()) + "\n";
    summary += "series at or below horizon (skipped): " + std::to_string(too_short) + "\n";
    summary += "lookback: " + std::to_string(m.cfg.lookback) + "\n";
    summary += "horizon: " + std::to_string(horizon) + "\n";
    summary += "steps: " + std::to_string(t.cfg.steps) + "\n";
    if (!log.entries.empty()) {
        summary += "final train loss: " + fmt(log.entries.back().train_loss) + "\n";
        summary += "final validation smape: " + fmt(log.entries.back().val_smape) + "\n";
    }
    write_file(dir / "summary.txt", summary);
    err << "wrote " << (dir / "checkpoint.idea").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct SeriesScores {
    std::string bucket;
    double smape = 0.0, mape = 0.0, mase = 0.0;
    bool mape_ok = false, mase_ok = false;
};

SeriesScores score_series(const std::vector<double>& yhat, const evalkit::EvalSeries& es,
                          evalkit::MaseDenominator denom) {
    SeriesScores s;
    s.bucket = dataio::frequency_bucket(es.frequency);
    s.smape = evalkit::smape(yhat, es.test);
    try {
        s.mape = evalkit::mape(yhat, es.test);
        s.mape_ok = true;
    } catch (const std::invalid_argument&) {
        s.mape_ok = false;
    }
    try {
        s.mase = evalkit::mase(yhat, es, denom);
        s.mase_ok = true;
    } catch (const std::invalid_argument&) {
        s.mase_ok = false;
    }
    return s;
}

int cmd_eval(CLI::App* cmd, DataOpts& d, std::vector<std::string>& checkpoints,
             std::string& mase_denom_name, bool per_series_owa, OutOpts& o, std::ostream& err) {
    auto records = load_records(d);
    std::size_t horizon = uniform_horizon(records);
    evalkit::MaseDenominator denom = evalkit::mase_denominator_from_name(mase_denom_name);

    std::vector<model::Model> models;
    for (const auto& c : checkpoints) {
        models.push_back(model::load_checkpoint(c));
        if (models.back().config.horizon != horizon) {
            throw std::runtime_error("checkpoint " + c + " has horizon " +
                                     std::to_string(models.back().config.horizon) +
                                     ", data expects " + std::to_string(horizon));
        }
    }

    std::vector<std::string> method_names{"naive2"};
    for (std::size_t i = 0; i < models.size(); ++i) {
        method_names.push_back(models.size() == 1
                                   ? "model"
                                   : "slot-" + std::to_string(models[i].config.lookback));
    }
    bool fused = models.size() > 1;
    if (fused) method_names.push_back("ensemble-median");

    std::map<std::string, std::vector<SeriesScores>> scores;
    std::vector<std::string> buckets_seen;
    std::size_t padded = 0, skipped_short = 0;

    for (const auto& rec : records) {
        if (rec.values.size() <= horizon) {
            ++skipped_short;
            continue;
        }
        auto split = dataio::split_train_test(rec, horizon);
        evalkit::EvalSeries es;
        es.train = split.train.values;
        es.test = split.test;
        es.period = rec.period;
        es.frequency = rec.frequency;

        std::string bucket = dataio::frequency_bucket(rec.frequency);
        if (std::find(buckets_seen.begin(), buckets_seen.end(), bucket) == buckets_seen.end())
            buckets_seen.push_back(bucket);

        std::vector<double> ref = evalkit::naive2_forecast(es);
        scores["naive2"].push_back(score_series(ref, es, denom));

        std::vector<std::vector<double>> per_model;
        for (std::size_t i = 0; i < models.size(); ++i) {
            per_model.push_back(train::forecast_with_padding(models[i], es.train, &padded));
            scores[method_names[1 + i]].push_back(score_series(per_model.back(), es, denom));
        }
        if (fused) {
            scores["ensemble-median"].push_back(
                score_series(train::median_fuse(per_model), es, denom));
        }
    }
    if (scores["naive2"].empty()) throw std::runtime_error("no series left to evaluate");

    std::sort(buckets_seen.begin(), buckets_seen.end());
    std::vector<std::string> report_buckets = buckets_seen;
    report_buckets.push_back("Average");

    evalkit::ScoreTable table;
    const auto& naive_rows = scores["naive2"];
    for (const auto& method : method_names) {
        const auto& rows = scores[method];
        for (const auto& bucket : report_buckets) {
            auto in_bucket = [&](std::size_t i) {
                return bucket == "Average" || rows[i].bucket == bucket;
            };
            double sm = 0, mp = 0, ms = 0, nsm = 0, nms = 0;
            std::size_t n = 0, n_mape = 0, n_mase = 0;
            for (std::size_t i = 0; i < rows.size(); ++i) {
                if (!in_bucket(i)) continue;
                ++n;
                sm += rows[i].smape;
                nsm += naive_rows[i].smape;
                if (rows[i].mape_ok) {
                    mp += rows[i].mape;
                    ++n_mape;
                }
                if (rows[i].mase_ok && naive_rows[i].mase_ok) {
                    ms += rows[i].mase;
                    nms += naive_rows[i].mase;
                    ++n_mase;
                }
            }
            if (n == 0) continue;
            table.rows.push_back({method, bucket, "smape", sm / static_cast<double>(n)});
            if (n_mape == n)
                table.rows.push_back({method, bucket, "mape", mp / static_cast<double>(n)});
            if (n_mase > 0)
                table.rows.push_back({method, bucket, "mase", ms / static_cast<double>(n_mase)});
            if (n_mase > 0 && nsm > 0 && nms > 0) {
                double owa =
                    0.5 * ((sm / static_cast<double>(n)) / (nsm / static_cast<double>(n)) +
                           (ms / static_cast<double>(n_mase)) /
                               (nms / static_cast<double>(n_mase)));
                table.rows.push_back({method, bucket, "owa", owa});
            }
            if (per_series_owa && n_mase > 0) {
                double acc = 0.0;
                std::size_t cnt = 0;
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    if (!in_bucket(i) || !rows[i].mase_ok || !naive_rows[i].mase_ok) continue;
                    if (naive_rows[i].smape == 0.0 || naive_rows[i].mase == 0.0) continue;
                    acc += 0.5 * (rows[i].smape / naive_rows[i].smape +
                                  rows[i].mase / naive_rows[i].mase);
                    ++cnt;
                }
                if (cnt > 0)
                    table.rows.push_back(
                        {method, bucket, "owa_per_series", acc / static_cast<double>(cnt)});
            }
        }
    }

    // per-slot protocol number: the plain mean of the slot metrics
    if (fused) {
        for (const auto& bucket : report_buckets) {
            for (const char* metric : {"smape", "mape", "mase", "owa"}) {
                double acc = 0.0;
                std::size_t cnt = 0;
                for (std::size_t i = 0; i < models.size(); ++i) {
                    for (const auto& row : table.rows) {
                        if (row.method == method_names[1 + i] && row.frequency == bucket &&
                            row.metric == metric) {
                            acc += row.value;
                            ++cnt;
                        }
                    }
                }
                if (cnt == models.size())
                    table.rows.push_back(
                        {"slot-average", bucket, metric, acc / static_cast<double>(cnt)});
            }
        }
    }

    fs::path dir = prepare_out(o, cmd);
    write_file(dir / "scores.csv", table.to_csv());

    std::string summary;
    summary += "command: eval\n";
    summary += "series evaluated: " + std::to_string(naive_rows.size()) + "\n";
    summary += "series at or below horizon (skipped): " + std::to_string(skipped_short) + "\n";
    summary += "checkpoints: " + std::to_string(models.size()) + "\n";
    summary += "lookback windows front-padded: " + std::to_string(padded) + "\n";
    summary += "mase denominator: " + std::string(evalkit::mase_denominator_name(denom)) + "\n";
    for (const auto& row : table.rows) {
        if (row.frequency == "Average") {
            summary += row.method + " " + row.metric + " (Average): " + fmt(row.value) + "\n";
        }
    }
    write_file(dir / "summary.txt", summary);
    err << "wrote " << (dir / "scores.csv").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// forecast

int cmd_forecast(CLI::App* cmd, DataOpts& d, std::vector<std::string>& checkpoints,
                 bool plot_data, std::size_t holdout, OutOpts& o, std::ostream& err) {
    if (checkpoints.empty()) throw std::runtime_error("forecast needs at least one --checkpoint");
    auto records = dataio::load_csv(d.data);

    std::vector<model::Model> models;
    for (const auto& c : checkpoints) models.push_back(model::load_checkpoint(c));
    std::size_t horizon = models[0].config.horizon;
    for (const auto& m : models) {
        if (m.config.horizon != horizon)
            throw std::runtime_error("checkpoints disagree on the horizon");
    }

    std::string csv = "id,step,value\n";
    std::string plot = "id,index,x,y,yhat\n";
    std::size_t failures = 0;
    for (const auto& rec : records) {
        std::vector<double> history(
            rec.values.begin(),
            rec.values.end() -
                static_cast<std::ptrdiff_t>(std::min(holdout, rec.values.size())));
        std::vector<std::vector<double>> per_model;
        try {
            for (auto& m : models) {
                std::size_t t = m.config.lookback;
                if (history.size() < t) {
                    throw std::runtime_error("series " + rec.id + ": length " +
                                             std::to_string(history.size()) +
                                             " is shorter than lookback " + std::to_string(t));
                }
                per_model.push_back(train::forecast_with_padding(m, history));
            }
        } catch (const std::exception& e) {
            err << "error: " << e.what() << "\n";
            ++failures;
            continue;
        }
        std::vector<double> fc = train::median_fuse(per_model);
        for (std::size_t i = 0; i < fc.size(); ++i) {
            csv += rec.id + "," + std::to_string(i + 1) + "," + fmt(fc[i]) + "\n";
        }
        if (plot_data) {
            std::size_t t = 0;
            for (auto& m : models) t = std::max(t, m.config.lookback);
            std::size_t from = history.size() > t ? history.size() - t : 0;
            for (std::size_t i = from; i < history.size(); ++i)
                plot += rec.id + "," + std::to_string(i) + "," + fmt(history[i]) + ",,\n";
            for (std::size_t i = 0; i < fc.size(); ++i) {
                std::string y;
                if (holdout > 0 && history.size() + i < rec.values.size())
                    y = fmt(rec.values[history.size() + i]);
                plot += rec.id + "," + std::to_string(history.size() + i) + ",," + y + "," +
                        fmt(fc[i]) + "\n";
            }
        }
    }

    fs::path dir = prepare_out(o, cmd);
    write_file(dir / "forecast.csv", csv);
    if (plot_data) write_file(dir / "plot.csv", plot);
    std::string summary;
    summary += "command: forecast\n";
    summary += "series: " + std::to_string(records.size()) + "\n";
    summary += "failed series: " + std::to_string(failures) + "\n";
    summary += "horizon: " + std::to_string(horizon) + "\n";
    write_file(dir / "summary.txt", summary);
    err << "wrote " << (dir / "forecast.csv").string() << "\n";
    return failures == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// shift-experiment

std::string set_to_string(const std::vector<std::size_t>& s) {
    std::string out = "{";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "}";
}

int cmd_shift_experiment(CLI::App* cmd, std::string& checkpoint, std::size_t period, OutOpts& o,
                         std::ostream& err) {
    model::Model mod = model::load_checkpoint(checkpoint);
    std::size_t t = mod.config.lookback;

    // 20 typical + 10 silent lookback windows; 1-indexed layout: typical at
    // 1-10 and 16-25, silent at 11-15 and 26-30. The CSV is 0-indexed.
    dataio::SyntheticSpec typical;
    typical.kind = dataio::SyntheticSpec::Kind::TrendSeason;
    typical.count = 20;
    typical.length = t;
    typical.period = period;
    typical.seed = o.seed;

    dataio::SyntheticSpec silent;
    silent.kind = dataio::SyntheticSpec::Kind::Silent;
    silent.count = 10;
    silent.length = t;
    silent.seed = o.seed + 1;
    silent.base_min = 1.0;   // flat near zero until the jump
    silent.base_max = 3.0;
    silent.noise_scale = 0.02;

    auto typ = dataio::generate_synthetic(typical);
    auto sil = dataio::generate_synthetic(silent);

    std::vector<const dataio::SeriesRecord*> layout(30, nullptr);
    std::vector<bool> is_silent(30, false);
    std::size_t ti = 0, si = 0;
    for (std::size_t pos = 0; pos < 30; ++pos) {
        std::size_t one_based = pos + 1;
        bool s = (one_based >= 11 && one_based <= 15) || one_based >= 26;
        is_silent[pos] = s;
        layout[pos] = s ? &sil[si++] : &typ[ti++];
    }

    std::string csv = "sample_index,learner_index,activated,relevance\n";
    std::vector<std::vector<std::size_t>> sets(30);
    for (std::size_t pos = 0; pos < 30; ++pos) {
        const auto& vals = layout[pos]->values;
        double sc = dataio::window_scale(vals);
        std::vector<double> x(vals.size());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = vals[i] / sc;

        diff::Rng rng(0);
        diff::Tape tape;
        model::ForwardOptions opts;
        auto fwd = model::model_forward(mod, x, opts, rng, tape);
        const auto& act = fwd.traces[0].activation;
        sets[pos] = act.activated;
        for (std::size_t g = 0; g < mod.config.learners; ++g) {
            bool on = std::find(act.activated.begin(), act.activated.end(), g) !=
                      act.activated.end();
            csv += std::to_string(pos) + "," + std::to_string(g) + "," + (on ? "1" : "0") + "," +
                   fmt(act.relevance[g]) + "\n";
        }
    }

    auto modal = [&](bool silent_pop) {
        std::map<std::string, std::size_t> counts;
        for (std::size_t pos = 0; pos < 30; ++pos) {
            if (is_silent[pos] != silent_pop) continue;
            counts[set_to_string(sets[pos])]++;
        }
        std::string best;
        std::size_t best_n = 0;
        for (auto& [k, n] : counts) {
            if (n > best_n) {
                best = k;
                best_n = n;
            }
        }
        return std::make_pair(best, best_n);
    };

    std::vector<std::size_t> changes;  // 1-based index of the later sample of a changed pair
    for (std::size_t pos = 1; pos < 30; ++pos) {
        if (sets[pos] != sets[pos - 1]) changes.push_back(pos + 1);
    }
    auto near = [&](std::size_t boundary) {
        for (std::size_t c : changes) {
            if (c + 1 >= boundary && c <= boundary + 1) return true;
        }
        return false;
    };

    auto [modal_typ, n_typ] = modal(false);
    auto [modal_sil, n_sil] = modal(true);

    fs::path dir = prepare_out(o, cmd);
    write_file(dir / "activations.csv", csv);
    std::string summary;
    summary += "command: shift-experiment\n";
    summary += "sample positions are 0-indexed in the CSV; add 1 for the layout below\n";
    summary += "layout: typical 1-10 and 16-25, silent 11-15 and 26-30\n";
    summary += "modal activation set (typical): " + modal_typ + " on " + std::to_string(n_typ) +
               "/20 samples\n";
    summary += "modal activation set (silent): " + modal_sil + " on " + std::to_string(n_sil) +
               "/10 samples\n";
    summary += "modal sets differ: " + std::string(modal_typ != modal_sil ? "yes" : "no") + "\n";
    summary += "activation changes at samples:";
    for (std::size_t c : changes) summary += " " + std::to_string(c);
    summary += "\n";
    summary += "change within 1 sample of switch at 11: " +
               std::string(near(11) ? "yes" : "no") + "\n";
    summary += "change within 1 sample of switch at 26: " +
               std::string(near(26) ? "yes" : "no") + "\n";
    write_file(dir / "summary.txt", summary);
    err << "wrote " << (dir / "activations.csv").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// stats

int cmd_stats(CLI::App* cmd, DataOpts& d, OutOpts& o, std::ostream& err) {
    auto records = load_records(d);
    std::map<std::string, std::vector<std::size_t>> lengths;
    std::map<std::string, std::pair<std::size_t, std::size_t>> convention;
    for (const auto& r : records) {
        std::string b = dataio::frequency_bucket(r.frequency);
        lengths[b].push_back(r.values.size());
        convention[b] = {r.period, r.horizon};
    }

    std::string csv = "frequency,count,min_len,mean_len,median_len,max_len,period,horizon\n";
    std::string summary = "command: stats\nseries: " + std::to_string(records.size()) + "\n";
    for (auto& [bucket, lens] : lengths) {
        std::sort(lens.begin(), lens.end());
        double mean = 0;
        for (std::size_t v : lens) mean += static_cast<double>(v);
        mean /= static_cast<double>(lens.size());
        std::size_t median = lens[lens.size() / 2];
        csv += bucket + "," + std::to_string(lens.size()) + "," + std::to_string(lens.front()) +
               "," + fmt(mean) + "," + std::to_string(median) + "," +
               std::to_string(lens.back()) + "," + std::to_string(convention[bucket].first) +
               "," + std::to_string(convention[bucket].second) + "\n";
        summary += bucket + ": " + std::to_string(lens.size()) + " series, length " +
                   std::to_string(lens.front()) + ".." + std::to_string(lens.back()) + "\n";
    }

    fs::path dir = prepare_out(o, cmd);
    write_file(dir / "stats.csv", csv);
    write_file(dir / "summary.txt", summary);
    err << "wrote " << (dir / "stats.csv").string() << "\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"IDEA univariate time-series forecaster"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default(true);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    std::string config_doc;  // consumed by merge_config before parsing

    auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint");
    DataOpts tr_data;
    ModelOpts tr_model;
    TrainOpts tr_train;
    OutOpts tr_out;
    add_data_opts(tr, tr_data, true);
    add_model_opts(tr, tr_model);
    add_train_opts(tr, tr_train);
    add_out_opts(tr, tr_out);
    tr->add_option("--config", config_doc, "key=value defaults file (flags win)");

    auto* ev = app.add_subcommand("eval", "Score checkpoints against held-out horizons");
    DataOpts ev_data;
    OutOpts ev_out;
    std::vector<std::string> ev_ckpts;
    std::string ev_mase = "paper";
    bool ev_per_series = false;
    add_data_opts(ev, ev_data, true);
    ev->add_option("--checkpoint", ev_ckpts, "Checkpoint file (repeat for slot ensembles)")
        ->take_all();
    ev->add_option("--mase-denominator", ev_mase, "paper|insample");
    ev->add_flag("--per-series-owa", ev_per_series, "Also report per-series-averaged OWA");
    add_out_opts(ev, ev_out);
    ev->add_option("--config", config_doc, "key=value defaults file (flags win)");

    auto* fc = app.add_subcommand("forecast", "Emit horizon forecasts per series");
    DataOpts fc_data;
    OutOpts fc_out;
    std::vector<std::string> fc_ckpts;
    bool fc_plot = false;
    std::size_t fc_holdout = 0;
    add_data_opts(fc, fc_data, true);
    fc->add_option("--checkpoint", fc_ckpts, "Checkpoint file (repeat for median fusion)")
        ->take_all();
    fc->add_flag("--plot-data", fc_plot, "Also emit x/y/yhat rows for plotting");
    fc->add_option("--holdout", fc_holdout,
                   "Forecast from all but the last N observations (fills y in plot data)");
    add_out_opts(fc, fc_out);
    fc->add_option("--config", config_doc, "key=value defaults file (flags win)");

    auto* sh = app.add_subcommand("shift-experiment",
                                  "Feed 20 typical + 10 silent samples, record activations");
    OutOpts sh_out;
    std::string sh_ckpt;
    std::size_t sh_period = 12;
    sh->add_option("--checkpoint", sh_ckpt, "Pre-trained checkpoint")->required();
    sh->add_option("--period", sh_period, "Seasonal period of the typical samples");
    add_out_opts(sh, sh_out);
    sh->add_option("--config", config_doc, "key=value defaults file (flags win)");

    auto* st = app.add_subcommand("stats", "Dataset statistics per frequency");
    DataOpts st_data;
    OutOpts st_out;
    add_data_opts(st, st_data, true);
    add_out_opts(st, st_out);
    st->add_option("--config", config_doc, "key=value defaults file (flags win)");

    try {
        std::vector<std::string> merged = merge_config(args);
        std::vector<std::string> rev(merged.rbegin(), merged.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (tr->parsed()) return cmd_train(tr, tr_data, tr_model, tr_train, tr_out, err);
        if (ev->parsed())
            return cmd_eval(ev, ev_data, ev_ckpts, ev_mase, ev_per_series, ev_out, err);
        if (fc->parsed())
            return cmd_forecast(fc, fc_data, fc_ckpts, fc_plot, fc_holdout, fc_out, err);
        if (sh->parsed()) return cmd_shift_experiment(sh, sh_ckpt, sh_period, sh_out, err);
        if (st->parsed()) return cmd_stats(st, st_data, st_out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    err << "error: no subcommand parsed\n";
    return 1;
}

}  // namespace idea::cli
