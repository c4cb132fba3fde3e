#include "idea/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace idea::model {

const char* mode_name(Mode m) {
    return m == Mode::Interpretable ? "interpretable" : "generic";
}

Mode mode_from_name(const std::string& name) {
    if (name == "interpretable") return Mode::Interpretable;
    if (name == "generic") return Mode::Generic;
    throw std::invalid_argument("unknown mode '" + name + "', expected interpretable|generic");
}

void ModelConfig::validate() const {
    std::vector<std::string> bad;
    if (groups < 1) bad.push_back("groups must be >= 1");
    if (learners < 1) bad.push_back("learners must be >= 1");
    if (topk < 1 || topk > learners) bad.push_back("topk must satisfy 1 <= k <= learners");
    if (layers < 1) bad.push_back("layers must be >= 1");
    if (hidden_width < 1) bad.push_back("hidden width must be >= 1");
    if (context_width < 1) bad.push_back("context width must be >= 1");
    if (key_width < 1) bad.push_back("key width must be >= 1");
    if (value_width < 1) bad.push_back("value width must be >= 1");
    if (comm_width < 1) bad.push_back("comm width must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) bad.push_back("alpha must be in (0, 1)");
    if (comm_dropout < 0.0 || comm_dropout >= 1.0) bad.push_back("comm dropout must be in [0, 1)");
    if (lookback < 1) bad.push_back("lookback must be >= 1");
    if (horizon < 1) bad.push_back("horizon must be >= 1");
    if (mode == Mode::Interpretable) {
        if (learners != 3)
            bad.push_back("interpretable mode fixes learners per group at 3 "
                          "(one trend, one seasonality, one generic)");
        if (horizon > 0 && horizon < 4)
            bad.push_back("interpretable mode needs horizon >= 4 for seasonality harmonics");
        if (trend_degree >= std::min(lookback > 0 ? lookback : 1, horizon > 0 ? horizon : 1))
            bad.push_back("trend degree must be below both lookback and horizon");
    }
    if (!bad.empty()) {
        std::string msg = "invalid model config:";
        for (const auto& b : bad) msg += "\n  - " + b;
        throw std::invalid_argument(msg);
    }
}

namespace {

diff::Array glorot_uniform(std::size_t rows, std::size_t cols, diff::Rng& rng) {
    diff::Array a(rows, cols, true);
    double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (double& v : a.values) v = rng.uniform(-bound, bound);
    return a;
}

diff::Array zero_bias(std::size_t cols) { return diff::Array(1, cols, true); }

basis::Kind kind_for(Mode mode, std::size_t learner) {
    if (mode == Mode::Generic) return basis::Kind::Generic;
    switch (learner % 3) {
        case 0: return basis::Kind::Trend;
        case 1: return basis::Kind::Seasonality;
        default: return basis::Kind::Generic;
    }
}

BaseLearner make_learner(const ModelConfig& cfg, basis::Kind kind, diff::Rng& rng) {
    BaseLearner lr;
    lr.kind = kind;
    lr.spec = basis::BasisSpec{kind, cfg.trend_degree, cfg.lookback, cfg.horizon};
    lr.basis_pair = basis::make_basis_pair(lr.spec);

    std::size_t in = cfg.value_width;
    for (std::size_t m = 0; m < cfg.layers; ++m) {
        std::size_t out = m + 1 == cfg.layers ? cfg.context_width : cfg.hidden_width;
        lr.fc_weights.push_back(glorot_uniform(in, out, rng));
        lr.fc_biases.push_back(zero_bias(out));
        in = out;
    }
    lr.head_backcast_w = glorot_uniform(cfg.context_width, lr.spec.backcast_dim(), rng);
    lr.head_backcast_b = zero_bias(lr.spec.backcast_dim());
    lr.head_forecast_w = glorot_uniform(cfg.context_width, lr.spec.forecast_dim(), rng);
    lr.head_forecast_b = zero_bias(lr.spec.forecast_dim());
    return lr;
}

}  // namespace

Model init_model(const ModelConfig& config, diff::Rng& rng) {
    config.validate();
    Model model;
    model.config = config;

    for (std::size_t g = 0; g < config.learners; ++g) {
        diff::Array theta0(1, config.context_width, true);
        for (double& v : theta0.values) v = rng.uniform(-0.1, 0.1);
        model.initial_contexts.push_back(std::move(theta0));
    }

    for (std::size_t l = 0; l < config.groups; ++l) {
        Group grp;
        grp.gate.key_width = config.key_width;
        grp.gate.value_width = config.value_width;
        grp.gate.w_key = glorot_uniform(2, config.key_width, rng);
        grp.gate.w_value = glorot_uniform(2, config.value_width, rng);
        for (std::size_t g = 0; g < config.learners; ++g)
            grp.gate.w_query.push_back(glorot_uniform(config.context_width, config.key_width, rng));

        grp.comm.alpha = config.alpha;
        grp.comm.dropout = config.comm_dropout;
        for (std::size_t g = 0; g < config.learners; ++g) {
            grp.comm.w_query.push_back(glorot_uniform(config.context_width, config.comm_width, rng));
            grp.comm.w_key.push_back(glorot_uniform(config.context_width, config.comm_width, rng));
            grp.comm.w_value.push_back(
                glorot_uniform(config.context_width, config.context_width, rng));
        }

        for (std::size_t g = 0; g < config.learners; ++g)
            grp.learners.push_back(make_learner(config, kind_for(config.mode, g), rng));
        model.groups.push_back(std::move(grp));
    }
    return model;
}

Model init_model(const ModelConfig& config) {
    diff::Rng rng(config.seed);
    return init_model(config, rng);
}

std::vector<diff::Array*> Model::parameters() {
    std::vector<diff::Array*> out;
    for (auto& th : initial_contexts) out.push_back(&th);
    for (auto& grp : groups) {
        out.push_back(&grp.gate.w_key);
        out.push_back(&grp.gate.w_value);
        for (auto& wq : grp.gate.w_query) out.push_back(&wq);
        for (std::size_t g = 0; g < grp.comm.w_query.size(); ++g) {
            out.push_back(&grp.comm.w_query[g]);
            out.push_back(&grp.comm.w_key[g]);
            out.push_back(&grp.comm.w_value[g]);
        }
        for (auto& lr : grp.learners) {
            for (auto& w : lr.fc_weights) out.push_back(&w);
            for (auto& b : lr.fc_biases) out.push_back(&b);
            out.push_back(&lr.head_backcast_w);
            out.push_back(&lr.head_backcast_b);
            out.push_back(&lr.head_forecast_w);
            out.push_back(&lr.head_forecast_b);
        }
    }
    return out;
}

std::vector<std::string> Model::parameter_names() const {
    std::vector<std::string> out;
    for (std::size_t g = 0; g < initial_contexts.size(); ++g)
        out.push_back("theta0." + std::to_string(g));
    for (std::size_t l = 0; l < groups.size(); ++l) {
        std::string gp = "group" + std::to_string(l) + ".";
        out.push_back(gp + "gate.key");
        out.push_back(gp + "gate.value");
        for (std::size_t g = 0; g < groups[l].gate.w_query.size(); ++g)
            out.push_back(gp + "gate.query" + std::to_string(g));
        for (std::size_t g = 0; g < groups[l].comm.w_query.size(); ++g) {
            std::string cp = gp + "comm" + std::to_string(g) + ".";
            out.push_back(cp + "query");
            out.push_back(cp + "key");
            out.push_back(cp + "value");
        }
        for (std::size_t g = 0; g < groups[l].learners.size(); ++g) {
            std::string lp = gp + "learner" + std::to_string(g) + ".";
            const BaseLearner& lr = groups[l].learners[g];
            for (std::size_t m = 0; m < lr.fc_weights.size(); ++m)
                out.push_back(lp + "fc" + std::to_string(m) + ".w");
            for (std::size_t m = 0; m < lr.fc_biases.size(); ++m)
                out.push_back(lp + "fc" + std::to_string(m) + ".b");
            out.push_back(lp + "head_b.w");
            out.push_back(lp + "head_b.b");
            out.push_back(lp + "head_f.w");
            out.push_back(lp + "head_f.b");
        }
    }
    return out;
}

diff::Value learner_embed(BaseLearner& learner, diff::Value pooled, diff::Tape& tape) {
    if (pooled.cols() != learner.fc_weights[0].rows()) {
        throw std::invalid_argument("learner_embed: input width " +
                                    std::to_string(pooled.cols()) + " does not match layer 0 " +
                                    diff::shape_str(learner.fc_weights[0].shape));
    }
    diff::Value h = pooled;
    for (std::size_t m = 0; m < learner.fc_weights.size(); ++m) {
        h = diff::relu(diff::add(diff::matmul(h, tape.leaf(learner.fc_weights[m])),
                                 tape.leaf(learner.fc_biases[m])));
    }
    return h;
}

std::pair<diff::Value, diff::Value> learner_predict(BaseLearner& learner, diff::Value theta,
                                                    diff::Tape& tape) {
    diff::Value theta_b = diff::add(diff::matmul(theta, tape.leaf(learner.head_backcast_w)),
                                    tape.leaf(learner.head_backcast_b));
    diff::Value theta_f = diff::add(diff::matmul(theta, tape.leaf(learner.head_forecast_w)),
                                    tape.leaf(learner.head_forecast_b));
    return basis::project(theta_b, theta_f, learner.spec, learner.basis_pair, tape);
}

GroupResult group_forward(Group& group, std::size_t group_index, std::size_t topk,
                          diff::Value x_l, const std::vector<diff::Value>& thetas_prev,
                          bool training, const std::vector<std::size_t>* pinned, diff::Rng& rng,
                          diff::Tape& tape) {
    std::size_t g_count = group.learners.size();
    if (thetas_prev.size() != g_count) {
        throw std::invalid_argument("group_forward: got " + std::to_string(thetas_prev.size()) +
                                    " contexts for " + std::to_string(g_count) + " learners");
    }

    GroupResult res;
    res.trace.group = group_index;
    res.trace.input = x_l.values();
    res.trace.learner_backcasts.resize(g_count);
    res.trace.learner_forecasts.resize(g_count);

    // Stage 1: competition. Scores for every learner are computed off the
    // record (selection is hard); only winning branches are taped.
    gating::InputTokens tokens = gating::tokenize_window(x_l.values());
    auto& act = res.trace.activation;
    act.group = group_index;
    act.relevance.resize(g_count);
    for (std::size_t g = 0; g < g_count; ++g)
        act.relevance[g] = gating::relevance_score(thetas_prev[g].values(), tokens, group.gate, g);
    act.activated = pinned != nullptr ? *pinned : gating::select_topk(act.relevance, topk);

    // Stages 2-3: embed the winners, then let them read softened context.
    // Tokens are rebuilt on the record so gradients reach earlier groups
    // through the backcast residual.
    gating::TapedTokens taped = gating::project_tokens(x_l, group.gate, tape);
    std::vector<diff::Value> thetas = thetas_prev;
    for (std::size_t g : act.activated) {
        gating::AttentionResult att =
            gating::input_attention(thetas_prev[g], taped, group.gate, g, tape);
        thetas[g] = learner_embed(group.learners[g], att.pooled, tape);
    }
    thetas = comms::communicate(thetas, act.activated, group.comm, training, rng, tape);

    // Stages 4-5: predict per winner, average over G with absent learners
    // contributing zero, and pass the backcast residual on.
    diff::Value back_sum, fore_sum;
    for (std::size_t g : act.activated) {
        auto [bc, fc] = learner_predict(group.learners[g], thetas[g], tape);
        res.trace.learner_backcasts[g] = bc.values();
        res.trace.learner_forecasts[g] = fc.values();
        back_sum = back_sum.valid() ? diff::add(back_sum, bc) : bc;
        fore_sum = fore_sum.valid() ? diff::add(fore_sum, fc) : fc;
    }
    double inv_g = 1.0 / static_cast<double>(g_count);
    res.backcast = diff::scale(back_sum, inv_g);
    res.forecast = diff::scale(fore_sum, inv_g);
    res.residual = diff::sub(x_l, res.backcast);
    res.thetas_next = std::move(thetas);

    res.trace.backcast = res.backcast.values();
    res.trace.forecast = res.forecast.values();
    res.trace.residual = res.residual.values();
    return res;
}

ForwardResult model_forward(Model& model, std::span<const double> x, const ForwardOptions& opts,
                            diff::Rng& rng, diff::Tape& tape) {
    const ModelConfig& cfg = model.config;
    if (x.size() != cfg.lookback) {
        throw std::invalid_argument("model_forward: input length " + std::to_string(x.size()) +
                                    " does not match lookback " + std::to_string(cfg.lookback));
    }
    if (opts.pinned_activations != nullptr &&
        opts.pinned_activations->size() != cfg.groups) {
        throw std::invalid_argument("model_forward: pinned activations cover " +
                                    std::to_string(opts.pinned_activations->size()) +
                                    " groups, model has " + std::to_string(cfg.groups));
    }

    diff::Value x_l = tape.constant(diff::Array::row(std::vector<double>(x.begin(), x.end())));
    std::vector<diff::Value> thetas;
    for (auto& th : model.initial_contexts) thetas.push_back(tape.leaf(th));

    ForwardResult out;
    diff::Value total;
    for (std::size_t l = 0; l < cfg.groups; ++l) {
        const std::vector<std::size_t>* pinned =
            opts.pinned_activations != nullptr ? &(*opts.pinned_activations)[l] : nullptr;
        GroupResult gr = group_forward(model.groups[l], l, cfg.topk, x_l, thetas, opts.training,
                                       pinned, rng, tape);
        total = total.valid() ? diff::add(total, gr.forecast) : gr.forecast;
        x_l = gr.residual;
        thetas = std::move(gr.thetas_next);
        out.traces.push_back(std::move(gr.trace));
    }
    out.forecast = total;
    return out;
}

std::vector<double> forecast_values(Model& model, std::span<const double> x, diff::Rng& rng) {
    diff::Tape tape;
    ForwardOptions opts;
    return model_forward(model, x, opts, rng, tape).forecast.values();
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

std::string config_to_json(const ModelConfig& c) {
    nlohmann::ordered_json j;
    j["groups"] = c.groups;
    j["learners"] = c.learners;
    j["topk"] = c.topk;
    j["layers"] = c.layers;
    j["hidden_width"] = c.hidden_width;
    j["context_width"] = c.context_width;
    j["key_width"] = c.key_width;
    j["value_width"] = c.value_width;
    j["comm_width"] = c.comm_width;
    j["alpha"] = c.alpha;
    j["comm_dropout"] = c.comm_dropout;
    j["trend_degree"] = c.trend_degree;
    j["mode"] = mode_name(c.mode);
    j["lookback"] = c.lookback;
    j["horizon"] = c.horizon;
    j["seed"] = c.seed;
    return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ModelConfig c;
    c.groups = j.at("groups").get<std::size_t>();
    c.learners = j.at("learners").get<std::size_t>();
    c.topk = j.at("topk").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.hidden_width = j.at("hidden_width").get<std::size_t>();
    c.context_width = j.at("context_width").get<std::size_t>();
    c.key_width = j.at("key_width").get<std::size_t>();
    c.value_width = j.at("value_width").get<std::size_t>();
    c.comm_width = j.at("comm_width").get<std::size_t>();
    c.alpha = j.at("alpha").get<double>();
    c.comm_dropout = j.at("comm_dropout").get<double>();
    c.trend_degree = j.at("trend_degree").get<std::size_t>();
    c.mode = mode_from_name(j.at("mode").get<std::string>());
    c.lookback = j.at("lookback").get<std::size_t>();
    c.horizon = j.at("horizon").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

namespace {

constexpr char kMagic[8] = {'I', 'D', 'E', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

void save_checkpoint(Model& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write(kMagic, sizeof(kMagic));
    std::uint32_t ver = kVersion;
    os.write(reinterpret_cast<const char*>(&ver), sizeof(ver));

    std::string cfg = config_to_json(model.config);
    write_u64(os, cfg.size());
    os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

    auto params = model.parameters();
    auto names = model.parameter_names();
    write_u64(os, params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        write_u64(os, names[i].size());
        os.write(names[i].data(), static_cast<std::streamsize>(names[i].size()));
        write_u64(os, params[i]->rows());
        write_u64(os, params[i]->cols());
        os.write(reinterpret_cast<const char*>(params[i]->values.data()),
                 static_cast<std::streamsize>(params[i]->values.size() * sizeof(double)));
    }
    if (!os) throw std::runtime_error("failed writing checkpoint: " + path);
}

Model load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("not an IDEA checkpoint: " + path);
    }
    std::uint32_t ver = 0;
    is.read(reinterpret_cast<char*>(&ver), sizeof(ver));
    if (ver != kVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(ver));
    }

    std::string cfg(read_u64(is), '\0');
    is.read(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    Model model = init_model(config_from_json(cfg));

    auto params = model.parameters();
    auto names = model.parameter_names();
    std::uint64_t count = read_u64(is);
    if (count != params.size()) {
        throw std::runtime_error("checkpoint holds " + std::to_string(count) +
                                 " arrays, config expects " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        std::string name(read_u64(is), '\0');
        is.read(name.data(), static_cast<std::streamsize>(name.size()));
        std::uint64_t rows = read_u64(is), cols = read_u64(is);
        if (name != names[i] || rows != params[i]->rows() || cols != params[i]->cols()) {
            throw std::runtime_error("checkpoint array '" + name + "' (" + std::to_string(rows) +
                                     "x" + std::to_string(cols) + ") does not match expected '" +
                                     names[i] + "' (" + diff::shape_str(params[i]->shape) + ")");
        }
        is.read(reinterpret_cast<char*>(params[i]->values.data()),
                static_cast<std::streamsize>(params[i]->values.size() * sizeof(double)));
    }
    if (!is) throw std::runtime_error("truncated checkpoint: " + path);
    return model;
}

}  // namespace idea::model
