#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "idea/array.hpp"
#include "idea/basis.hpp"
#include "idea/comms.hpp"
#include "idea/gating.hpp"
#include "idea/rng.hpp"
#include "idea/tape.hpp"

namespace idea::model {

enum class Mode { Interpretable, Generic };

const char* mode_name(Mode m);
Mode mode_from_name(const std::string& name);

/// Structural hyperparameters of the full stack.
struct ModelConfig {
    std::size_t groups = 4;          // L
    std::size_t learners = 3;        // G
    std::size_t topk = 2;            // k
    std::size_t layers = 4;          // M fully-connected layers per learner
    std::size_t hidden_width = 256;  // w
    std::size_t context_width = 64;  // D
    std::size_t key_width = 64;      // d_k
    std::size_t value_width = 64;    // d_v
    std::size_t comm_width = 64;     // d_c
    double alpha = 0.1;              // communication softening
    double comm_dropout = 0.5;       // rho
    std::size_t trend_degree = 2;    // p
    Mode mode = Mode::Interpretable;
    std::size_t lookback = 0;        // t
    std::size_t horizon = 0;         // H
    std::uint64_t seed = 0;

    /// Throws listing every violated constraint.
    void validate() const;
};

/// One modular sub-network: M ReLU layers embedding the pooled input into a
/// width-D context, then two linear heads emitting basis coefficients.
struct BaseLearner {
    basis::Kind kind = basis::Kind::Generic;
    basis::BasisSpec spec;
    basis::BasisPair basis_pair;
    std::vector<diff::Array> fc_weights;
    std::vector<diff::Array> fc_biases;
    diff::Array head_backcast_w, head_backcast_b;
    diff::Array head_forecast_w, head_forecast_b;
};

struct Group {
    gating::GatingParams gate;
    comms::CommParams comm;
    std::vector<BaseLearner> learners;
};

struct Model {
    ModelConfig config;
    std::vector<diff::Array> initial_contexts;  // theta_0 per learner, 1 x D
    std::vector<Group> groups;

    /// All trainable arrays in a fixed enumeration order (the checkpoint
    /// order). Names parallel the pointers.
    std::vector<diff::Array*> parameters();
    std::vector<std::string> parameter_names() const;
};

Model init_model(const ModelConfig& config, diff::Rng& rng);
Model init_model(const ModelConfig& config);  // rng derived from config.seed

/// Everything one group did on one sample.
struct GroupTrace {
    std::size_t group = 0;
    std::vector<double> input;                           // x_l
    gating::ActivationRecord activation;
    std::vector<std::vector<double>> learner_backcasts;  // per learner; empty if inactive
    std::vector<std::vector<double>> learner_forecasts;
    std::vector<double> backcast;                        // group xhat_l
    std::vector<double> forecast;                        // group yhat_l
    std::vector<double> residual;                        // x_{l+1}
};

struct ForwardOptions {
    bool training = false;
    /// When set, the activated set per group is taken from here instead of
    /// the competition. Used by gradient checks, which must hold the hard
    /// selection fixed while probing.
    const std::vector<std::vector<std::size_t>>* pinned_activations = nullptr;
};

struct GroupResult {
    GroupTrace trace;
    diff::Value backcast;
    diff::Value forecast;
    diff::Value residual;
    std::vector<diff::Value> thetas_next;
};

diff::Value learner_embed(BaseLearner& learner, diff::Value pooled, diff::Tape& tape);

std::pair<diff::Value, diff::Value> learner_predict(BaseLearner& learner, diff::Value theta,
                                                    diff::Tape& tape);

GroupResult group_forward(Group& group, std::size_t group_index, std::size_t topk,
                          diff::Value x_l, const std::vector<diff::Value>& thetas_prev,
                          bool training, const std::vector<std::size_t>* pinned, diff::Rng& rng,
                          diff::Tape& tape);

struct ForwardResult {
    diff::Value forecast;  // 1 x H
    std::vector<GroupTrace> traces;
};

ForwardResult model_forward(Model& model, std::span<const double> x, const ForwardOptions& opts,
                            diff::Rng& rng, diff::Tape& tape);

/// Plain-number forecast for inference paths.
std::vector<double> forecast_values(Model& model, std::span<const double> x, diff::Rng& rng);

/// Checkpoint container: config, seed and all parameter arrays with shape
/// headers; values round-trip bit-exact (raw IEEE doubles, little-endian).
void save_checkpoint(Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& json_text);

}  // namespace idea::model
