#pragma once

#include <cstddef>
#include <utility>

#include "idea/array.hpp"
#include "idea/tape.hpp"

namespace idea::basis {

enum class Kind { Trend, Seasonality, Generic };

const char* kind_name(Kind k);

/// Dimensioning contract for one learner's projection machinery.
/// Coefficient widths per direction:
///   Trend        p + 1
///   Seasonality  2*floor(H/2 - 1) + 1
///   Generic      t for the backcast head, H for the forecast head
struct BasisSpec {
    Kind kind = Kind::Generic;
    std::size_t degree = 2;            // Trend only
    std::size_t backcast_length = 1;   // t
    std::size_t forecast_length = 1;   // H

    std::size_t backcast_dim() const;
    std::size_t forecast_dim() const;
};

std::size_t seasonality_harmonics(std::size_t horizon);  // floor(H/2 - 1)

/// Monomial columns (time/length)^j, j = 0..p, on the grid
/// t = [0, ..., length-1] / length. Constant, never trainable.
diff::Array make_trend_basis(std::size_t degree, std::size_t length);

/// Columns [1, cos(2*pi*j*t)..., sin(2*pi*j*t)...] for j = 1..floor(H/2-1)
/// on the grid t = [0, ..., length-1] / length. The harmonic count is set by
/// the forecast horizon H even when the matrix is evaluated on the backcast
/// grid, so both directions share one coefficient width.
diff::Array make_seasonality_basis(std::size_t horizon, std::size_t length);

/// Constant projection matrices for one spec, stored pre-transposed
/// (coefficient dim x output length) so a row vector of coefficients
/// multiplies directly. Generic needs no matrices.
struct BasisPair {
    diff::Array backcast;  // dim_b x t   (empty for Generic)
    diff::Array forecast;  // dim_f x H
};

BasisPair make_basis_pair(const BasisSpec& spec);

/// Projects coefficient rows to (backcast, forecast). Generic is the
/// identity; typed kinds multiply by the constant basis matrices, which
/// enter the record as leaves without gradients.
std::pair<diff::Value, diff::Value> project(diff::Value theta_b, diff::Value theta_f,
                                            const BasisSpec& spec, const BasisPair& pair,
                                            diff::Tape& tape);

/// Plain-number convenience used outside any record.
std::pair<std::vector<double>, std::vector<double>> project_values(
    const std::vector<double>& theta_b, const std::vector<double>& theta_f,
    const BasisSpec& spec);

}  // namespace idea::basis
