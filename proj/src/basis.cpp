#include "idea/basis.hpp"

#include <cmath>
#include <stdexcept>

namespace idea::basis {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

const char* kind_name(Kind k) {
    switch (k) {
        case Kind::Trend: return "trend";
        case Kind::Seasonality: return "seasonality";
        case Kind::Generic: return "generic";
    }
    return "?";
}

std::size_t seasonality_harmonics(std::size_t horizon) {
    if (horizon < 4) {
        throw std::invalid_argument("seasonality basis: horizon " + std::to_string(horizon) +
                                    " < 4 leaves no harmonics");
    }
    return horizon / 2 - 1;
}

std::size_t BasisSpec::backcast_dim() const {
    switch (kind) {
        case Kind::Trend: return degree + 1;
        case Kind::Seasonality: return 2 * seasonality_harmonics(forecast_length) + 1;
        case Kind::Generic: return backcast_length;
    }
    return 0;
}

std::size_t BasisSpec::forecast_dim() const {
    switch (kind) {
        case Kind::Trend: return degree + 1;
        case Kind::Seasonality: return 2 * seasonality_harmonics(forecast_length) + 1;
        case Kind::Generic: return forecast_length;
    }
    return 0;
}

diff::Array make_trend_basis(std::size_t degree, std::size_t length) {
    if (length < 1) throw std::invalid_argument("trend basis: length must be positive");
    if (degree >= length) {
        throw std::invalid_argument("trend basis: degree " + std::to_string(degree) +
                                    " >= length " + std::to_string(length) +
                                    " over-parameterizes the fit");
    }
    diff::Array m(length, degree + 1);
    for (std::size_t i = 0; i < length; ++i) {
        double t = static_cast<double>(i) / static_cast<double>(length);
        double pw = 1.0;
        for (std::size_t j = 0; j <= degree; ++j) {
            m.at(i, j) = pw;
            pw *= t;
        }
    }
    return m;
}

diff::Array make_seasonality_basis(std::size_t horizon, std::size_t length) {
    if (length < 1) throw std::invalid_argument("seasonality basis: length must be positive");
    std::size_t h = seasonality_harmonics(horizon);
    diff::Array m(length, 2 * h + 1);
    for (std::size_t i = 0; i < length; ++i) {
        double t = static_cast<double>(i) / static_cast<double>(length);
        m.at(i, 0) = 1.0;
        for (std::size_t j = 1; j <= h; ++j) {
            m.at(i, j) = std::cos(kTwoPi * static_cast<double>(j) * t);
            m.at(i, h + j) = std::sin(kTwoPi * static_cast<double>(j) * t);
        }
    }
    return m;
}

namespace {

diff::Array transposed(const diff::Array& a) {
    diff::Array out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
    return out;
}

}  // namespace

BasisPair make_basis_pair(const BasisSpec& spec) {
    BasisPair pair;
    switch (spec.kind) {
        case Kind::Generic:
            break;
        case Kind::Trend:
            pair.backcast = transposed(make_trend_basis(spec.degree, spec.backcast_length));
            pair.forecast = transposed(make_trend_basis(spec.degree, spec.forecast_length));
            break;
        case Kind::Seasonality:
            pair.backcast =
                transposed(make_seasonality_basis(spec.forecast_length, spec.backcast_length));
            pair.forecast =
                transposed(make_seasonality_basis(spec.forecast_length, spec.forecast_length));
            break;
    }
    return pair;
}

namespace {

void check_dim(const char* which, std::size_t got, std::size_t want, const BasisSpec& spec) {
    if (got != want) {
        throw std::invalid_argument(std::string("project: ") + which + " coefficients have " +
                                    std::to_string(got) + " entries, " + kind_name(spec.kind) +
                                    " spec wants " + std::to_string(want));
    }
}

}  // namespace

std::pair<diff::Value, diff::Value> project(diff::Value theta_b, diff::Value theta_f,
                                            const BasisSpec& spec, const BasisPair& pair,
                                            diff::Tape& tape) {
    check_dim("backcast", theta_b.cols(), spec.backcast_dim(), spec);
    check_dim("forecast", theta_f.cols(), spec.forecast_dim(), spec);
    if (spec.kind == Kind::Generic) return {theta_b, theta_f};
    diff::Value bmat = tape.constant(pair.backcast);
    diff::Value fmat = tape.constant(pair.forecast);
    return {diff::matmul(theta_b, bmat), diff::matmul(theta_f, fmat)};
}

std::pair<std::vector<double>, std::vector<double>> project_values(
    const std::vector<double>& theta_b, const std::vector<double>& theta_f,
    const BasisSpec& spec) {
    diff::Tape tape;
    BasisPair pair = make_basis_pair(spec);
    auto [b, f] = project(tape.constant(diff::Array::row(theta_b)),
                          tape.constant(diff::Array::row(theta_f)), spec, pair, tape);
    return {b.values(), f.values()};
}

}  // namespace idea::basis
