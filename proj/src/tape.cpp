#include "idea/tape.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace idea::diff {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

ConstMatMap as_mat(const std::vector<double>& v, const Shape& s) {
    return ConstMatMap(v.data(), static_cast<Eigen::Index>(s[0]), static_cast<Eigen::Index>(s[1]));
}

MatMap as_mat(std::vector<double>& v, const Shape& s) {
    return MatMap(v.data(), static_cast<Eigen::Index>(s[0]), static_cast<Eigen::Index>(s[1]));
}

[[noreturn]] void shape_error(OpKind kind, const Shape& a, const Shape& b) {
    throw std::invalid_argument(std::string(op_name(kind)) + ": incompatible shapes " +
                                shape_str(a) + " and " + shape_str(b));
}

void check_axis(OpKind kind, int axis) {
    if (axis != 0 && axis != 1) {
        throw std::invalid_argument(std::string(op_name(kind)) + ": axis " +
                                    std::to_string(axis) + " out of range for rank-2 array");
    }
}

void check_same_tape(Value a, Value b, OpKind kind) {
    if (a.tape() == nullptr || a.tape() != b.tape()) {
        throw std::invalid_argument(std::string(op_name(kind)) +
                                    ": inputs belong to different records");
    }
}

}  // namespace

const char* op_name(OpKind kind) {
    switch (kind) {
        case OpKind::Leaf: return "leaf";
        case OpKind::MatMul: return "matmul";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "subtract";
        case OpKind::Mul: return "multiply";
        case OpKind::Div: return "divide";
        case OpKind::Scale: return "scale";
        case OpKind::AddScalar: return "add_scalar";
        case OpKind::Relu: return "relu";
        case OpKind::Abs: return "abs";
        case OpKind::SoftmaxRows: return "softmax";
        case OpKind::MeanAxis: return "mean";
        case OpKind::Concat: return "concat";
        case OpKind::Slice: return "slice";
        case OpKind::Transpose: return "transpose";
        case OpKind::StopGradient: return "stop_gradient";
    }
    return "?";
}

const Shape& Value::shape() const { return tape_->step(index_).shape; }
const std::vector<double>& Value::values() const { return tape_->step(index_).values; }

double Value::scalar() const {
    const Step& s = tape_->step(index_);
    if (numel(s.shape) != 1) {
        throw std::invalid_argument("Value::scalar: output has shape " + shape_str(s.shape));
    }
    return s.values[0];
}

Value Tape::leaf(Array& a) {
    for (const auto& [arr, idx] : leaf_index_) {
        if (arr == &a) return Value(this, idx);
    }
    Step s;
    s.kind = OpKind::Leaf;
    s.shape = a.shape;
    s.values = a.values;
    s.needs_grad = a.requires_grad;
    s.leaf = &a;
    Value v = push(std::move(s));
    leaf_index_.emplace_back(&a, v.index());
    return v;
}

Value Tape::constant(Array a) {
    Step s;
    s.kind = OpKind::Leaf;
    s.shape = a.shape;
    s.values = std::move(a.values);
    s.needs_grad = false;
    return push(std::move(s));
}

Value Tape::constant_row(std::span<const double> vals) {
    return constant(Array::row(std::vector<double>(vals.begin(), vals.end())));
}

Value Tape::push(Step s) {
    eval(s);
    steps_.push_back(std::move(s));
    return Value(this, static_cast<int>(steps_.size()) - 1);
}

void Tape::eval(Step& s) {
    if (s.kind == OpKind::Leaf) {
        // bound leaves refresh from their array; owned constants keep the
        // values they were created with
        if (s.leaf != nullptr) s.values = s.leaf->values;
        return;
    }
    const Step* A = s.a >= 0 ? &steps_[static_cast<std::size_t>(s.a)] : nullptr;
    const Step* B = s.b >= 0 ? &steps_[static_cast<std::size_t>(s.b)] : nullptr;
    s.values.assign(numel(s.shape), 0.0);
    switch (s.kind) {
        case OpKind::Leaf:
            break;
        case OpKind::MatMul:
            as_mat(s.values, s.shape).noalias() =
                as_mat(A->values, A->shape) * as_mat(B->values, B->shape);
            break;
        case OpKind::Add:
            for (std::size_t i = 0; i < s.values.size(); ++i)
                s.values[i] = A->values[i] + B->values[i];
            break;
        case OpKind::Sub:
            for (std::size_t i = 0; i < s.values.size(); ++i)
                s.values[i] = A->values[i] - B->values[i];
            break;
        case OpKind::Mul:
            for (std::size_t i = 0; i < s.values.size(); ++i)
                s.values[i] = A->values[i] * B->values[i];
            break;
        case OpKind::Div:
            for (std::size_t i = 0; i < s.values.size(); ++i)
                s.values[i] = A->values[i] / B->values[i];
            break;
        case OpKind::Scale:
            for (std::size_t i = 0; i < s.values.size(); ++i)
                s.values[i] = A->values[i] * s.scalar;
            break;
        case OpKind::AddScalar:
            for (std::size_t i = 0; i < s.values.size(); ++i)
                s.values[i] = A->values[i] + s.scalar;
            break;
        case OpKind::Relu:
            for (std::size_t i = 0; i < s.values.size(); ++i)
                s.values[i] = A->values[i] > 0.0 ? A->values[i] : 0.0;
            break;
        case OpKind::Abs:
            for (std::size_t i = 0; i < s.values.size(); ++i)
                s.values[i] = std::fabs(A->values[i]);
            break;
        case OpKind::SoftmaxRows: {
            std::size_t r = s.shape[0], c = s.shape[1];
            for (std::size_t i = 0; i < r; ++i) {
                const double* x = A->values.data() + i * c;
                double* w = s.values.data() + i * c;
                double m = x[0];
                for (std::size_t j = 1; j < c; ++j) m = std::max(m, x[j]);
                if (!std::isfinite(m)) {
                    throw std::invalid_argument("softmax: non-finite input in row " +
                                                std::to_string(i));
                }
                double sum = 0.0;
                for (std::size_t j = 0; j < c; ++j) {
                    w[j] = std::exp(x[j] - m);
                    sum += w[j];
                }
                for (std::size_t j = 0; j < c; ++j) w[j] /= sum;
            }
            break;
        }
        case OpKind::MeanAxis: {
            std::size_t r = A->shape[0], c = A->shape[1];
            if (s.axis == 0) {
                for (std::size_t j = 0; j < c; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < r; ++i) acc += A->values[i * c + j];
                    s.values[j] = acc / static_cast<double>(r);
                }
            } else {
                for (std::size_t i = 0; i < r; ++i) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < c; ++j) acc += A->values[i * c + j];
                    s.values[i] = acc / static_cast<double>(c);
                }
            }
            break;
        }
        case OpKind::Concat: {
            if (s.axis == 0) {
                std::copy(A->values.begin(), A->values.end(), s.values.begin());
                std::copy(B->values.begin(), B->values.end(),
                          s.values.begin() + static_cast<std::ptrdiff_t>(A->values.size()));
            } else {
                std::size_t ca = A->shape[1], cb = B->shape[1];
                for (std::size_t i = 0; i < s.shape[0]; ++i) {
                    std::copy_n(A->values.begin() + static_cast<std::ptrdiff_t>(i * ca), ca,
                                s.values.begin() + static_cast<std::ptrdiff_t>(i * (ca + cb)));
                    std::copy_n(B->values.begin() + static_cast<std::ptrdiff_t>(i * cb), cb,
                                s.values.begin() +
                                    static_cast<std::ptrdiff_t>(i * (ca + cb) + ca));
                }
            }
            break;
        }
        case OpKind::Slice: {
            std::size_t c = A->shape[1];
            if (s.axis == 0) {
                std::copy_n(A->values.begin() + static_cast<std::ptrdiff_t>(s.start * c),
                            s.len * c, s.values.begin());
            } else {
                for (std::size_t i = 0; i < s.shape[0]; ++i) {
                    std::copy_n(A->values.begin() + static_cast<std::ptrdiff_t>(i * c + s.start),
                                s.len, s.values.begin() + static_cast<std::ptrdiff_t>(i * s.len));
                }
            }
            break;
        }
        case OpKind::Transpose: {
            std::size_t r = A->shape[0], c = A->shape[1];
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) s.values[j * r + i] = A->values[i * c + j];
            break;
        }
        case OpKind::StopGradient:
            if (stop_replay_ != nullptr) {
                if (stop_replay_pos_ >= stop_replay_->size()) {
                    throw std::runtime_error("stop_gradient replay: ran out of captured values");
                }
                const auto& frozen = (*stop_replay_)[stop_replay_pos_++];
                if (frozen.size() != s.values.size()) {
                    throw std::runtime_error("stop_gradient replay: captured size mismatch");
                }
                s.values = frozen;
            } else {
                s.values = A->values;
            }
            if (stop_capture_ != nullptr) stop_capture_->push_back(s.values);
            break;
    }
}

namespace {

Step binary(OpKind kind, Value a, Value b, const Shape& out) {
    Step s;
    s.kind = kind;
    s.a = a.index();
    s.b = b.index();
    s.shape = out;
    s.needs_grad = a.tape()->step(a.index()).needs_grad || b.tape()->step(b.index()).needs_grad;
    return s;
}

Step unary(OpKind kind, Value a, const Shape& out) {
    Step s;
    s.kind = kind;
    s.a = a.index();
    s.shape = out;
    s.needs_grad = a.tape()->step(a.index()).needs_grad;
    return s;
}

Step elementwise(OpKind kind, Value a, Value b) {
    check_same_tape(a, b, kind);
    if (a.shape() != b.shape()) shape_error(kind, a.shape(), b.shape());
    return binary(kind, a, b, a.shape());
}

}  // namespace

Value matmul(Value a, Value b) {
    check_same_tape(a, b, OpKind::MatMul);
    if (a.cols() != b.rows()) shape_error(OpKind::MatMul, a.shape(), b.shape());
    return a.tape()->push(binary(OpKind::MatMul, a, b, Shape{a.rows(), b.cols()}));
}

Value add(Value a, Value b) { return a.tape()->push(elementwise(OpKind::Add, a, b)); }
Value sub(Value a, Value b) { return a.tape()->push(elementwise(OpKind::Sub, a, b)); }
Value mul(Value a, Value b) { return a.tape()->push(elementwise(OpKind::Mul, a, b)); }
Value div(Value a, Value b) { return a.tape()->push(elementwise(OpKind::Div, a, b)); }

Value scale(Value a, double c) {
    Step s = unary(OpKind::Scale, a, a.shape());
    s.scalar = c;
    return a.tape()->push(std::move(s));
}

Value add_scalar(Value a, double c) {
    Step s = unary(OpKind::AddScalar, a, a.shape());
    s.scalar = c;
    return a.tape()->push(std::move(s));
}

Value relu(Value a) { return a.tape()->push(unary(OpKind::Relu, a, a.shape())); }
Value abs(Value a) { return a.tape()->push(unary(OpKind::Abs, a, a.shape())); }
Value softmax_rows(Value a) { return a.tape()->push(unary(OpKind::SoftmaxRows, a, a.shape())); }

Value mean_axis(Value a, int axis) {
    check_axis(OpKind::MeanAxis, axis);
    Shape out = axis == 0 ? Shape{1, a.cols()} : Shape{a.rows(), 1};
    Step s = unary(OpKind::MeanAxis, a, out);
    s.axis = axis;
    return a.tape()->push(std::move(s));
}

Value concat(Value a, Value b, int axis) {
    check_same_tape(a, b, OpKind::Concat);
    check_axis(OpKind::Concat, axis);
    Shape out;
    if (axis == 0) {
        if (a.cols() != b.cols()) shape_error(OpKind::Concat, a.shape(), b.shape());
        out = Shape{a.rows() + b.rows(), a.cols()};
    } else {
        if (a.rows() != b.rows()) shape_error(OpKind::Concat, a.shape(), b.shape());
        out = Shape{a.rows(), a.cols() + b.cols()};
    }
    Step s = binary(OpKind::Concat, a, b, out);
    s.axis = axis;
    return a.tape()->push(std::move(s));
}

Value slice(Value a, int axis, std::size_t start, std::size_t len) {
    check_axis(OpKind::Slice, axis);
    std::size_t extent = axis == 0 ? a.rows() : a.cols();
    if (len == 0 || start + len > extent) {
        throw std::invalid_argument("slice: range [" + std::to_string(start) + ", " +
                                    std::to_string(start + len) + ") out of bounds for shape " +
                                    shape_str(a.shape()) + " axis " + std::to_string(axis));
    }
    Shape out = axis == 0 ? Shape{len, a.cols()} : Shape{a.rows(), len};
    Step s = unary(OpKind::Slice, a, out);
    s.axis = axis;
    s.start = start;
    s.len = len;
    return a.tape()->push(std::move(s));
}

Value transpose(Value a) {
    return a.tape()->push(unary(OpKind::Transpose, a, Shape{a.cols(), a.rows()}));
}

Value stop_gradient(Value a) {
    Step s = unary(OpKind::StopGradient, a, a.shape());
    s.needs_grad = false;  // blocks reachability, not forward values
    return a.tape()->push(std::move(s));
}

void Tape::replay() {
    stop_replay_pos_ = 0;
    for (auto& s : steps_) eval(s);
}

void Tape::backward(Value loss) {
    if (loss.tape() != this) {
        throw std::invalid_argument("backward: loss was not produced by this record");
    }
    int root = loss.index();
    if (root < 0 || static_cast<std::size_t>(root) >= steps_.size()) {
        throw std::invalid_argument("backward: loss step index out of range");
    }
    if (numel(steps_[static_cast<std::size_t>(root)].shape) != 1) {
        throw std::invalid_argument("backward: loss has shape " +
                                    shape_str(steps_[static_cast<std::size_t>(root)].shape) +
                                    ", expected a scalar");
    }

    for (auto& s : steps_) s.grad.clear();
    auto grad_of = [&](int i) -> std::vector<double>& {
        Step& s = steps_[static_cast<std::size_t>(i)];
        if (s.grad.size() != s.values.size()) s.grad.assign(s.values.size(), 0.0);
        return s.grad;
    };

    grad_of(root)[0] = 1.0;

    for (int i = root; i >= 0; --i) {
        Step& s = steps_[static_cast<std::size_t>(i)];
        if (!s.needs_grad || s.grad.empty()) continue;
        Step* A = s.a >= 0 ? &steps_[static_cast<std::size_t>(s.a)] : nullptr;
        Step* B = s.b >= 0 ? &steps_[static_cast<std::size_t>(s.b)] : nullptr;
        switch (s.kind) {
            case OpKind::Leaf:
            case OpKind::StopGradient:
                break;
            case OpKind::MatMul: {
                if (A->needs_grad) {
                    as_mat(grad_of(s.a), A->shape).noalias() +=
                        as_mat(s.grad, s.shape) * as_mat(B->values, B->shape).transpose();
                }
                if (B->needs_grad) {
                    as_mat(grad_of(s.b), B->shape).noalias() +=
                        as_mat(A->values, A->shape).transpose() * as_mat(s.grad, s.shape);
                }
                break;
            }
            case OpKind::Add: {
                if (A->needs_grad) {
                    auto& ga = grad_of(s.a);
                    for (std::size_t j = 0; j < s.grad.size(); ++j) ga[j] += s.grad[j];
                }
                if (B->needs_grad) {
                    auto& gb = grad_of(s.b);
                    for (std::size_t j = 0; j < s.grad.size(); ++j) gb[j] += s.grad[j];
                }
                break;
            }
            case OpKind::Sub: {
                if (A->needs_grad) {
                    auto& ga = grad_of(s.a);
                    for (std::size_t j = 0; j < s.grad.size(); ++j) ga[j] += s.grad[j];
                }
                if (B->needs_grad) {
                    auto& gb = grad_of(s.b);
                    for (std::size_t j = 0; j < s.grad.size(); ++j) gb[j] -= s.grad[j];
                }
                break;
            }
            case OpKind::Mul: {
                if (A->needs_grad) {
                    auto& ga = grad_of(s.a);
                    for (std::size_t j = 0; j < s.grad.size(); ++j)
                        ga[j] += s.grad[j] * B->values[j];
                }
                if (B->needs_grad) {
                    auto& gb = grad_of(s.b);
                    for (std::size_t j = 0; j < s.grad.size(); ++j)
                        gb[j] += s.grad[j] * A->values[j];
                }
                break;
            }
            case OpKind::Div: {
                if (A->needs_grad) {
                    auto& ga = grad_of(s.a);
                    for (std::size_t j = 0; j < s.grad.size(); ++j)
                        ga[j] += s.grad[j] / B->values[j];
                }
                if (B->needs_grad) {
                    auto& gb = grad_of(s.b);
                    for (std::size_t j = 0; j < s.grad.size(); ++j)
                        gb[j] -= s.grad[j] * A->values[j] / (B->values[j] * B->values[j]);
                }
                break;
            }
            case OpKind::Scale: {
                auto& ga = grad_of(s.a);
                for (std::size_t j = 0; j < s.grad.size(); ++j) ga[j] += s.grad[j] * s.scalar;
                break;
            }
            case OpKind::AddScalar: {
                auto& ga = grad_of(s.a);
                for (std::size_t j = 0; j < s.grad.size(); ++j) ga[j] += s.grad[j];
                break;
            }
            case OpKind::Relu: {
                auto& ga = grad_of(s.a);
                for (std::size_t j = 0; j < s.grad.size(); ++j)
                    if (A->values[j] > 0.0) ga[j] += s.grad[j];
                break;
            }
            case OpKind::Abs: {
                auto& ga = grad_of(s.a);
                for (std::size_t j = 0; j < s.grad.size(); ++j) {
                    double x = A->values[j];
                    ga[j] += x > 0.0 ? s.grad[j] : (x < 0.0 ? -s.grad[j] : 0.0);
                }
                break;
            }
            case OpKind::SoftmaxRows: {
                // dL/dx_j = w_j * (g_j - sum_k g_k w_k), per row
                auto& ga = grad_of(s.a);
                std::size_t r = s.shape[0], c = s.shape[1];
                for (std::size_t row = 0; row < r; ++row) {
                    const double* w = s.values.data() + row * c;
                    const double* g = s.grad.data() + row * c;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < c; ++j) dot += g[j] * w[j];
                    for (std::size_t j = 0; j < c; ++j) ga[row * c + j] += w[j] * (g[j] - dot);
                }
                break;
            }
            case OpKind::MeanAxis: {
                auto& ga = grad_of(s.a);
                std::size_t r = A->shape[0], c = A->shape[1];
                if (s.axis == 0) {
                    double inv = 1.0 / static_cast<double>(r);
                    for (std::size_t i2 = 0; i2 < r; ++i2)
                        for (std::size_t j = 0; j < c; ++j) ga[i2 * c + j] += s.grad[j] * inv;
                } else {
                    double inv = 1.0 / static_cast<double>(c);
                    for (std::size_t i2 = 0; i2 < r; ++i2)
                        for (std::size_t j = 0; j < c; ++j) ga[i2 * c + j] += s.grad[i2] * inv;
                }
                break;
            }
            case OpKind::Concat: {
                std::size_t na = A->values.size();
                if (s.axis == 0) {
                    if (A->needs_grad) {
                        auto& ga = grad_of(s.a);
                        for (std::size_t j = 0; j < na; ++j) ga[j] += s.grad[j];
                    }
                    if (B->needs_grad) {
                        auto& gb = grad_of(s.b);
                        for (std::size_t j = 0; j < B->values.size(); ++j)
                            gb[j] += s.grad[na + j];
                    }
                } else {
                    std::size_t ca = A->shape[1], cb = B->shape[1];
                    for (std::size_t row = 0; row < s.shape[0]; ++row) {
                        if (A->needs_grad) {
                            auto& ga = grad_of(s.a);
                            for (std::size_t j = 0; j < ca; ++j)
                                ga[row * ca + j] += s.grad[row * (ca + cb) + j];
                        }
                        if (B->needs_grad) {
                            auto& gb = grad_of(s.b);
                            for (std::size_t j = 0; j < cb; ++j)
                                gb[row * cb + j] += s.grad[row * (ca + cb) + ca + j];
                        }
                    }
                }
                break;
            }
            case OpKind::Slice: {
                auto& ga = grad_of(s.a);
                std::size_t c = A->shape[1];
                if (s.axis == 0) {
                    for (std::size_t j = 0; j < s.grad.size(); ++j)
                        ga[s.start * c + j] += s.grad[j];
                } else {
                    for (std::size_t row = 0; row < s.shape[0]; ++row)
                        for (std::size_t j = 0; j < s.len; ++j)
                            ga[row * c + s.start + j] += s.grad[row * s.len + j];
                }
                break;
            }
            case OpKind::Transpose: {
                auto& ga = grad_of(s.a);
                std::size_t r = s.shape[0], c = s.shape[1];  // r x c = transposed shape
                for (std::size_t i2 = 0; i2 < r; ++i2)
                    for (std::size_t j = 0; j < c; ++j) ga[j * r + i2] += s.grad[i2 * c + j];
                break;
            }
        }
    }

    // Deposit leaf gradients into the bound arrays. Leaves never reached by
    // the sweep still get a zero-filled grad so that "no contribution" is
    // observable as exact zeros.
    for (auto& s : steps_) {
        if (s.kind == OpKind::Leaf && s.leaf != nullptr && s.leaf->requires_grad) {
            auto& g = s.leaf->ensure_grad();
            if (!s.grad.empty()) {
                for (std::size_t j = 0; j < g.size(); ++j) g[j] += s.grad[j];
            }
        }
    }
}

}  // namespace idea::diff
