#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "idea/array.hpp"

namespace idea::diff {

class Tape;

enum class OpKind {
    Leaf,          // external parameter or owned constant
    MatMul,        // (m x k) . (k x n)
    Add,           // elementwise, equal shapes
    Sub,
    Mul,
    Div,
    Scale,         // multiply by compile-time constant scalar
    AddScalar,     // add compile-time constant scalar
    Relu,
    Abs,
    SoftmaxRows,   // softmax over the last axis, per row
    MeanAxis,      // mean over axis 0 (-> 1xN) or axis 1 (-> Mx1)
    Concat,        // along axis 0 or 1
    Slice,         // contiguous range along axis 0 or 1
    Transpose,
    StopGradient,  // copies values, blocks gradient flow
};

const char* op_name(OpKind kind);

/// One primitive application in a ComputationRecord.
struct Step {
    OpKind kind = OpKind::Leaf;
    int a = -1, b = -1;  // input step indices
    Shape shape{1, 1};
    std::vector<double> values;
    std::vector<double> grad;   // sized lazily during backward
    bool needs_grad = false;    // reachable from a requires_grad leaf
    double scalar = 0.0;        // Scale / AddScalar
    int axis = 0;               // MeanAxis / Concat / Slice
    std::size_t start = 0;      // Slice
    std::size_t len = 0;        // Slice
    Array* leaf = nullptr;      // Leaf bound to an external array, else null
};

/// Handle to one step's output on a tape.
class Value {
public:
    Value() = default;
    Value(Tape* tape, int index) : tape_(tape), index_(index) {}

    const Shape& shape() const;
    std::size_t rows() const { return shape()[0]; }
    std::size_t cols() const { return shape()[1]; }
    const std::vector<double>& values() const;
    /// Value of a 1x1 output.
    double scalar() const;

    Tape* tape() const { return tape_; }
    int index() const { return index_; }
    bool valid() const { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    int index_ = -1;
};

/// Define-by-run ComputationRecord: an ordered sequence of primitive
/// applications. Steps are appended in topological order by construction;
/// replaying the record from its leaves reproduces every output
/// bit-for-bit. One tape is owned by one logical thread for its lifetime.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Bind an external array as a leaf. Repeated binds of the same array
    /// return the same step. Values are copied at bind time.
    Value leaf(Array& a);

    /// Owned constant leaf (never receives gradient).
    Value constant(Array a);
    Value constant_row(std::span<const double> vals);

    std::size_t size() const { return steps_.size(); }
    const Step& step(int i) const { return steps_[static_cast<std::size_t>(i)]; }

    /// Propagates d(loss)/d(step) to every step and accumulates into the
    /// bound arrays' `grad` for leaves with requires_grad. `loss` must be a
    /// 1x1 output of this tape.
    void backward(Value loss);

    /// Recompute all step values from the leaves in record order.
    void replay();

    /// Capture the forward values of every StopGradient step, in creation
    /// order, into `sink` (used by numeric gradient checks).
    void capture_stops(std::vector<std::vector<double>>* sink) { stop_capture_ = sink; }

    /// Override StopGradient outputs with previously captured values, in
    /// creation order. Turns each stopped subtree into a constant so that
    /// central finite differences measure exactly the function the
    /// backward pass differentiates.
    void replay_stops(const std::vector<std::vector<double>>* src) {
        stop_replay_ = src;
        stop_replay_pos_ = 0;
    }

    friend class Value;
    friend Value matmul(Value a, Value b);
    friend Value add(Value a, Value b);
    friend Value sub(Value a, Value b);
    friend Value mul(Value a, Value b);
    friend Value div(Value a, Value b);
    friend Value scale(Value a, double c);
    friend Value add_scalar(Value a, double c);
    friend Value relu(Value a);
    friend Value abs(Value a);
    friend Value softmax_rows(Value a);
    friend Value mean_axis(Value a, int axis);
    friend Value concat(Value a, Value b, int axis);
    friend Value slice(Value a, int axis, std::size_t start, std::size_t len);
    friend Value transpose(Value a);
    friend Value stop_gradient(Value a);

private:
    Value push(Step s);
    void eval(Step& s);

    std::vector<Step> steps_;
    std::vector<std::pair<const Array*, int>> leaf_index_;
    std::vector<std::vector<double>>* stop_capture_ = nullptr;
    const std::vector<std::vector<double>>* stop_replay_ = nullptr;
    std::size_t stop_replay_pos_ = 0;
};

Value matmul(Value a, Value b);
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value div(Value a, Value b);
Value scale(Value a, double c);
Value add_scalar(Value a, double c);
Value relu(Value a);
Value abs(Value a);
Value softmax_rows(Value a);
Value mean_axis(Value a, int axis);
Value concat(Value a, Value b, int axis);
Value slice(Value a, int axis, std::size_t start, std::size_t len);
Value transpose(Value a);
Value stop_gradient(Value a);

}  // namespace idea::diff
