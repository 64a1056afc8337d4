// reverse-mode differentiation tape and finite-difference gradient checker
#ifndef EDENVFI_AUTOGRAD_HPP
#define EDENVFI_AUTOGRAD_HPP

#include <functional>
#include <memory>
#include <vector>

#include "edenvfi/tensor.hpp"

namespace edenvfi {

class Tape;

// shared state behind a Variable handle; leaves (parameters, inputs) keep
// their gradient across tape clears, intermediates are owned by the tape
struct VarNode {
    Tensor value;
    Tensor grad;                 // undefined until first accumulation
    bool requires_grad = false;
    bool leaf = false;
    int tape_id = -1;            // node index on the recording tape, -1 for leaves

    bool has_grad() const { return grad.defined(); }
    void accumulate(const Tensor& delta);
    Tensor& ensure_grad();
};

// lightweight handle; copies alias the same node
class Variable {
public:
    Variable() = default;
    explicit Variable(std::shared_ptr<VarNode> n) : n_(std::move(n)) {}

    // creates a leaf whose gradient survives Tape::clear
    static Variable leaf(Tensor value, bool requires_grad);

    bool defined() const { return n_ != nullptr; }
    const Tensor& value() const { return n_->value; }
    Tensor& value() { return n_->value; }
    // zero tensor of value shape when no gradient has been accumulated yet
    Tensor grad() const;
    bool requires_grad() const { return n_->requires_grad; }
    bool is_leaf() const { return n_->leaf; }
    int tape_id() const { return n_->tape_id; }
    void zero_grad();

    const std::shared_ptr<VarNode>& node() const { return n_; }

private:
    std::shared_ptr<VarNode> n_;
};

// Straight-line reverse-mode tape. Gradient semantics:
//   - backward() zeroes every recorded intermediate gradient, seeds the root
//     with 1 and sweeps nodes in strict reverse insertion order;
//   - leaf gradients accumulate (+=) across backward calls, so a second
//     backward without zero_grad doubles leaf gradients while the root
//     reads 1 again; callers zero leaves explicitly between passes.
class Tape {
public:
    struct Node {
        const char* op;
        std::shared_ptr<VarNode> out;
        std::function<void(const Tensor&)> backward; // receives the output gradient
    };

    // records forward values only when recording is on; with it off the ops
    // still compute values, which is the inference fast path
    void set_recording(bool on) { recording_ = on; }
    bool recording() const { return recording_; }

    // creates the output variable for an op and registers its backward closure
    Variable emit(const char* op, Tensor value, bool needs_grad,
                  std::function<void(const Tensor&)> backward);

    void backward(const Variable& root);
    void clear() { nodes_.clear(); }
    size_t size() const { return nodes_.size(); }
    const Node& node(size_t i) const { return nodes_[i]; }

private:
    std::vector<Node> nodes_;
    bool recording_ = true;
};

// RAII recording toggle
class NoGrad {
public:
    explicit NoGrad(Tape& t) : tape_(t), prev_(t.recording()) { tape_.set_recording(false); }
    ~NoGrad() { tape_.set_recording(prev_); }

private:
    Tape& tape_;
    bool prev_;
};

// Max relative error between the analytic gradient of f at x0 and central
// differences (f(x+h e_i) - f(x-h e_i)) / 2h, relative denominator
// max(1, |analytic|, |numeric|). x0 must be f64. When max_coords > 0 only a
// deterministic sample of coordinates is probed (for expensive composites);
// 0 probes every coordinate.
double grad_check(const std::function<Variable(Tape&, const Variable&)>& f,
                  const Tensor& x0, double h = 1e-5, int max_coords = 0,
                  uint64_t sample_seed = 12345);

} // namespace edenvfi

#endif
