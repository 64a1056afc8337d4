// tape machinery and the finite-difference gradient checker
#include "edenvfi/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace edenvfi {

void VarNode::accumulate(const Tensor& delta) {
    if (!delta.same_shape(value))
        throw ShapeError("gradient shape " + shape_str(delta.shape()) +
                         " does not match value shape " + shape_str(value.shape()));
    ensure_grad().add_(delta);
}

Tensor& VarNode::ensure_grad() {
    if (!grad.defined()) grad = Tensor::zeros(value.shape(), value.dtype());
    return grad;
}

Variable Variable::leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<VarNode>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->leaf = true;
    return Variable(std::move(n));
}

Tensor Variable::grad() const {
    if (n_->has_grad()) return n_->grad;
    return Tensor::zeros(n_->value.shape(), n_->value.dtype());
}

void Variable::zero_grad() {
    if (n_->has_grad()) n_->grad.zero_();
}

Variable Tape::emit(const char* op, Tensor value, bool needs_grad,
                    std::function<void(const Tensor&)> backward) {
    auto n = std::make_shared<VarNode>();
    n->value = std::move(value);
    n->leaf = false;
    if (recording_ && needs_grad) {
        n->requires_grad = true;
        n->tape_id = static_cast<int>(nodes_.size());
        nodes_.push_back(Node{op, n, std::move(backward)});
    }
    return Variable(std::move(n));
}

void Tape::backward(const Variable& root) {
    if (!root.defined()) throw ContractError("backward: undefined root");
    if (root.value().numel() != 1)
        throw ContractError("backward: root must be scalar, got shape " +
                            shape_str(root.value().shape()));
    // fresh pass for intermediates; leaves keep accumulating
    for (auto& n : nodes_) n.out->grad = Tensor();
    root.node()->ensure_grad().add_(Tensor::full({1}, 1.0, root.value().dtype())
                                        .reshaped(root.value().shape()));
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (!it->out->has_grad()) continue; // not reachable from the root
        it->backward(it->out->grad);
    }
}

double grad_check(const std::function<Variable(Tape&, const Variable&)>& f,
                  const Tensor& x0, double h, int max_coords, uint64_t sample_seed) {
    if (x0.dtype() != DType::f64)
        throw ContractError("grad_check requires a double-precision probe point");
    if (h <= 0.0) throw ContractError("grad_check step size must be positive");

    // analytic gradient
    Tensor analytic;
    {
        Tape tape;
        Variable x = Variable::leaf(x0.clone(), true);
        Variable y = f(tape, x);
        if (y.value().numel() != 1)
            throw ContractError("grad_check: f must return a scalar, got shape " +
                                shape_str(y.value().shape()));
        tape.backward(y);
        analytic = x.grad();
    }

    auto eval = [&](const Tensor& x) {
        Tape tape;
        tape.set_recording(false);
        Variable y = f(tape, Variable::leaf(x.clone(), false));
        return y.value().at(0);
    };

    std::vector<int64_t> coords(static_cast<size_t>(x0.numel()));
    std::iota(coords.begin(), coords.end(), 0);
    if (max_coords > 0 && max_coords < x0.numel()) {
        Rng rng(sample_seed);
        for (size_t i = coords.size() - 1; i > 0; --i) {
            size_t j = static_cast<size_t>(rng.next_u64() % (i + 1));
            std::swap(coords[i], coords[j]);
        }
        coords.resize(static_cast<size_t>(max_coords));
    }

    Tensor probe = x0.clone();
    double worst = 0.0;
    for (int64_t i : coords) {
        double xi = probe.at(i);
        probe.set(i, xi + h);
        double fp = eval(probe);
        probe.set(i, xi - h);
        double fm = eval(probe);
        probe.set(i, xi);
        double numeric = (fp - fm) / (2.0 * h);
        double exact = analytic.at(i);
        if (std::isnan(numeric) || std::isnan(exact))
            throw NumericError("grad_check: NaN at coordinate " + std::to_string(i));
        double denom = std::max({1.0, std::fabs(exact), std::fabs(numeric)});
        worst = std::max(worst, std::fabs(exact - numeric) / denom);
    }
    return worst;
}

} // namespace edenvfi
