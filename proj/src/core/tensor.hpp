#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace stdrive::ag {

using Shape = std::vector<int>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d <= 0) throw std::invalid_argument("tensor dimension must be positive, got shape " + shape_str(s));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

[[noreturn]] inline void shape_error(const std::string& op, const std::string& detail) {
    throw std::invalid_argument(op + ": " + detail);
}

// Thread-local switch that disables recording of backward closures.
// Evaluation-only passes (accuracy sweeps, harvesting, map-free forwards)
// run inside a NoGradGuard.
inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// One recorded value in the computation graph. Creation order doubles as a
// topological order: a node is always created after its parents, so walking
// ids in descending order visits every consumer before its producer.
template <class T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    bool is_leaf = true;
    bool grad_set = false;  // leaf gradient populated by a backward pass
    bool visit_mark = false;
    std::uint64_t id = 0;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backprop;

    static std::uint64_t fresh_id() {
        static std::atomic<std::uint64_t> counter{1};
        return counter.fetch_add(1, std::memory_order_relaxed);
    }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

template <class T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node<T>> n) : n_(std::move(n)) {}

    static Tensor leaf(Shape shape, std::vector<T> data, bool requires_grad = false) {
        std::size_t n = shape_numel(shape);
        if (data.size() != n)
            shape_error("leaf", "data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
        auto node = std::make_shared<Node<T>>();
        node->shape = std::move(shape);
        node->value = std::move(data);
        node->requires_grad = requires_grad;
        node->id = Node<T>::fresh_id();
        return Tensor(std::move(node));
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::size_t n = shape_numel(shape);
        return leaf(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
    }

    static Tensor full(Shape shape, T v, bool requires_grad = false) {
        std::size_t n = shape_numel(shape);
        return leaf(std::move(shape), std::vector<T>(n, v), requires_grad);
    }

    static Tensor scalar(T v) { return leaf({1}, {v}); }

    bool valid() const { return static_cast<bool>(n_); }
    const Shape& shape() const { return n_->shape; }
    int dim(int i) const { return n_->shape.at(static_cast<std::size_t>(i)); }
    int ndim() const { return static_cast<int>(n_->shape.size()); }
    std::size_t size() const { return n_->value.size(); }

    std::span<const T> data() const { return {n_->value.data(), n_->value.size()}; }

    // In-place mutation is only legal on leaves (parameter updates, data
    // staging); op outputs are immutable once recorded.
    std::span<T> raw_data() {
        if (!n_->is_leaf) throw std::logic_error("raw_data: cannot mutate a non-leaf tensor (op: " + std::string(n_->op) + ")");
        return {n_->value.data(), n_->value.size()};
    }

    bool requires_grad() const { return n_->requires_grad; }
    bool grad_populated() const { return n_->grad_set || (!n_->is_leaf && !n_->grad.empty()); }

    std::span<const T> grad() const {
        if (n_->grad.empty())
            throw std::logic_error("grad: no gradient populated for this tensor (op: " + std::string(n_->op) + ")");
        return {n_->grad.data(), n_->grad.size()};
    }

    void zero_grad() {
        n_->grad.clear();
        n_->grad_set = false;
    }

    T item() const {
        if (size() != 1) shape_error("item", "tensor has shape " + shape_str(shape()) + ", expected a scalar");
        return n_->value[0];
    }

    const std::shared_ptr<Node<T>>& node() const { return n_; }

private:
    std::shared_ptr<Node<T>> n_;
};

// Ordered record of the primitive operations reachable from a root, in
// creation (= topological) order. Backward replays it once, in reverse.
template <class T>
class Tape {
public:
    static Tape record(const Tensor<T>& root) {
        Tape t;
        if (!root.valid()) throw std::invalid_argument("Tape::record: empty tensor");
        std::vector<Node<T>*> stack{root.node().get()};
        t.keep_.push_back(root.node());
        std::vector<Node<T>*> seen;
        while (!stack.empty()) {
            Node<T>* n = stack.back();
            stack.pop_back();
            if (n->visit_mark) continue;
            n->visit_mark = true;
            seen.push_back(n);
            t.order_.push_back(n);
            for (auto& p : n->parents)
                if (p->requires_grad && !p->visit_mark) {
                    t.keep_.push_back(p);
                    stack.push_back(p.get());
                }
        }
        for (auto* n : seen) n->visit_mark = false;
        std::sort(t.order_.begin(), t.order_.end(),
                  [](const Node<T>* a, const Node<T>* b) { return a->id > b->id; });
        return t;
    }

    // Runs the recorded operations in reverse. Root gradient must be seeded
    // by the caller before invoking.
    void run_backward() {
        for (Node<T>* n : order_)
            if (n->backprop) n->backprop();
    }

    std::size_t size() const { return order_.size(); }
    const std::vector<Node<T>*>& order() const { return order_; }

private:
    std::vector<Node<T>*> order_;
    std::vector<std::shared_ptr<Node<T>>> keep_;
};

// Reverse-mode gradient of a scalar loss. Populates grad on every
// requires_grad tensor reachable from the loss. Calling backward a second
// time while leaf gradients are still populated is an error; reset with
// zero_grad first.
template <class T>
void backward(Tensor<T>& loss) {
    if (!loss.valid()) throw std::invalid_argument("backward: empty tensor");
    if (loss.size() != 1)
        shape_error("backward", "loss must be a scalar, got shape " + shape_str(loss.shape()));
    if (!loss.requires_grad())
        throw std::invalid_argument("backward: loss does not depend on any requires_grad tensor");

    Tape<T> tape = Tape<T>::record(loss);
    for (Node<T>* n : tape.order())
        if (n->is_leaf && n->grad_set)
            throw std::logic_error("backward: gradients already populated; call zero_grad before the next backward");

    loss.node()->ensure_grad();
    loss.node()->grad[0] = T(1);
    tape.run_backward();
    for (Node<T>* n : tape.order())
        if (n->is_leaf) n->grad_set = true;
}

}  // namespace stdrive::ag
