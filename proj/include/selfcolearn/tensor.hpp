#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace scl {

using cx = std::complex<double>;
using Shape = std::vector<std::size_t>;

auto numel_of(Shape const &shape) -> std::size_t;
auto shape_string(Shape const &shape) -> std::string;

class Tensor;

namespace detail {
struct Node;
}

// Handed to an operation's backward closure. Parent gradients are accumulated
// in place; parents that do not require a gradient report needs(i) == false.
class GradContext
{
public:
  GradContext(detail::Node &node);

  auto grad_out() const -> std::span<cx const>;
  auto input(std::size_t i) const -> std::span<cx const>;
  auto input_shape(std::size_t i) const -> Shape const &;
  auto needs(std::size_t i) const -> bool;
  auto grad(std::size_t i) -> std::span<cx>;

private:
  detail::Node &node_;
};

using BackwardFn = std::function<void(GradContext &)>;

namespace detail {

struct Node
{
  Shape shape;
  std::vector<cx> data;
  std::vector<cx> grad;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
  std::string op = "leaf";
  bool requires_grad = false;
  bool released = false;

  auto is_leaf() const -> bool { return op == "leaf"; }
};

} // namespace detail

/// Complex N-d array with optional reverse-mode gradient tracking.
///
/// Values are stored row-major as std::complex<double>, i.e. interleaved
/// (re, im) pairs. Copies of a Tensor share the same storage and graph node;
/// use detach() for an independent copy.
///
/// Gradient convention: for a real loss L and an entry z = a + ib, the stored
/// gradient is dL/da + i dL/db.
class Tensor
{
public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<cx> data);

  static auto zeros(Shape shape) -> Tensor;
  static auto scalar(cx value) -> Tensor;
  /// Leaf with gradient tracking enabled.
  static auto parameter(Shape shape, std::vector<cx> data) -> Tensor;

  auto defined() const -> bool { return node_ != nullptr; }
  auto shape() const -> Shape const &;
  auto rank() const -> std::size_t { return shape().size(); }
  auto dim(std::size_t i) const -> std::size_t;
  auto numel() const -> std::size_t;

  auto data() const -> std::span<cx const>;
  /// Writable view; only leaves may be mutated.
  auto mutable_data() -> std::span<cx>;
  auto item() const -> cx;

  auto requires_grad() const -> bool;
  void set_requires_grad(bool on);
  auto has_grad() const -> bool;
  auto grad() const -> std::span<cx const>;
  void zero_grad();

  auto is_leaf() const -> bool;
  auto op() const -> std::string const &;
  auto detach() const -> Tensor;

  auto node() const -> std::shared_ptr<detail::Node> const & { return node_; }

private:
  explicit Tensor(std::shared_ptr<detail::Node> node);
  friend auto make_result(std::string op, Shape shape, std::vector<cx> data,
                          std::vector<Tensor> const &parents, BackwardFn backward) -> Tensor;

  std::shared_ptr<detail::Node> node_;
};

/// Builds the output of an operation. Throws NumericError if any value is
/// non-finite. The graph edge is recorded only when a parent requires a
/// gradient and no NoGradGuard is active on this thread.
auto make_result(std::string op, Shape shape, std::vector<cx> data,
                 std::vector<Tensor> const &parents, BackwardFn backward) -> Tensor;

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard
{
public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(NoGradGuard const &) = delete;
  auto operator=(NoGradGuard const &) -> NoGradGuard & = delete;

  static auto active() -> bool;

private:
  bool previous_;
};

/// Topologically ordered list of the graph nodes that lead to a root.
/// Only nodes that require a gradient are recorded; every node's parents
/// precede it.
class GraphTape
{
public:
  static auto record(Tensor const &root) -> GraphTape;

  auto size() const -> std::size_t { return nodes_.size(); }
  auto nodes() const -> std::span<detail::Node *const> { return nodes_; }
  auto ops() const -> std::vector<std::string>;
  auto is_topological() const -> bool;

private:
  std::vector<detail::Node *> nodes_;
};

/// Reverse pass from a real scalar loss. Leaf gradients accumulate; the
/// intermediate graph is released afterwards, so a second call on the same
/// graph throws GraphError.
void backward(Tensor const &loss);

struct NamedTensor
{
  std::string name;
  Tensor tensor;
};

using ParamSet = std::vector<NamedTensor>;

auto find_param(ParamSet const &params, std::string const &name) -> Tensor const &;
void zero_grads(ParamSet &params);

} // namespace scl
