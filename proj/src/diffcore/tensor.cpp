#include "selfcolearn/tensor.hpp"

#include "selfcolearn/error.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace scl {

namespace {
thread_local bool no_grad_active = false;

void require_finite(std::string const &op, std::span<cx const> values)
{
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i].real()) || !std::isfinite(values[i].imag())) {
      throw NumericError(fmt::format("{}: non-finite value at flat index {}", op, i));
    }
  }
}
} // namespace

auto numel_of(Shape const &shape) -> std::size_t
{
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

auto shape_string(Shape const &shape) -> std::string
{
  return fmt::format("[{}]", fmt::join(shape, ", "));
}

GradContext::GradContext(detail::Node &node)
  : node_{node}
{
}

auto GradContext::grad_out() const -> std::span<cx const> { return node_.grad; }

auto GradContext::input(std::size_t i) const -> std::span<cx const>
{
  return node_.parents.at(i)->data;
}

auto GradContext::input_shape(std::size_t i) const -> Shape const &
{
  return node_.parents.at(i)->shape;
}

auto GradContext::needs(std::size_t i) const -> bool
{
  auto const &p = node_.parents.at(i);
  return p && p->requires_grad;
}

auto GradContext::grad(std::size_t i) -> std::span<cx>
{
  auto &p = node_.parents.at(i);
  if (p->grad.size() != p->data.size()) { p->grad.assign(p->data.size(), cx{}); }
  return p->grad;
}

Tensor::Tensor(std::shared_ptr<detail::Node> node)
  : node_{std::move(node)}
{
}

Tensor::Tensor(Shape shape)
  : Tensor(shape, std::vector<cx>(numel_of(shape)))
{
}

Tensor::Tensor(Shape shape, std::vector<cx> data)
{
  for (auto d : shape) {
    if (d == 0) { throw ShapeError(fmt::format("zero-sized axis in shape {}", shape_string(shape))); }
  }
  if (data.size() != numel_of(shape)) {
    throw ShapeError(fmt::format("data length {} does not match shape {}", data.size(), shape_string(shape)));
  }
  require_finite("tensor", data);
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
}

auto Tensor::zeros(Shape shape) -> Tensor { return Tensor(std::move(shape)); }

auto Tensor::scalar(cx value) -> Tensor { return Tensor(Shape{}, {value}); }

auto Tensor::parameter(Shape shape, std::vector<cx> data) -> Tensor
{
  Tensor t(std::move(shape), std::move(data));
  t.node_->requires_grad = true;
  return t;
}

auto Tensor::shape() const -> Shape const &
{
  if (!node_) { throw GraphError("use of an undefined tensor"); }
  return node_->shape;
}

auto Tensor::dim(std::size_t i) const -> std::size_t { return shape().at(i); }

auto Tensor::numel() const -> std::size_t { return node_ ? node_->data.size() : 0; }

auto Tensor::data() const -> std::span<cx const>
{
  if (!node_) { throw GraphError("use of an undefined tensor"); }
  return node_->data;
}

auto Tensor::mutable_data() -> std::span<cx>
{
  if (!node_) { throw GraphError("use of an undefined tensor"); }
  if (!node_->is_leaf()) { throw GraphError(fmt::format("cannot mutate the output of '{}'", node_->op)); }
  return node_->data;
}

auto Tensor::item() const -> cx
{
  if (numel() != 1) { throw ShapeError(fmt::format("item() on tensor of shape {}", shape_string(shape()))); }
  return node_->data[0];
}

auto Tensor::requires_grad() const -> bool { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on)
{
  if (!is_leaf()) { throw GraphError("requires_grad can only be toggled on leaves"); }
  node_->requires_grad = on;
}

auto Tensor::has_grad() const -> bool { return node_ && node_->grad.size() == node_->data.size(); }

auto Tensor::grad() const -> std::span<cx const>
{
  if (!has_grad()) { return {}; }
  return node_->grad;
}

void Tensor::zero_grad()
{
  if (node_) { node_->grad.clear(); }
}

auto Tensor::is_leaf() const -> bool { return node_ && node_->is_leaf(); }

auto Tensor::op() const -> std::string const & { return node_->op; }

auto Tensor::detach() const -> Tensor { return Tensor(shape(), std::vector<cx>(data().begin(), data().end())); }

auto make_result(std::string op, Shape shape, std::vector<cx> data, std::vector<Tensor> const &parents,
                 BackwardFn backward) -> Tensor
{
  require_finite(op, data);
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = std::move(op);
  bool const track = !no_grad_active && std::any_of(parents.begin(), parents.end(), [](Tensor const &p) {
                       return p.defined() && p.requires_grad();
                     });
  if (track) {
    for (auto const &p : parents) {
      if (p.defined() && p.node()->released) {
        throw GraphError(fmt::format("{}: input graph was already consumed by backward()", node->op));
      }
      node->parents.push_back(p.node());
    }
    node->backward = std::move(backward);
    node->requires_grad = true;
  }
  return Tensor(std::move(node));
}

NoGradGuard::NoGradGuard()
  : previous_{no_grad_active}
{
  no_grad_active = true;
}

NoGradGuard::~NoGradGuard() { no_grad_active = previous_; }

auto NoGradGuard::active() -> bool { return no_grad_active; }

auto GraphTape::record(Tensor const &root) -> GraphTape
{
  GraphTape tape;
  if (!root.requires_grad()) { return tape; }
  // Iterative post-order DFS.
  std::unordered_set<detail::Node *> visited;
  std::vector<std::pair<detail::Node *, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto &[node, next] = stack.back();
    if (next < node->parents.size()) {
      auto *parent = node->parents[next++].get();
      if (parent && parent->requires_grad && visited.insert(parent).second) { stack.emplace_back(parent, 0); }
    } else {
      tape.nodes_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

auto GraphTape::ops() const -> std::vector<std::string>
{
  std::vector<std::string> out;
  out.reserve(nodes_.size());
  for (auto const *n : nodes_) { out.push_back(n->op); }
  return out;
}

auto GraphTape::is_topological() const -> bool
{
  std::unordered_map<detail::Node const *, std::size_t> position;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!position.emplace(nodes_[i], i).second) { return false; }
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (auto const &p : nodes_[i]->parents) {
      if (!p || !p->requires_grad) { continue; }
      auto it = position.find(p.get());
      if (it == position.end() || it->second >= i) { return false; }
    }
  }
  return true;
}

void backward(Tensor const &loss)
{
  if (!loss.defined()) { throw GraphError("backward on an undefined tensor"); }
  if (loss.numel() != 1) {
    throw GraphError(fmt::format("backward requires a scalar loss, got shape {}", shape_string(loss.shape())));
  }
  auto &root = *loss.node();
  if (root.released) { throw GraphError("backward called twice on the same graph"); }
  if (root.data[0].imag() != 0.0) { throw GraphError("backward requires a loss with zero imaginary part"); }
  if (!root.requires_grad) {
    root.released = !root.is_leaf();
    return;
  }

  auto const tape = GraphTape::record(loss);
  root.grad.assign(1, cx{1.0, 0.0});
  auto const nodes = tape.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    auto *node = *it;
    if (!node->backward || node->grad.empty()) { continue; }
    GradContext ctx(*node);
    node->backward(ctx);
  }
  for (auto *node : nodes) {
    if (node->is_leaf()) {
      require_finite("gradient of leaf", node->grad);
      continue;
    }
    node->grad.clear();
    node->grad.shrink_to_fit();
    node->parents.clear();
    node->backward = nullptr;
    node->released = true;
  }
}

auto find_param(ParamSet const &params, std::string const &name) -> Tensor const &
{
  for (auto const &p : params) {
    if (p.name == name) { return p.tensor; }
  }
  throw Error(fmt::format("no parameter named '{}'", name));
}

void zero_grads(ParamSet &params)
{
  for (auto &p : params) { p.tensor.zero_grad(); }
}

} // namespace scl
