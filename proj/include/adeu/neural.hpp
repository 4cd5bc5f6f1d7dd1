#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "adeu/rng.hpp"

namespace adeu {

struct TrainStepReport {
  double loss = 0.0;           // mean squared error before the update
  double gradient_norm = 0.0;  // L2 norm of the full parameter gradient
};

/// Fully connected network: tanh hidden layers, identity output.
///
/// Parameters live in one flat vector; layer l stores its weight matrix
/// (rows = out, cols = in, row-major) followed by its bias.
class Mlp {
 public:
  /// Activations recorded by a forward pass, consumed by backward().
  struct Tape {
    std::vector<std::vector<double>> activations;  // [0] = input, back() = output
    std::span<const double> output() const { return activations.back(); }
  };

  Mlp() = default;

  static Mlp init(std::vector<std::size_t> layer_sizes, std::uint64_t seed) {
    Mlp net(std::move(layer_sizes));
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < net.sizes_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(net.sizes_[l]));
      const std::size_t count = net.sizes_[l + 1] * (net.sizes_[l] + 1);
      for (std::size_t i = 0; i < count; ++i) net.params_[net.offsets_[l] + i] = rng.uniform(-bound, bound);
    }
    return net;
  }

  /// Zero-initialized network of the given shape.
  static Mlp zeros(std::vector<std::size_t> layer_sizes) { return Mlp(std::move(layer_sizes)); }

  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  std::size_t input_size() const noexcept { return sizes_.front(); }
  std::size_t output_size() const noexcept { return sizes_.back(); }
  std::size_t layer_count() const noexcept { return sizes_.size() - 1; }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  std::span<double> weights(std::size_t layer) {
    return {params_.data() + offsets_[layer], sizes_[layer + 1] * sizes_[layer]};
  }
  std::span<double> bias(std::size_t layer) {
    return {params_.data() + offsets_[layer] + sizes_[layer + 1] * sizes_[layer], sizes_[layer + 1]};
  }

  std::vector<double> forward(std::span<const double> input) const {
    check_input(input);
    std::vector<double> current(input.begin(), input.end());
    std::vector<double> next;
    for (std::size_t l = 0; l < layer_count(); ++l) {
      affine(l, current, next);
      if (l + 1 < layer_count()) for (double& z : next) z = std::tanh(z);
      current.swap(next);
    }
    return current;
  }

  Tape forward_tape(std::span<const double> input) const {
    check_input(input);
    Tape tape;
    tape.activations.reserve(sizes_.size());
    tape.activations.emplace_back(input.begin(), input.end());
    for (std::size_t l = 0; l < layer_count(); ++l) {
      std::vector<double> z;
      affine(l, tape.activations.back(), z);
      if (l + 1 < layer_count()) for (double& v : z) v = std::tanh(v);
      tape.activations.push_back(std::move(z));
    }
    return tape;
  }

  /// Accumulates dL/dparams into `grad` (same layout as parameters()) given
  /// dL/doutput. When `grad_input` is non-null it receives dL/dinput.
  void backward(const Tape& tape, std::span<const double> grad_output, std::span<double> grad,
                std::vector<double>* grad_input = nullptr) const {
    if (grad_output.size() != output_size()) throw std::invalid_argument("mlp: output gradient dimension");
    if (grad.size() != params_.size()) throw std::invalid_argument("mlp: gradient buffer size");
    std::vector<double> delta(grad_output.begin(), grad_output.end());
    std::vector<double> prev;
    for (std::size_t l = layer_count(); l-- > 0;) {
      const std::size_t in = sizes_[l];
      const std::size_t out = sizes_[l + 1];
      const auto& a_in = tape.activations[l];
      const double* w = params_.data() + offsets_[l];
      double* gw = grad.data() + offsets_[l];
      double* gb = gw + out * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        double* row = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) row[i] += d * a_in[i];
        gb[o] += d;
      }
      if (l == 0 && grad_input == nullptr) break;
      prev.assign(in, 0.0);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[o];
        const double* row = w + o * in;
        for (std::size_t i = 0; i < in; ++i) prev[i] += row[i] * d;
      }
      if (l == 0) {
        if (grad_input != nullptr) *grad_input = std::move(prev);
        break;
      }
      for (std::size_t i = 0; i < in; ++i) prev[i] *= 1.0 - a_in[i] * a_in[i];
      delta.swap(prev);
    }
  }

  /// Gradient of 0.5 * ||net(input) - target||^2 with respect to parameters.
  std::vector<double> mse_gradient(std::span<const double> input, std::span<const double> target,
                                   double* squared_error = nullptr) const {
    if (target.size() != output_size()) throw std::invalid_argument("mlp: target dimension");
    const Tape tape = forward_tape(input);
    std::vector<double> err(output_size());
    double sq = 0.0;
    for (std::size_t k = 0; k < err.size(); ++k) {
      err[k] = tape.output()[k] - target[k];
      sq += err[k] * err[k];
    }
    std::vector<double> grad(params_.size(), 0.0);
    backward(tape, err, grad);
    if (squared_error != nullptr) *squared_error = sq;
    return grad;
  }

  /// One plain gradient-descent step on 0.5 * ||net(input) - target||^2.
  TrainStepReport train_mse(std::span<const double> input, std::span<const double> target, double learning_rate) {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("mlp: learning rate must be positive");
    if (!all_finite(input) || !all_finite(target)) throw std::invalid_argument("mlp: non-finite training data");
    double sq = 0.0;
    const auto grad = mse_gradient(input, target, &sq);
    TrainStepReport report;
    report.loss = sq / static_cast<double>(output_size());
    report.gradient_norm = norm(grad);
    apply_gradient(grad, learning_rate);
    return report;
  }

  void apply_gradient(std::span<const double> grad, double learning_rate) {
    if (grad.size() != params_.size()) throw std::invalid_argument("mlp: gradient size");
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i] -= learning_rate * grad[i];
  }

  /// target <- rate * live + (1 - rate) * target, parameter-wise.
  void soft_update_from(const Mlp& live, double rate) {
    if (live.sizes_ != sizes_) throw std::invalid_argument("mlp: soft update shape mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i) params_[i] += rate * (live.params_[i] - params_[i]);
  }

  /// Text checkpoint: "mlp <n> <sizes...>" header, then one parameter per line
  /// in shortest round-trip form.
  void save(std::ostream& out) const {
    out << "mlp " << sizes_.size();
    for (auto s : sizes_) out << ' ' << s;
    out << '\n';
    char buf[64];
    for (double p : params_) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, p);
      out.write(buf, end - buf);
      out << '\n';
    }
  }

  static Mlp load(std::istream& in) {
    std::string tag;
    std::size_t n = 0;
    if (!(in >> tag >> n) || tag != "mlp" || n < 2) throw std::runtime_error("mlp: bad checkpoint header");
    std::vector<std::size_t> sizes(n);
    for (auto& s : sizes)
      if (!(in >> s)) throw std::runtime_error("mlp: bad checkpoint header");
    Mlp net(std::move(sizes));
    for (double& p : net.params_) {
      std::string token;
      if (!(in >> token)) throw std::runtime_error("mlp: truncated checkpoint");
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), p);
      if (ec != std::errc{} || ptr != token.data() + token.size()) throw std::runtime_error("mlp: bad parameter");
    }
    return net;
  }

  friend bool operator==(const Mlp&, const Mlp&) = default;

  static double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  }

 private:
  explicit Mlp(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("mlp: need at least input and output layers");
    if (std::find(sizes_.begin(), sizes_.end(), std::size_t{0}) != sizes_.end())
      throw std::invalid_argument("mlp: layer sizes must be positive");
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(total);
      total += sizes_[l + 1] * (sizes_[l] + 1);
    }
    params_.assign(total, 0.0);
  }

  void check_input(std::span<const double> input) const {
    if (sizes_.empty()) throw std::logic_error("mlp: uninitialized network");
    if (input.size() != input_size()) throw std::invalid_argument("mlp: input dimension mismatch");
  }

  void affine(std::size_t l, std::span<const double> in, std::vector<double>& out) const {
    const std::size_t n_in = sizes_[l];
    const std::size_t n_out = sizes_[l + 1];
    const double* w = params_.data() + offsets_[l];
    const double* b = w + n_out * n_in;
    out.assign(n_out, 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
      double acc = b[o];
      const double* row = w + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * in[i];
      out[o] = acc;
    }
  }

  static bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  }

  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

}  // namespace adeu
