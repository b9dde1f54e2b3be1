#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mvlatent/graph.hpp"
#include "mvlatent/rng.hpp"
#include "mvlatent/tensor.hpp"

namespace mvlatent::nn {

enum class Activation { relu, linear };
enum class OutputHead { single, mean_and_logvar };

/// Architecture of a fully connected network. layer_widths is the complete
/// width chain [input, hidden..., output]; a mean_and_logvar head replaces
/// the final affine with two parallel affine heads from the last hidden
/// layer, doubling the produced width.
struct MlpSpec {
  std::vector<int> layer_widths;
  Activation activation = Activation::relu;
  double dropout_rate = 0.0;
  OutputHead output_heads = OutputHead::single;

  int input_width() const { return layer_widths.front(); }
  int output_width() const { return layer_widths.back(); }
  int hidden_count() const { return static_cast<int>(layer_widths.size()) - 2; }
};

/// Throws ConfigError on an invalid spec (no layers, dropout_rate >= 1, ...).
void validate(const MlpSpec& spec);

/// Ordered collection of named tensors with a stable, persisted enumeration
/// order. Names are unique; order is insertion order.
class ParamSet {
 public:
  struct Named {
    std::string name;
    Tensor value;
  };

  void add(std::string name, Tensor value);
  bool contains(const std::string& name) const;
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::size_t total_elems() const;
  const std::vector<Named>& items() const { return items_; }
  std::vector<Named>& items() { return items_; }

 private:
  std::vector<Named> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// The parameter names (in enumeration order) and shapes the spec implies.
std::vector<std::pair<std::string, std::vector<std::size_t>>> param_layout(
    const MlpSpec& spec);

/// Fresh parameters: weights uniform in +-sqrt(6/(fan_in+fan_out)), biases
/// zero, drawn in enumeration order.
ParamSet init_params(const MlpSpec& spec, Rng& rng);

struct Mlp {
  MlpSpec spec;
  ParamSet params;
};

Mlp make_mlp(MlpSpec spec, Rng& rng);

/// Bernoulli(1-rate) mask with inverted-dropout scaling baked in: entries are
/// 0 or 1/(1-rate), so no rescaling is needed at inference.
Tensor make_dropout_mask(double rate, const std::vector<std::size_t>& shape, Rng& rng);

struct MlpOutput {
  Tensor first;   // single head output, or the mean head
  Tensor second;  // the log-variance head when present
  bool has_second = false;
};

/// No-tape forward pass. Input is [n, input_width]; masks, when given, hold
/// one [n, hidden_width] tensor per hidden layer.
MlpOutput forward_mlp(const MlpSpec& spec, const ParamSet& params, const Tensor& input,
                      const std::vector<Tensor>* dropout_masks = nullptr,
                      bool checked = false);

struct MlpValues {
  Value first;
  Value second;
  bool has_second = false;
};

/// Graph forward pass over parameter nodes bound in enumeration order
/// (see bind_params). Computes the same float sequence as forward_mlp.
MlpValues apply_mlp(Graph& g, const MlpSpec& spec, const std::vector<Value>& params,
                    Value input, const std::vector<Tensor>* dropout_masks = nullptr);

/// Bind every parameter of an Mlp as graph leaves, in enumeration order.
/// frozen = bind as constants (no gradients).
std::vector<Value> bind_params(Graph& g, const ParamSet& params, bool frozen = false);

}  // namespace mvlatent::nn
