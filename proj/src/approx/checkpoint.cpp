#include "midl/approx/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

namespace midl::approx {

const char* activation_name(Activation act) {
  switch (act) {
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "linear";
}

Activation activation_from_name(const std::string& name) {
  if (name == "linear") return Activation::Linear;
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  throw Error(ErrorCode::Io, "unknown activation '" + name + "'");
}

namespace {

void expect_token(std::istream& in, const std::string& want) {
  std::string got;
  if (!(in >> got) || got != want) {
    throw Error(ErrorCode::Io, "checkpoint: expected '" + want + "', found '" + got + "'");
  }
}

double read_real(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw Error(ErrorCode::Io, "checkpoint: truncated parameter block");
  double v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw Error(ErrorCode::Io, "checkpoint: bad real '" + tok + "'");
  }
  return v;
}

}  // namespace

void write_mlp(std::ostream& out, const Mlp<double>& net) {
  out << "midl-mlp " << kMlpCheckpointVersion << "\n";
  out << "sizes " << net.sizes().size();
  for (int s : net.sizes()) out << ' ' << s;
  out << "\nactivations " << activation_name(net.hidden_activation()) << ' '
      << activation_name(net.output_activation()) << "\n";
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto& layer = net.layers()[l];
    out << "layer " << l << ' ' << layer.weight.rows() << ' ' << layer.weight.cols() << "\n";
    for (Index i = 0; i < layer.weight.rows(); ++i) {
      for (Index j = 0; j < layer.weight.cols(); ++j) {
        if (j) out << ' ';
        out << format_real(layer.weight(i, j));
      }
      out << "\n";
    }
    for (Index i = 0; i < layer.bias.size(); ++i) {
      if (i) out << ' ';
      out << format_real(layer.bias(i));
    }
    out << "\n";
  }
  out << "end\n";
}

Mlp<double> read_mlp(std::istream& in) {
  expect_token(in, "midl-mlp");
  int version = 0;
  if (!(in >> version) || version != kMlpCheckpointVersion) {
    throw Error(ErrorCode::Io, "checkpoint: unsupported version " + std::to_string(version));
  }
  expect_token(in, "sizes");
  std::size_t n = 0;
  if (!(in >> n) || n < 2) throw Error(ErrorCode::Io, "checkpoint: bad size list");
  std::vector<int> sizes(n);
  for (auto& s : sizes)
    if (!(in >> s)) throw Error(ErrorCode::Io, "checkpoint: bad size list");
  expect_token(in, "activations");
  std::string hidden, output;
  in >> hidden >> output;
  auto net = Mlp<double>::zeros(sizes, activation_from_name(hidden), activation_from_name(output));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    expect_token(in, "layer");
    std::size_t idx = 0;
    Index rows = 0, cols = 0;
    in >> idx >> rows >> cols;
    auto& layer = net.layers()[l];
    if (idx != l || rows != layer.weight.rows() || cols != layer.weight.cols()) {
      throw Error(ErrorCode::Io, "checkpoint: layer header mismatch at layer " + std::to_string(l));
    }
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) layer.weight(i, j) = read_real(in);
    for (Index i = 0; i < rows; ++i) layer.bias(i) = read_real(in);
  }
  expect_token(in, "end");
  return net;
}

void save_mlp(const std::string& path, const Mlp<double>& net) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  write_mlp(out, net);
}

Mlp<double> load_mlp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  return read_mlp(in);
}

}  // namespace midl::approx
