#pragma once

#include "midl/approx/mlp.hpp"

#include <iosfwd>
#include <string>

namespace midl::approx {

/// Text checkpoint, format version 1:
///
///   midl-mlp 1
///   sizes <n> <s0> ... <s_{n-1}>
///   activations <hidden> <output>
///   layer <l> <rows> <cols>
///   <rows*cols weights, row-major, one row per line>
///   <rows biases on one line>
///   ...
///   end
///
/// Reals are written in shortest round-trip form, so load(save(x)) == x bitwise.
inline constexpr int kMlpCheckpointVersion = 1;

void write_mlp(std::ostream& out, const Mlp<double>& net);
Mlp<double> read_mlp(std::istream& in);

void save_mlp(const std::string& path, const Mlp<double>& net);
Mlp<double> load_mlp(const std::string& path);

}  // namespace midl::approx
