#pragma once

#include <filesystem>
#include <iosfwd>

#include "relukan/bspline_layer.hpp"
#include "relukan/network.hpp"
#include "relukan/relu_kan_layer.hpp"

namespace relukan {

// Text records, whitespace separated, doubles printed in shortest
// round-trip form so that save/load is bit-exact.
//
//   RELUKAN_LAYER 1
//   config <n_in> <n_out> <G> <k> <trainable 0|1> <constant|dynamic>
//   S <rows> <cols> <values...>
//   E <rows> <cols> <values...>
//   W <n_out>
//   <rows> <cols> <values...>      (once per output)
//   END
//
//   BSPLINE_LAYER 1
//   config <n_in> <n_out> <G> <k>
//   coef <n_out>
//   <rows> <cols> <values...>      (once per output)
//   w_b <rows> <cols> <values...>
//   w_s <rows> <cols> <values...>
//   END
//
// A checkpoint is a header followed by one record per layer:
//
//   KAN_CHECKPOINT 1
//   kind <relukan|bspline>
//   widths <n_1,...,n_L>
//   grid <G>
//   span <k>
//   trainable_endpoints <0|1>
//   norm_mode <constant|dynamic>
//   squash_hidden <0|1>
//   layers <L-1>
inline constexpr int kLayerRecordVersion = 1;
inline constexpr int kCheckpointVersion = 1;

void write_layer(std::ostream& out, const ReluKanLayer& layer);
void write_layer(std::ostream& out, const BsplineKanLayer& layer);
ReluKanLayer read_relukan_layer(std::istream& in);
BsplineKanLayer read_bspline_layer(std::istream& in);

void write_checkpoint(std::ostream& out, const Network& net);
Network read_checkpoint(std::istream& in);
void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

}  // namespace relukan
