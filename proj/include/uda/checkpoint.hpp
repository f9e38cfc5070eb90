#ifndef UDA_CHECKPOINT_HPP
#define UDA_CHECKPOINT_HPP

#include <filesystem>
#include <iosfwd>

#include "uda/model.hpp"

namespace uda {

// Model file: "UDAM", u16 version 1, config block
//   u32 input_dim, u32 hidden_dim, u32 classes, u32 heads, u32 domain_hidden,
//   f32 lambda_grl, u8 activation, u8 domain_tap, u8 flags (bit 0 self_loops,
//   bit 1 use_gat),
// then every tensor as u32 name length, name bytes, u32 rank, u32 dims...,
// little-endian f32 payload in row-major order.
void write_checkpoint(std::ostream& os, const ModelParams<float>& params);
ModelParams<float> read_checkpoint(std::istream& is);

void save_checkpoint(const ModelParams<float>& params, const std::filesystem::path& path);
ModelParams<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace uda

#endif  // UDA_CHECKPOINT_HPP
