#include "uda/checkpoint.hpp"

#include <fstream>
#include <map>

#include "uda/binary_io.hpp"

namespace uda {

namespace {

constexpr std::uint8_t kSelfLoops = 1;
constexpr std::uint8_t kUseGat = 2;

template <typename Tensor>
void write_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
  binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  if constexpr (Tensor::ColsAtCompileTime == 1) {
    binio::put_uint<std::uint32_t>(os, 1);
    binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(t.rows()));
  } else {
    binio::put_uint<std::uint32_t>(os, 2);
    binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(t.rows()));
    binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(t.cols()));
  }
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.cols(); ++c) binio::put_f32(os, t(r, c));
  }
}

struct RawTensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

}  // namespace

void write_checkpoint(std::ostream& os, const ModelParams<float>& p) {
  const auto& c = p.config;
  binio::put_magic(os, "UDAM");
  binio::put_uint<std::uint16_t>(os, 1);
  binio::put_uint<std::uint32_t>(os, c.input_dim);
  binio::put_uint<std::uint32_t>(os, c.hidden_dim);
  binio::put_uint<std::uint32_t>(os, c.num_classes);
  binio::put_uint<std::uint32_t>(os, c.heads);
  binio::put_uint<std::uint32_t>(os, c.domain_hidden);
  binio::put_f32(os, static_cast<float>(c.lambda_grl));
  binio::put_uint<std::uint8_t>(os, static_cast<std::uint8_t>(c.activation));
  binio::put_uint<std::uint8_t>(os, static_cast<std::uint8_t>(c.domain_tap));
  binio::put_uint<std::uint8_t>(os, (c.self_loops ? kSelfLoops : 0) | (c.use_gat ? kUseGat : 0));
  zip_tensors([&](const std::string& name, const auto& t) { write_tensor(os, name, t); }, p);
}

ModelParams<float> read_checkpoint(std::istream& is) {
  binio::expect_magic(is, "UDAM");
  binio::expect_version(is, 1);
  ModelConfig c;
  c.input_dim = static_cast<int>(binio::get_uint<std::uint32_t>(is, "input_dim"));
  c.hidden_dim = static_cast<int>(binio::get_uint<std::uint32_t>(is, "hidden_dim"));
  c.num_classes = static_cast<int>(binio::get_uint<std::uint32_t>(is, "classes"));
  c.heads = static_cast<int>(binio::get_uint<std::uint32_t>(is, "heads"));
  c.domain_hidden = static_cast<int>(binio::get_uint<std::uint32_t>(is, "domain_hidden"));
  c.lambda_grl = binio::get_f32(is, "lambda_grl");
  const auto act = binio::get_uint<std::uint8_t>(is, "activation");
  const auto tap = binio::get_uint<std::uint8_t>(is, "domain_tap");
  const auto flags = binio::get_uint<std::uint8_t>(is, "flags");
  if (act > 2 || tap > 1 || flags > 3) throw Error(ErrorKind::Format, "bad config enum in checkpoint");
  c.activation = static_cast<Activation>(act);
  c.domain_tap = static_cast<DomainTap>(tap);
  c.self_loops = flags & kSelfLoops;
  c.use_gat = flags & kUseGat;
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Format, std::string("invalid checkpoint config: ") + e.what());
  }
  // Guard against absurd sizes from corrupt headers before allocating.
  constexpr int kMaxDim = 1 << 20;
  if (c.input_dim > kMaxDim || c.hidden_dim > kMaxDim || c.num_classes > kMaxDim || c.heads > 4096 ||
      c.domain_hidden > kMaxDim) {
    throw Error(ErrorKind::Format, "implausible checkpoint dimensions");
  }

  std::map<std::string, RawTensor> tensors;
  while (is.peek() != std::char_traits<char>::eof()) {
    const auto len = binio::get_uint<std::uint32_t>(is, "tensor name length");
    if (len > 256) throw Error(ErrorKind::Format, "tensor name too long");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw Error(ErrorKind::Format, "truncated tensor name");
    RawTensor t;
    const auto rank = binio::get_uint<std::uint32_t>(is, "tensor rank");
    if (rank < 1 || rank > 2) throw Error(ErrorKind::Format, "unsupported tensor rank in " + name);
    std::size_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.dims.push_back(binio::get_uint<std::uint32_t>(is, "tensor dims"));
      count *= t.dims.back();
    }
    if (count > (std::size_t{1} << 32)) throw Error(ErrorKind::Format, "tensor too large: " + name);
    t.values.resize(count);
    for (auto& v : t.values) v = binio::get_f32(is, name.c_str());
    if (!tensors.emplace(name, std::move(t)).second) throw Error(ErrorKind::Format, "duplicate tensor " + name);
  }

  auto p = ModelParams<float>::zeros(c);
  std::size_t used = 0;
  zip_tensors(
      [&](const std::string& name, auto& dst) {
        const auto it = tensors.find(name);
        if (it == tensors.end()) throw Error(ErrorKind::Format, "missing tensor " + name);
        const auto& t = it->second;
        const bool vector = std::remove_reference_t<decltype(dst)>::ColsAtCompileTime == 1;
        const bool shape_ok = vector ? (t.dims.size() == 1 && t.dims[0] == dst.rows())
                                     : (t.dims.size() == 2 && t.dims[0] == dst.rows() && t.dims[1] == dst.cols());
        if (!shape_ok) throw Error(ErrorKind::Format, "tensor " + name + " has the wrong shape");
        std::size_t i = 0;
        for (Eigen::Index r = 0; r < dst.rows(); ++r) {
          for (Eigen::Index col = 0; col < dst.cols(); ++col) dst(r, col) = t.values[i++];
        }
        ++used;
      },
      p);
  if (used != tensors.size()) throw Error(ErrorKind::Format, "unexpected extra tensors in checkpoint");
  return p;
}

void save_checkpoint(const ModelParams<float>& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  write_checkpoint(out, params);
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

ModelParams<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace uda
