#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "uda/checkpoint.hpp"

using namespace uda;

namespace {

ModelParams<float> sample_model() {
  ModelConfig c;
  c.input_dim = 5;
  c.hidden_dim = 8;
  c.num_classes = 3;
  c.heads = 2;
  c.domain_hidden = 4;
  c.activation = Activation::Elu;
  c.self_loops = true;
  auto p = ModelParams<float>::initialize(c, 9);
  p.proj_bias.setConstant(0.1f);
  p.domain_bias2[0] = -3.25f;
  return p;
}

std::string bytes_of(const ModelParams<float>& p) {
  std::ostringstream os;
  write_checkpoint(os, p);
  return os.str();
}

ErrorKind read_kind(const std::string& bytes) {
  std::istringstream is(bytes);
  try {
    read_checkpoint(is);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("checkpoint round-trips bit-exactly") {
  const auto p = sample_model();
  const std::string a = bytes_of(p);
  std::istringstream is(a);
  const auto q = read_checkpoint(is);
  CHECK(q.config == p.config);
  zip_tensors([](const std::string&, const auto& x, const auto& y) { CHECK(x == y); }, p, q);
  CHECK(bytes_of(q) == a);

  testing::TempDir dir("ckpt");
  save_checkpoint(p, dir / "m.udam");
  CHECK(testing::slurp(dir / "m.udam") == a);
  CHECK(bytes_of(load_checkpoint(dir / "m.udam")) == a);
}

TEST_CASE("checkpoint header layout") {
  const std::string b = bytes_of(sample_model());
  CHECK(b.substr(0, 4) == "UDAM");
  CHECK(static_cast<unsigned char>(b[4]) == 1);
  CHECK(static_cast<unsigned char>(b[5]) == 0);
  CHECK(static_cast<unsigned char>(b[6]) == 5);  // input_dim, little-endian
  CHECK(static_cast<unsigned char>(b[10]) == 8);
}

TEST_CASE("corrupt checkpoints are format errors") {
  const std::string b = bytes_of(sample_model());
  CHECK(read_kind(b.substr(0, b.size() - 2)) == ErrorKind::Format);
  CHECK(read_kind(b.substr(0, 20)) == ErrorKind::Format);
  CHECK(read_kind("UDAX" + b.substr(4)) == ErrorKind::Format);
  std::string v2 = b;
  v2[4] = 2;
  CHECK(read_kind(v2) == ErrorKind::Format);
  // drop the last tensor (domain.b2: 4 + 10 name + 4 rank + 4 dim + 4 value)
  CHECK(read_kind(b.substr(0, b.size() - 26)) == ErrorKind::Format);
  // duplicate the last tensor
  CHECK(read_kind(b + b.substr(b.size() - 26)) == ErrorKind::Format);
}

TEST_CASE("missing checkpoint file is an io error") {
  try {
    load_checkpoint("/nonexistent/dir/model.udam");
    FAIL("expected io error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Io);
  }
}
