#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "helpers.hpp"
#include "uda/data.hpp"
#include "uda/error.hpp"

using namespace uda;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no uda::Error thrown");
  return ErrorKind::Io;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

Dataset small_dataset() {
  std::vector<EmbeddingRecord> records;
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXf f(3);
    f << 0.1f * static_cast<float>(i), -1.0f / 3.0f, 1e-8f * static_cast<float>(i + 1);
    records.push_back({f, i == 3 ? std::optional<int>{} : std::optional<int>{i % 2}, Domain::Target});
  }
  return Dataset(std::move(records), 3, 2);
}

}  // namespace

TEST_CASE("csv load echoes records in order") {
  testing::TempDir dir("csv3");
  write_text(dir / "d.csv", "dim=4,classes=3,domain=source\n0,1,2,3,4\n1,0.5,-0.5,1e-3,2\n2,-1,-2,-3,-4\n");
  const Dataset d = load_dataset(dir / "d.csv", DatasetFormat::Csv);
  CHECK(d.size() == 3);
  CHECK(d.dim() == 4);
  CHECK(d.num_classes() == 3);
  CHECK(d.domain() == Domain::Source);
  CHECK(*d.label(1) == 1);
  CHECK(d.features(1)[2] == doctest::Approx(1e-3));
  CHECK(d.features(2)[3] == -4.0f);
}

TEST_CASE("empty csv gives an empty dataset") {
  testing::TempDir dir("csv0");
  write_text(dir / "e.csv", "");
  CHECK(load_dataset(dir / "e.csv", DatasetFormat::Csv).size() == 0);
  write_text(dir / "h.csv", "dim=2,classes=2,domain=target\n");
  const auto d = load_dataset(dir / "h.csv", DatasetFormat::Csv);
  CHECK(d.size() == 0);
  CHECK(d.dim() == 2);
}

TEST_CASE("csv errors carry the right kind") {
  testing::TempDir dir("csverr");
  write_text(dir / "arity.csv", "dim=4,classes=3,domain=source\n0,1,2,3,4\n1,1,2,3,4,5\n");
  try {
    load_dataset(dir / "arity.csv", DatasetFormat::Csv);
    FAIL("expected schema error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Schema);
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
  write_text(dir / "nan.csv", "dim=2,classes=2,domain=source\n0,abc,1\n");
  CHECK(kind_of([&] { load_dataset(dir / "nan.csv", DatasetFormat::Csv); }) == ErrorKind::Parse);
  write_text(dir / "range.csv", "dim=2,classes=2,domain=source\n2,0,1\n");
  CHECK(kind_of([&] { load_dataset(dir / "range.csv", DatasetFormat::Csv); }) == ErrorKind::Range);
}

TEST_CASE("dataset files round-trip bit-exactly") {
  testing::TempDir dir("roundtrip");
  const Dataset d = small_dataset();
  for (auto fmt : {DatasetFormat::Csv, DatasetFormat::Bin}) {
    const auto a = dir / (fmt == DatasetFormat::Csv ? "a.csv" : "a.bin");
    const auto b = dir / (fmt == DatasetFormat::Csv ? "b.csv" : "b.bin");
    save_dataset(d, a, fmt);
    const Dataset back = load_dataset(a, fmt);
    CHECK(back == d);
    save_dataset(back, b, fmt);
    CHECK(testing::slurp(a) == testing::slurp(b));
  }
}

TEST_CASE("binary truncation is a format error") {
  testing::TempDir dir("trunc");
  save_dataset(small_dataset(), dir / "a.bin", DatasetFormat::Bin);
  const std::string bytes = testing::slurp(dir / "a.bin");
  std::ofstream(dir / "t.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  CHECK(kind_of([&] { load_dataset(dir / "t.bin", DatasetFormat::Bin); }) == ErrorKind::Format);
  std::ofstream(dir / "m.bin", std::ios::binary) << "XXXX" << bytes.substr(4);
  CHECK(kind_of([&] { load_dataset(dir / "m.bin", DatasetFormat::Bin); }) == ErrorKind::Format);
}

TEST_CASE("synthetic generation is deterministic and validated") {
  SyntheticConfig cfg;
  cfg.samples_per_class = 20;
  const auto a = generate_synthetic(cfg);
  const auto b = generate_synthetic(cfg);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first.size() == 80);
  CHECK(a.first.domain() == Domain::Source);
  CHECK(a.second.domain() == Domain::Target);
  cfg.seed = 8;
  CHECK(!(generate_synthetic(cfg).first == a.first));

  SyntheticConfig bad;
  bad.num_classes = 1;
  CHECK(kind_of([&] { generate_synthetic(bad); }) == ErrorKind::Config);
  bad = {};
  bad.dim = 1;
  CHECK(kind_of([&] { generate_synthetic(bad); }) == ErrorKind::Config);
  bad.rotation = 0;
  CHECK_NOTHROW(generate_synthetic(bad));
}

TEST_CASE("identity shift: class means agree across domains") {
  SyntheticConfig cfg;
  cfg.num_classes = 3;
  cfg.dim = 6;
  cfg.samples_per_class = 1000;
  cfg.cov_scale = 0.5;
  cfg.shift = 0;
  cfg.rotation = 0;
  cfg.scale = 1;
  const auto [s, t] = generate_synthetic(cfg);
  const double se = std::sqrt(cfg.cov_scale / cfg.samples_per_class);
  for (int c = 0; c < cfg.num_classes; ++c) {
    Eigen::VectorXd ms = Eigen::VectorXd::Zero(cfg.dim), mt = Eigen::VectorXd::Zero(cfg.dim);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (*s.label(i) == c) ms += s.features(i).cast<double>();
      if (*t.label(i) == c) mt += t.features(i).cast<double>();
    }
    ms /= cfg.samples_per_class;
    mt /= cfg.samples_per_class;
    // difference of two independent means: sd = sqrt(2) * se per coordinate
    CHECK((ms - mt).cwiseAbs().maxCoeff() <= 3 * std::sqrt(2.0) * se * 1.5);
  }
}

TEST_CASE("least-squares linear classifier separates the source domain") {
  SyntheticConfig cfg;
  cfg.num_classes = 3;
  cfg.separation = 5;
  cfg.cov_scale = 0.5;
  cfg.samples_per_class = 200;
  const auto [s, t] = generate_synthetic(cfg);
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd A(n, cfg.dim + 1), Y = Eigen::MatrixXd::Zero(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    A.row(i).head(cfg.dim) = s.features(i).cast<double>().transpose();
    A(i, cfg.dim) = 1.0;
    Y(i, *s.label(i)) = 1.0;
  }
  const Eigen::MatrixXd W = A.colPivHouseholderQr().solve(Y);
  const Eigen::MatrixXd scores = A * W;
  int correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index arg;
    scores.row(i).maxCoeff(&arg);
    correct += arg == *s.label(i);
  }
  CHECK(static_cast<double>(correct) / n >= 0.95);
}

TEST_CASE("target transform moves the data") {
  SyntheticConfig cfg;
  cfg.samples_per_class = 200;
  const auto [s, t] = generate_synthetic(cfg);
  Eigen::VectorXd ms = Eigen::VectorXd::Zero(cfg.dim), mt = Eigen::VectorXd::Zero(cfg.dim);
  for (std::size_t i = 0; i < s.size(); ++i) {
    ms += s.features(i).cast<double>();
    mt += t.features(i).cast<double>();
  }
  ms /= static_cast<double>(s.size());
  mt /= static_cast<double>(t.size());
  CHECK((mt - ms).norm() > 1.0);
}

TEST_CASE("batches follow the chunking rules") {
  auto sizes = [](const std::vector<std::vector<std::size_t>>& b) {
    std::vector<std::size_t> out;
    for (const auto& x : b) out.push_back(x.size());
    return out;
  };
  CHECK(sizes(make_batches(10, 4, 1, 0)) == std::vector<std::size_t>{4, 4, 2});
  CHECK(sizes(make_batches(9, 4, 1, 0)) == std::vector<std::size_t>{4, 4});
  CHECK(make_batches(9, 4, 1, 0) == make_batches(9, 4, 1, 0));
  CHECK(make_batches(50, 8, 1, 0) != make_batches(50, 8, 1, 1));
  CHECK(kind_of([] { make_batches(10, 1, 1, 0); }) == ErrorKind::Config);

  for (std::size_t n : {2u, 7u, 33u, 64u, 65u}) {
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const auto& b : make_batches(n, 8, 3, 2)) {
      total += b.size();
      seen.insert(b.begin(), b.end());
    }
    CHECK(seen.size() == total);
    CHECK(total + 1 >= n);
    CHECK(total <= n);
  }
}

TEST_CASE("gather puts samples in columns") {
  const Dataset d = small_dataset();
  const Eigen::MatrixXf X = gather(d, {4, 0});
  CHECK(X.rows() == 3);
  CHECK(X.cols() == 2);
  CHECK(X.col(0) == d.features(4));
  CHECK(X.col(1) == d.features(0));
}

TEST_CASE("dataset constructor validates records") {
  std::vector<EmbeddingRecord> r{{Eigen::VectorXf::Zero(2), 0, Domain::Source},
                                 {Eigen::VectorXf::Zero(3), 0, Domain::Source}};
  CHECK_THROWS_AS(Dataset(r, 2, 2), Error);
  r[1].features = Eigen::VectorXf::Constant(2, std::nanf(""));
  CHECK_THROWS_AS(Dataset(r, 2, 2), Error);
  r[1].features = Eigen::VectorXf::Zero(2);
  r[1].label = 5;
  CHECK_THROWS_AS(Dataset(r, 2, 2), Error);
}
