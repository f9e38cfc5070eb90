#include "uda/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>

#include "uda/binary_io.hpp"
#include "uda/error.hpp"
#include "uda/rng.hpp"

namespace uda {

Dataset::Dataset(std::vector<EmbeddingRecord> records, int dim, int num_classes)
    : records_(std::move(records)), dim_(dim), num_classes_(num_classes) {
  if (dim < 0 || num_classes < 0) throw Error(ErrorKind::Schema, "negative dim or class count");
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& r = records_[i];
    if (r.features.size() != dim) {
      throw Error(ErrorKind::Schema, "record " + std::to_string(i) + " has " +
                                         std::to_string(r.features.size()) + " features, expected " +
                                         std::to_string(dim));
    }
    if (!r.features.allFinite()) {
      throw Error(ErrorKind::Data, "record " + std::to_string(i) + " has non-finite features");
    }
    if (r.label && (*r.label < 0 || *r.label >= num_classes)) {
      throw Error(ErrorKind::Range, "record " + std::to_string(i) + " label " + std::to_string(*r.label) +
                                        " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

Domain Dataset::domain() const { return records_.empty() ? Domain::Source : records_.front().domain; }

bool Dataset::fully_labeled() const {
  return std::all_of(records_.begin(), records_.end(), [](const auto& r) { return r.label.has_value(); });
}

bool operator==(const Dataset& a, const Dataset& b) {
  if (a.dim_ != b.dim_ || a.num_classes_ != b.num_classes_ || a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& ra = a.records_[i];
    const auto& rb = b.records_[i];
    if (ra.label != rb.label || ra.domain != rb.domain) return false;
    if (std::memcmp(ra.features.data(), rb.features.data(), sizeof(float) * ra.features.size()) != 0) {
      return false;
    }
  }
  return true;
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end && !text.empty();
}

Domain parse_domain(std::string_view s) {
  if (s == "source") return Domain::Source;
  if (s == "target") return Domain::Target;
  throw Error(ErrorKind::Parse, "unknown domain '" + std::string(s) + "' in header");
}

const char* domain_name(Domain d) { return d == Domain::Source ? "source" : "target"; }

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) return Dataset{};

  int dim = -1, classes = -1;
  std::optional<Domain> domain;
  for (auto field : split(trim(line), ',')) {
    field = trim(field);
    const auto eq = field.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorKind::Parse, "malformed header field '" + std::string(field) + "'");
    const auto key = field.substr(0, eq);
    const auto value = field.substr(eq + 1);
    if (key == "dim") {
      if (!parse_number(value, dim) || dim < 0) throw Error(ErrorKind::Parse, "bad dim in header");
    } else if (key == "classes") {
      if (!parse_number(value, classes) || classes < 0) throw Error(ErrorKind::Parse, "bad classes in header");
    } else if (key == "domain") {
      domain = parse_domain(trim(value));
    } else {
      throw Error(ErrorKind::Parse, "unknown header key '" + std::string(key) + "'");
    }
  }
  if (dim < 0 || classes < 0 || !domain) throw Error(ErrorKind::Parse, "header needs dim, classes and domain");

  std::vector<EmbeddingRecord> records;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split(trim(line), ',');
    const auto where = "row " + std::to_string(row);
    if (fields.size() != static_cast<std::size_t>(dim) + 1) {
      // A numeric row of the wrong length is a schema problem; anything else is unparseable.
      throw Error(ErrorKind::Schema, where + ": " + std::to_string(fields.size() - 1) + " features, expected " +
                                         std::to_string(dim));
    }
    int label = 0;
    if (!parse_number(fields[0], label)) throw Error(ErrorKind::Parse, where + ": non-numeric label");
    if (label < -1 || label >= classes) {
      throw Error(ErrorKind::Range, where + ": label " + std::to_string(label) + " outside [0, " +
                                        std::to_string(classes) + ")");
    }
    EmbeddingRecord rec;
    rec.features.resize(dim);
    for (int j = 0; j < dim; ++j) {
      if (!parse_number(fields[j + 1], rec.features[j])) {
        throw Error(ErrorKind::Parse, where + ": non-numeric feature " + std::to_string(j));
      }
    }
    if (label >= 0) rec.label = label;
    rec.domain = *domain;
    records.push_back(std::move(rec));
    ++row;
  }
  return Dataset(std::move(records), dim, classes);
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "dim=" << ds.dim() << ",classes=" << ds.num_classes() << ",domain=" << domain_name(ds.domain()) << '\n';
  char buf[64];
  for (const auto& r : ds.records()) {
    out << (r.label ? *r.label : -1);
    for (int j = 0; j < ds.dim(); ++j) {
      // Shortest representation that round-trips the float exactly.
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), r.features[j]);
      out << ',' << std::string_view(buf, end - buf);
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

Dataset load_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  binio::expect_magic(in, "UDAE");
  binio::expect_version(in, 1);
  const auto dim = binio::get_uint<std::uint32_t>(in, "dim");
  const auto classes = binio::get_uint<std::uint32_t>(in, "classes");
  const auto domain_byte = binio::get_uint<std::uint8_t>(in, "domain");
  if (domain_byte > 1) throw Error(ErrorKind::Format, "bad domain byte");
  const auto count = binio::get_uint<std::uint64_t>(in, "record count");
  std::vector<EmbeddingRecord> records;
  for (std::uint64_t i = 0; i < count; ++i) {
    EmbeddingRecord rec;
    const auto label = binio::get_i32(in, "label");
    if (label < -1 || label >= static_cast<std::int64_t>(classes)) {
      throw Error(ErrorKind::Range, "record " + std::to_string(i) + ": label " + std::to_string(label) +
                                        " outside [0, " + std::to_string(classes) + ")");
    }
    if (label >= 0) rec.label = label;
    rec.features.resize(dim);
    for (std::uint32_t j = 0; j < dim; ++j) rec.features[j] = binio::get_f32(in, "features");
    rec.domain = static_cast<Domain>(domain_byte);
    records.push_back(std::move(rec));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorKind::Format, "trailing bytes after records");
  return Dataset(std::move(records), static_cast<int>(dim), static_cast<int>(classes));
}

void save_bin(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  binio::put_magic(out, "UDAE");
  binio::put_uint<std::uint16_t>(out, 1);
  binio::put_uint<std::uint32_t>(out, ds.dim());
  binio::put_uint<std::uint32_t>(out, ds.num_classes());
  binio::put_uint<std::uint8_t>(out, static_cast<std::uint8_t>(ds.domain()));
  binio::put_uint<std::uint64_t>(out, ds.size());
  for (const auto& r : ds.records()) {
    binio::put_i32(out, r.label ? *r.label : -1);
    for (int j = 0; j < ds.dim(); ++j) binio::put_f32(out, r.features[j]);
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

// Gram-Schmidt on seeded Gaussian vectors; columns are orthonormal while
// count <= dim, merely unit-norm beyond that.
Eigen::MatrixXd random_frame(SplitMix64& rng, int dim, int count) {
  Eigen::MatrixXd frame(dim, count);
  for (int c = 0; c < count; ++c) {
    Eigen::VectorXd v(dim);
    for (int j = 0; j < dim; ++j) v[j] = rng.normal();
    if (c < dim) {
      for (int p = 0; p < c; ++p) v -= frame.col(p).dot(v) * frame.col(p);
    }
    frame.col(c) = v.normalized();
  }
  return frame;
}

}  // namespace

DatasetFormat format_for(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DatasetFormat::Csv : DatasetFormat::Bin;
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  return format == DatasetFormat::Csv ? load_csv(path) : load_bin(path);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path, DatasetFormat format) {
  if (format == DatasetFormat::Csv) {
    save_csv(dataset, path);
  } else {
    save_bin(dataset, path);
  }
}

void SyntheticConfig::validate() const {
  if (num_classes < 2) throw Error(ErrorKind::Config, "synthetic data needs at least 2 classes");
  if (dim < 1) throw Error(ErrorKind::Config, "dim must be positive");
  if (dim < 2 && rotation != 0.0) throw Error(ErrorKind::Config, "rotation needs dim >= 2");
  if (samples_per_class < 1) throw Error(ErrorKind::Config, "samples per class must be >= 1");
  for (double v : {separation, cov_scale, shift, rotation, scale}) {
    if (!std::isfinite(v)) throw Error(ErrorKind::Config, "synthetic magnitudes must be finite");
  }
  if (separation <= 0 || cov_scale <= 0) throw Error(ErrorKind::Config, "separation and cov_scale must be > 0");
}

std::pair<Dataset, Dataset> generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  const int D = config.dim;
  const int C = config.num_classes;

  SplitMix64 mean_rng(derive_seed(config.seed, stream::kClassMeans));
  const Eigen::MatrixXd means = config.separation * random_frame(mean_rng, D, C);

  SplitMix64 shift_rng(derive_seed(config.seed, stream::kShift));
  Eigen::MatrixXd transform = config.scale * Eigen::MatrixXd::Identity(D, D);
  if (D >= 2) {
    Eigen::MatrixXd plane = random_frame(shift_rng, D, 2);
    const Eigen::VectorXd u = plane.col(0), v = plane.col(1);
    const double c = std::cos(config.rotation), s = std::sin(config.rotation);
    Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(D, D) + (c - 1.0) * (u * u.transpose() + v * v.transpose()) +
                          s * (v * u.transpose() - u * v.transpose());
    transform = rot * transform;
  }
  const Eigen::VectorXd translation = config.shift * random_frame(shift_rng, D, 1).col(0);

  const double sd = std::sqrt(config.cov_scale);
  auto draw = [&](std::uint64_t tag, Domain domain) {
    SplitMix64 rng(derive_seed(config.seed, tag));
    std::vector<EmbeddingRecord> records;
    records.reserve(static_cast<std::size_t>(C) * config.samples_per_class);
    for (int s = 0; s < config.samples_per_class; ++s) {
      for (int c = 0; c < C; ++c) {
        Eigen::VectorXd x(D);
        for (int j = 0; j < D; ++j) x[j] = means(j, c) + sd * rng.normal();
        if (domain == Domain::Target) x = transform * x + translation;
        records.push_back({x.cast<float>(), c, domain});
      }
    }
    // Emit in seeded random order so unshuffled consumers see mixed classes.
    for (std::size_t i = records.size(); i > 1; --i) std::swap(records[i - 1], records[rng.below(i)]);
    return Dataset(std::move(records), D, C);
  };
  return {draw(stream::kSourceSamples, Domain::Source), draw(stream::kTargetSamples, Domain::Target)};
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, std::uint64_t seed,
                                                   std::uint64_t epoch) {
  if (batch_size < 2) throw Error(ErrorKind::Config, "batch size must be >= 2");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  SplitMix64 rng(derive_seed(seed, stream::kShuffle, epoch));
  for (std::size_t i = n; i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.below(i)]);
  }
  std::vector<std::vector<std::size_t>> batches;
  const auto bs = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < n; start += bs) {
    const std::size_t end = std::min(n, start + bs);
    if (end - start < 2) break;
    batches.emplace_back(perm.begin() + start, perm.begin() + end);
  }
  return batches;
}

Eigen::MatrixXf gather(const RecordSource& dataset, const std::vector<std::size_t>& indices) {
  Eigen::MatrixXf X(dataset.dim(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) X.col(static_cast<Eigen::Index>(c)) = dataset.features(indices[c]);
  return X;
}

}  // namespace uda
