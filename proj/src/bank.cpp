#include "uda/bank.hpp"

#include <fstream>
#include <string>

#include "uda/binary_io.hpp"
#include "uda/error.hpp"

namespace uda {

PrototypeBank::PrototypeBank(int num_classes, int slots_per_class, int dim, float momentum)
    : num_classes_(num_classes), slots_per_class_(slots_per_class), dim_(dim), momentum_(momentum) {
  if (num_classes < 1 || slots_per_class < 1 || dim < 1) {
    throw Error(ErrorKind::Config, "bank needs positive class count, slot count and dim");
  }
  if (!(momentum >= 0.0f && momentum <= 1.0f)) throw Error(ErrorKind::Config, "bank momentum must be in [0, 1]");
  slots_ = Eigen::MatrixXf::Zero(dim, num_classes * slots_per_class);
  occupied_.assign(static_cast<std::size_t>(num_classes * slots_per_class), 0);
  cursor_.assign(static_cast<std::size_t>(num_classes), 0);
}

bool PrototypeBank::empty() const { return occupied_count() == 0; }

int PrototypeBank::occupied_count() const {
  int n = 0;
  for (auto o : occupied_) n += o ? 1 : 0;
  return n;
}

void PrototypeBank::update(const Eigen::MatrixXf& embeddings, const std::vector<int>& labels) {
  if (embeddings.rows() != dim_ || embeddings.cols() != static_cast<Eigen::Index>(labels.size())) {
    throw Error(ErrorKind::Shape, "bank update shape mismatch");
  }
  if (!embeddings.allFinite()) throw Error(ErrorKind::Numeric, "non-finite embedding in bank update");
  Eigen::MatrixXf sums = Eigen::MatrixXf::Zero(dim_, num_classes_);
  std::vector<int> counts(static_cast<std::size_t>(num_classes_), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= num_classes_) throw Error(ErrorKind::Range, "bank update label out of range");
    sums.col(y) += embeddings.col(static_cast<Eigen::Index>(i));
    ++counts[static_cast<std::size_t>(y)];
  }
  for (int c = 0; c < num_classes_; ++c) {
    if (counts[c] == 0) continue;
    const Eigen::VectorXf mean = sums.col(c) / static_cast<float>(counts[c]);
    // An all-zero mean cannot serve cosine retrieval.
    if (mean.squaredNorm() == 0.0f) continue;
    const int s = index(c, cursor_[c]);
    if (occupied_[s]) {
      slots_.col(s) = momentum_ * slots_.col(s) + (1.0f - momentum_) * mean;
    } else {
      slots_.col(s) = mean;
      occupied_[s] = 1;
    }
    cursor_[c] = (cursor_[c] + 1) % slots_per_class_;
  }
}

bool operator==(const PrototypeBank& a, const PrototypeBank& b) {
  return a.num_classes_ == b.num_classes_ && a.slots_per_class_ == b.slots_per_class_ && a.dim_ == b.dim_ &&
         a.momentum_ == b.momentum_ && a.occupied_ == b.occupied_ && a.slots_ == b.slots_;
}

void PrototypeBank::write(std::ostream& os) const {
  binio::put_magic(os, "UDAB");
  binio::put_uint<std::uint16_t>(os, 1);
  binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(num_classes_));
  binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(slots_per_class_));
  binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(dim_));
  binio::put_f32(os, momentum_);
  for (std::size_t s = 0; s < occupied_.size(); ++s) {
    binio::put_uint<std::uint8_t>(os, occupied_[s]);
    for (int j = 0; j < dim_; ++j) binio::put_f32(os, slots_(j, static_cast<Eigen::Index>(s)));
  }
}

PrototypeBank PrototypeBank::read(std::istream& is) {
  binio::expect_magic(is, "UDAB");
  binio::expect_version(is, 1);
  const auto C = binio::get_uint<std::uint32_t>(is, "classes");
  const auto M = binio::get_uint<std::uint32_t>(is, "slots per class");
  const auto d = binio::get_uint<std::uint32_t>(is, "dim");
  const float momentum = binio::get_f32(is, "momentum");
  if (C == 0 || M == 0 || d == 0 || C > (1u << 20) || M > (1u << 16) || d > (1u << 20)) {
    throw Error(ErrorKind::Format, "implausible bank dimensions");
  }
  PrototypeBank bank;
  try {
    bank = PrototypeBank(static_cast<int>(C), static_cast<int>(M), static_cast<int>(d), momentum);
  } catch (const Error& e) {
    throw Error(ErrorKind::Format, e.what());
  }
  std::vector<int> filled(C, 0);
  for (std::size_t s = 0; s < bank.occupied_.size(); ++s) {
    const auto flag = binio::get_uint<std::uint8_t>(is, "slot flag");
    if (flag > 1) throw Error(ErrorKind::Format, "bad slot flag");
    bank.occupied_[s] = flag;
    for (std::uint32_t j = 0; j < d; ++j) bank.slots_(j, static_cast<Eigen::Index>(s)) = binio::get_f32(is, "slot");
    if (flag) {
      if (!bank.slots_.col(static_cast<Eigen::Index>(s)).allFinite()) {
        throw Error(ErrorKind::Format, "non-finite prototype in bank file");
      }
      ++filled[s / M];
    }
  }
  for (std::uint32_t c = 0; c < C; ++c) bank.cursor_[c] = filled[c] % static_cast<int>(M);
  if (is.peek() != std::char_traits<char>::eof()) throw Error(ErrorKind::Format, "trailing bytes in bank file");
  return bank;
}

void save_bank(const PrototypeBank& bank, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  bank.write(out);
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

PrototypeBank load_bank(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Inference, "cannot open bank file " + path.string());
  return PrototypeBank::read(in);
}

Retrieval retrieve(const Eigen::VectorXf& query, const ModelParams<float>& model, const PrototypeBank& bank, int k) {
  if (k < 1) throw Error(ErrorKind::Usage, "k must be >= 1");
  if (bank.empty()) throw Error(ErrorKind::Inference, "prototype bank is empty");
  if (bank.dim() != model.config.hidden_dim || bank.num_classes() != model.config.num_classes) {
    throw Error(ErrorKind::Config, "bank does not match the model dimensions");
  }
  if (query.size() != model.config.input_dim) {
    throw Error(ErrorKind::Shape, "query has " + std::to_string(query.size()) + " features, model expects " +
                                      std::to_string(model.config.input_dim));
  }
  Retrieval r;
  r.query_embedding = project<float>(query, model).col(0);
  std::vector<Eigen::VectorXd> prototypes;
  for (int c = 0; c < bank.num_classes(); ++c) {
    for (int m = 0; m < bank.slots_per_class(); ++m) {
      if (!bank.occupied(c, m)) continue;
      r.slots.push_back(c * bank.slots_per_class() + m);
      r.slot_classes.push_back(c);
      prototypes.push_back(bank.slot(c, m).cast<double>());
    }
  }
  r.star = build_star(r.query_embedding.cast<double>(), prototypes, k);
  return r;
}

Eigen::VectorXd infer_single(const Eigen::VectorXf& query, const ModelParams<float>& model, const PrototypeBank& bank,
                             int k) {
  const Retrieval r = retrieve(query, model, bank, k);
  Eigen::VectorXf embedding = r.query_embedding;
  if (model.config.use_gat) {
    Eigen::MatrixXf nodes(model.config.hidden_dim, r.star.k() + 1);
    nodes.col(0) = r.query_embedding;
    for (int p = 0; p < r.star.k(); ++p) {
      const int slot = r.slots[static_cast<std::size_t>(r.star.prototypes[p])];
      nodes.col(p + 1) = bank.slot(slot / bank.slots_per_class(), slot % bank.slots_per_class());
    }
    embedding = gat_forward<float>(Adjacency::from(r.star, model.config.self_loops), nodes, model).col(0);
  }
  const Eigen::VectorXd logits = (model.task_weight * embedding + model.task_bias).cast<double>();
  const Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace uda
