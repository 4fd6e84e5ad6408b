#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "noisyrag/retrieval/model_io.hpp"
#include "noisyrag/retrieval/trainer.hpp"

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

namespace noisyrag::retrieval {

std::vector<TrainingTriple> attach_hard_negatives(const std::vector<TrainPair>& pairs, const Corpus& corpus,
                                                  std::uint64_t seed) {
  if (corpus.size() < 2) fail(ErrorKind::kInvalidInput, "hard negatives need a corpus of at least two documents");
  std::vector<TrainingTriple> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (!corpus.contains(p.positive_id)) {
      fail(ErrorKind::kValidation, "query '" + p.query_id + "' has unknown positive '" + p.positive_id + "'");
    }
    Rng rng = make_stream(seed, "hard-negative:" + p.query_id);
    std::size_t pick = uniform_index(rng, corpus.size() - 1);
    const auto& docs = corpus.documents();
    std::size_t positive_pos = 0;
    while (docs[positive_pos].doc_id != p.positive_id) ++positive_pos;
    if (pick >= positive_pos) ++pick;
    out.push_back({p.query_id, p.query, p.positive_id, docs[pick].doc_id});
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    fail(ErrorKind::kConfig, "learning rate must be a finite nonnegative number");
  }
  if (batch_size < 2) fail(ErrorKind::kConfig, "batch size must be at least 2");
  if (epochs < 1) fail(ErrorKind::kConfig, "epochs must be at least 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail(ErrorKind::kConfig, "momentum must lie in [0, 1)");
}

namespace {

constexpr char kMagic[8] = {'N', 'R', 'D', 'E', 'N', 'S', 'E', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buffer_.append(c, n);
  }
  template <typename T>
  void put(T v) {
    bytes(&v, sizeof v);
  }
  std::string& buffer() { return buffer_; }

 private:
  std::string buffer_;
};

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}
  void bytes(void* p, std::size_t n) {
    if (pos_ + n > data_.size()) fail(ErrorKind::kSchema, "model file is truncated");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T get() {
    T v;
    bytes(&v, sizeof v);
    return v;
  }
  std::size_t pos() const { return pos_; }
  const std::string& data() const { return data_; }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

template <typename Scalar>
void save_impl(const DenseModel<Scalar>& model, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(sizeof(Scalar));
  const auto& h = model.hashing();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(h.ngram_sizes.size()));
  for (unsigned n : h.ngram_sizes) w.put<std::uint32_t>(n);
  w.put<std::uint32_t>(h.log2_buckets);
  w.put<std::int64_t>(model.output_dim());
  w.put<double>(static_cast<double>(model.temperature()));
  w.bytes(model.weights().data(), sizeof(Scalar) * static_cast<std::size_t>(model.weights().size()));
  const std::uint64_t checksum = detail::fingerprint_bytes(0xcbf29ce484222325ULL, w.buffer().data(), w.buffer().size());
  w.put<std::uint64_t>(checksum);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write model file " + path.string());
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) fail(ErrorKind::kIo, "failed writing model file " + path.string());
}

template <typename Scalar>
Matrix<double> read_weights(Reader& r, Eigen::Index rows, Eigen::Index cols) {
  Matrix<Scalar> w(rows, cols);
  r.bytes(w.data(), sizeof(Scalar) * static_cast<std::size_t>(w.size()));
  return w.template cast<double>();
}

}  // namespace

void save_dense_model(const DenseModeld& model, const std::filesystem::path& path) { save_impl(model, path); }
void save_dense_model(const DenseModelf& model, const std::filesystem::path& path) { save_impl(model, path); }

DenseModeld load_dense_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open model file " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < sizeof kMagic + sizeof(std::uint64_t)) fail(ErrorKind::kSchema, "model file is truncated");
  std::uint64_t stored = 0;
  std::memcpy(&stored, data.data() + data.size() - sizeof stored, sizeof stored);
  const std::uint64_t actual = detail::fingerprint_bytes(0xcbf29ce484222325ULL, data.data(), data.size() - sizeof stored);
  Reader r(std::move(data));
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) fail(ErrorKind::kSchema, "not a dense model file");
  if (r.get<std::uint32_t>() != kVersion) fail(ErrorKind::kSchema, "unsupported model file version");
  if (stored != actual) fail(ErrorKind::kSchema, "model file checksum mismatch");
  const auto scalar_bytes = r.get<std::uint32_t>();
  HashingConfig hashing;
  hashing.ngram_sizes.resize(r.get<std::uint32_t>());
  for (auto& n : hashing.ngram_sizes) n = r.get<std::uint32_t>();
  hashing.log2_buckets = r.get<std::uint32_t>();
  hashing.validate();
  const auto rows = r.get<std::int64_t>();
  const auto tau = r.get<double>();
  if (rows < 1 || rows > (1 << 16)) fail(ErrorKind::kSchema, "implausible output dimension in model file");
  const auto cols = static_cast<Eigen::Index>(hashing.dim());
  Matrix<double> w;
  if (scalar_bytes == sizeof(double)) {
    w = read_weights<double>(r, rows, cols);
  } else if (scalar_bytes == sizeof(float)) {
    w = read_weights<float>(r, rows, cols);
  } else {
    fail(ErrorKind::kSchema, "unsupported scalar width in model file");
  }
  if (r.pos() + sizeof(std::uint64_t) != r.data().size()) fail(ErrorKind::kSchema, "trailing bytes in model file");
  return DenseModeld(std::move(hashing), std::move(w), tau);
}

}  // namespace noisyrag::retrieval
