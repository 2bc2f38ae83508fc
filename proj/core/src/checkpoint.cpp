#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "locret/errors.hpp"
#include "locret/estimator.hpp"
#include "locret/hashing.hpp"
#include "locret/json_io.hpp"

namespace locret {

namespace {

constexpr std::array<char, 8> kMagic = {'L', 'O', 'C', 'R', 'E', 'T', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint64_t u64() { return read_le(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(read_le(4)); }
  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CorruptFileError("checkpoint truncated");
  }
  std::uint64_t read_le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::uint64_t checksum(std::string_view bytes) { return fnv1a64(bytes); }

}  // namespace

std::uint64_t Estimator::version_hash() const { return fnv1a64(version); }

std::string Estimator::compute_version(const ModelParams& params, const Vocabulary& vocab,
                                       const FeatureStats& stats) {
  std::uint64_t h = hash_combine(fnv1a64("locret-model"), vocab.fingerprint());
  for (double v : stats.mean) h = hash_double(h, v);
  for (double v : stats.stddev) h = hash_double(h, v);
  h = hash_combine(h, params.shape.hidden);
  for (double v : params.values) h = hash_double(h, v);
  std::ostringstream s;
  s << "locret-model/" << kFormatVersion << ":" << std::hex << h;
  return s.str();
}

Estimator Estimator::assemble(ModelParams params, Vocabulary vocab, FeatureStats stats,
                              TrainConfig config) {
  Estimator e;
  e.version = compute_version(params, vocab, stats);
  e.params = std::move(params);
  e.vocab = std::move(vocab);
  e.stats = stats;
  e.config = config;
  return e;
}

std::vector<TrainingExample> encode_examples(std::span<const LabeledSearch> data,
                                             const Vocabulary& vocab, const FeatureStats& stats) {
  std::vector<TrainingExample> out;
  out.reserve(data.size());
  for (const auto& d : data) {
    out.push_back({encode(d.request, vocab, stats), d.request.center, d.booked});
  }
  return out;
}

FitResult fit_estimator(const TrainConfig& config, std::span<const LabeledSearch> data,
                        const EpochCallback& on_epoch) {
  if (data.empty()) throw DataError("fit: empty dataset");
  std::vector<SearchRequest> requests;
  requests.reserve(data.size());
  for (const auto& d : data) requests.push_back(d.request);
  Vocabulary vocab = Vocabulary::build(requests);
  const FeatureStats stats = FeatureStats::compute(requests);
  const auto examples = encode_examples(data, vocab, stats);
  const auto shape = ModelShape::for_vocab(vocab, config.hidden, config.nonnegative_output);
  TrainResult tr = train(config, shape, examples, on_epoch);
  FitResult out;
  out.initial_loss = tr.initial_loss;
  out.epoch_loss = std::move(tr.epoch_loss);
  out.estimator = Estimator::assemble(std::move(tr.params), std::move(vocab), stats, config);
  return out;
}

void save_checkpoint(const Estimator& est, const std::filesystem::path& path) {
  json header = {{"version", est.version},
                 {"config", est.config},
                 {"shape", est.params.shape},
                 {"features", feature_sidecar(est.vocab, est.stats)},
                 {"num_params", est.params.values.size()}};
  const std::string header_text = header.dump();

  std::string bytes(kMagic.begin(), kMagic.end());
  put_u32(bytes, kFormatVersion);
  put_u64(bytes, header_text.size());
  bytes += header_text;
  put_u64(bytes, est.params.values.size());
  for (double v : est.params.values) put_u64(bytes, std::bit_cast<std::uint64_t>(v));
  put_u64(bytes, checksum(bytes));
  write_text_file(path, bytes);
}

Estimator load_checkpoint(const std::filesystem::path& path,
                          std::optional<std::uint64_t> expected_vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  Reader r(bytes);
  if (r.take(kMagic.size()) != std::string(kMagic.begin(), kMagic.end())) {
    throw CorruptFileError("not a locret checkpoint: " + path.string());
  }
  const std::uint32_t format = r.u32();
  if (format != kFormatVersion) {
    throw VersionError("checkpoint format version " + std::to_string(format) + ", expected " +
                       std::to_string(kFormatVersion));
  }
  const std::string header_text = r.take(r.u64());
  const std::uint64_t n = r.u64();
  if (n > r.remaining() / 8) throw CorruptFileError("checkpoint truncated");
  std::vector<double> values(n);
  for (auto& v : values) v = std::bit_cast<double>(r.u64());
  const std::size_t body_end = r.pos();
  const std::uint64_t stored = r.u64();
  if (r.remaining() != 0) throw CorruptFileError("trailing bytes in checkpoint");
  if (stored != checksum(std::string_view(bytes).substr(0, body_end))) {
    throw CorruptFileError("checkpoint checksum mismatch");
  }

  Estimator est;
  try {
    const json header = json::parse(header_text);
    header.at("version").get_to(est.version);
    header.at("config").get_to(est.config);
    const auto& features = header.at("features");
    features.at("vocabulary").get_to(est.vocab);
    features.at("continuous_stats").get_to(est.stats);
    est.params.shape = header.at("shape").get<ModelShape>();
  } catch (const json::exception& e) {
    throw CorruptFileError(std::string("checkpoint header: ") + e.what());
  }
  if (expected_vocab && *expected_vocab != est.vocab.fingerprint()) {
    throw VersionError("checkpoint was trained on a different vocabulary");
  }
  if (est.params.shape.vocab_sizes != est.vocab.sizes()) {
    throw VersionError("checkpoint shape does not match its vocabulary");
  }
  est.params.layout = ParamLayout(est.params.shape);
  if (est.params.layout.total != values.size()) {
    throw CorruptFileError("checkpoint parameter count does not match its shape");
  }
  est.params.values = std::move(values);
  if (Estimator::compute_version(est.params, est.vocab, est.stats) != est.version) {
    throw VersionError("checkpoint version string does not match its contents");
  }
  return est;
}

}  // namespace locret
