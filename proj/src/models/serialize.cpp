#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "intent/models.hpp"

// Byte layout is documented in docs/model-format.md.

namespace intent {

namespace {

static_assert(std::endian::native == std::endian::little,
              "model I/O assumes a little-endian host");

constexpr char kMagic[4] = {'I', 'S', 'N', 'S'};

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 1099511628211ull;
  }
  return h;
}

class Writer {
 public:
  template <class T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_doubles(const double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) put(v[i]);
  }
  void put_curve(const std::vector<double>& v) {
    put(static_cast<std::uint32_t>(v.size()));
    put_doubles(v.data(), v.size());
  }
  std::vector<std::uint8_t> finish() {
    put(fnv1a(buf_.data(), buf_.size()));
    return std::move(buf_);
  }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class T>
  T get(const char* what) {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw DataError(std::string("model file truncated while reading ") + what);
    }
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void get_doubles(double* out, std::size_t n, const char* what) {
    if (n > remaining() / sizeof(double)) {
      throw DataError(std::string("model file truncated while reading ") + what);
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = get<double>(what);
  }
  std::vector<double> get_curve(const char* what) {
    const auto n = get<std::uint32_t>(what);
    std::vector<double> v(n);
    get_doubles(v.data(), n, what);
    return v;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::vector<std::uint8_t> save_model_bytes(const Model& model) {
  Writer w;
  for (char c : kMagic) w.put(c);
  w.put(kModelFormatVersion);

  const ModelSpec& spec = model.spec();
  const auto dim = static_cast<std::uint16_t>(dimension(spec.feature_set));
  w.put(static_cast<std::uint8_t>(spec.kind));
  w.put(static_cast<std::uint8_t>(spec.feature_set));
  w.put(dim);

  const TrainConfig& tc = spec.train;
  w.put(tc.learning_rate);
  w.put(static_cast<std::uint32_t>(tc.batch_samples));
  w.put(static_cast<std::uint32_t>(tc.batch_sequences));
  w.put(static_cast<std::uint32_t>(tc.max_epochs));
  w.put(tc.validation_fraction);
  w.put(static_cast<std::uint32_t>(tc.patience));
  w.put(static_cast<std::uint8_t>(tc.class_weighting));

  const forest::ForestParams& fp = spec.forest;
  w.put(static_cast<std::uint32_t>(fp.trees));
  w.put(static_cast<std::uint32_t>(fp.max_depth));
  w.put(static_cast<std::uint32_t>(fp.min_samples_leaf));
  w.put(static_cast<std::uint32_t>(fp.features_per_split));
  w.put(static_cast<std::uint8_t>(fp.bootstrap));

  w.put_doubles(model.normalizer().mean.data(), dim);
  w.put_doubles(model.normalizer().scale.data(), dim);

  const TrainingInfo& info = model.info();
  w.put(info.seed);
  w.put(info.sequences);
  w.put(info.samples);
  w.put_curve(info.loss_curve);
  w.put_curve(info.validation_curve);

  std::visit(Overloaded{[&](const forest::RandomForest& rf) {
                          w.put(static_cast<std::uint32_t>(rf.trees().size()));
                          for (const auto& t : rf.trees()) {
                            w.put(static_cast<std::uint32_t>(t.nodes.size()));
                            for (const auto& n : t.nodes) {
                              w.put(n.feature);
                              w.put(n.threshold);
                              w.put(n.left);
                              w.put(n.right);
                              w.put(n.value);
                            }
                          }
                        },
                        [&](const auto& net) {
                          const auto& p = net.parameters();
                          w.put(static_cast<std::uint64_t>(p.size()));
                          w.put_doubles(p.data(), static_cast<std::size_t>(p.size()));
                        }},
             model.params());
  return w.finish();
}

Model load_model_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint16_t) + sizeof(std::uint64_t)) {
    throw DataError("model file truncated: too short for header");
  }
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a model file: bad magic bytes");
  }
  Reader r(bytes.first(bytes.size() - sizeof(std::uint64_t)));
  r.get<std::uint32_t>("magic");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kModelFormatVersion) {
    throw DataError("unsupported model format version " + std::to_string(version) +
                    " (expected " + std::to_string(kModelFormatVersion) + ")");
  }
  std::uint64_t stored_sum;
  std::memcpy(&stored_sum, bytes.data() + bytes.size() - sizeof(stored_sum), sizeof(stored_sum));
  if (stored_sum != fnv1a(bytes.data(), bytes.size() - sizeof(stored_sum))) {
    throw DataError("model file corrupted or truncated: checksum mismatch");
  }

  ModelSpec spec;
  const auto kind = r.get<std::uint8_t>("kind");
  const auto set = r.get<std::uint8_t>("feature set");
  const auto dim = r.get<std::uint16_t>("input dimension");
  if (kind > static_cast<std::uint8_t>(ModelKind::Recurrent)) throw DataError("bad model kind");
  if (set < 1 || set > 6) throw DataError("bad feature set");
  spec.kind = static_cast<ModelKind>(kind);
  spec.feature_set = static_cast<FeatureSet>(set);
  if (dim != dimension(spec.feature_set)) throw DataError("input dimension does not match feature set");

  TrainConfig& tc = spec.train;
  tc.learning_rate = r.get<double>("learning rate");
  tc.batch_samples = static_cast<int>(r.get<std::uint32_t>("batch size"));
  tc.batch_sequences = static_cast<int>(r.get<std::uint32_t>("batch size"));
  tc.max_epochs = static_cast<int>(r.get<std::uint32_t>("epochs"));
  tc.validation_fraction = r.get<double>("validation fraction");
  tc.patience = static_cast<int>(r.get<std::uint32_t>("patience"));
  tc.class_weighting = r.get<std::uint8_t>("class weighting") != 0;

  forest::ForestParams& fp = spec.forest;
  fp.trees = static_cast<int>(r.get<std::uint32_t>("forest params"));
  fp.max_depth = static_cast<int>(r.get<std::uint32_t>("forest params"));
  fp.min_samples_leaf = static_cast<int>(r.get<std::uint32_t>("forest params"));
  fp.features_per_split = static_cast<int>(r.get<std::uint32_t>("forest params"));
  fp.bootstrap = r.get<std::uint8_t>("forest params") != 0;

  Normalizer norm = Normalizer::identity(dim);
  r.get_doubles(norm.mean.data(), dim, "normalization");
  r.get_doubles(norm.scale.data(), dim, "normalization");

  TrainingInfo info;
  info.seed = r.get<std::uint64_t>("metadata");
  info.sequences = r.get<std::uint64_t>("metadata");
  info.samples = r.get<std::uint64_t>("metadata");
  info.loss_curve = r.get_curve("loss curve");
  info.validation_curve = r.get_curve("validation curve");

  auto read_dense = [&](auto net) {
    const auto n = r.get<std::uint64_t>("parameter count");
    if (n != static_cast<std::uint64_t>(net.parameters().size())) {
      throw DataError("parameter count " + std::to_string(n) + " does not match architecture");
    }
    r.get_doubles(net.parameters().data(), n, "parameters");
    return net;
  };

  Model::Params params = [&]() -> Model::Params {
    switch (spec.kind) {
      case ModelKind::Linear: return read_dense(nn::LogisticRegression(dim));
      case ModelKind::Mlp: return read_dense(nn::Mlp(dim));
      case ModelKind::Recurrent: return read_dense(nn::Lstm(dim));
      case ModelKind::RandomForest: {
        forest::RandomForest rf(dim);
        const auto n_trees = r.get<std::uint32_t>("tree count");
        for (std::uint32_t t = 0; t < n_trees; ++t) {
          forest::Tree tree;
          const auto n_nodes = r.get<std::uint32_t>("node count");
          if (n_nodes == 0) throw DataError("empty tree in model file");
          for (std::uint32_t k = 0; k < n_nodes; ++k) {
            forest::Node nd;
            nd.feature = r.get<std::int32_t>("tree node");
            nd.threshold = r.get<double>("tree node");
            nd.left = r.get<std::int32_t>("tree node");
            nd.right = r.get<std::int32_t>("tree node");
            nd.value = r.get<double>("tree node");
            const auto nn_ = static_cast<std::int32_t>(n_nodes);
            if (!nd.is_leaf() && (nd.feature >= dim || nd.left <= static_cast<std::int32_t>(k) ||
                                  nd.right <= static_cast<std::int32_t>(k) || nd.left >= nn_ ||
                                  nd.right >= nn_)) {
              throw DataError("malformed tree node in model file");
            }
            tree.nodes.push_back(nd);
          }
          rf.trees().push_back(std::move(tree));
        }
        return rf;
      }
    }
    throw DataError("bad model kind");
  }();
  if (r.remaining() != 0) throw DataError("trailing bytes after model parameters");
  return Model(spec, std::move(norm), std::move(params), std::move(info));
}

void save_model(const Model& model, std::ostream& out) {
  const auto bytes = save_model_bytes(model);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed to write model");
}

Model load_model(std::istream& in) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return load_model_bytes(bytes);
}

void save_model_file(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  save_model(model, out);
}

Model load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  return load_model(in);
}

}  // namespace intent
