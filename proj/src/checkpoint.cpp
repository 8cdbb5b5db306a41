#include "eapcr/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "eapcr/config.hpp"
#include "eapcr/error.hpp"

namespace eapcr::io {

namespace {

namespace ad = eapcr::autodiff;

class ByteWriter {
 public:
  void bytes(std::string_view b) { out_.append(b); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v), 8); }
  std::size_t size() const { return out_.size(); }
  std::string take() { return std::move(out_); }
  std::string_view view(std::size_t from) const { return std::string_view(out_).substr(from); }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view in) : in_(in) {}

  std::string_view bytes(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) {
      throw IntegrityError(std::string("checkpoint truncated while reading ") + what + " (need " + std::to_string(n) +
                           " bytes, " + std::to_string(in_.size() - pos_) + " left)");
    }
    auto out = in_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(get_le(4, what)); }
  std::uint64_t u64(const char* what) { return get_le(8, what); }
  bool at_end() const { return pos_ == in_.size(); }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::uint64_t get_le(int n, const char* what) {
    const auto b = bytes(static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

json model_config_to_json(const model::ModelConfig& c) {
  return json{{"cardinalities", c.cardinalities},
              {"embed_size", c.embed_size},
              {"conv_channels", {c.conv1_channels, c.conv2_channels}},
              {"mlp_hidden", c.mlp_hidden},
              {"output_dim", c.output_dim}};
}

model::ModelConfig model_config_from_json(const json& j) {
  model::ModelConfig c;
  c.cardinalities = j.at("cardinalities").get<std::vector<std::size_t>>();
  c.embed_size = j.at("embed_size").get<std::size_t>();
  const auto ch = j.at("conv_channels").get<std::vector<std::size_t>>();
  if (ch.size() != 2) throw FormatError("checkpoint: conv_channels needs two entries");
  c.conv1_channels = ch[0];
  c.conv2_channels = ch[1];
  c.mlp_hidden = j.at("mlp_hidden").get<std::vector<std::size_t>>();
  c.output_dim = j.at("output_dim").get<std::size_t>();
  return c;
}

json header_json(const Checkpoint& ckpt) {
  json vocab = json::array(), discs = json::array();
  const auto& p = ckpt.pipeline;
  for (std::size_t c = 0; c < p.schema.n(); ++c) {
    if (p.schema.columns[c].kind == features::ColumnKind::Categorical) {
      const auto& v = p.vocab.columns.at(c);
      vocab.push_back(json{{"values", v.values()}, {"counts", v.counts()}});
      discs.push_back(nullptr);
    } else {
      vocab.push_back(nullptr);
      const auto& d = p.discretizers.at(c).value();
      discs.push_back(json{{"requested_bins", d.requested_bins}, {"edges", d.edges}});
    }
  }
  json manifest = json::array();
  const auto names = ckpt.params.names();
  const auto tensors = ckpt.params.tensors();
  for (std::size_t i = 0; i < names.size(); ++i) manifest.push_back(json{{"name", names[i]}, {"shape", tensors[i].shape()}});

  return json{{"target", ckpt.target},
              {"model", model_config_to_json(ckpt.params.config)},
              {"schema", schema_to_json(p.schema)},
              {"vocabulary", std::move(vocab)},
              {"discretizers", std::move(discs)},
              {"scaler", {{"mean", ckpt.scaler.mean}, {"stddev", ckpt.scaler.stddev}}},
              {"tensors", std::move(manifest)}};
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.bytes(std::string_view(kCheckpointMagic, sizeof kCheckpointMagic));
  w.u32(kCheckpointVersion);
  const std::string header = header_json(ckpt).dump();
  w.u64(header.size());
  w.bytes(header);

  const auto names = ckpt.params.names();
  const auto tensors = ckpt.params.tensors();
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    w.u32(static_cast<std::uint32_t>(names[i].size()));
    w.bytes(names[i]);
    w.u32(static_cast<std::uint32_t>(tensors[i].rank()));
    for (std::size_t d : tensors[i].shape()) w.u64(d);
    w.u64(tensors[i].numel() * 8);
    const std::size_t start = w.size();
    for (double v : tensors[i].data()) w.f64(v);
    w.u64(fnv1a64(w.view(start)));
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  ByteReader r(bytes);
  if (bytes.size() < sizeof kCheckpointMagic ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw FormatError("not an EAPCR checkpoint (bad magic bytes)");
  }
  r.bytes(sizeof kCheckpointMagic, "magic");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint format version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t header_len = r.u64("header length");
  if (header_len > r.remaining()) throw IntegrityError("checkpoint truncated inside the header");
  const auto header_text = r.bytes(static_cast<std::size_t>(header_len), "header");

  Checkpoint ckpt;
  json manifest;
  try {
    const json h = json::parse(header_text);
    ckpt.target = h.at("target").get<std::string>();
    const model::ModelConfig config = model_config_from_json(h.at("model"));
    config.validate();
    ckpt.pipeline.schema = schema_from_json(h.at("schema"));
    const std::size_t n = ckpt.pipeline.schema.n();
    const json& vocab = h.at("vocabulary");
    const json& discs = h.at("discretizers");
    if (vocab.size() != n || discs.size() != n) throw FormatError("checkpoint pipeline does not match its schema");
    ckpt.pipeline.vocab.columns.resize(n);
    ckpt.pipeline.discretizers.resize(n);
    for (std::size_t c = 0; c < n; ++c) {
      if (!vocab[c].is_null()) {
        ckpt.pipeline.vocab.columns[c] = features::ColumnVocab(vocab[c].at("values").get<std::vector<std::string>>(),
                                                               vocab[c].at("counts").get<std::vector<std::size_t>>());
      }
      if (!discs[c].is_null()) {
        features::Discretizer d;
        d.requested_bins = discs[c].at("requested_bins").get<int>();
        d.edges = discs[c].at("edges").get<std::vector<double>>();
        ckpt.pipeline.discretizers[c] = std::move(d);
      }
    }
    ckpt.scaler.mean = h.at("scaler").at("mean").get<double>();
    ckpt.scaler.stddev = h.at("scaler").at("stddev").get<double>();
    manifest = h.at("tensors");
    ckpt.params = model::init_params(config, 0);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  } catch (const SchemaError& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }

  const auto expected_names = ckpt.params.names();
  const auto expected = ckpt.params.tensors();
  const std::uint32_t count = r.u32("tensor count");
  if (count != expected.size() || manifest.size() != expected.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                      std::to_string(expected.size()));
  }
  std::vector<ad::Tensor> loaded;
  loaded.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name(r.bytes(r.u32("tensor name length"), "tensor name"));
    if (name != expected_names[i]) {
      throw FormatError("tensor " + std::to_string(i) + " is '" + name + "', expected '" + expected_names[i] + "'");
    }
    const std::uint32_t rank = r.u32("tensor rank");
    if (rank > 8) throw IntegrityError("tensor '" + name + "' declares implausible rank " + std::to_string(rank));
    ad::Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(static_cast<std::size_t>(r.u64("tensor dims")));
    if (shape != expected[i].shape()) {
      throw FormatError("tensor '" + name + "' has shape " + ad::shape_str(shape) + ", model expects " +
                        ad::shape_str(expected[i].shape()));
    }
    const std::uint64_t byte_len = r.u64("tensor byte length");
    if (byte_len != ad::numel(shape) * 8) {
      throw IntegrityError("tensor '" + name + "' declares " + std::to_string(byte_len) + " bytes for shape " +
                           ad::shape_str(shape));
    }
    const auto raw = r.bytes(static_cast<std::size_t>(byte_len), "tensor values");
    const std::uint64_t checksum = r.u64("tensor checksum");
    if (checksum != fnv1a64(raw)) throw IntegrityError("checksum mismatch in tensor '" + name + "'");
    std::vector<double> values(ad::numel(shape));
    for (std::size_t k = 0; k < values.size(); ++k) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[k * 8 + b])) << (8 * b);
      values[k] = std::bit_cast<double>(bits);
    }
    loaded.emplace_back(std::move(shape), std::move(values), true);
  }
  if (!r.at_end()) throw IntegrityError(std::to_string(r.remaining()) + " unexpected trailing bytes in checkpoint");
  ckpt.params = ckpt.params.with_tensors(loaded);
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

VerifyResult verify_checkpoint(const std::filesystem::path& path) {
  VerifyResult v;
  Checkpoint ckpt;
  try {
    ckpt = load_checkpoint(path);
  } catch (const Error& e) {
    v.problems.emplace_back(e.what());
    return v;
  }
  v.version = kCheckpointVersion;
  const auto names = ckpt.params.names();
  const auto tensors = ckpt.params.tensors();
  v.tensors = tensors.size();
  v.parameters = ckpt.params.parameter_count();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (!tensors[i].all_finite()) v.problems.push_back("tensor '" + names[i] + "' holds non-finite values");
  }
  if (ckpt.pipeline.cardinalities() != ckpt.params.config.cardinalities) {
    v.problems.emplace_back("fitted pipeline cardinalities do not match the model's embedding layout");
  }
  if (!(ckpt.scaler.stddev > 0.0) || !std::isfinite(ckpt.scaler.mean)) {
    v.problems.emplace_back("target scaler is invalid");
  }
  v.ok = v.problems.empty();
  return v;
}

}  // namespace eapcr::io
