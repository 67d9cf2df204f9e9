#include "sslreg/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "sslreg/error.hpp"
#include "sslreg/io.hpp"

namespace sslreg {
namespace {

constexpr std::string_view kMagic = "SSLRCKPT";

template <class U>
void put_le(std::string& out, U value) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

void put_i32(std::string& out, std::int32_t v) { put_le(out, static_cast<std::uint32_t>(v)); }

template <class T>
void put_value(std::string& out, T v) {
  if constexpr (sizeof(T) == 4)
    put_le(out, std::bit_cast<std::uint32_t>(v));
  else
    put_le(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class U>
  U get_le(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  std::int32_t get_i32(const char* what) { return static_cast<std::int32_t>(get_le<std::uint32_t>(what)); }
  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n)
      throw CheckpointError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                            std::to_string(pos_));
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

CheckpointHeader read_header(Reader& r) {
  if (r.take(kMagic.size(), "magic") != kMagic) throw CheckpointError("not a checkpoint (bad magic)");
  const auto version = r.get_le<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  CheckpointHeader h;
  auto& e = h.shape.encoder;
  e.num_layers = r.get_i32("num_layers");
  e.num_heads = r.get_i32("num_heads");
  e.d_model = r.get_i32("d_model");
  e.d_ff = r.get_i32("d_ff");
  e.max_len = r.get_i32("max_len");
  e.vocab_size = r.get_i32("vocab_size");
  e.dropout_rate = static_cast<double>(std::bit_cast<float>(r.get_le<std::uint32_t>("dropout_rate")));
  h.shape.num_classes = r.get_i32("num_classes");
  h.shape.num_ops = r.get_i32("num_ops");
  h.value_bytes = r.get_i32("value_bytes");
  try {
    h.shape.validate();
  } catch (const ConfigError& err) {
    throw CheckpointError(std::string("checkpoint header invalid: ") + err.what());
  }
  if (h.value_bytes != 4 && h.value_bytes != 8)
    throw CheckpointError("checkpoint value width " + std::to_string(h.value_bytes) + " is not 4 or 8");
  return h;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <class T>
std::string serialize_checkpoint(const ModelParams<T>& params) {
  std::string out(kMagic);
  put_le(out, kCheckpointVersion);
  const auto& e = params.shape.encoder;
  for (int v : {e.num_layers, e.num_heads, e.d_model, e.d_ff, e.max_len, e.vocab_size}) put_i32(out, v);
  put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(e.dropout_rate)));
  put_i32(out, params.shape.num_classes);
  put_i32(out, params.shape.num_ops);
  put_i32(out, static_cast<std::int32_t>(sizeof(T)));
  const auto named = params.named();
  put_i32(out, static_cast<std::int32_t>(named.size()));
  for (const auto& np : named) {
    put_le(out, static_cast<std::uint32_t>(np.name.size()));
    out += np.name;
    put_le(out, static_cast<std::uint32_t>(np.tensor.rank()));
    for (std::size_t d : np.tensor.shape()) put_le(out, static_cast<std::uint32_t>(d));
    for (T v : np.tensor.data()) put_value(out, v);
  }
  put_le(out, fnv1a64(out));
  return out;
}

template <class T>
ModelParams<T> deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  const CheckpointHeader header = read_header(r);
  if (header.value_bytes != static_cast<int>(sizeof(T)))
    throw CheckpointError("checkpoint stores " + std::to_string(header.value_bytes * 8) +
                          "-bit values but " + std::to_string(sizeof(T) * 8) + "-bit were requested");
  ModelParams<T> params = ModelParams<T>::zeros(header.shape);
  auto named = params.named();
  const auto count = r.get_i32("tensor_count");
  if (count != static_cast<std::int32_t>(named.size()))
    throw CheckpointError("checkpoint holds " + std::to_string(count) + " tensors, expected " +
                          std::to_string(named.size()));
  for (auto& np : named) {
    const auto name_len = r.get_le<std::uint32_t>("tensor name length");
    const auto name = r.take(name_len, "tensor name");
    if (name != np.name)
      throw CheckpointError("checkpoint tensor '" + std::string(name) + "' where '" + np.name + "' was expected");
    const auto rank = r.get_le<std::uint32_t>("tensor rank");
    if (rank != np.tensor.rank()) throw CheckpointError("checkpoint tensor '" + np.name + "' has wrong rank");
    for (std::size_t i = 0; i < rank; ++i)
      if (r.get_le<std::uint32_t>("tensor dims") != np.tensor.shape()[i])
        throw CheckpointError("checkpoint tensor '" + np.name + "' has wrong shape");
    for (T& v : np.tensor.data()) {
      if constexpr (sizeof(T) == 4)
        v = std::bit_cast<T>(r.get_le<std::uint32_t>("tensor values"));
      else
        v = std::bit_cast<T>(r.get_le<std::uint64_t>("tensor values"));
    }
  }
  const std::size_t body = r.pos();
  const auto stored = r.get_le<std::uint64_t>("hash");
  if (r.remaining() != 0) throw CheckpointError("checkpoint has trailing bytes");
  if (stored != fnv1a64(bytes.substr(0, body))) throw CheckpointError("checkpoint hash mismatch (corrupt file)");
  return params;
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<T>& params) {
  write_file_atomic(path, serialize_checkpoint(params));
}

template <class T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path) {
  try {
    return deserialize_checkpoint<T>(read_file_binary(path));
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
  const std::string bytes = read_file_binary(path);
  Reader r(bytes);
  try {
    return read_header(r);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

template std::string serialize_checkpoint<float>(const ModelParams<float>&);
template std::string serialize_checkpoint<double>(const ModelParams<double>&);
template ModelParams<float> deserialize_checkpoint<float>(std::string_view);
template ModelParams<double> deserialize_checkpoint<double>(std::string_view);
template void save_checkpoint<float>(const std::filesystem::path&, const ModelParams<float>&);
template void save_checkpoint<double>(const std::filesystem::path&, const ModelParams<double>&);
template ModelParams<float> load_checkpoint<float>(const std::filesystem::path&);
template ModelParams<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace sslreg
