#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "fnetlab/encoder.hpp"

namespace fnetlab {

// Checkpoint container, little-endian throughout:
//
//   byte[4]  magic "FNT1"
//   u32      format version (currently 1)
//   u32      config length, then that many bytes of UTF-8 key=value text
//   u32      tensor count
//   per tensor:
//     u32    name length, then name bytes
//     u8     dtype code (0 = f32, 1 = f64)
//     u8     rank
//     u32[]  one extent per axis
//     raw    row-major payload
//
// Tensors appear in canonical param_shapes order, which makes repeated
// save -> load -> save byte-identical.

struct CheckpointError : Error {
  using Error::Error;
};
struct BadMagicError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct VersionMismatchError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct TruncatedCheckpointError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct ShapeMismatchError : CheckpointError {
  using CheckpointError::CheckpointError;
};

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "checkpoint i/o assumes a little-endian host");

inline constexpr char kMagic[4] = {'F', 'N', 'T', '1'};
inline constexpr std::uint32_t kVersion = 1;

template <typename S>
constexpr std::uint8_t dtype_code() {
  if constexpr (std::is_same_v<S, float>) return 0;
  else return 1;
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4))
    throw TruncatedCheckpointError("checkpoint truncated while reading u32");
  return v;
}

inline std::uint8_t get_u8(std::istream& is) {
  char c = 0;
  if (!is.read(&c, 1))
    throw TruncatedCheckpointError("checkpoint truncated while reading u8");
  return std::uint8_t(c);
}

}  // namespace detail

template <typename S>
void save_checkpoint(const EncoderModel<S>& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(bool(os), "save_checkpoint: cannot open " + path);
  os.write(detail::kMagic, 4);
  detail::put_u32(os, detail::kVersion);
  const std::string cfg = model.cfg.to_text();
  detail::put_u32(os, std::uint32_t(cfg.size()));
  os.write(cfg.data(), std::streamsize(cfg.size()));
  detail::put_u32(os, std::uint32_t(model.params.size()));
  for (Index i = 0; i < model.params.size(); ++i) {
    const std::string& name = model.params.names[size_t(i)];
    const Tensor<S>& t = model.params.tensors[size_t(i)];
    detail::put_u32(os, std::uint32_t(name.size()));
    os.write(name.data(), std::streamsize(name.size()));
    os.put(char(detail::dtype_code<S>()));
    os.put(char(t.rank()));
    for (Index d : t.dims()) detail::put_u32(os, std::uint32_t(d));
    os.write(reinterpret_cast<const char*>(t.data()),
             std::streamsize(sizeof(S) * size_t(t.size())));
  }
  require(bool(os), "save_checkpoint: write failed for " + path);
}

// Load into a model whose config must match the embedded one; every
// tensor is validated against the expected name and dims.
template <typename S>
EncoderModel<S> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(bool(is), "load_checkpoint: cannot open " + path);

  char magic[4] = {};
  if (!is.read(magic, 4))
    throw TruncatedCheckpointError("checkpoint shorter than its magic tag");
  if (std::memcmp(magic, detail::kMagic, 4) != 0)
    throw BadMagicError("not a checkpoint file (bad magic)");
  const std::uint32_t version = detail::get_u32(is);
  if (version != detail::kVersion)
    throw VersionMismatchError("unsupported checkpoint version " +
                               std::to_string(version));

  const std::uint32_t cfg_len = detail::get_u32(is);
  std::string cfg_text(cfg_len, '\0');
  if (!is.read(cfg_text.data(), cfg_len))
    throw TruncatedCheckpointError("checkpoint truncated inside config block");
  const ModelConfig cfg = ModelConfig::from_text(cfg_text);

  EncoderModel<S> model;
  model.cfg = cfg;
  const auto shapes = param_shapes(cfg);
  const std::uint32_t count = detail::get_u32(is);
  if (count != shapes.size())
    throw ShapeMismatchError("checkpoint holds " + std::to_string(count) +
                             " tensors but the config implies " +
                             std::to_string(shapes.size()));

  for (const ParamSpec& spec : shapes) {
    const std::uint32_t name_len = detail::get_u32(is);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len))
      throw TruncatedCheckpointError("checkpoint truncated inside tensor name");
    if (name != spec.name)
      throw ShapeMismatchError("tensor order mismatch: expected " + spec.name +
                               ", found " + name);
    const std::uint8_t dtype = detail::get_u8(is);
    if (dtype != detail::dtype_code<S>())
      throw ShapeMismatchError("dtype mismatch for " + name);
    const std::uint8_t rank = detail::get_u8(is);
    if (Index(rank) != Index(spec.dims.size()))
      throw ShapeMismatchError("rank mismatch for " + name);
    std::vector<Index> dims(rank);
    for (auto& d : dims) d = Index(detail::get_u32(is));
    if (dims != spec.dims)
      throw ShapeMismatchError("dims mismatch for " + name +
                               " (checkpoint disagrees with embedded config)");
    Tensor<S> t(dims);
    if (!is.read(reinterpret_cast<char*>(t.data()),
                 std::streamsize(sizeof(S) * size_t(t.size()))))
      throw TruncatedCheckpointError("checkpoint truncated inside " + name);
    model.params.add(spec.name, std::move(t), spec.trainable);
  }
  return model;
}

// Load a checkpoint and require its config to equal `expected` (the
// "Base checkpoint into Large config" guard).
template <typename S>
EncoderModel<S> load_checkpoint_into(const ModelConfig& expected,
                                     const std::string& path) {
  EncoderModel<S> m = load_checkpoint<S>(path);
  if (m.cfg.n != expected.n || m.cfg.d_h != expected.d_h ||
      m.cfg.d_ff != expected.d_ff || m.cfg.num_layers != expected.num_layers ||
      m.cfg.vocab_size != expected.vocab_size ||
      m.cfg.mixing_plan != expected.mixing_plan)
    throw ShapeMismatchError(
        "checkpoint architecture does not match the requested config");
  return m;
}

}  // namespace fnetlab
