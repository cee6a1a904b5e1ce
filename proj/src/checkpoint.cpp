#include "cstalign/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>

#include "cstalign/error.hpp"

namespace cstalign {
namespace {

constexpr std::array<char, 8> kMagic = {'C', 'S', 'T', 'C', 'K', 'P', 'T', '\0'};
constexpr const char* kActivationTensor = "meta.activation";

template <typename U>
void put(std::ostream& out, U value) {
  static_assert(std::is_unsigned_v<U>);
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i)
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xffu);
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U get(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size()))
    throw Error(ErrorKind::CheckpointFormat, "encoder-core/load_checkpoint", "truncated file");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

void put_tensor(std::ostream& out, const std::string& name, const std::vector<std::uint64_t>& dims,
                std::span<const double> values) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put<std::uint64_t>(out, d);
  for (double v : values) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

struct RawTensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> values;
};

Matrix to_matrix(const RawTensor& raw, const std::string& name) {
  std::size_t rows = 1, cols = 1;
  if (raw.dims.size() == 2) {
    rows = raw.dims[0];
    cols = raw.dims[1];
  } else if (raw.dims.size() == 1) {
    cols = raw.dims[0];
  } else {
    throw Error(ErrorKind::CheckpointFormat, "encoder-core/load_checkpoint",
                name + ": unexpected rank " + std::to_string(raw.dims.size()));
  }
  Matrix m(rows, cols);
  std::copy(raw.values.begin(), raw.values.end(), m.data());
  return m;
}

}  // namespace

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorKind::IoError, "encoder-core/save_checkpoint", "cannot open " + path.string());
  const auto tensors = params.tensors();
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size() + 1));
  const double activation = params.activation == Activation::tanh ? 0.0 : 1.0;
  put_tensor(out, kActivationTensor, {}, std::span(&activation, 1));
  for (const auto& t : tensors) {
    // Biases are rank 1, everything else rank 2.
    std::vector<std::uint64_t> dims;
    if (t.name.ends_with(".bias"))
      dims = {t.tensor->cols()};
    else
      dims = {t.tensor->rows(), t.tensor->cols()};
    put_tensor(out, t.name, dims, t.tensor->values());
  }
  if (!out) throw Error(ErrorKind::IoError, "encoder-core/save_checkpoint", "write failed");
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
  constexpr const char* kOp = "encoder-core/load_checkpoint";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, kOp, "cannot open " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic)
    throw Error(ErrorKind::CheckpointFormat, kOp, "bad magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion)
    throw Error(ErrorKind::CheckpointFormat, kOp, "unsupported version " + std::to_string(version));
  const auto count = get<std::uint32_t>(in);

  std::map<std::string, RawTensor> raw;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(in);
    if (name_len > 4096) throw Error(ErrorKind::CheckpointFormat, kOp, "implausible name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw Error(ErrorKind::CheckpointFormat, kOp, "truncated name");
    RawTensor t;
    const auto rank = get<std::uint32_t>(in);
    if (rank > 2) throw Error(ErrorKind::CheckpointFormat, kOp, name + ": rank > 2");
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.dims.push_back(get<std::uint64_t>(in));
      n *= t.dims.back();
    }
    if (n > (std::uint64_t{1} << 32)) throw Error(ErrorKind::CheckpointFormat, kOp, "tensor too large");
    t.values.resize(n);
    for (auto& v : t.values) v = static_cast<double>(std::bit_cast<float>(get<std::uint32_t>(in)));
    if (!raw.emplace(name, std::move(t)).second)
      throw Error(ErrorKind::CheckpointFormat, kOp, "duplicate tensor " + name);
  }

  auto take = [&](const std::string& name) -> std::optional<Matrix> {
    auto it = raw.find(name);
    if (it == raw.end()) return std::nullopt;
    Matrix m = to_matrix(it->second, name);
    raw.erase(it);
    return m;
  };
  auto require = [&](const std::string& name) {
    auto m = take(name);
    if (!m) throw Error(ErrorKind::CheckpointFormat, kOp, "missing tensor " + name);
    return *m;
  };
  auto tower = [&](const std::string& prefix) {
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0;; ++i) {
      auto w = take(prefix + ".layer" + std::to_string(i) + ".weight");
      if (!w) break;
      layers.push_back({*w, require(prefix + ".layer" + std::to_string(i) + ".bias")});
    }
    return layers;
  };

  EncoderParams p;
  const auto activation = raw.find(kActivationTensor);
  if (activation == raw.end() || activation->second.values.size() != 1)
    throw Error(ErrorKind::CheckpointFormat, kOp, "missing meta.activation");
  p.activation = activation->second.values[0] == 0.0 ? Activation::tanh : Activation::identity;
  raw.erase(activation);
  p.image_layers = tower("image");
  p.image_projection = require("image.projection");
  p.text_embedding = require("text.embedding");
  p.text_layers = tower("text");
  p.text_projection = require("text.projection");
  if (!raw.empty()) throw Error(ErrorKind::CheckpointFormat, kOp, "unexpected tensor " + raw.begin()->first);

  auto check_tower = [&](const std::vector<DenseLayer>& layers, std::size_t in_width,
                         const Matrix& projection) {
    std::size_t width = in_width;
    for (const auto& l : layers) {
      if ((width != 0 && l.weight.cols() != width) || l.bias.cols() != l.weight.rows())
        throw Error(ErrorKind::CheckpointFormat, kOp, "layer shapes do not compose");
      width = l.weight.rows();
    }
    if (width != 0 && projection.cols() != width)
      throw Error(ErrorKind::CheckpointFormat, kOp, "projection shape does not compose");
  };
  check_tower(p.image_layers, 0, p.image_projection);
  check_tower(p.text_layers, p.text_embedding.cols(), p.text_projection);
  if (p.image_projection.rows() != p.text_projection.rows())
    throw Error(ErrorKind::CheckpointFormat, kOp, "towers project to different widths");
  return p;
}

EncoderParams round_to_float(const EncoderParams& params) {
  EncoderParams out = params;
  for (auto& t : out.tensors())
    for (auto& v : t.tensor->values()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

}  // namespace cstalign
