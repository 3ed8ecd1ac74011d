#include "geoworld/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace geoworld::wm {
namespace {

constexpr std::string_view kMagic = "GEOWORLD-CHECKPOINT\n";
constexpr std::string_view kEndHeader = "END_HEADER\n";

void append_le(std::string& out, const nn::Tensor& t) {
  for (double v : t.values()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) {
      out.push_back(static_cast<char>(bits & 0xff));
      bits >>= 8;
    }
  }
}

void read_le(std::string_view in, nn::Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(in[i * 8 + b]);
    t[i] = std::bit_cast<double>(bits);
  }
}

nn::Shape parse_shape(const std::string& text, const std::string& name) {
  nn::Shape shape;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const auto dim = parse_int(piece, name);
    if (dim <= 0) throw ParseError("non-positive dimension in " + name);
    shape.push_back(static_cast<std::size_t>(dim));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return shape;
}

std::string shape_text(const nn::Shape& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out;
}

struct ArraySlot {
  std::string name;
  nn::Tensor* tensor;
};

std::vector<ArraySlot> array_slots(Checkpoint& ckpt) {
  std::vector<ArraySlot> slots;
  auto tensors = ckpt.params.tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    slots.push_back({tensors[i].name, tensors[i].tensor});
    slots.push_back({"adam." + tensors[i].name + ".m", &ckpt.adam[i].m});
    slots.push_back({"adam." + tensors[i].name + ".v", &ckpt.adam[i].v});
  }
  return slots;
}

}  // namespace

CheckpointError::CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

std::string checkpoint_filename(int step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_%06d.gwck", step);
  return buf;
}

std::string serialize_checkpoint(const Checkpoint& ckpt_in) {
  Checkpoint ckpt = ckpt_in;
  const std::size_t n_tensors = ckpt.params.tensors().size();
  if (ckpt.adam.size() != n_tensors) {
    throw CheckpointError(CheckpointError::Kind::Shape, "checkpoint has " + std::to_string(ckpt.adam.size()) +
                                                            " optimizer states for " + std::to_string(n_tensors) +
                                                            " tensors");
  }
  KeyValueDoc doc;
  doc.set("", "format_version", std::to_string(kCheckpointFormatVersion));
  doc.set("architecture", "latent_dim", std::to_string(kLatentDim));
  doc.set("architecture", "encoder_hidden", std::to_string(kEncoderHidden));
  doc.set("architecture", "transition_hidden", std::to_string(kTransitionHidden));
  doc.set("architecture", "num_actions", std::to_string(env::kNumActions));
  doc.set("state", "step", std::to_string(ckpt.step));
  doc.set("state", "rng_state", ckpt.rng_state);
  const KeyValueDoc config_doc = ckpt.train_config.to_doc();
  for (const auto& e : config_doc.entries()) doc.set(e.section, e.key, e.value);

  const auto tensors = ckpt.params.tensors();
  for (std::size_t i = 0; i < n_tensors; ++i) {
    const auto& a = ckpt.adam[i];
    const std::string& name = tensors[i].name;
    doc.set("adam", name + ".t", std::to_string(a.t));
    doc.set("adam", name + ".lr", format_double(a.lr));
    doc.set("adam", name + ".beta1", format_double(a.beta1));
    doc.set("adam", name + ".beta2", format_double(a.beta2));
    doc.set("adam", name + ".eps", format_double(a.eps));
  }
  const auto slots = array_slots(ckpt);
  for (const auto& s : slots) doc.set("arrays", s.name, shape_text(s.tensor->shape()));

  std::string out(kMagic);
  out += doc.serialize();
  out += kEndHeader;
  for (const auto& s : slots) append_le(out, *s.tensor);
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  using Kind = CheckpointError::Kind;
  if (bytes.compare(0, kMagic.size(), kMagic) != 0) {
    throw CheckpointError(Kind::Version, "not a geoworld checkpoint (bad magic line)");
  }
  const std::string marker = "\n" + std::string(kEndHeader);
  const auto end = bytes.find(marker, kMagic.size() - 1);
  if (end == std::string::npos) throw CheckpointError(Kind::Truncated, "checkpoint header is not terminated");
  const std::string_view header(bytes.data() + kMagic.size(), end + 1 - kMagic.size());
  std::string_view payload(bytes.data() + end + marker.size(), bytes.size() - end - marker.size());

  KeyValueDoc doc;
  try {
    doc = KeyValueDoc::parse(header);
  } catch (const ParseError& e) {
    throw CheckpointError(Kind::Parse, std::string("checkpoint header: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    const auto version = parse_int(doc.require("", "format_version"), "format_version");
    if (version != kCheckpointFormatVersion) {
      throw CheckpointError(Kind::Version, "unsupported checkpoint format version " + std::to_string(version));
    }
    const std::pair<const char*, std::size_t> arch[] = {{"latent_dim", kLatentDim},
                                                         {"encoder_hidden", kEncoderHidden},
                                                         {"transition_hidden", kTransitionHidden},
                                                         {"num_actions", env::kNumActions}};
    for (const auto& [key, expected] : arch) {
      const auto got = parse_int(doc.require("architecture", key), key);
      if (got != static_cast<std::int64_t>(expected)) {
        throw CheckpointError(Kind::Shape, std::string("architecture mismatch: ") + key + " = " + std::to_string(got));
      }
    }
    ckpt.step = static_cast<int>(parse_int(doc.require("state", "step"), "step"));
    ckpt.rng_state = doc.require("state", "rng_state");

    KeyValueDoc config_doc;
    for (const auto& e : doc.entries()) {
      if (e.section == "train" || e.section == "env") config_doc.set(e.section, e.key, e.value);
    }
    ckpt.train_config = TrainConfig::from_doc(config_doc);

    const auto tensors = ckpt.params.tensors();
    ckpt.adam.resize(tensors.size());
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const std::string& name = tensors[i].name;
      auto& a = ckpt.adam[i];
      a.t = parse_int(doc.require("adam", name + ".t"), name + ".t");
      a.lr = parse_double(doc.require("adam", name + ".lr"), name + ".lr");
      a.beta1 = parse_double(doc.require("adam", name + ".beta1"), name + ".beta1");
      a.beta2 = parse_double(doc.require("adam", name + ".beta2"), name + ".beta2");
      a.eps = parse_double(doc.require("adam", name + ".eps"), name + ".eps");
      a.m = nn::Tensor(tensors[i].tensor->shape());
      a.v = nn::Tensor(tensors[i].tensor->shape());
    }
  } catch (const ParseError& e) {
    throw CheckpointError(Kind::Parse, std::string("checkpoint header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(Kind::Parse, std::string("checkpoint header: ") + e.what());
  }

  for (const auto& s : array_slots(ckpt)) {
    const auto declared = doc.get("arrays", s.name);
    if (!declared) throw CheckpointError(Kind::Parse, "checkpoint header lacks array " + s.name);
    nn::Shape shape;
    try {
      shape = parse_shape(*declared, s.name);
    } catch (const ParseError& e) {
      throw CheckpointError(Kind::Parse, e.what());
    }
    if (shape != s.tensor->shape()) {
      throw CheckpointError(Kind::Shape, "array " + s.name + " has shape " + nn::shape_string(shape) + ", expected " +
                                             nn::shape_string(s.tensor->shape()));
    }
    const std::size_t need = s.tensor->size() * 8;
    if (payload.size() < need) throw CheckpointError(Kind::Truncated, "checkpoint truncated inside array " + s.name);
    read_le(payload, *s.tensor);
    payload.remove_prefix(need);
  }
  if (!payload.empty()) throw CheckpointError(Kind::Shape, "trailing bytes after last array");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Kind::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::Io, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace geoworld::wm
