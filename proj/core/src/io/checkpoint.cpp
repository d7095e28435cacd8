#include "abya/io/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

namespace abya::io {

namespace {

constexpr char kMagic[5] = {'A', 'B', 'Y', 'A', '1'};
const std::string kModelEntry = "meta.model";
const std::string kStepEntry = "meta.adam_step";
const std::string kFirstMoment = "adam.m/";
const std::string kSecondMoment = "adam.v/";

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t crc32_of(const char* data, std::size_t n) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t limit) : bytes_(bytes), limit_(limit) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string raw(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (limit_ - pos_ < n) {
      throw CheckpointError("checkpoint truncated while reading " + std::string(what) + " at byte " +
                            std::to_string(pos_));
    }
  }

  const std::string& bytes_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

ad::Group group_of(const std::string& name) {
  const auto prefix = name.substr(0, name.find('.'));
  if (prefix == "phi") return ad::Group::Policy;
  if (prefix == "theta") return ad::Group::Question;
  if (prefix == "nu") return ad::Group::Encoder;
  if (prefix == "mu") return ad::Group::Memory;
  throw CheckpointError("checkpoint entry with unknown parameter group: " + name);
}

float scalar_entry(const ad::Tensor<float>& t, const std::string& name) {
  if (t.size() != 1) throw CheckpointError("checkpoint entry " + name + " must hold one value");
  return t[0];
}

}  // namespace

std::string encode_entries(const std::vector<NamedTensor>& entries) {
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    put_u32(out, static_cast<std::uint32_t>(e.value.dims().size()));
    for (std::size_t d : e.value.dims()) put_u32(out, static_cast<std::uint32_t>(d));
    const auto data = e.value.data();
    out.append(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(float));
  }
  put_u32(out, crc32_of(out.data(), out.size()));
  return out;
}

std::vector<NamedTensor> decode_entries(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic + 12) throw CheckpointError("checkpoint truncated: file too short");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw CheckpointError("not a checkpoint: bad magic");
  const std::size_t body = bytes.size() - 4;
  Reader crc_reader(bytes, bytes.size());
  crc_reader.raw(body, "body");
  const std::uint32_t stored = crc_reader.u32("crc");
  const std::uint32_t actual = crc32_of(bytes.data(), body);
  if (stored != actual) throw CheckpointError("checkpoint CRC mismatch: file is corrupted or truncated");

  Reader r(bytes, body);
  r.raw(sizeof kMagic, "magic");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32("entry count");
  std::vector<NamedTensor> out;
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor e;
    const std::uint32_t name_length = r.u32("name length");
    e.name = r.raw(name_length, "name");
    if (!seen.insert(e.name).second) throw CheckpointError("duplicate checkpoint entry " + e.name);
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0) throw CheckpointError("checkpoint entry " + e.name + " has rank 0");
    ad::Shape dims;
    for (std::uint32_t k = 0; k < rank; ++k) dims.push_back(r.u32("dims"));
    const std::size_t n = ad::element_count(dims);
    const std::string payload = r.raw(n * sizeof(float), "payload");
    std::vector<float> values(n);
    std::memcpy(values.data(), payload.data(), payload.size());
    e.value = ad::Tensor<float>(std::move(dims), std::move(values));
    out.push_back(std::move(e));
  }
  if (r.position() != body) throw CheckpointError("checkpoint has trailing bytes after the last entry");
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<NamedTensor> to_entries(const Checkpoint& ckpt) {
  std::vector<NamedTensor> out;
  if (ckpt.model) {
    out.push_back({kModelEntry, ad::Tensor<float>::scalar(static_cast<float>(*ckpt.model))});
  }
  out.push_back({kStepEntry, ad::Tensor<float>::scalar(static_cast<float>(ckpt.adam.step))});
  for (const auto& e : ckpt.params.entries()) out.push_back({e.name, e.value});
  for (const auto& e : ckpt.params.entries()) {
    auto m = ckpt.adam.first_moment.find(e.name);
    auto v = ckpt.adam.second_moment.find(e.name);
    if (m != ckpt.adam.first_moment.end()) out.push_back({kFirstMoment + e.name, m->second});
    if (v != ckpt.adam.second_moment.end()) out.push_back({kSecondMoment + e.name, v->second});
  }
  return out;
}

Checkpoint from_entries(const std::vector<NamedTensor>& entries) {
  Checkpoint c;
  for (const auto& e : entries) {
    if (e.name == kModelEntry) {
      const float v = scalar_entry(e.value, e.name);
      if (v != 0.0f && v != 1.0f && v != 2.0f) throw CheckpointError("checkpoint records an unknown model kind");
      c.model = static_cast<agent::ModelKind>(static_cast<int>(v));
    } else if (e.name == kStepEntry) {
      c.adam.step = static_cast<std::uint64_t>(scalar_entry(e.value, e.name));
    } else if (e.name.starts_with(kFirstMoment)) {
      c.adam.first_moment.emplace(e.name.substr(kFirstMoment.size()), e.value);
    } else if (e.name.starts_with(kSecondMoment)) {
      c.adam.second_moment.emplace(e.name.substr(kSecondMoment.size()), e.value);
    } else {
      c.params.add(e.name, group_of(e.name), e.value);
    }
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, encode_entries(to_entries(ckpt)));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return from_entries(decode_entries(read_file(path)));
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

void restore(const Checkpoint& ckpt, agent::ModelKind kind, ad::ParamSet<float>& target,
             ad::AdamState<float>* adam) {
  if (!ckpt.model) throw CheckpointError("checkpoint holds no model kind (language-model checkpoint?)");
  if (*ckpt.model != kind) {
    throw CheckpointError("checkpoint was written for model '" + std::string(agent::model_name(*ckpt.model)) +
                          "', not '" + std::string(agent::model_name(kind)) + "'");
  }
  for (const auto& e : ckpt.params.entries()) {
    if (!target.contains(e.name)) throw CheckpointError("checkpoint has unexpected parameter " + e.name);
  }
  for (auto& e : target.entries()) {
    if (!ckpt.params.contains(e.name)) throw CheckpointError("checkpoint lacks parameter " + e.name);
    const auto& src = ckpt.params.at(e.name);
    if (src.dims() != e.value.dims()) {
      throw CheckpointError("shape mismatch for " + e.name + ": checkpoint " + ad::to_string(src.dims()) +
                            ", model " + ad::to_string(e.value.dims()));
    }
    e.value = src;
  }
  if (adam) *adam = ckpt.adam;
}

void restore_language_model(const Checkpoint& ckpt, ad::ParamSet<float>& target) {
  std::size_t copied = 0;
  for (auto& e : target.entries()) {
    if (e.group != ad::Group::Question) continue;
    if (!ckpt.params.contains(e.name)) throw CheckpointError("language-model checkpoint lacks " + e.name);
    const auto& src = ckpt.params.at(e.name);
    if (src.dims() != e.value.dims()) throw CheckpointError("shape mismatch for " + e.name);
    e.value = src;
    ++copied;
  }
  if (copied == 0) throw CheckpointError("model has no question policy to restore");
}

}  // namespace abya::io
