#include "elastofuse/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include "elastofuse/errors.hpp"

using nlohmann::json;

namespace elastofuse {

namespace {

constexpr char kMagic[8] = {'E', 'F', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw CheckpointError("truncated checkpoint archive");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

std::string verified_payload(const std::string& path) {
  const std::string data = read_file(path);
  if (data.size() < sizeof(kMagic) + 4 || std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("not a checkpoint archive: " + path);
  const std::string payload = data.substr(sizeof(kMagic), data.size() - sizeof(kMagic) - 4);
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i)
    stored |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[data.size() - 4 + i]))
              << (8 * i);
  const std::uint32_t actual = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
  if (stored != actual) throw CheckpointError("checkpoint checksum mismatch: " + path);
  return payload;
}

}  // namespace

void save_checkpoint(const std::string& path, const json& meta, const nn::StateMap& state) {
  json full_meta = meta;
  json tensors = json::array();
  for (const auto& [name, tensor] : state) {
    json t;
    t["name"] = name;
    t["shape"] = tensor->shape();
    tensors.push_back(t);
  }
  full_meta["tensors"] = tensors;
  const std::string meta_str = full_meta.dump();

  std::string payload;
  put_u32(payload, kVersion);
  put_u64(payload, meta_str.size());
  payload += meta_str;
  for (const auto& [name, tensor] : state) {
    put_u64(payload, static_cast<std::uint64_t>(tensor->numel()) * sizeof(float));
    payload.append(reinterpret_cast<const char*>(tensor->data()),
                   static_cast<std::size_t>(tensor->numel()) * sizeof(float));
  }
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  std::string tail;
  put_u32(tail, crc);
  out.write(tail.data(), 4);
  if (!out) throw CheckpointError("checkpoint write failed: " + path);
}

json load_checkpoint(const std::string& path, const nn::StateMap& state) {
  const std::string payload = verified_payload(path);
  Reader r(payload);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t meta_len = r.u64();
  json meta;
  try {
    meta = json::parse(r.bytes(meta_len));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint metadata: ") + e.what());
  }

  std::map<std::string, nn::Tensor*> want;
  for (const auto& [name, tensor] : state) want[name] = tensor;

  const auto& tensors = meta.at("tensors");
  if (tensors.size() != want.size())
    throw CheckpointError("checkpoint tensor count mismatch (archive " +
                          std::to_string(tensors.size()) + ", model " +
                          std::to_string(want.size()) + ")");
  for (const auto& t : tensors) {
    const std::string name = t.at("name").get<std::string>();
    const std::vector<int> shape = t.at("shape").get<std::vector<int>>();
    const std::uint64_t bytes = r.u64();
    auto it = want.find(name);
    if (it == want.end()) throw CheckpointError("unexpected tensor in archive: " + name);
    if (it->second->shape() != shape)
      throw CheckpointError("shape mismatch for tensor " + name);
    if (bytes != static_cast<std::uint64_t>(it->second->numel()) * sizeof(float))
      throw CheckpointError("size mismatch for tensor " + name);
    const std::string raw = r.bytes(bytes);
    std::memcpy(it->second->data(), raw.data(), raw.size());
  }
  return meta;
}

json read_checkpoint_meta(const std::string& path) {
  const std::string payload = verified_payload(path);
  Reader r(payload);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t meta_len = r.u64();
  try {
    return json::parse(r.bytes(meta_len));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint metadata: ") + e.what());
  }
}

}  // namespace elastofuse
