#include "tga/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "tga/binio.hpp"
#include "tga/error.hpp"

namespace tga {

static constexpr char kCheckpointMagic[4] = {'T', 'G', 'A', 'C'};
static constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model<float>& m, const std::string& path) {
  const std::string bad = m.first_non_finite();
  if (!bad.empty())
    throw NumericError(path + ": refusing to save non-finite tensor " + bad);

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError(path + ": cannot open for writing");
  os.write(kCheckpointMagic, 4);
  write_u32(os, kCheckpointVersion);

  uint32_t count = 0;
  m.for_each([&](const char*, const Tensor<float>&) { ++count; });
  write_u32(os, count);

  m.for_each([&](const char* name, const Tensor<float>& t) {
    const size_t len = std::strlen(name);
    write_u16(os, static_cast<uint16_t>(len));
    os.write(name, static_cast<std::streamsize>(len));
    os.put(static_cast<char>(t.dims.size()));
    for (uint32_t d : t.dims) write_u32(os, d);
    for (float x : t.data) write_f32(os, x);
  });
  if (!os) throw DataError(path + ": write failed");
}

Model<float> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError(path + ": cannot open checkpoint");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw DataError(path + ": not a checkpoint (bad magic)");
  uint32_t version, count;
  if (!read_u32(is, version) || !read_u32(is, count))
    throw DataError(path + ": truncated checkpoint header");
  if (version != kCheckpointVersion)
    throw DataError(path + ": unsupported checkpoint version " + std::to_string(version));

  std::map<std::string, Tensor<float>> tensors;
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t name_len;
    if (!read_u16(is, name_len))
      throw DataError(path + ": truncated at tensor " + std::to_string(i));
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len))
      throw DataError(path + ": truncated tensor name at tensor " + std::to_string(i));
    const int rank = is.get();
    if (rank < 0) throw DataError(path + ": truncated mid-tensor \"" + name + "\"");
    if (rank == 0 || rank > 2)
      throw DataError(path + ": shape table corrupt, tensor \"" + name + "\" has rank " +
                      std::to_string(rank));
    Tensor<float> t;
    size_t total = 1;
    for (int d = 0; d < rank; ++d) {
      uint32_t dim;
      if (!read_u32(is, dim))
        throw DataError(path + ": truncated mid-tensor \"" + name + "\"");
      if (dim == 0)
        throw DataError(path + ": shape table corrupt, tensor \"" + name + "\" has a zero dim");
      t.dims.push_back(dim);
      total *= dim;
    }
    t.data.resize(total);
    for (size_t k = 0; k < total; ++k)
      if (!read_f32(is, t.data[k]))
        throw DataError(path + ": truncated mid-tensor \"" + name + "\"");
    if (!tensors.emplace(std::move(name), std::move(t)).second)
      throw DataError(path + ": duplicate tensor name");
  }

  if (!tensors.count("emb")) {
    auto pre = tensors.find("emb.pretrained");
    if (pre != tensors.end()) tensors.emplace("emb", pre->second);
  }

  auto grab = [&](const char* name) -> Tensor<float>& {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw DataError(path + ": missing tensor \"" + std::string(name) + "\"");
    return it->second;
  };
  auto expect = [&](const char* name, uint32_t rows, uint32_t cols) {
    const Tensor<float>& t = grab(name);
    const bool ok = cols == 0 ? (t.dims.size() == 1 && t.dims[0] == rows)
                              : (t.dims.size() == 2 && t.dims[0] == rows && t.dims[1] == cols);
    if (!ok)
      throw DataError(path + ": shape table corrupt, tensor \"" + std::string(name) +
                      "\" has an inconsistent shape");
  };

  const Tensor<float>& emb = grab("emb");
  const Tensor<float>& fcW = grab("fc.W");
  const Tensor<float>& Wv = grab("Wv");
  if (emb.dims.size() != 2 || fcW.dims.size() != 2 || Wv.dims.size() != 2)
    throw DataError(path + ": shape table corrupt, rank-2 tensor expected");

  ModelDims dims;
  dims.vocab_size = emb.dims[0];
  dims.word_dim = emb.dims[1];
  dims.text_dim = fcW.dims[0];
  dims.feature_dim = fcW.dims[1];
  dims.joint_dim = Wv.dims[0];

  for (const char* n : {"gru.Wz", "gru.Wr", "gru.Wh"}) expect(n, dims.text_dim, dims.word_dim);
  for (const char* n : {"gru.Uz", "gru.Ur", "gru.Uh"}) expect(n, dims.text_dim, dims.text_dim);
  for (const char* n : {"gru.bz", "gru.br", "gru.bh", "fc.b"}) expect(n, dims.text_dim, 0);
  expect("Wv", dims.joint_dim, dims.feature_dim);
  expect("Wt", dims.joint_dim, dims.text_dim);

  Model<float> m(dims);
  m.for_each([&](const char* name, Tensor<float>& t) { t = grab(name); });
  return m;
}

}  // namespace tga
