#include "uvface/tensor_io.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

namespace uvface {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

void put_u32_le(FILE* f, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  std::fwrite(b, 1, 4, f);
}

uint32_t get_u32_le(FILE* f, const std::string& path) {
  unsigned char b[4];
  if (std::fread(b, 1, 4, f) != 4) throw DataError("uvt: truncated header in " + path);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

// Host is little-endian on every target we build for; serialize via memcpy.
static_assert(sizeof(float) == 4 && sizeof(double) == 8);

}  // namespace

void write_uvt(const std::string& path, const Tensor& t, UvtDtype dtype) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw DataError("uvt: cannot open for writing: " + path);
  const unsigned char magic[4] = {0x55, 0x56, 0x54, 0x31};
  std::fwrite(magic, 1, 4, f.get());
  const unsigned char dt = static_cast<unsigned char>(dtype);
  const unsigned char nd = static_cast<unsigned char>(t.ndim());
  std::fwrite(&dt, 1, 1, f.get());
  std::fwrite(&nd, 1, 1, f.get());
  for (int i = 0; i < t.ndim(); ++i) put_u32_le(f.get(), static_cast<uint32_t>(t.dim(i)));
  if (dtype == UvtDtype::kF64) {
    std::fwrite(t.data(), sizeof(double), static_cast<size_t>(t.numel()), f.get());
  } else {
    std::vector<float> buf(static_cast<size_t>(t.numel()));
    for (long long i = 0; i < t.numel(); ++i) buf[static_cast<size_t>(i)] = static_cast<float>(t[i]);
    std::fwrite(buf.data(), sizeof(float), buf.size(), f.get());
  }
  if (std::ferror(f.get())) throw DataError("uvt: write failed: " + path);
}

Tensor read_uvt(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw DataError("uvt: cannot open: " + path);
  unsigned char magic[4];
  if (std::fread(magic, 1, 4, f.get()) != 4 || magic[0] != 0x55 || magic[1] != 0x56 ||
      magic[2] != 0x54 || magic[3] != 0x31)
    throw DataError("uvt: bad magic in " + path);
  unsigned char dt = 0, nd = 0;
  if (std::fread(&dt, 1, 1, f.get()) != 1 || std::fread(&nd, 1, 1, f.get()) != 1)
    throw DataError("uvt: truncated header in " + path);
  if (dt != 1 && dt != 2) throw DataError("uvt: unknown dtype in " + path);
  Dims dims(nd);
  for (int i = 0; i < nd; ++i) {
    uint32_t d = get_u32_le(f.get(), path);
    if (d == 0) throw DataError("uvt: zero extent in " + path);
    dims[static_cast<size_t>(i)] = static_cast<int>(d);
  }
  Tensor t(dims);
  const size_t n = static_cast<size_t>(t.numel());
  if (dt == 2) {
    if (std::fread(t.data(), sizeof(double), n, f.get()) != n)
      throw DataError("uvt: truncated payload in " + path);
  } else {
    std::vector<float> buf(n);
    if (std::fread(buf.data(), sizeof(float), n, f.get()) != n)
      throw DataError("uvt: truncated payload in " + path);
    for (size_t i = 0; i < n; ++i) t[static_cast<long long>(i)] = static_cast<double>(buf[i]);
  }
  return t;
}

}  // namespace uvface
