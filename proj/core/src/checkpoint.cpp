#include "vsr/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "vsr/image.hpp"

namespace vsr::ckpt {

const Tensor* Archive::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

namespace {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void save_archive(const std::string& path, const Archive& archive) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot create archive file: " + path);
    os.write(kMagic, sizeof(kMagic));
    write_pod(os, kFormatVersion);
    write_pod(os, static_cast<std::uint64_t>(archive.meta_json.size()));
    os.write(archive.meta_json.data(), static_cast<std::streamsize>(archive.meta_json.size()));
    write_pod(os, static_cast<std::uint64_t>(archive.tensors.size()));
    for (const auto& [name, t] : archive.tensors) {
      write_pod(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_pod(os, static_cast<std::uint32_t>(t.h));
      write_pod(os, static_cast<std::uint32_t>(t.w));
      write_pod(os, static_cast<std::uint32_t>(t.c));
      os.write(reinterpret_cast<const char*>(t.v.data()),
               static_cast<std::streamsize>(t.v.size() * sizeof(double)));
    }
    if (!os) throw DataError("archive write failed: " + path);
  }
  std::filesystem::rename(tmp, path);
}

Archive load_archive(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open archive file: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("not a parameter archive: " + path);
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kFormatVersion)
    throw DataError("unsupported archive version in: " + path);
  Archive a;
  const auto meta_len = read_pod<std::uint64_t>(is);
  a.meta_json.resize(meta_len);
  is.read(a.meta_json.data(), static_cast<std::streamsize>(meta_len));
  const auto count = read_pod<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const int h = static_cast<int>(read_pod<std::uint32_t>(is));
    const int w = static_cast<int>(read_pod<std::uint32_t>(is));
    const int c = static_cast<int>(read_pod<std::uint32_t>(is));
    Tensor t(h, w, c);
    is.read(reinterpret_cast<char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(double)));
    if (!is) throw DataError("truncated archive: " + path);
    a.tensors.emplace_back(std::move(name), std::move(t));
  }
  return a;
}

}  // namespace vsr::ckpt
