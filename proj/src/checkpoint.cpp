// Copyright 2026 The pushgrid Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pushgrid/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "pushgrid/error.hpp"

namespace pushgrid {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

constexpr char kMagic[8] = {'P', 'G', 'C', 'K', 'P', 'T', '\0', '\1'};

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void put(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& source)
      : bytes_(bytes), source_(source) {}

  template <typename T>
  T get() {
    T value;
    std::memcpy(&value, take(sizeof(T)), sizeof(T));
    return value;
  }
  const char* take(std::size_t n) {
    if (n > bytes_.size() - pos_) {
      throw FormatError(source_ + ": checkpoint is truncated");
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

const Matrix& CheckpointData::tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return m;
  }
  throw FormatError("checkpoint has no tensor '" + name + "'");
}

void write_checkpoint(const std::filesystem::path& path,
                      const CheckpointData& data) {
  nlohmann::json header = data.header;
  nlohmann::json index = nlohmann::json::array();
  for (const auto& [name, m] : data.tensors) {
    index.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  }
  header["tensors"] = index;
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& [name, m] : data.tensors) {
    out.append(reinterpret_cast<const char*>(m.data()),
               static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  put<std::uint64_t>(out, fnv1a(out.data(), out.size()));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error("cannot write checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)),
                          std::istreambuf_iterator<char>());
  const std::string source = path.string();
  Reader r(bytes, source);
  if (std::memcmp(r.take(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(source + ": not a checkpoint file");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError(source + ": unsupported checkpoint version " +
                      std::to_string(version));
  }
  const auto header_size = r.get<std::uint64_t>();
  if (header_size > bytes.size()) throw FormatError(source + ": checkpoint is truncated");
  CheckpointData data;
  try {
    data.header = nlohmann::json::parse(
        std::string(r.take(header_size), header_size));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(source + ": bad checkpoint header: " + e.what());
  }
  for (const auto& entry : data.header.at("tensors")) {
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    if (rows < 0 || cols < 0) throw FormatError(source + ": bad tensor shape");
    Matrix m(rows, cols);
    const std::size_t n = static_cast<std::size_t>(m.size()) * sizeof(double);
    std::memcpy(m.data(), r.take(n), n);
    data.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(m));
  }
  const std::size_t body = r.pos();
  if (r.get<std::uint64_t>() != fnv1a(bytes.data(), body)) {
    throw FormatError(source + ": checkpoint checksum mismatch");
  }
  if (r.pos() != bytes.size()) throw FormatError(source + ": trailing bytes");
  data.header.erase("tensors");
  return data;
}

}  // namespace pushgrid
