#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "json.hpp"

#include "compass/core.hpp"

namespace compass::io {

using json = nlohmann::json;

inline constexpr std::array<char, 4> kEmbeddingMagic{'C', 'M', 'P', 'S'};
inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderSize = 16;
inline constexpr int kSchemaVersion = 1;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.append(bytes.data(), bytes.size());
}

template <typename T>
T get_le(const char* p) {
  std::array<char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value{};
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Binary embeddings: "CMPS" | u32 version | u32 dim | u32 count | f32 rows, all little-endian.

inline std::string encode_embeddings(const EmbeddingMatrix& m) {
  require(m.dim() > 0, Errc::invalid_argument, "embedding dimension must be positive");
  require(m.count() <= UINT32_MAX && m.dim() <= UINT32_MAX, Errc::invalid_argument, "matrix too large for format");
  std::string out;
  out.reserve(kEmbeddingHeaderSize + 4 * m.data().size());
  out.append(kEmbeddingMagic.data(), kEmbeddingMagic.size());
  detail::put_le<std::uint32_t>(out, kEmbeddingVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.count()));
  for (float v : m.data()) detail::put_le<float>(out, v);
  return out;
}

inline std::size_t write_embeddings(const EmbeddingMatrix& m, std::ostream& sink) {
  const std::string bytes = encode_embeddings(m);
  sink.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(sink), Errc::io_failure, "failed to write embeddings");
  return bytes.size();
}

inline EmbeddingMatrix decode_embeddings(std::string_view bytes) {
  require(bytes.size() >= kEmbeddingHeaderSize, Errc::truncated,
          "embedding header needs 16 bytes, got " + std::to_string(bytes.size()));
  require(std::equal(kEmbeddingMagic.begin(), kEmbeddingMagic.end(), bytes.begin()), Errc::bad_magic,
          "expected magic CMPS");
  const auto version = detail::get_le<std::uint32_t>(bytes.data() + 4);
  require(version == kEmbeddingVersion, Errc::unsupported_version,
          "embedding format version " + std::to_string(version));
  const std::size_t dim = detail::get_le<std::uint32_t>(bytes.data() + 8);
  const std::size_t count = detail::get_le<std::uint32_t>(bytes.data() + 12);
  require(dim > 0, Errc::invalid_argument, "embedding dimension is zero");
  const std::size_t expected = kEmbeddingHeaderSize + 4 * dim * count;
  require(bytes.size() >= expected, Errc::truncated,
          "payload needs " + std::to_string(expected) + " bytes, got " + std::to_string(bytes.size()));
  require(bytes.size() == expected, Errc::parse_error,
          std::to_string(bytes.size() - expected) + " trailing bytes after payload");
  std::vector<float> data(dim * count);
  const char* p = bytes.data() + kEmbeddingHeaderSize;
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = detail::get_le<float>(p + 4 * i);
  EmbeddingMatrix m(dim, count, std::move(data));
  for (std::size_t i = 0; i < count; ++i) {
    const double n = norm(m.row(i));
    require(std::isfinite(n) && std::abs(n - 1.0) <= kNormTolerance, Errc::not_normalized,
            "row " + std::to_string(i) + " has norm " + std::to_string(n));
  }
  return m;
}

inline EmbeddingMatrix read_embeddings(std::istream& source) {
  std::string bytes((std::istreambuf_iterator<char>(source)), std::istreambuf_iterator<char>());
  return decode_embeddings(bytes);
}

// ---------------------------------------------------------------------------
// Records: JSON lines with id, lang, role and optional subject, text.

inline json record_to_json(const ExampleRecord& r) {
  json j{{"id", r.id}, {"lang", r.lang}, {"role", std::string(to_string(r.role))}};
  if (r.subject) j["subject"] = *r.subject;
  if (r.text) j["text"] = *r.text;
  return j;
}

inline std::vector<ExampleRecord> read_records(std::istream& source) {
  std::vector<ExampleRecord> out;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](Errc code, const std::string& what) {
    throw Error(code, "line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(source, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(Errc::parse_error, e.what());
    }
    if (!j.is_object()) fail(Errc::parse_error, "expected a JSON object");
    for (const char* key : {"id", "lang", "role"}) {
      if (!j.contains(key)) fail(Errc::missing_key, std::string("missing key '") + key + "'");
      if (!j[key].is_string()) fail(Errc::parse_error, std::string("key '") + key + "' must be a string");
    }
    ExampleRecord r;
    r.id = j["id"].get<std::string>();
    r.lang = j["lang"].get<std::string>();
    const auto role_text = j["role"].get<std::string>();
    auto role = parse_role(role_text);
    if (!role) fail(Errc::unknown_role, "unknown role '" + role_text + "'");
    r.role = *role;
    for (const char* key : {"subject", "text"}) {
      if (!j.contains(key) || j[key].is_null()) continue;
      if (!j[key].is_string()) fail(Errc::parse_error, std::string("key '") + key + "' must be a string");
    }
    if (j.contains("subject") && j["subject"].is_string()) r.subject = j["subject"].get<std::string>();
    if (j.contains("text") && j["text"].is_string()) r.text = j["text"].get<std::string>();
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string encode_records(const std::vector<ExampleRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

inline void write_records(const std::vector<ExampleRecord>& records, std::ostream& sink) {
  const auto text = encode_records(records);
  sink.write(text.data(), static_cast<std::streamsize>(text.size()));
  require(static_cast<bool>(sink), Errc::io_failure, "failed to write records");
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::io_failure, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes under an exclusive advisory lock on path.lock, via a temporary file
// and rename. The lock file is left in place so every writer locks one inode.
inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  const auto lock_path = path.string() + ".lock";
  const int lock_fd = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
  require(lock_fd >= 0, Errc::io_failure, "cannot create lock " + lock_path);
  if (::flock(lock_fd, LOCK_EX) != 0) {
    ::close(lock_fd);
    throw Error(Errc::io_failure, "cannot lock " + lock_path);
  }
  const auto tmp = path.string() + ".tmp";
  bool ok = false;
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (out) {
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      out.flush();
      ok = static_cast<bool>(out);
    }
  }
  std::error_code ec;
  if (ok) std::filesystem::rename(tmp, path, ec);
  if (!ok || ec) std::filesystem::remove(tmp, ec);
  ::flock(lock_fd, LOCK_UN);
  ::close(lock_fd);
  require(ok, Errc::io_failure, "failed to write " + path.string());
  require(std::filesystem::exists(path), Errc::io_failure, "failed to move " + tmp + " into place");
}

inline EmbeddingMatrix load_embeddings(const std::filesystem::path& path) { return decode_embeddings(read_file(path)); }

inline void save_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  write_file(path, encode_embeddings(m));
}

inline std::vector<ExampleRecord> load_records(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  return read_records(in);
}

inline void save_records(const std::filesystem::path& path, const std::vector<ExampleRecord>& records) {
  write_file(path, encode_records(records));
}

inline Dataset load_dataset(const std::filesystem::path& records, const std::filesystem::path& embeddings) {
  Dataset ds{load_records(records), load_embeddings(embeddings)};
  require(ds.records.size() == ds.embeddings.count(), Errc::invalid_argument,
          records.string() + " has " + std::to_string(ds.records.size()) + " records but " + embeddings.string() +
              " has " + std::to_string(ds.embeddings.count()) + " rows");
  return ds;
}

// ---------------------------------------------------------------------------
// Artifact envelope

inline json envelope(std::string_view kind) {
  return json{{"kind", std::string(kind)}, {"schema_version", kSchemaVersion}};
}

inline void check_envelope(const json& j, std::string_view kind) {
  require(j.is_object() && j.contains("kind") && j["kind"].is_string(), Errc::parse_error,
          "artifact has no 'kind' field");
  const auto actual = j["kind"].get<std::string>();
  require(actual == kind, Errc::kind_mismatch, "expected kind '" + std::string(kind) + "', found '" + actual + "'");
  require(j.contains("schema_version") && j["schema_version"].is_number_integer(), Errc::parse_error,
          "artifact has no integer 'schema_version'");
  const int version = j["schema_version"].get<int>();
  require(version == kSchemaVersion, Errc::unsupported_version, "schema_version " + std::to_string(version));
}

inline std::string dump(const json& j) { return j.dump(2) + '\n'; }

inline json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse_error, e.what());
  }
}

// little-endian float32 block, base64 encoded
inline std::string encode_f32_block(std::span<const float> values) {
  static constexpr char table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string raw;
  raw.reserve(values.size() * 4);
  for (float v : values) detail::put_le<float>(raw, v);
  std::string out;
  out.reserve((raw.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < raw.size(); i += 3) {
    const std::uint32_t n = (std::uint8_t(raw[i]) << 16) | (std::uint8_t(raw[i + 1]) << 8) | std::uint8_t(raw[i + 2]);
    out += table[(n >> 18) & 63];
    out += table[(n >> 12) & 63];
    out += table[(n >> 6) & 63];
    out += table[n & 63];
  }
  if (i < raw.size()) {
    std::uint32_t n = std::uint8_t(raw[i]) << 16;
    if (i + 1 < raw.size()) n |= std::uint8_t(raw[i + 1]) << 8;
    out += table[(n >> 18) & 63];
    out += table[(n >> 12) & 63];
    out += i + 1 < raw.size() ? table[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

inline std::vector<float> decode_f32_block(std::string_view text) {
  auto value_of = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  require(text.size() % 4 == 0, Errc::parse_error, "base64 block length not a multiple of 4");
  std::string raw;
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t n = 0;
    int pad = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=') {
        ++pad;
        n <<= 6;
        continue;
      }
      const int v = value_of(c);
      require(v >= 0 && pad == 0, Errc::parse_error, "invalid base64 block");
      n = (n << 6) | static_cast<std::uint32_t>(v);
    }
    raw += static_cast<char>((n >> 16) & 0xff);
    if (pad < 2) raw += static_cast<char>((n >> 8) & 0xff);
    if (pad < 1) raw += static_cast<char>(n & 0xff);
  }
  require(raw.size() % 4 == 0, Errc::parse_error, "float block length not a multiple of 4");
  std::vector<float> out(raw.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::get_le<float>(raw.data() + 4 * i);
  return out;
}

}  // namespace compass::io
