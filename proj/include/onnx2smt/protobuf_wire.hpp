#pragma once

// Minimal protocol-buffers wire-format codec: enough to walk the handful of
// ONNX messages this project consumes without generated code.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace onnx2smt::pb {

enum class WireType : std::uint8_t {
  Varint = 0,
  Fixed64 = 1,
  LengthDelimited = 2,
  Fixed32 = 5,
};

struct Field {
  std::uint32_t number = 0;
  WireType type = WireType::Varint;
  std::uint64_t scalar = 0;                // varint / fixed32 / fixed64 payload
  std::span<const std::uint8_t> bytes;     // length-delimited payload

  std::string_view as_string() const {
    return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
  }
  std::int64_t as_int64() const { return static_cast<std::int64_t>(scalar); }
  float as_float() const;
  double as_double() const;
};

/// Sequential field reader. Throws MalformedProtobuf on truncated input,
/// bad tags, or deprecated group wire types.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  bool next(Field& field);

 private:
  std::uint64_t read_varint();

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

/// Appends repeated numeric values from either a packed payload or a single
/// unpacked field occurrence.
void read_repeated_int64(const Field& field, std::vector<std::int64_t>& out);
void read_repeated_float(const Field& field, std::vector<float>& out);
void read_repeated_double(const Field& field, std::vector<double>& out);

class Writer {
 public:
  void varint(std::uint32_t number, std::uint64_t value);
  void fixed32(std::uint32_t number, std::uint32_t value);
  void float32(std::uint32_t number, float value);
  void bytes(std::uint32_t number, std::string_view payload);
  void packed_int64(std::uint32_t number, std::span<const std::int64_t> values);
  void packed_float(std::uint32_t number, std::span<const float> values);

  const std::string& buffer() const { return out_; }
  std::string take() { return std::move(out_); }

 private:
  void raw_varint(std::uint64_t value);
  void tag(std::uint32_t number, WireType type);

  std::string out_;
};

}  // namespace onnx2smt::pb
