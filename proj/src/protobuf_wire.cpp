#include "onnx2smt/protobuf_wire.hpp"

#include <bit>
#include <cstring>

#include "onnx2smt/error.hpp"

namespace onnx2smt::pb {

namespace {

Error malformed(const std::string& what) { return Error(ErrorKind::MalformedProtobuf, what); }

std::uint32_t load_le32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t load_le64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

float Field::as_float() const { return std::bit_cast<float>(static_cast<std::uint32_t>(scalar)); }
double Field::as_double() const { return std::bit_cast<double>(scalar); }

std::uint64_t Reader::read_varint() {
  std::uint64_t value = 0;
  for (int shift = 0; shift < 64; shift += 7) {
    if (pos_ >= data_.size()) throw malformed("truncated varint");
    const std::uint8_t byte = data_[pos_++];
    value |= static_cast<std::uint64_t>(byte & 0x7F) << shift;
    if ((byte & 0x80) == 0) return value;
  }
  throw malformed("varint longer than 10 bytes");
}

bool Reader::next(Field& field) {
  if (pos_ >= data_.size()) return false;
  const std::uint64_t key = read_varint();
  field.number = static_cast<std::uint32_t>(key >> 3);
  if (field.number == 0) throw malformed("field number 0");
  field.bytes = {};
  field.scalar = 0;
  switch (key & 0x7) {
    case 0:
      field.type = WireType::Varint;
      field.scalar = read_varint();
      break;
    case 1:
      if (data_.size() - pos_ < 8) throw malformed("truncated fixed64");
      field.type = WireType::Fixed64;
      field.scalar = load_le64(data_.data() + pos_);
      pos_ += 8;
      break;
    case 2: {
      field.type = WireType::LengthDelimited;
      const std::uint64_t length = read_varint();
      if (length > data_.size() - pos_) throw malformed("length-delimited field overruns buffer");
      field.bytes = data_.subspan(pos_, static_cast<std::size_t>(length));
      pos_ += static_cast<std::size_t>(length);
      break;
    }
    case 5:
      if (data_.size() - pos_ < 4) throw malformed("truncated fixed32");
      field.type = WireType::Fixed32;
      field.scalar = load_le32(data_.data() + pos_);
      pos_ += 4;
      break;
    default:
      throw malformed("unsupported wire type " + std::to_string(key & 0x7));
  }
  return true;
}

void read_repeated_int64(const Field& field, std::vector<std::int64_t>& out) {
  if (field.type == WireType::Varint) {
    out.push_back(field.as_int64());
    return;
  }
  if (field.type != WireType::LengthDelimited) throw malformed("bad wire type for repeated int64");
  // packed: a run of bare varints
  std::size_t pos = 0;
  const auto data = field.bytes;
  while (pos < data.size()) {
    std::uint64_t value = 0;
    int shift = 0;
    for (;; shift += 7) {
      if (pos >= data.size() || shift >= 64) throw malformed("truncated packed varint");
      const std::uint8_t byte = data[pos++];
      value |= static_cast<std::uint64_t>(byte & 0x7F) << shift;
      if ((byte & 0x80) == 0) break;
    }
    out.push_back(static_cast<std::int64_t>(value));
  }
}

void read_repeated_float(const Field& field, std::vector<float>& out) {
  if (field.type == WireType::Fixed32) {
    out.push_back(field.as_float());
    return;
  }
  if (field.type != WireType::LengthDelimited || field.bytes.size() % 4 != 0) {
    throw malformed("bad packed float payload");
  }
  for (std::size_t i = 0; i < field.bytes.size(); i += 4) {
    out.push_back(std::bit_cast<float>(load_le32(field.bytes.data() + i)));
  }
}

void read_repeated_double(const Field& field, std::vector<double>& out) {
  if (field.type == WireType::Fixed64) {
    out.push_back(field.as_double());
    return;
  }
  if (field.type != WireType::LengthDelimited || field.bytes.size() % 8 != 0) {
    throw malformed("bad packed double payload");
  }
  for (std::size_t i = 0; i < field.bytes.size(); i += 8) {
    out.push_back(std::bit_cast<double>(load_le64(field.bytes.data() + i)));
  }
}

void Writer::raw_varint(std::uint64_t value) {
  while (value >= 0x80) {
    out_.push_back(static_cast<char>((value & 0x7F) | 0x80));
    value >>= 7;
  }
  out_.push_back(static_cast<char>(value));
}

void Writer::tag(std::uint32_t number, WireType type) {
  raw_varint((static_cast<std::uint64_t>(number) << 3) | static_cast<std::uint64_t>(type));
}

void Writer::varint(std::uint32_t number, std::uint64_t value) {
  tag(number, WireType::Varint);
  raw_varint(value);
}

void Writer::fixed32(std::uint32_t number, std::uint32_t value) {
  tag(number, WireType::Fixed32);
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

void Writer::float32(std::uint32_t number, float value) {
  fixed32(number, std::bit_cast<std::uint32_t>(value));
}

void Writer::bytes(std::uint32_t number, std::string_view payload) {
  tag(number, WireType::LengthDelimited);
  raw_varint(payload.size());
  out_.append(payload);
}

void Writer::packed_int64(std::uint32_t number, std::span<const std::int64_t> values) {
  Writer inner;
  for (auto v : values) inner.raw_varint(static_cast<std::uint64_t>(v));
  bytes(number, inner.buffer());
}

void Writer::packed_float(std::uint32_t number, std::span<const float> values) {
  std::string payload;
  payload.reserve(values.size() * 4);
  for (float f : values) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) payload.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  bytes(number, payload);
}

}  // namespace onnx2smt::pb
