// Copyright 2026 The caebench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CAEBENCH_RANGE_CODER_HPP_
#define CAEBENCH_RANGE_CODER_HPP_

// 32-bit renormalising range coder with 16-bit frequency precision.
//
// Byte layout: the encoder emits the top byte of `low` whenever the range
// drops below 2^24 (big-endian order), propagating carries back into the
// bytes already written, and ends with the four bytes of `low`. An empty
// symbol sequence therefore encodes to exactly four bytes.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace caebench::rc {

inline constexpr std::uint32_t kPrecisionBits = 16;
inline constexpr std::uint32_t kTotalFrequency = 1u << kPrecisionBits;
inline constexpr std::size_t kFlushBytes = 4;

// Cumulative frequencies for symbols offset, offset+1, ..., followed by one
// escape symbol. Values outside the table are coded as the escape plus a
// raw 16-bit two's-complement word.
struct CdfTable {
  std::int32_t offset = 0;
  std::vector<std::uint32_t> cdf;  // cdf[0] = 0, cdf.back() = 2^16

  std::size_t num_symbols() const { return cdf.empty() ? 0 : cdf.size() - 1; }
  std::size_t escape_index() const { return num_symbols() - 1; }
  std::int32_t min_value() const { return offset; }
  std::int32_t max_value() const { return offset + static_cast<std::int32_t>(escape_index()) - 1; }
  std::uint32_t frequency(std::size_t index) const { return cdf[index + 1] - cdf[index]; }

  // Throws unless strictly increasing from 0 to 2^16 with at least one
  // regular symbol plus the escape.
  void Validate() const;
};

// Builds a table from probabilities of the regular symbols followed by the
// escape probability. Every symbol keeps a frequency of at least one.
CdfTable QuantizePmf(std::int32_t offset, std::span<const double> pmf_with_escape);

// Coded cost of one value in bits under the table, including the raw word
// of escaped values.
double CodeLength(const CdfTable& table, std::int32_t value);

// Raw values must fit in int16.
inline constexpr std::int32_t kRawMin = -32768;
inline constexpr std::int32_t kRawMax = 32767;

// Observer invoked after every coded event with the coder's range and the
// number of renormalisation bytes so far. Encoder and decoder trajectories
// are identical for a valid payload.
using TraceHook = std::function<void(std::uint32_t range, std::size_t bytes)>;

class RangeEncoder {
 public:
  void Encode(std::uint32_t cumulative, std::uint32_t frequency);
  void EncodeRaw16(std::uint16_t word);
  void EncodeValue(const CdfTable& table, std::int32_t value);
  // Appends the flush bytes and returns the payload; the encoder is reset.
  std::vector<std::uint8_t> Finish();

  std::uint32_t range() const { return range_; }
  std::size_t bytes_emitted() const { return out_.size(); }
  TraceHook trace;

 private:
  void PropagateCarry();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> payload);

  // Each of these throws a format error on inconsistent input.
  std::size_t DecodeIndex(std::span<const std::uint32_t> cdf);
  std::uint16_t DecodeRaw16();
  std::int32_t DecodeValue(const CdfTable& table);
  // Throws unless the payload was consumed exactly.
  void Finish() const;

  std::uint32_t range() const { return range_; }
  std::size_t bytes_consumed() const { return pos_ - kFlushBytes; }
  TraceHook trace;

 private:
  std::uint32_t Target(std::uint32_t total_bits);
  void Consume(std::uint32_t cumulative, std::uint32_t frequency);
  std::uint8_t NextByte();

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
  std::uint32_t scale_ = 0;
};

struct Payload {
  std::vector<std::uint8_t> bytes;
  std::size_t symbol_count = 0;
};

Payload Encode(std::span<const std::int32_t> values, const CdfTable& table);
std::vector<std::int32_t> Decode(const Payload& payload, const CdfTable& table);

}  // namespace caebench::rc

#endif  // CAEBENCH_RANGE_CODER_HPP_
