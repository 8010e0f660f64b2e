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

#include "caebench/range_coder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "caebench/error.hpp"

namespace caebench::rc {

void CdfTable::Validate() const {
  if (cdf.size() < 3) Fail(ErrorKind::kFormat, "CDF table needs a symbol and an escape");
  if (cdf.front() != 0) Fail(ErrorKind::kFormat, "CDF table must start at 0");
  if (cdf.back() != kTotalFrequency) Fail(ErrorKind::kFormat, "CDF table must end at 2^16");
  for (std::size_t i = 1; i < cdf.size(); ++i) {
    if (cdf[i] <= cdf[i - 1]) {
      Fail(ErrorKind::kFormat, "CDF table not strictly increasing at " + std::to_string(i));
    }
  }
}

CdfTable QuantizePmf(std::int32_t offset, std::span<const double> pmf) {
  if (pmf.size() < 2) Fail(ErrorKind::kInvalidArgument, "pmf needs a symbol and an escape");
  if (pmf.size() > kTotalFrequency) Fail(ErrorKind::kInvalidArgument, "pmf larger than 2^16");
  double mass = 0.0;
  for (double p : pmf) {
    if (!(p >= 0.0) || !std::isfinite(p)) Fail(ErrorKind::kNumeric, "pmf entry not finite/non-negative");
    mass += p;
  }
  if (!(mass > 0.0)) Fail(ErrorKind::kNumeric, "pmf has zero mass");

  std::vector<std::int64_t> freq(pmf.size());
  std::int64_t total = 0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    freq[i] = std::max<std::int64_t>(1, std::llround(pmf[i] / mass * kTotalFrequency));
    total += freq[i];
  }
  // Walk the symbols from most to least frequent, nudging by one until the
  // total is exact; large frequencies absorb the correction at least cost.
  std::vector<std::size_t> order(pmf.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return freq[a] > freq[b]; });
  std::int64_t diff = total - static_cast<std::int64_t>(kTotalFrequency);
  while (diff != 0) {
    bool moved = false;
    for (std::size_t i : order) {
      if (diff == 0) break;
      if (diff > 0 && freq[i] > 1) {
        --freq[i];
        --diff;
        moved = true;
      } else if (diff < 0) {
        ++freq[i];
        ++diff;
        moved = true;
      }
    }
    if (!moved) Fail(ErrorKind::kInvalidArgument, "pmf cannot be quantized");
  }

  CdfTable table;
  table.offset = offset;
  table.cdf.resize(pmf.size() + 1);
  table.cdf[0] = 0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    table.cdf[i + 1] = table.cdf[i] + static_cast<std::uint32_t>(freq[i]);
  }
  return table;
}

double CodeLength(const CdfTable& table, std::int32_t value) {
  const double total = static_cast<double>(kTotalFrequency);
  if (value >= table.min_value() && value <= table.max_value()) {
    return -std::log2(table.frequency(static_cast<std::size_t>(value - table.offset)) / total);
  }
  return -std::log2(table.frequency(table.escape_index()) / total) + 16.0;
}

void RangeEncoder::PropagateCarry() {
  for (auto it = out_.rbegin(); it != out_.rend(); ++it) {
    if (++*it != 0) return;
  }
  // The coded interval never exceeds [0, 1), so a carry cannot run past
  // the first byte.
  Fail(ErrorKind::kNumeric, "range coder carry overflow");
}

void RangeEncoder::Encode(std::uint32_t cumulative, std::uint32_t frequency) {
  const std::uint32_t r = range_ >> kPrecisionBits;
  low_ += static_cast<std::uint64_t>(r) * cumulative;
  range_ = r * frequency;
  if (low_ > 0xFFFFFFFFull) {
    PropagateCarry();
    low_ &= 0xFFFFFFFFull;
  }
  while (range_ < (1u << 24)) {
    out_.push_back(static_cast<std::uint8_t>(low_ >> 24));
    low_ = (low_ << 8) & 0xFFFFFFFFull;
    range_ <<= 8;
  }
  if (trace) trace(range_, out_.size());
}

void RangeEncoder::EncodeRaw16(std::uint16_t word) { Encode(word, 1); }

void RangeEncoder::EncodeValue(const CdfTable& table, std::int32_t value) {
  if (value >= table.min_value() && value <= table.max_value()) {
    const auto index = static_cast<std::size_t>(value - table.offset);
    Encode(table.cdf[index], table.frequency(index));
    return;
  }
  if (value < kRawMin || value > kRawMax) {
    Fail(ErrorKind::kInvalidArgument, "escaped value " + std::to_string(value) + " outside int16");
  }
  const std::size_t esc = table.escape_index();
  Encode(table.cdf[esc], table.frequency(esc));
  EncodeRaw16(static_cast<std::uint16_t>(static_cast<std::int16_t>(value)));
}

std::vector<std::uint8_t> RangeEncoder::Finish() {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out_.push_back(static_cast<std::uint8_t>(low_ >> shift));
  }
  std::vector<std::uint8_t> bytes = std::move(out_);
  out_.clear();
  low_ = 0;
  range_ = 0xFFFFFFFFu;
  return bytes;
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> payload) : data_(payload) {
  if (data_.size() < kFlushBytes) {
    Fail(ErrorKind::kFormat, "range-coded payload shorter than its flush bytes");
  }
  for (std::size_t i = 0; i < kFlushBytes; ++i) code_ = (code_ << 8) | data_[pos_++];
}

std::uint8_t RangeDecoder::NextByte() {
  if (pos_ >= data_.size()) Fail(ErrorKind::kFormat, "range-coded payload truncated");
  return data_[pos_++];
}

std::uint32_t RangeDecoder::Target(std::uint32_t total_bits) {
  scale_ = range_ >> total_bits;
  const std::uint32_t target = code_ / scale_;
  if (target >= (1u << total_bits)) Fail(ErrorKind::kFormat, "range-coded payload is corrupt");
  return target;
}

void RangeDecoder::Consume(std::uint32_t cumulative, std::uint32_t frequency) {
  code_ -= scale_ * cumulative;
  range_ = scale_ * frequency;
  while (range_ < (1u << 24)) {
    code_ = (code_ << 8) | NextByte();
    range_ <<= 8;
  }
  if (trace) trace(range_, bytes_consumed());
}

std::size_t RangeDecoder::DecodeIndex(std::span<const std::uint32_t> cdf) {
  const std::uint32_t target = Target(kPrecisionBits);
  // First entry strictly greater than target, minus one.
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  if (it == cdf.begin() || it == cdf.end()) Fail(ErrorKind::kFormat, "range-coded payload is corrupt");
  const auto index = static_cast<std::size_t>(it - cdf.begin() - 1);
  Consume(cdf[index], cdf[index + 1] - cdf[index]);
  return index;
}

std::uint16_t RangeDecoder::DecodeRaw16() {
  const std::uint32_t target = Target(16);
  Consume(target, 1);
  return static_cast<std::uint16_t>(target);
}

std::int32_t RangeDecoder::DecodeValue(const CdfTable& table) {
  const std::size_t index = DecodeIndex(table.cdf);
  if (index != table.escape_index()) return table.offset + static_cast<std::int32_t>(index);
  const std::int32_t raw = static_cast<std::int16_t>(DecodeRaw16());
  if (raw >= table.min_value() && raw <= table.max_value()) {
    Fail(ErrorKind::kFormat, "escaped value lies inside the table support");
  }
  return raw;
}

void RangeDecoder::Finish() const {
  if (pos_ != data_.size()) {
    Fail(ErrorKind::kFormat, "range-coded payload has " + std::to_string(data_.size() - pos_) +
                                 " unconsumed bytes");
  }
}

Payload Encode(std::span<const std::int32_t> values, const CdfTable& table) {
  table.Validate();
  RangeEncoder enc;
  for (std::int32_t v : values) enc.EncodeValue(table, v);
  return Payload{enc.Finish(), values.size()};
}

std::vector<std::int32_t> Decode(const Payload& payload, const CdfTable& table) {
  table.Validate();
  RangeDecoder dec(payload.bytes);
  std::vector<std::int32_t> values(payload.symbol_count);
  for (auto& v : values) v = dec.DecodeValue(table);
  dec.Finish();
  return values;
}

}  // namespace caebench::rc
