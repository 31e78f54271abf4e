// Copyright 2026 The incnet Authors
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

#include "incnet/iedt.hpp"

#include "incnet/errors.hpp"

namespace incnet {
namespace {

struct Writer {
  wire::Bytes out;
  void u8(std::uint8_t v) { out.push_back(v); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v >> 8));
    u8(static_cast<std::uint8_t>(v));
  }
  void u32(std::uint32_t v) {
    u16(static_cast<std::uint16_t>(v >> 16));
    u16(static_cast<std::uint16_t>(v));
  }
  void i64(std::int64_t v) {
    const auto u = static_cast<std::uint64_t>(v);
    u32(static_cast<std::uint32_t>(u >> 32));
    u32(static_cast<std::uint32_t>(u));
  }
  void str(const std::string& s) {
    u16(static_cast<std::uint16_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  }
};

struct Reader {
  const wire::Bytes& in;
  std::size_t pos = 0;
  void need(std::size_t n) {
    if (pos + n > in.size()) throw Error(Errc::kMalformedPacket, "truncated metadata");
  }
  std::uint8_t u8() {
    need(1);
    return in[pos++];
  }
  std::uint16_t u16() {
    const std::uint16_t hi = u8();
    return static_cast<std::uint16_t>(hi << 8 | u8());
  }
  std::uint32_t u32() {
    const std::uint32_t hi = u16();
    return hi << 16 | u16();
  }
  std::int64_t i64() {
    const std::uint64_t hi = u32();
    return static_cast<std::int64_t>(hi << 32 | u32());
  }
  std::string str() {
    const std::size_t n = u16();
    need(n);
    std::string s(in.begin() + static_cast<std::ptrdiff_t>(pos),
                  in.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
    return s;
  }
};

}  // namespace

std::size_t message_bytes(const Message& m) {
  std::size_t n = 8 + m.type.size();
  for (const auto& [name, v] : m.fields) {
    n += 4 + name.size();
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, FPArray> || std::is_same_v<T, IntArray>) {
            n += 8 * x.size();
          } else if constexpr (std::is_same_v<T, StrIntMap>) {
            for (const auto& [k, _] : x) n += 10 + k.size();
          } else if constexpr (std::is_same_v<T, IntIntMap>) {
            n += 16 * x.size();
          } else {
            n += x.data.size();
          }
        },
        v);
  }
  return n;
}

wire::Bytes encode_meta(const Meta& m) {
  Writer w;
  w.u8(m.kind);
  w.u8(m.method);
  w.u16(m.client);
  w.u16(m.flow);
  w.u32(m.tag);
  w.u32(m.aux);
  w.u16(static_cast<std::uint16_t>(m.names.size()));
  for (const auto& s : m.names) w.str(s);
  w.u16(static_cast<std::uint16_t>(m.extra.size()));
  for (const auto& [k, v] : m.extra) {
    w.str(k);
    w.i64(v);
  }
  w.u16(static_cast<std::uint16_t>(m.wide.size()));
  for (auto v : m.wide) w.i64(v);
  return std::move(w.out);
}

Meta decode_meta(const wire::Bytes& b) {
  Reader r{b};
  Meta m;
  m.kind = r.u8();
  m.method = r.u8();
  m.client = r.u16();
  m.flow = r.u16();
  m.tag = r.u32();
  m.aux = r.u32();
  for (int n = r.u16(); n > 0; --n) m.names.push_back(r.str());
  for (int n = r.u16(); n > 0; --n) {
    std::string k = r.str();
    m.extra.emplace_back(std::move(k), r.i64());
  }
  for (int n = r.u16(); n > 0; --n) m.wide.push_back(r.i64());
  if (r.pos != b.size()) throw Error(Errc::kMalformedPacket, "trailing metadata bytes");
  return m;
}

}  // namespace incnet
