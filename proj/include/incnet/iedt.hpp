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

// Application-facing values and the metadata block that INC packets carry
// in their payload.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "incnet/wire.hpp"

namespace incnet {

using FPArray = std::vector<double>;
using IntArray = std::vector<std::int64_t>;
using StrIntMap = std::map<std::string, std::int64_t>;
using IntIntMap = std::map<std::int64_t, std::int64_t>;
struct Opaque {
  std::string data;
  bool operator==(const Opaque&) const = default;
};

using IEDTValue = std::variant<FPArray, IntArray, StrIntMap, IntIntMap, Opaque>;

struct Message {
  std::string type;
  std::map<std::string, IEDTValue> fields;

  const IEDTValue* field(const std::string& name) const {
    auto it = fields.find(name);
    return it == fields.end() ? nullptr : &it->second;
  }
  bool operator==(const Message&) const = default;
};

// Serialized size of a message on the plain channel.
std::size_t message_bytes(const Message& m);

// Payload block of every INC packet sent by the agents.
struct Meta {
  enum Kind : std::uint8_t {
    kData = 1,       // client request
    kReply = 2,      // server or switch response
    kFallback = 3,   // server reply computed in software; wide holds results
  };
  std::uint8_t kind = kData;
  std::uint8_t method = 0;
  std::uint16_t client = 0;
  std::uint16_t flow = 0;
  std::uint32_t tag = 0;   // chunk index or call id
  std::uint32_t aux = 0;   // per-kind extra word
  // Key names of the slots, for keys the server may not know yet.
  std::vector<std::string> names;
  // Keys that collide in the logical address space, processed in software.
  std::vector<std::pair<std::string, std::int64_t>> extra;
  // Exact 64-bit values, one per slot, when the 32-bit slot cannot hold them.
  std::vector<std::int64_t> wide;

  bool operator==(const Meta&) const = default;
};

wire::Bytes encode_meta(const Meta& m);
// Throws Error{kMalformedPacket}.
Meta decode_meta(const wire::Bytes& b);

}  // namespace incnet
