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

// NetFilter files (JSON) and service schema files (line-oriented text).

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace incnet::nf {

enum class ClearPolicy : std::uint8_t { kNop, kCopy, kShadow, kLazy };

// Values double as the on-wire op_type byte.
enum class ModifyOp : std::uint8_t {
  kNop = 0,
  kMax,
  kMin,
  kAdd,
  kAssign,
  kShiftL,
  kShiftR,
  kBand,
  kBor,
  kBnot,
  kBxor,
};

enum class Target : std::uint8_t { kSrc, kServer, kAll, kList };
enum class KeyMode : std::uint8_t { kNull, kClientId, kField };

struct CntFwd {
  Target to = Target::kSrc;
  std::vector<std::string> endpoints;  // only for Target::kList
  std::uint32_t threshold = 0;         // 0 disables counting
  KeyMode key_mode = KeyMode::kNull;
  std::string key_path;  // only for KeyMode::kField

  bool enabled() const { return threshold != 0; }
  bool operator==(const CntFwd&) const = default;
};

struct NetFilter {
  std::string app_name;
  int precision = 0;
  std::string get;     // field path, empty for nop
  std::string add_to;  // field path, empty for nop
  ClearPolicy clear = ClearPolicy::kNop;
  ModifyOp modify_op = ModifyOp::kNop;
  std::int32_t modify_para = 0;
  CntFwd cntfwd;

  bool operator==(const NetFilter&) const = default;
};

const char* to_string(ClearPolicy c);
const char* to_string(ModifyOp op);
const char* to_string(Target t);
std::optional<ClearPolicy> clear_policy_from(std::string_view s);
std::optional<ModifyOp> modify_op_from(std::string_view s);

// Accepts the JSON subset used by NetFilter files, including // comments
// and trailing commas. Throws Error with kSyntaxError, kUnknownField or
// kBadEnum.
NetFilter parse_netfilter(std::string_view text);
NetFilter load_netfilter(const std::string& path);
std::string serialize_netfilter(const NetFilter& nf);

enum class FieldType : std::uint8_t {
  kFPArray,
  kIntArray,
  kStrIntMap,
  kIntIntMap,
  kScalar,
  kOpaque,
};

const char* to_string(FieldType t);
bool is_iedt(FieldType t);
bool is_array(FieldType t);
bool is_map(FieldType t);

struct FieldDesc {
  std::string name;
  FieldType type = FieldType::kOpaque;
};

struct MessageDesc {
  std::string name;
  std::vector<FieldDesc> fields;
};

struct MethodDesc {
  std::string name;
  std::string request;
  std::string reply;
  std::string filter;  // NetFilter file name, may be empty
};

struct ServiceSchema {
  std::string service;
  std::vector<MessageDesc> messages;
  std::vector<MethodDesc> methods;

  const MessageDesc* message(std::string_view name) const;
  const MethodDesc* method(std::string_view name) const;
  // Resolves "Message.field"; nullptr when absent.
  const FieldDesc* resolve(std::string_view path) const;
};

// Schema text format:
//   service <Name>
//   message <Name>
//     <field> <FPArray|IntArray|StrIntMap|IntIntMap|scalar|opaque>
//   rpc <Method> <Request> <Reply> [filter-file]
// '#' starts a comment. Throws Error{kSyntaxError}.
ServiceSchema parse_schema(std::string_view text);
ServiceSchema load_schema(const std::string& path);

enum class ViolationKind : std::uint8_t {
  kUnresolvedPath,
  kNotIedt,
  kThresholdUnreachable,
};

struct Violation {
  ViolationKind kind;
  std::string detail;
};

struct Deployment {
  int clients = 0;
};

std::vector<Violation> validate(const NetFilter& nf, const ServiceSchema& schema,
                                std::optional<Deployment> dep = std::nullopt);

struct DirectionConfig {
  bool add_to = false;
  bool get = false;
  bool modify = false;
  bool clear = false;

  bool operator==(const DirectionConfig&) const = default;
};

// What the switch consumes for one method.
struct SwitchProgramConfig {
  DirectionConfig to_server;
  DirectionConfig from_server;
  ClearPolicy clear_mode = ClearPolicy::kNop;
  ModifyOp modify_op = ModifyOp::kNop;
  std::int32_t modify_para = 0;
  bool cntfwd_enabled = false;
  std::uint32_t threshold = 0;
  Target target = Target::kServer;
  std::vector<std::string> endpoints;
  KeyMode key_mode = KeyMode::kNull;
  // Copy policy: results travel through the server so it holds a backup.
  bool via_server = false;

  bool operator==(const SwitchProgramConfig&) const = default;
};

SwitchProgramConfig pipeline_config(const NetFilter& nf);

}  // namespace incnet::nf
