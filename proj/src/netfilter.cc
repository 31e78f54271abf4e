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

#include "incnet/netfilter.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include "incnet/errors.hpp"
#include "json.hpp"

namespace incnet::nf {
namespace {

using nlohmann::json;

[[noreturn]] void fail(Errc c, const std::string& what) { throw Error(c, what); }

// Drops comments and trailing commas so that NetFilter files written in the
// relaxed style parse as strict JSON.
std::string relax(std::string_view in) {
  std::string out;
  out.reserve(in.size());
  bool in_str = false;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const char c = in[i];
    if (in_str) {
      out += c;
      if (c == '\\' && i + 1 < in.size()) {
        out += in[++i];
      } else if (c == '"') {
        in_str = false;
      }
      continue;
    }
    if (c == '"') {
      in_str = true;
      out += c;
    } else if (c == '/' && i + 1 < in.size() && in[i + 1] == '/') {
      while (i < in.size() && in[i] != '\n') ++i;
      out += '\n';
    } else if (c == '/' && i + 1 < in.size() && in[i + 1] == '*') {
      i += 2;
      while (i + 1 < in.size() && !(in[i] == '*' && in[i + 1] == '/')) ++i;
      ++i;
      out += ' ';
    } else {
      out += c;
    }
  }
  // Second pass: a comma followed only by whitespace before } or ].
  std::string res;
  res.reserve(out.size());
  in_str = false;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const char c = out[i];
    if (in_str) {
      res += c;
      if (c == '\\' && i + 1 < out.size()) {
        res += out[++i];
      } else if (c == '"') {
        in_str = false;
      }
      continue;
    }
    if (c == '"') in_str = true;
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < out.size() && std::isspace(static_cast<unsigned char>(out[j]))) ++j;
      if (j < out.size() && (out[j] == '}' || out[j] == ']')) continue;
    }
    res += c;
  }
  return res;
}

bool is_path(std::string_view s) {
  const auto dot = s.find('.');
  return dot != std::string_view::npos && dot > 0 && dot + 1 < s.size() &&
         s.find('.', dot + 1) == std::string_view::npos;
}

std::string binding(const json& v, const char* field) {
  if (!v.is_string()) fail(Errc::kSyntaxError, std::string(field) + " must be a string");
  const std::string s = v.get<std::string>();
  if (s == "nop") return "";
  if (!is_path(s)) {
    fail(Errc::kSyntaxError, std::string(field) + " is not a Message.field path: " + s);
  }
  return s;
}

std::uint32_t as_u32(const json& v, const char* field) {
  if (!v.is_number_integer()) fail(Errc::kSyntaxError, std::string(field) + " must be an integer");
  const auto x = v.get<std::int64_t>();
  if (x < 0 || x > std::numeric_limits<std::uint32_t>::max()) {
    fail(Errc::kSyntaxError, std::string(field) + " out of range");
  }
  return static_cast<std::uint32_t>(x);
}

CntFwd parse_cntfwd(const json& j) {
  if (!j.is_object()) fail(Errc::kSyntaxError, "CntFwd must be an object");
  CntFwd c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "to") {
      if (v.is_array()) {
        c.to = Target::kList;
        for (const json& e : v) {
          if (!e.is_string()) fail(Errc::kSyntaxError, "CntFwd.to list entries must be strings");
          c.endpoints.push_back(e.get<std::string>());
        }
        if (c.endpoints.empty()) fail(Errc::kBadEnum, "CntFwd.to list is empty");
      } else if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "ALL") {
          c.to = Target::kAll;
        } else if (s == "SRC") {
          c.to = Target::kSrc;
        } else if (s == "SERVER") {
          c.to = Target::kServer;
        } else {
          fail(Errc::kBadEnum, "CntFwd.to: " + s);
        }
      } else {
        fail(Errc::kSyntaxError, "CntFwd.to must be a string or list");
      }
    } else if (k == "threshold") {
      c.threshold = as_u32(v, "CntFwd.threshold");
    } else if (k == "key") {
      if (!v.is_string()) fail(Errc::kSyntaxError, "CntFwd.key must be a string");
      const std::string s = v.get<std::string>();
      if (s == "NULL") {
        c.key_mode = KeyMode::kNull;
      } else if (s == "ClientID") {
        c.key_mode = KeyMode::kClientId;
      } else if (is_path(s)) {
        c.key_mode = KeyMode::kField;
        c.key_path = s;
      } else {
        fail(Errc::kBadEnum, "CntFwd.key: " + s);
      }
    } else {
      fail(Errc::kUnknownField, "CntFwd." + k);
    }
  }
  return c;
}

}  // namespace

const char* to_string(ClearPolicy c) {
  switch (c) {
    case ClearPolicy::kNop: return "nop";
    case ClearPolicy::kCopy: return "copy";
    case ClearPolicy::kShadow: return "shadow";
    case ClearPolicy::kLazy: return "lazy";
  }
  return "?";
}

std::optional<ClearPolicy> clear_policy_from(std::string_view s) {
  if (s == "nop") return ClearPolicy::kNop;
  if (s == "copy") return ClearPolicy::kCopy;
  if (s == "shadow") return ClearPolicy::kShadow;
  if (s == "lazy") return ClearPolicy::kLazy;
  return std::nullopt;
}

const char* to_string(ModifyOp op) {
  switch (op) {
    case ModifyOp::kNop: return "NOP";
    case ModifyOp::kMax: return "MAX";
    case ModifyOp::kMin: return "MIN";
    case ModifyOp::kAdd: return "ADD";
    case ModifyOp::kAssign: return "ASSIGN";
    case ModifyOp::kShiftL: return "SHIFTL";
    case ModifyOp::kShiftR: return "SHIFTR";
    case ModifyOp::kBand: return "BAND";
    case ModifyOp::kBor: return "BOR";
    case ModifyOp::kBnot: return "BNOT";
    case ModifyOp::kBxor: return "BXOR";
  }
  return "?";
}

std::optional<ModifyOp> modify_op_from(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(ModifyOp::kBxor); ++i) {
    const auto op = static_cast<ModifyOp>(i);
    if (s == to_string(op)) return op;
  }
  return std::nullopt;
}

const char* to_string(Target t) {
  switch (t) {
    case Target::kSrc: return "SRC";
    case Target::kServer: return "SERVER";
    case Target::kAll: return "ALL";
    case Target::kList: return "LIST";
  }
  return "?";
}

NetFilter parse_netfilter(std::string_view text) {
  json j;
  try {
    j = json::parse(relax(text));
  } catch (const json::parse_error& e) {
    fail(Errc::kSyntaxError, e.what());
  }
  if (!j.is_object()) fail(Errc::kSyntaxError, "NetFilter must be a JSON object");

  NetFilter nf;
  bool have_name = false;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "AppName") {
      if (!v.is_string() || v.get<std::string>().empty()) {
        fail(Errc::kSyntaxError, "AppName must be a non-empty string");
      }
      nf.app_name = v.get<std::string>();
      have_name = true;
    } else if (k == "Precision") {
      if (!v.is_number_integer()) fail(Errc::kSyntaxError, "Precision must be an integer");
      const auto p = v.get<std::int64_t>();
      if (p < 0 || p > 18) fail(Errc::kSyntaxError, "Precision out of range");
      nf.precision = static_cast<int>(p);
    } else if (k == "get") {
      nf.get = binding(v, "get");
    } else if (k == "addTo") {
      nf.add_to = binding(v, "addTo");
    } else if (k == "clear") {
      if (!v.is_string()) fail(Errc::kSyntaxError, "clear must be a string");
      const auto c = clear_policy_from(v.get<std::string>());
      if (!c) fail(Errc::kBadEnum, "clear: " + v.get<std::string>());
      nf.clear = *c;
    } else if (k == "modify") {
      if (v.is_string()) {
        if (v.get<std::string>() != "nop") fail(Errc::kBadEnum, "modify: " + v.get<std::string>());
        nf.modify_op = ModifyOp::kNop;
      } else if (v.is_object()) {
        for (auto m = v.begin(); m != v.end(); ++m) {
          if (m.key() == "op") {
            if (!m.value().is_string()) fail(Errc::kSyntaxError, "modify.op must be a string");
            const auto op = modify_op_from(m.value().get<std::string>());
            if (!op) fail(Errc::kBadEnum, "modify.op: " + m.value().get<std::string>());
            nf.modify_op = *op;
          } else if (m.key() == "para") {
            if (!m.value().is_number_integer()) fail(Errc::kSyntaxError, "modify.para must be an integer");
            const auto x = m.value().get<std::int64_t>();
            if (x < std::numeric_limits<std::int32_t>::min() ||
                x > std::numeric_limits<std::int32_t>::max()) {
              fail(Errc::kSyntaxError, "modify.para out of range");
            }
            nf.modify_para = static_cast<std::int32_t>(x);
          } else {
            fail(Errc::kUnknownField, "modify." + m.key());
          }
        }
      } else {
        fail(Errc::kSyntaxError, "modify must be \"nop\" or an object");
      }
    } else if (k == "CntFwd") {
      nf.cntfwd = parse_cntfwd(v);
    } else {
      fail(Errc::kUnknownField, k);
    }
  }
  if (!have_name) fail(Errc::kSyntaxError, "missing AppName");
  if (nf.modify_op == ModifyOp::kNop) nf.modify_para = 0;
  return nf;
}

NetFilter load_netfilter(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::kConfigError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_netfilter(ss.str());
}

std::string serialize_netfilter(const NetFilter& nf) {
  json j = json::object();
  j["AppName"] = nf.app_name;
  j["Precision"] = nf.precision;
  j["get"] = nf.get.empty() ? "nop" : nf.get;
  j["addTo"] = nf.add_to.empty() ? "nop" : nf.add_to;
  j["clear"] = to_string(nf.clear);
  if (nf.modify_op == ModifyOp::kNop) {
    j["modify"] = "nop";
  } else {
    j["modify"] = {{"op", to_string(nf.modify_op)}, {"para", nf.modify_para}};
  }
  json c = json::object();
  if (nf.cntfwd.to == Target::kList) {
    c["to"] = nf.cntfwd.endpoints;
  } else {
    c["to"] = to_string(nf.cntfwd.to);
  }
  c["threshold"] = nf.cntfwd.threshold;
  switch (nf.cntfwd.key_mode) {
    case KeyMode::kNull: c["key"] = "NULL"; break;
    case KeyMode::kClientId: c["key"] = "ClientID"; break;
    case KeyMode::kField: c["key"] = nf.cntfwd.key_path; break;
  }
  j["CntFwd"] = c;
  return j.dump(2);
}

const char* to_string(FieldType t) {
  switch (t) {
    case FieldType::kFPArray: return "FPArray";
    case FieldType::kIntArray: return "IntArray";
    case FieldType::kStrIntMap: return "StrIntMap";
    case FieldType::kIntIntMap: return "IntIntMap";
    case FieldType::kScalar: return "scalar";
    case FieldType::kOpaque: return "opaque";
  }
  return "?";
}

bool is_iedt(FieldType t) { return t != FieldType::kOpaque; }
bool is_array(FieldType t) { return t == FieldType::kFPArray || t == FieldType::kIntArray; }
bool is_map(FieldType t) { return t == FieldType::kStrIntMap || t == FieldType::kIntIntMap; }

const MessageDesc* ServiceSchema::message(std::string_view name) const {
  for (const auto& m : messages) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

const MethodDesc* ServiceSchema::method(std::string_view name) const {
  for (const auto& m : methods) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

const FieldDesc* ServiceSchema::resolve(std::string_view path) const {
  const auto dot = path.find('.');
  if (dot == std::string_view::npos) return nullptr;
  const MessageDesc* m = message(path.substr(0, dot));
  if (!m) return nullptr;
  const auto field = path.substr(dot + 1);
  for (const auto& f : m->fields) {
    if (f.name == field) return &f;
  }
  return nullptr;
}

ServiceSchema parse_schema(std::string_view text) {
  ServiceSchema s;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  MessageDesc* current = nullptr;
  auto err = [&](const std::string& why) {
    fail(Errc::kSyntaxError, "schema line " + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok[0] == "service") {
      if (tok.size() != 2 || !s.service.empty()) err("bad service line");
      s.service = tok[1];
      current = nullptr;
    } else if (tok[0] == "message") {
      if (tok.size() != 2) err("bad message line");
      if (s.message(tok[1])) err("duplicate message " + tok[1]);
      s.messages.push_back({tok[1], {}});
      current = &s.messages.back();
    } else if (tok[0] == "rpc") {
      if (tok.size() != 4 && tok.size() != 5) err("bad rpc line");
      s.methods.push_back({tok[1], tok[2], tok[3], tok.size() == 5 ? tok[4] : ""});
      current = nullptr;
    } else {
      if (!current || tok.size() != 2) err("field outside message or malformed");
      static const std::pair<const char*, FieldType> kTypes[] = {
          {"FPArray", FieldType::kFPArray},     {"IntArray", FieldType::kIntArray},
          {"StrIntMap", FieldType::kStrIntMap}, {"IntIntMap", FieldType::kIntIntMap},
          {"scalar", FieldType::kScalar},       {"opaque", FieldType::kOpaque}};
      bool ok = false;
      for (const auto& [name, type] : kTypes) {
        if (tok[1] == name) {
          for (const auto& f : current->fields) {
            if (f.name == tok[0]) err("duplicate field " + tok[0]);
          }
          current->fields.push_back({tok[0], type});
          ok = true;
        }
      }
      if (!ok) err("unknown field type " + tok[1]);
    }
  }
  if (s.service.empty()) fail(Errc::kSyntaxError, "schema has no service line");
  for (const auto& m : s.methods) {
    if (!s.message(m.request) || !s.message(m.reply)) {
      fail(Errc::kSyntaxError, "rpc " + m.name + " references an unknown message");
    }
  }
  return s;
}

ServiceSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::kConfigError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_schema(ss.str());
}

std::vector<Violation> validate(const NetFilter& nf, const ServiceSchema& schema,
                                std::optional<Deployment> dep) {
  std::vector<Violation> out;
  auto check = [&](const std::string& path, const char* what) {
    if (path.empty()) return;
    const FieldDesc* f = schema.resolve(path);
    if (!f) {
      out.push_back({ViolationKind::kUnresolvedPath, std::string(what) + ": " + path});
    } else if (!is_iedt(f->type)) {
      out.push_back({ViolationKind::kNotIedt, std::string(what) + ": " + path});
    }
  };
  check(nf.get, "get");
  check(nf.add_to, "addTo");
  if (nf.cntfwd.key_mode == KeyMode::kField) check(nf.cntfwd.key_path, "CntFwd.key");
  if (dep && nf.cntfwd.enabled() && nf.cntfwd.key_mode == KeyMode::kClientId &&
      nf.cntfwd.threshold > static_cast<std::uint32_t>(dep->clients)) {
    out.push_back({ViolationKind::kThresholdUnreachable,
                   "CntFwd.threshold " + std::to_string(nf.cntfwd.threshold) + " > " +
                       std::to_string(dep->clients) + " clients"});
  }
  return out;
}

SwitchProgramConfig pipeline_config(const NetFilter& nf) {
  SwitchProgramConfig c;
  c.clear_mode = nf.clear;
  c.modify_op = nf.modify_op;
  c.modify_para = nf.modify_op == ModifyOp::kNop ? 0 : nf.modify_para;
  c.cntfwd_enabled = nf.cntfwd.enabled();
  c.threshold = nf.cntfwd.threshold;
  c.target = nf.cntfwd.to;
  c.endpoints = nf.cntfwd.endpoints;
  c.key_mode = nf.cntfwd.key_mode;
  c.via_server = nf.clear == ClearPolicy::kCopy;

  const bool turnaround = !c.via_server && c.target != Target::kServer;
  c.to_server.modify = nf.modify_op != ModifyOp::kNop;
  c.to_server.add_to = !nf.add_to.empty();
  c.to_server.get = c.to_server.add_to || (!nf.get.empty() && turnaround);
  c.to_server.clear = nf.clear == ClearPolicy::kShadow && turnaround;
  c.from_server.get = !nf.get.empty();
  c.from_server.clear = nf.clear == ClearPolicy::kCopy;
  return c;
}

}  // namespace incnet::nf
