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

#include "incnet/errors.hpp"

namespace incnet {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::kElideViolation: return "ElideViolation";
    case Errc::kMalformedPacket: return "MalformedPacket";
    case Errc::kSyntaxError: return "SyntaxError";
    case Errc::kUnknownField: return "UnknownField";
    case Errc::kBadEnum: return "BadEnum";
    case Errc::kUnboundField: return "UnboundField";
    case Errc::kNoSwitchCapacity: return "NoSwitchCapacity";
    case Errc::kDuplicateAppName: return "DuplicateAppName";
    case Errc::kServiceUnknown: return "ServiceUnknown";
    case Errc::kCancelled: return "Cancelled";
    case Errc::kHandlerPanic: return "HandlerPanic";
    case Errc::kDisconnectedTopology: return "DisconnectedTopology";
    case Errc::kUnknownScenario: return "UnknownScenario";
    case Errc::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace incnet
