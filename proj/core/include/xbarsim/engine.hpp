#pragma once

#include <string>

#include <stdexcept>

namespace xbarsim {

/// Conductance-conversion engine selection.
///  - ideal:      G_nonideal = G_ideal (no circuit non-idealities).
///  - oracle:     exact nodal solve (reference; slow).
///  - fcm:        fast crossbar model, every iteration.
///  - aam:        approximate analytical model, every iteration.
///  - interp_fcm: cached distortion profile refreshed every L iterations.
enum class EngineKind { ideal, oracle, fcm, aam, interp_fcm };

inline std::string to_string(EngineKind k) {
  switch (k) {
    case EngineKind::ideal: return "ideal";
    case EngineKind::oracle: return "oracle";
    case EngineKind::fcm: return "fcm";
    case EngineKind::aam: return "aam";
    case EngineKind::interp_fcm: return "interp_fcm";
  }
  return "?";
}

inline EngineKind engine_from_string(const std::string& s) {
  if (s == "ideal") return EngineKind::ideal;
  if (s == "oracle") return EngineKind::oracle;
  if (s == "fcm") return EngineKind::fcm;
  if (s == "aam") return EngineKind::aam;
  if (s == "interp_fcm") return EngineKind::interp_fcm;
  throw std::invalid_argument("unknown engine: " + s);
}

}  // namespace xbarsim
