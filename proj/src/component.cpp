#include "aitwin/component.hpp"

#include <algorithm>
#include <set>

#include "aitwin/error.hpp"

namespace aitwin {

std::string_view kindName(ComponentKind kind) noexcept {
  switch (kind) {
    case ComponentKind::Valve: return "valve";
    case ComponentKind::Tank: return "tank";
    case ComponentKind::Pipe: return "pipe";
    case ComponentKind::Pump: return "pump";
    case ComponentKind::Sensor: return "sensor";
  }
  return "unknown";
}

std::optional<ComponentKind> parseKind(std::string_view name) noexcept {
  for (auto k : {ComponentKind::Valve, ComponentKind::Tank, ComponentKind::Pipe, ComponentKind::Pump,
                 ComponentKind::Sensor})
    if (kindName(k) == name) return k;
  return std::nullopt;
}

bool Component::hasMode(std::string_view mode) const {
  return std::find(modes.begin(), modes.end(), mode) != modes.end();
}

std::vector<std::string> defaultModes(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::Valve: return {"OK", "valveBlock", "valveStuck", "pipeJam"};
    case ComponentKind::Pipe: return {"OK", "pipeJam"};
    case ComponentKind::Tank: return {"OK", "tankLeak"};
    case ComponentKind::Pump: return {"OK", "pumpSlow", "pumpFast"};
    case ComponentKind::Sensor: return {"OK"};
  }
  return {"OK"};
}

void validateComponents(std::span<const Component> comps) {
  std::set<std::string, std::less<>> ids;
  for (const auto& c : comps) {
    if (!ids.insert(c.id).second) throw TwinError(Errc::DuplicateId, "component '" + c.id + "' registered twice");
    if (!c.hasMode(kOkMode)) throw TwinError(Errc::UnknownMode, "component '" + c.id + "' lacks the OK mode");
  }
}

void validateAssignment(const FailureAssignment& fa, std::span<const Component> comps) {
  for (const auto& [id, mode] : fa) {
    auto it = std::find_if(comps.begin(), comps.end(), [&](const Component& c) { return c.id == id; });
    if (it == comps.end()) throw TwinError(Errc::UnknownComponent, "'" + id + "'");
    if (mode == kOkMode || !it->hasMode(mode))
      throw TwinError(Errc::UnknownMode, "'" + mode + "' is not a failure mode of '" + id + "'");
  }
}

}  // namespace aitwin
